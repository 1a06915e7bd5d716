"""Self-describing checkpoint files.

Each model record carries a format tag, its architecture config, and the
parameter arrays keyed by name. A bundle ties the pair model, the emotion
model, the vocabulary, and the run config together so the CLI commands
can hand results to each other through a single file.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import torch

from .config import RunConfig
from .corpus import Vocabulary
from .emotion_model import EmotionExtractor
from .errors import CorpusFormatError
from .pair_model import PairVAE

PAIR_FORMAT = "pair-vae/1"
EMOTION_FORMAT = "emotion-extractor/1"
BUNDLE_FORMAT = "ecpe-bundle/1"


def _pair_record(model: PairVAE) -> dict:
    return {
        "format": PAIR_FORMAT,
        "config": {
            "vocab_size": model.vocab_size,
            "hidden_dim": model.hidden_dim,
            "latent_dim": model.latent_dim,
            "regularizer": model.regularizer,
            "reg_weight": model.reg_weight,
            "kernel_bandwidth": model.kernel.bandwidth,
            "dropout": model.drop.p,
            "attend_tokens": model.attend_tokens,
        },
        "state": model.state_dict(),
    }


def _load_pair(record: dict) -> PairVAE:
    if record.get("format") != PAIR_FORMAT:
        raise CorpusFormatError(
            f"unexpected pair-model format tag: {record.get('format')!r}")
    model = PairVAE(**record["config"])
    model.load_state_dict(record["state"])
    return model


def _emotion_record(model: EmotionExtractor) -> dict:
    return {
        "format": EMOTION_FORMAT,
        "config": {
            "hidden_dim": model.encoder.hidden_dim,
            "lstm_hidden": model.lstm_hidden,
            "dropout": model.drop.p,
        },
        "state": model.state_dict(),
    }


def _load_emotion(record: dict, vocab: Vocabulary) -> EmotionExtractor:
    if record.get("format") != EMOTION_FORMAT:
        raise CorpusFormatError(
            f"unexpected emotion-model format tag: {record.get('format')!r}")
    model = EmotionExtractor(vocab=vocab, **record["config"])
    model.load_state_dict(record["state"])
    return model


class Bundle:
    """Pair model + emotion model + vocabulary + run config."""

    def __init__(self, pair_model: PairVAE, emotion_model: EmotionExtractor,
                 vocab: Vocabulary, run_config: RunConfig,
                 source_domain: str, adapted: bool = False):
        self.pair_model = pair_model
        self.emotion_model = emotion_model
        self.vocab = vocab
        self.run_config = run_config
        self.source_domain = source_domain
        self.adapted = adapted

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(
            {
                "format": BUNDLE_FORMAT,
                "pair": _pair_record(self.pair_model),
                "emotion": _emotion_record(self.emotion_model),
                "vocab_tokens": self.vocab.tokens[3:],  # specials implicit
                "run_config": self.run_config.to_dict(),
                "source_domain": self.source_domain,
                "adapted": self.adapted,
            },
            path,
        )

    @classmethod
    def load(cls, path) -> "Bundle":
        obj = torch.load(path, weights_only=False)
        if obj.get("format") != BUNDLE_FORMAT:
            raise CorpusFormatError(
                f"{path}: unexpected bundle format tag: {obj.get('format')!r}")
        vocab = Vocabulary(obj["vocab_tokens"])
        return cls(
            pair_model=_load_pair(obj["pair"]),
            emotion_model=_load_emotion(obj["emotion"], vocab),
            vocab=vocab,
            run_config=RunConfig.from_dict(obj["run_config"]),
            source_domain=obj["source_domain"],
            adapted=obj.get("adapted", False),
        )
