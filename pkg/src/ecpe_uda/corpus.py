"""Corpus data model, JSONL I/O, vocabulary, and the synthetic generator.

The synthetic generator builds a deterministic two-regime benchmark:
emotion phrasing is shared across domains while cause vocabularies are
pairwise disjoint, so cross-domain transfer of the relation model is
non-trivial by construction.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Optional, Sequence

import torch

from .errors import ConfigError, CorpusFormatError

EMOTIONS = ("happiness", "sadness", "fear", "disgust", "anger", "surprise")
# "None" (no emotion) is class index 0; the six categories follow.
EMOTION_CLASSES = (None,) + EMOTIONS

CLS, SEP, UNK = "[CLS]", "[SEP]", "[UNK]"
SPECIALS = (CLS, SEP, UNK)


def emotion_to_index(category: Optional[str]) -> int:
    try:
        return EMOTION_CLASSES.index(category)
    except ValueError:
        raise CorpusFormatError(f"unknown emotion category: {category!r}")


@dataclass
class Document:
    doc_id: str
    domain: str
    clauses: list[list[str]]
    gold_pairs: list[tuple[int, int, str]] = field(default_factory=list)
    gold_emotions: Optional[list[Optional[str]]] = None

    def __post_init__(self):
        if len(self.clauses) < 1:
            raise CorpusFormatError(f"document {self.doc_id!r} has no clauses")
        self.gold_pairs = [tuple(p) for p in self.gold_pairs]
        n = len(self.clauses)
        for e_idx, c_idx, category in self.gold_pairs:
            if not (0 <= e_idx < n and 0 <= c_idx < n):
                raise CorpusFormatError(
                    f"document {self.doc_id!r}: pair ({e_idx}, {c_idx}) out of "
                    f"range for {n} clauses"
                )
            if category not in EMOTIONS:
                raise CorpusFormatError(
                    f"document {self.doc_id!r}: unknown emotion {category!r}"
                )
        if self.gold_emotions is not None and len(self.gold_emotions) != n:
            raise CorpusFormatError(
                f"document {self.doc_id!r}: gold_emotions length mismatch"
            )

    def to_json(self) -> str:
        return json.dumps(
            {
                "doc_id": self.doc_id,
                "domain": self.domain,
                "clauses": self.clauses,
                "gold_pairs": [list(p) for p in self.gold_pairs],
                "gold_emotions": self.gold_emotions,
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "Document":
        obj = json.loads(line)
        return cls(
            doc_id=obj["doc_id"],
            domain=obj["domain"],
            clauses=obj["clauses"],
            gold_pairs=[tuple(p) for p in obj.get("gold_pairs") or []],
            gold_emotions=obj.get("gold_emotions"),
        )


def parse_corpus(path) -> list[Document]:
    """Read a JSONL corpus file; empty file yields an empty list."""
    docs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                docs.append(Document.from_json(line))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusFormatError(f"{path}: malformed line {lineno}: {exc}")
    return docs


def write_corpus(docs: Iterable[Document], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for doc in docs:
            f.write(doc.to_json() + "\n")


class Vocabulary:
    """Token-to-index map with CLS, SEP, UNK fixed at indices 0, 1, 2."""

    def __init__(self, tokens: Sequence[str]):
        for sp in SPECIALS:
            if sp in tokens:
                raise ConfigError(f"special token {sp!r} cannot be a corpus token")
        self._tokens = list(SPECIALS) + list(tokens)
        self._index = {t: i for i, t in enumerate(self._tokens)}
        if len(self._index) != len(self._tokens):
            raise ConfigError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    @property
    def cls_index(self) -> int:
        return 0

    @property
    def sep_index(self) -> int:
        return 1

    @property
    def unk_index(self) -> int:
        return 2

    def index(self, token: str) -> int:
        return self._index.get(token, self.unk_index)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.index(t) for t in tokens]

    def save(self, path) -> None:
        """One token per line; index = line number (specials included)."""
        with open(path, "w", encoding="utf-8") as f:
            for t in self._tokens:
                f.write(t + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as f:
            tokens = [line.rstrip("\n") for line in f if line.rstrip("\n")]
        if tokens[:3] != list(SPECIALS):
            raise CorpusFormatError(f"{path}: missing special-token header")
        return cls(tokens[3:])


def build_vocab(docs: Sequence[Document], min_count: int = 1) -> Vocabulary:
    """Frequency-then-lexicographic vocabulary over all clause tokens."""
    counts: dict[str, int] = {}
    for doc in docs:
        for clause in doc.clauses:
            for tok in clause:
                counts[tok] = counts.get(tok, 0) + 1
    kept = [t for t, c in counts.items() if c >= min_count]
    kept.sort(key=lambda t: (-counts[t], t))
    return Vocabulary(kept)


def to_bow(tokens: Sequence[str], vocab: Vocabulary) -> torch.Tensor:
    """Multi-hot vector over the vocabulary; specials never set, OOV -> UNK."""
    vec = torch.zeros(len(vocab))
    for tok in tokens:
        if tok in SPECIALS:
            continue
        vec[vocab.index(tok)] = 1.0
    return vec


@dataclass
class SyntheticSpec:
    """Recipe for a deterministic domain-shift corpus.

    The emotion lexicon is shared across domains; the cause lexicons are
    pairwise disjoint per domain; the distractor lexicon is shared. Cause
    clauses are always placed before (or, for self-chain documents,
    inside) their emotion clause.
    """

    domains: list[str]
    docs_per_domain: dict[str, int]
    clauses_per_doc: tuple[int, int]
    emotion_lexicon: dict[str, list[list[str]]]
    cause_lexicons: dict[str, list[list[str]]]
    distractor_lexicon: list[list[str]]
    self_chain_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.domains:
            raise ConfigError("at least one domain required")
        for d in self.domains:
            if self.docs_per_domain.get(d, 0) < 1:
                raise ConfigError(f"docs_per_domain missing or < 1 for {d!r}")
            if not self.cause_lexicons.get(d):
                raise ConfigError(f"cause lexicon missing for domain {d!r}")
        lo, hi = self.clauses_per_doc
        if not (2 <= lo <= hi):
            raise ConfigError("clauses_per_doc range must satisfy 2 <= lo <= hi")
        if not 0.0 <= self.self_chain_fraction <= 1.0:
            raise ConfigError("self_chain_fraction must be in [0, 1]")
        for cat in EMOTIONS:
            if len(self.emotion_lexicon.get(cat, [])) < 3:
                raise ConfigError(
                    f"emotion lexicon needs >= 3 phrases for {cat!r}"
                )

        def token_set(phrases):
            return {t for p in phrases for t in p}

        emo_tokens = token_set(
            p for phrases in self.emotion_lexicon.values() for p in phrases
        )
        cause_sets = {d: token_set(self.cause_lexicons[d]) for d in self.domains}
        for i, a in enumerate(self.domains):
            if cause_sets[a] & emo_tokens:
                raise ConfigError(
                    f"cause lexicon of {a!r} overlaps the emotion lexicon"
                )
            for b in self.domains[i + 1:]:
                if cause_sets[a] & cause_sets[b]:
                    raise ConfigError(
                        f"cause lexicons of {a!r} and {b!r} are not disjoint"
                    )


def generate_synthetic(spec: SyntheticSpec) -> list[Document]:
    """Generate a corpus from the spec; fully deterministic given the seed."""
    rng = random.Random(spec.seed)
    docs: list[Document] = []
    categories = list(EMOTIONS)
    for domain in spec.domains:
        n_docs = spec.docs_per_domain[domain]
        n_self = round(spec.self_chain_fraction * n_docs)
        for i in range(n_docs):
            self_chain = i < n_self
            lo, hi = spec.clauses_per_doc
            n_clauses = rng.randint(lo, hi)
            category = rng.choice(categories)
            emo_phrase = list(rng.choice(spec.emotion_lexicon[category]))
            cause_phrase = list(rng.choice(spec.cause_lexicons[domain]))

            if self_chain:
                e_idx = rng.randrange(n_clauses)
                c_idx = e_idx
            else:
                e_idx = rng.randrange(1, n_clauses)
                c_idx = rng.randrange(0, e_idx)

            clauses = []
            for j in range(n_clauses):
                if j == e_idx:
                    clause = list(emo_phrase)
                    if self_chain:
                        clause += cause_phrase
                elif j == c_idx:
                    clause = cause_phrase
                else:
                    clause = list(rng.choice(spec.distractor_lexicon))
                clauses.append(clause)

            emotions: list[Optional[str]] = [None] * n_clauses
            emotions[e_idx] = category
            docs.append(
                Document(
                    doc_id=f"{domain}-{i:04d}",
                    domain=domain,
                    clauses=clauses,
                    gold_pairs=[(e_idx, c_idx, category)],
                    gold_emotions=emotions,
                )
            )
    return docs


def default_synthetic_spec(
    source_docs: int = 200,
    target_docs: int = 100,
    seed: int = 0,
    self_chain_fraction: float = 0.2,
) -> SyntheticSpec:
    """Two-domain benchmark spec used by the end-to-end suite and the CLI."""
    emotion_lexicon = {
        "happiness": [
            ["i", "feel", "so", "glad"],
            ["what", "a", "joyful", "day"],
            ["she", "was", "delighted"],
        ],
        "sadness": [
            ["he", "felt", "deeply", "sad"],
            ["tears", "of", "sorrow", "flowed"],
            ["i", "was", "heartbroken"],
        ],
        "fear": [
            ["she", "was", "terrified"],
            ["a", "wave", "of", "dread", "hit"],
            ["i", "feel", "so", "scared"],
        ],
        "disgust": [
            ["he", "was", "disgusted"],
            ["it", "made", "me", "sick"],
            ["what", "a", "revolting", "sight"],
        ],
        "anger": [
            ["she", "was", "furious"],
            ["i", "am", "so", "angry"],
            ["rage", "boiled", "inside", "him"],
        ],
        "surprise": [
            ["he", "was", "astonished"],
            ["what", "a", "surprise"],
            ["i", "could", "not", "believe", "it"],
        ],
    }
    cause_lexicons = {
        "society": [
            ["council", "granted", "generous", "subsidy"],
            ["neighborhood", "festival", "got", "cancelled"],
            ["stranger", "returned", "lost", "wallet"],
            ["charity", "drive", "suddenly", "collapsed"],
        ],
        "finance": [
            ["stock", "price", "doubled", "overnight"],
            ["bank", "froze", "every", "account"],
            ["quarterly", "dividend", "simply", "vanished"],
            ["merger", "deal", "fell", "through"],
        ],
    }
    distractor_lexicon = [
        ["the", "weather", "report", "came", "on"],
        ["dinner", "was", "served", "at", "seven"],
        ["the", "train", "arrived", "on", "time"],
        ["someone", "turned", "off", "the", "radio"],
        ["the", "meeting", "ran", "long"],
        ["birds", "sat", "on", "the", "wire"],
    ]
    return SyntheticSpec(
        domains=["society", "finance"],
        docs_per_domain={"society": source_docs, "finance": target_docs},
        clauses_per_doc=(4, 7),
        emotion_lexicon=emotion_lexicon,
        cause_lexicons=cause_lexicons,
        distractor_lexicon=distractor_lexicon,
        self_chain_fraction=self_chain_fraction,
        seed=seed,
    )


def spec_from_dict(obj: dict) -> SyntheticSpec:
    """Build a SyntheticSpec from a parsed config mapping.

    A "preset: default" entry starts from the default spec and applies
    any overriding scalar fields on top.
    """
    if obj.get("preset") == "default":
        spec = default_synthetic_spec(
            source_docs=obj.get("source_docs", 200),
            target_docs=obj.get("target_docs", 100),
            seed=obj.get("seed", 0),
            self_chain_fraction=obj.get("self_chain_fraction", 0.2),
        )
        return spec
    try:
        return SyntheticSpec(
            domains=list(obj["domains"]),
            docs_per_domain=dict(obj["docs_per_domain"]),
            clauses_per_doc=tuple(obj["clauses_per_doc"]),
            emotion_lexicon={k: [list(p) for p in v] for k, v in obj["emotion_lexicon"].items()},
            cause_lexicons={k: [list(p) for p in v] for k, v in obj["cause_lexicons"].items()},
            distractor_lexicon=[list(p) for p in obj["distractor_lexicon"]],
            self_chain_fraction=obj.get("self_chain_fraction", 0.0),
            seed=obj.get("seed", 0),
        )
    except KeyError as exc:
        raise ConfigError(f"synthetic spec missing field: {exc}")
