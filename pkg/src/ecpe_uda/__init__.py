"""Cross-domain emotion-cause pair extraction with a disentangling VAE
and from-scratch self-training adaptation."""

from .config import LossWeights, RunConfig, synthetic_run_config
from .corpus import (
    Document,
    SyntheticSpec,
    Vocabulary,
    build_vocab,
    default_synthetic_spec,
    generate_synthetic,
    parse_corpus,
    to_bow,
    write_corpus,
)
from .divergences import (
    DiagonalGaussian,
    KernelSpec,
    SampleBatch,
    bh_regularizer,
    bhattacharyya_diag,
    hsic_biased,
    kl_to_standard_normal,
    median_heuristic_bandwidth,
    mmd_biased_sq,
)
from .pair_model import PairExample, PairVAE, build_pair_input
from .sparsemax import sparsemax

__all__ = [
    "DiagonalGaussian", "Document", "KernelSpec", "LossWeights",
    "PairExample", "PairVAE", "RunConfig", "SampleBatch", "SyntheticSpec",
    "Vocabulary", "bh_regularizer", "bhattacharyya_diag", "build_pair_input",
    "build_vocab", "default_synthetic_spec", "generate_synthetic",
    "hsic_biased", "kl_to_standard_normal", "median_heuristic_bandwidth",
    "mmd_biased_sq", "parse_corpus", "sparsemax", "synthetic_run_config",
    "to_bow", "write_corpus",
]

__version__ = "0.1.0"
