"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ConfigError(ValueError):
    """A configuration value is missing, malformed, or inconsistent."""


class CorpusFormatError(ValueError):
    """A corpus file or record cannot be parsed or fails validation."""


class TrainingError(RuntimeError):
    """Training produced a non-finite loss or otherwise diverged."""


class AdaptationError(RuntimeError):
    """Self-training cannot proceed (e.g. no candidate pairs exist)."""
