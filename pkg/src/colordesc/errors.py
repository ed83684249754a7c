"""Exception types shared across the package."""


class ColordescError(Exception):
    """Base class for all package errors."""


class ConfigError(ColordescError):
    """Invalid configuration, flags, or file formats (CLI exit code 2)."""


class CorpusError(ConfigError):
    """Corpus file missing, malformed, or empty after filtering."""


class CheckpointError(ConfigError):
    """Checkpoint file corrupt, truncated, or of the wrong family/version."""


class TrainingDivergence(ColordescError):
    """Training produced a non-finite loss (CLI exit code 3)."""


class EvaluationError(ColordescError):
    """Evaluation could not produce a well-defined metric (CLI exit code 3)."""
