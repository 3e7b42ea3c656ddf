"""Error hierarchy shared by every module of the PAD toolkit.

Each family carries the process exit code the CLI returns for it.
"""


class PadError(Exception):
    """Base class for all toolkit errors."""

    exit_code: int = 4


class UsageError(PadError):
    """Invalid flags or configuration values."""

    exit_code = 2


class DataError(PadError):
    """Malformed or inconsistent input data."""

    exit_code = 3


class ComputeError(PadError):
    """A numerical stage could not produce a result."""

    exit_code = 4


class DimensionError(DataError):
    """Array shapes or buffer lengths disagree."""


class ContractError(DataError):
    """An operation precondition was violated."""


class DegenerateNormalError(ContractError):
    """A zero-length vector was given where a surface normal is expected."""


class SizeError(DataError):
    """An image is too small for the requested descriptor."""


class ImageFormatError(DataError):
    """An image file is truncated, malformed or of an unsupported kind."""


class ManifestParseError(DataError):
    """A manifest file could not be parsed."""


class ManifestInvariantError(DataError):
    """A parsed manifest violates a structural rule."""


class InsufficientSubjectsError(DataError):
    """A split asks for more subjects than the manifest holds."""


class ModelFormatError(DataError):
    """A model, filter-bank or config snapshot file is malformed."""


class ScoreFileError(DataError):
    """A score table is malformed."""


class TrainingError(ComputeError):
    """A learner received data it cannot be trained on."""


class NormalizationError(ComputeError):
    """Score normalisation statistics are degenerate."""


class MetricError(ComputeError):
    """A metric was requested on a score set lacking one of the classes."""


class ConvergenceWarning(UserWarning):
    """An iterative learner stopped at its iteration budget."""
