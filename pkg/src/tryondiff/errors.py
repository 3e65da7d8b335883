"""Exception types shared across the pipeline.

The CLI maps these onto process exit codes (see cli.EXIT_CODES).
"""


class TryonError(Exception):
    """Base class for all pipeline errors."""


class ContractError(TryonError, ValueError):
    """An operation was called with inputs violating its contract."""


class ConfigError(TryonError):
    """Malformed or inconsistent run configuration."""


class DependencyError(TryonError):
    """A required stage checkpoint or companion artifact is missing."""


class DataError(TryonError):
    """Dataset ingestion failure (missing files, malformed annotations)."""


class IngestionError(DataError):
    """A referenced dataset file does not exist or cannot be read."""


class KeypointParseError(DataError):
    """Keypoint annotation file could not be parsed."""


class EmptyGarmentError(DataError):
    """Segmentation has no pixels for the requested garment category."""


class DegenerateConfigurationError(ContractError):
    """Control points are collinear/duplicated; the TPS system is singular."""


class CheckpointError(TryonError):
    """Checkpoint directory is missing, corrupt, or fails hash verification."""


class FrozenModuleError(TryonError):
    """A module that must stay frozen was found trainable or has drifted."""
