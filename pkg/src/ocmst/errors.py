"""Exception types shared across the package."""


class OcmstError(Exception):
    """Base class for every error this package raises deliberately."""


class ConfigurationError(OcmstError):
    """Bad parameters or mismatched inputs: dimensions, unknown class, invalid thresholds."""


class FeatureFormatError(OcmstError):
    """A feature file failed structural parsing.

    byte_offset points at the first byte that could not be interpreted.
    """

    def __init__(self, message: str, byte_offset: int | None = None):
        super().__init__(message)
        self.byte_offset = byte_offset


class FeatureDataError(OcmstError):
    """A feature file parsed structurally but contains unusable values.

    row is the zero-based index of the first offending sample.
    """

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class PoolExhaustedError(OcmstError):
    """A spanning-tree operation was asked to work with no nodes at all."""


class ClassUnavailableError(OcmstError):
    """A per-class computation was requested on an empty class pool."""


class UndefinedAucError(OcmstError):
    """AUC was requested but the ground truth contains only one class."""
