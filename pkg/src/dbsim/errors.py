"""Exception hierarchy shared across the package."""


class DbsError(Exception):
    """Base class for all errors raised by dbsim."""


class InvalidMeasurementError(DbsError):
    """An epoch record carries a non-positive time or dataset share."""


class InvalidPerformanceError(DbsError):
    """A performance estimate list is empty or contains non-positive values."""


class BudgetTooSmallError(DbsError):
    """The global batch budget cannot give every worker at least one sample."""


class InvalidBatchError(DbsError):
    """A real-valued batch size is negative."""


class EmptyPartitionError(DbsError):
    """All integer batches are zero, so no dataset partition exists."""


class DatasetTooSmallError(DbsError):
    """The dataset has fewer samples than there are workers."""


class ConfigurationError(DbsError):
    """Inconsistent simulator or strategy configuration."""


class ValidationError(ConfigurationError):
    """A scenario config violated an invariant; message names the field path."""


class EmptyBatchError(DbsError):
    """A mini-batch gradient was requested for an empty index set."""


class InvalidStepSizeError(DbsError):
    """The SGD step size is outside (0, 1/mu)."""


class InvalidBaselineError(DbsError):
    """Savings requested against a non-positive baseline total."""


class BaselineNotFoundError(DbsError):
    """The named baseline strategy is missing from the report set."""
