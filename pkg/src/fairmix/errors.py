"""Exception hierarchy shared across the package."""


class FairmixError(Exception):
    """Base class for all package errors."""


class ConfigError(FairmixError):
    """Bad or missing configuration key."""


class DataError(FairmixError):
    """Problems loading or validating a dataset."""


class AlignmentError(DataError):
    """A sample_id present in metadata is missing from a modality file (or vice versa)."""


class SchemaError(DataError):
    """Structural problem in an input file (duplicate ids, bad header, ...)."""


class ParseError(DataError):
    """A cell that should be numeric is not."""


class InputError(FairmixError):
    """Invalid argument to an in-process operation."""


class EmptyTableError(InputError):
    """Every column of a modality table was removed."""


class SelectionError(InputError):
    """A level filter matched zero columns."""


class FitError(FairmixError):
    """A model or transform could not be fitted (degenerate input)."""


class ShapeError(FairmixError):
    """Matrix dimensions do not line up."""


class StackingError(FitError):
    """Training split too small to build out-of-fold stacking features."""


class UnreachableCellError(FairmixError):
    """An augmentation cell needs samples but has no source rows."""


class MetricUndefinedError(FairmixError):
    """A group needed by a fairness metric is empty."""


class ExperimentError(FairmixError):
    """The cross-validation harness could not produce any usable fold."""


class DegenerateGroupWarning(UserWarning):
    """A label or sensitive attribute takes a single value across the dataset."""
