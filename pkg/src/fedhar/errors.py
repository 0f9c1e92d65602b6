"""Exception hierarchy shared across the package."""


class FedharError(Exception):
    """Base class for all package errors."""


class ConfigError(FedharError):
    """Invalid or inconsistent configuration (CLI exit code 2)."""


class DataError(FedharError):
    """Malformed or unusable input data (CLI exit code 3)."""


class SchemaError(DataError):
    """CSV header does not match the declared schema."""


class ParseError(DataError):
    """A data cell could not be parsed; message carries the row number."""


class LabelError(DataError):
    """A label string is not present in the configured label map."""


class ContractError(FedharError):
    """An internal calling contract was violated (shape, length, fingerprint)."""


class NumericError(FedharError):
    """A non-finite value appeared; message names the layer."""


class EvaluationError(FedharError):
    """A metric could not be computed (empty test set, no defined classes)."""
