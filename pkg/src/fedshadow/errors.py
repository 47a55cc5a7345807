"""Exception types shared across the package."""


class FedShadowError(Exception):
    """Base class for all package errors."""


class ConfigError(FedShadowError):
    """Invalid configuration or dataset descriptor.

    Carries optional field-level messages so callers (CLI, HTTP API) can
    report exactly which fields are wrong.
    """

    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = list(errors) if errors else []


class NumericDivergenceError(FedShadowError):
    """NaN/Inf appeared during local training."""

    def __init__(self, epoch, batch, round_index=None, client_id=None):
        self.epoch = epoch
        self.batch = batch
        self.round_index = round_index
        self.client_id = client_id
        where = f"epoch {epoch}, batch {batch}"
        if client_id is not None:
            where = f"client {client_id}, {where}"
        if round_index is not None:
            where = f"round {round_index}, {where}"
        super().__init__(f"training diverged (NaN/Inf) at {where}")


class AggregationError(FedShadowError):
    """Incompatible inputs to federated averaging."""


class AnalysisError(FedShadowError):
    """Invalid input to signature analysis."""


class StorageError(FedShadowError):
    """Run store could not read or write the filesystem."""


class SequencingError(StorageError):
    """Round appended out of order."""


class RoundsLoadError(StorageError):
    """A persisted rounds file has a corrupt line."""

    def __init__(self, path, line_number, reason):
        self.path = str(path)
        self.line_number = line_number
        super().__init__(f"{path}: bad round record at line {line_number}: {reason}")


class NotFoundError(StorageError):
    """Unknown run id."""
