from __future__ import annotations


class FairBatchError(Exception):
    """Base class for every error raised by the toolkit."""


class DatasetError(FairBatchError):
    pass


class CsvParseError(DatasetError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class LossSpecError(FairBatchError):
    pass


class ShapeError(FairBatchError):
    pass


class DisparityError(FairBatchError):
    pass


class SamplingError(FairBatchError):
    pass


class ConvergenceError(FairBatchError):
    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class ConfigError(FairBatchError):
    pass
