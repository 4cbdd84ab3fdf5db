"""Exception hierarchy shared by every fraudbench stage."""

from pathlib import Path
from typing import Optional, Union


class FraudBenchError(Exception):
    """Base class for all errors raised by fraudbench."""


class DatasetError(FraudBenchError):
    """Raised when a dataset file cannot be ingested."""

    def __init__(
        self,
        message: str,
        path: Optional[Union[str, Path]] = None,
        line: Optional[int] = None,
    ):
        self.path = None if path is None else Path(path)
        self.line = line
        location = ""
        if self.path is not None:
            location = f"{self.path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(f"{location}{message}")


class PreprocessError(FraudBenchError):
    pass


class ShapeError(FraudBenchError, ValueError):
    pass


class NumericsError(FraudBenchError):
    pass


class ReductionError(FraudBenchError):
    pass


class TrainingError(FraudBenchError):
    pass


class ModelFormatError(FraudBenchError):
    pass


class MetricsError(FraudBenchError):
    pass


class ConfigError(FraudBenchError):
    pass


class EmitError(FraudBenchError):
    pass


class StageError(FraudBenchError):
    """A pipeline stage failed; wraps the underlying cause."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
