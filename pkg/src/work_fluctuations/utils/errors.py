# src/work_fluctuations/utils/errors.py

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


class WorkStatsError(Exception):
    """
    Base class for every error raised by the package.

    exit_code is what the CLI returns when the error reaches the top level.
    """
    exit_code = 1


class ValidationError(WorkStatsError, ValueError):
    exit_code = EXIT_VALIDATION


class DatasetFormatError(ValidationError):
    """
    A malformed record in a data file. Carries the line number and field name.
    """

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field is not None:
            location.append(f"field '{field}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field


class UnderdeterminedSystemError(ValidationError):
    pass


class NumericalError(WorkStatsError, RuntimeError):
    exit_code = EXIT_NUMERICAL


class RankDeficiencyError(NumericalError):
    pass


class UnbalanceableMatrixError(NumericalError):
    pass


class FitDegenerateError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass
