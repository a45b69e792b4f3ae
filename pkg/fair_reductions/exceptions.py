from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

from .const import ExitStatus


class FairReductionsError(Exception):
    category = "error"
    exit_status = ExitStatus.FAILURE


class SchemaError(FairReductionsError):
    category = "schema"
    exit_status = ExitStatus.USAGE

    def __init__(self, message: str, column: str | None = None) -> None:
        super().__init__(message)
        self.column = column


class MissingColumnError(SchemaError):
    def __init__(self, column: str) -> None:
        super().__init__(f"missing column {column!r}", column)


class ArgumentError(FairReductionsError):
    category = "argument"
    exit_status = ExitStatus.USAGE


class EmptyInputError(FairReductionsError):
    category = "empty_input"
    exit_status = ExitStatus.USAGE


class ParseError(FairReductionsError):
    category = "parse"
    exit_status = ExitStatus.ARTIFACT

    def __init__(self, message: str, row: int | None = None) -> None:
        super().__init__(message)
        self.row = row

    def __str__(self) -> str:
        message = super().__str__()
        if self.row is None:
            return message

        return f"{message} (row {self.row})"


class CompatibilityError(FairReductionsError):
    category = "compatibility"
    exit_status = ExitStatus.ARTIFACT


class DegenerateDataError(FairReductionsError):
    category = "degenerate_data"
    exit_status = ExitStatus.NOT_APPLICABLE


class NotApplicableError(FairReductionsError):
    category = "not_applicable"
    exit_status = ExitStatus.NOT_APPLICABLE


class NumericError(FairReductionsError):
    category = "numeric"
    exit_status = ExitStatus.NUMERIC


class LearnerError(FairReductionsError):
    category = "learner"
    exit_status = ExitStatus.NUMERIC

    def __init__(self, cause: Exception, iteration: int | None = None) -> None:
        super().__init__(str(cause))
        self.cause = cause
        self.iteration = iteration

    def __str__(self) -> str:
        if self.iteration is None:
            return f"learner failed: {self.cause}"

        return f"learner failed at iteration {self.iteration}: {self.cause}"


class OutputError(FairReductionsError):
    category = "output"
    exit_status = ExitStatus.USAGE

    def __init__(self, path: str | Path, cause: OSError) -> None:
        super().__init__(str(cause))
        self.path = Path(path)
        self.cause = cause

    def __str__(self) -> str:
        return f"cannot write {self.path}: {self.cause.strerror or self.cause}"


@contextmanager
def writing(path: str | Path) -> Iterator[Path]:
    try:
        yield Path(path)
    except OSError as e:
        raise OutputError(path, e) from e


def ensure_directory(path: str | Path) -> Path:
    with writing(path) as directory:
        directory.mkdir(parents=True, exist_ok=True)

    return directory
