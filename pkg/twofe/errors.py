"""
Exception hierarchy for twofe.

Every exception raised on purpose by the package derives from `TwofeException`
and carries an `ErrorCode` plus the process exit code the CLI should return.

Exit Codes:
    2: data errors (unreadable or inconsistent panels)
    3: estimation errors (convergence, separation, singular matrices)
    4: configuration errors (bad flags, invalid trimming, invalid effect specs)
    5: study errors (too many failed replications)

Example Usage:
    ```
    except SeparationError as e:
        logger.error(e)
        raise typer.Exit(e.exit_code) from e
    ```
"""
from typing import Any

from twofe.classes.error_code import ErrorCode


class TwofeException(Exception):
    """Base exception with an error code and a CLI exit code."""

    exit_code: int = 1
    default_code: ErrorCode = ErrorCode.INTERNAL_ERROR

    def __init__(self, detail: str, code: ErrorCode | None = None):
        super().__init__(detail)
        self.detail = detail
        self.code = (code or self.default_code).value

    def __reduce__(self):
        return self.__class__, (self.detail, ErrorCode.from_value(self.code))

    def __str__(self):
        return f"{type(self).__name__}(code = {self.code}): {self.detail}"


class DataError(TwofeException):
    exit_code = 2


class DuplicateCell(DataError):
    default_code = ErrorCode.DUPLICATE_CELL


class ParseError(DataError):
    default_code = ErrorCode.PARSE_ERROR


class DegeneratePanel(DataError):
    default_code = ErrorCode.DEGENERATE_PANEL


class InvalidOutcome(DataError):
    default_code = ErrorCode.INVALID_OUTCOME


class EstimationError(TwofeException):
    exit_code = 3


class NumericOverflow(EstimationError):
    default_code = ErrorCode.NUMERIC_OVERFLOW


class SeparationError(EstimationError):
    default_code = ErrorCode.SEPARATION


class NotConverged(EstimationError):
    """Iteration limit reached; `diagnostics` holds the last solver state summary."""

    default_code = ErrorCode.NOT_CONVERGED

    def __init__(
        self,
        detail: str,
        code: ErrorCode | None = None,
        diagnostics: dict[str, Any] | None = None,
    ):
        super().__init__(detail, code)
        self.diagnostics = diagnostics or {}

    def __reduce__(self):
        return self.__class__, (self.detail, ErrorCode.from_value(self.code), self.diagnostics)


class NumericalBreakdown(EstimationError):
    default_code = ErrorCode.NUMERICAL_BREAKDOWN


class DegenerateProjection(EstimationError):
    default_code = ErrorCode.DEGENERATE_PROJECTION


class SingularInformation(EstimationError):
    default_code = ErrorCode.SINGULAR_INFORMATION


class JackknifeSubfitError(EstimationError):
    """A subpanel fit failed; `subpanel` names which one."""

    default_code = ErrorCode.JACKKNIFE_SUBFIT

    def __init__(self, detail: str, code: ErrorCode | None = None, subpanel: str = ""):
        super().__init__(detail, code)
        self.subpanel = subpanel

    def __reduce__(self):
        return self.__class__, (self.detail, ErrorCode.from_value(self.code), self.subpanel)


class ConfigError(TwofeException):
    exit_code = 4


class InvalidTrim(ConfigError):
    default_code = ErrorCode.INVALID_TRIM


class InvalidSpec(ConfigError):
    default_code = ErrorCode.INVALID_SPEC


class StudyUnreliable(TwofeException):
    """Too many replications failed; `report` keeps what was collected."""

    exit_code = 5
    default_code = ErrorCode.STUDY_UNRELIABLE

    def __init__(self, detail: str, code: ErrorCode | None = None, report: Any = None):
        super().__init__(detail, code)
        self.report = report

    def __reduce__(self):
        return self.__class__, (self.detail, ErrorCode.from_value(self.code), self.report)
