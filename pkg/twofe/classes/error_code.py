from enum import unique

from twofe.classes.enum import BaseEnum


@unique
class ErrorCode(BaseEnum):
    """
    Enum for all possible error codes.
    """
    # "Internal error" - Default error code.
    INTERNAL_ERROR = 1

    # "Duplicate cell" - Two rows share the same (id, time) pair.
    DUPLICATE_CELL = 10

    # "Parse error" - A field could not be read as a number, or a column is missing.
    PARSE_ERROR = 11

    # "Degenerate panel" - Fewer than 2 units or periods, an empty subset, or an
    # all-missing unit/period.
    DEGENERATE_PANEL = 12

    # "Invalid outcome" - Outcome outside the family's support (e.g. negative counts).
    INVALID_OUTCOME = 13

    # "Numeric overflow" - The index pushed a family's mean function out of range.
    NUMERIC_OVERFLOW = 20

    # "Separation" - An effect drifts without bound; the likelihood has no maximizer.
    SEPARATION = 21

    # "Not converged" - Newton iteration limit reached.
    NOT_CONVERGED = 22

    # "Numerical breakdown" - A factorization met a non-positive pivot.
    NUMERICAL_BREAKDOWN = 23

    # "Degenerate projection" - A unit or period carries zero total weight.
    DEGENERATE_PROJECTION = 24

    # "Singular information" - The information matrix is not positive definite.
    SINGULAR_INFORMATION = 25

    # "Jackknife subfit" - A subpanel fit failed.
    JACKKNIFE_SUBFIT = 26

    # "Invalid trim" - Trimming parameter outside [0, T - 2].
    INVALID_TRIM = 30

    # "Invalid spec" - A partial effect, DGP or run option is inconsistent.
    INVALID_SPEC = 31

    # "Study unreliable" - Too many replications failed.
    STUDY_UNRELIABLE = 40
