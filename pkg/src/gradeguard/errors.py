"""Exception types shared across the grading pipeline.

Everything raised on purpose derives from GradeGuardError so callers (and the
CLI error handler) can catch one base class and still present the specific
failure to the user.
"""

from __future__ import annotations


class GradeGuardError(Exception):
    """Base class for all pipeline errors."""


class ParseError(GradeGuardError):
    """A corpus file could not be parsed; carries row/column context."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = ""
        if row is not None:
            where = f" (row {row}" + (f", column {column!r})" if column else ")")
        super().__init__(message + where)


class DuplicateId(GradeGuardError):
    """Two corpus rows shared a record_id."""


class GradeOutOfScale(GradeGuardError):
    """A grade was outside [0, 5] or off the 0.5-point lattice."""


class EmptyField(GradeGuardError):
    """A required text field was empty."""


class EmptyList(GradeGuardError):
    """A metric was asked for on an empty collection."""


class TooFewGrades(GradeGuardError):
    """Dispersion requested on fewer than two grades."""


class BackendUnavailable(GradeGuardError):
    """All retries against a grading backend were exhausted."""


class BackendTimeout(GradeGuardError):
    """A single backend request timed out."""


class AllUndefined(GradeGuardError):
    """No threshold in the sweep admitted a single confident item."""


class FitDiverged(GradeGuardError):
    """Nonlinear fit failed to converge; carries the best parameters seen."""

    def __init__(self, message: str, best_params: tuple[float, float, float] | None = None):
        self.best_params = best_params
        super().__init__(message)


class RankDeficient(GradeGuardError):
    """Polynomial fit attempted with too few distinct abscissae."""


class NoInflection(GradeGuardError):
    """The curve's second derivative never changes sign on its domain."""


class UnknownRecord(GradeGuardError):
    """A review result referenced a record_id absent from the decisions."""


class NotRouted(GradeGuardError):
    """A human grade was submitted for a record the model kept for itself."""


class BindFailure(GradeGuardError):
    """The review service could not bind its address."""


class CorruptDecisionsFile(GradeGuardError):
    """The decisions file could not be read as JSON lines."""


class ConfigError(GradeGuardError):
    """A run configuration file failed schema validation."""
