"""Exception hierarchy shared by every stage.

The CLI maps the three top-level families onto exit codes: data problems
exit 1, estimation/identification failures exit 2, configuration errors
exit 3.
"""


class FinIneqError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DataError(FinIneqError, ValueError):
    """Malformed, missing or out-of-domain input data."""

    exit_code = 1


class DateParseError(DataError):
    pass


class ConflictError(DataError):
    """Two observations for the same series key and date."""


class GapError(DataError):
    """Missing cells; ``gaps`` lists every offending location."""

    def __init__(self, message, gaps=()):
        super().__init__(message)
        self.gaps = list(gaps)


class DomainError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class UndefinedGiniError(DomainError):
    pass


class EstimationError(FinIneqError):
    exit_code = 2


class NumericalRankError(EstimationError):
    pass


class RankDeficiencyError(EstimationError):
    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = list(columns)


class DegenerateRegressorError(EstimationError):
    pass


class IdentificationError(EstimationError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(FinIneqError):
    exit_code = 3
