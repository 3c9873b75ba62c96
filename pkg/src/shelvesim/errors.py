"""Exception hierarchy.

The CLI maps these onto process exit codes: scheme/config problems -> 2,
numeric/integration problems -> 3, analysis problems -> 4.
"""


class ShelvesimError(Exception):
    """Base class for all package-specific errors."""


class SchemeError(ShelvesimError, ValueError):
    """Invalid level-scheme configuration.

    ``field`` names the offending key when one can be identified.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NumericError(ShelvesimError):
    """Integration or root-finding failure."""


class StepRejected(NumericError):
    """A trigger probability exceeded the per-step cap; retry with smaller dt.

    ``suggested_dt`` is a step size expected to satisfy the cap.
    """

    def __init__(self, message, suggested_dt):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class TriggerPreconditionError(NumericError):
    """sample_trigger was handed currents that violate its preconditions."""


class OracleFitError(NumericError):
    """The reference-rate extraction could not separate the two exponentials."""


class AnalysisError(ShelvesimError):
    """Emission-record analysis could not be carried out."""


class DegenerateFitError(AnalysisError):
    """Two-exponential fit collapsed onto a single rate."""
