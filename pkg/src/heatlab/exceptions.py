"""Exception hierarchy shared by all heatlab modules."""


class HeatLabError(Exception):
    """Base class for every error raised by heatlab."""


class DimensionError(HeatLabError):
    """Operator dimensions are incompatible."""


class CapacityError(HeatLabError):
    """A requested matrix would exceed the configured dimension cap."""


class HermiticityError(HeatLabError):
    """An operator violates a Hermiticity contract."""


class RealityError(HeatLabError):
    """An operator has complex entries where a real matrix is required
    (breaks the time-reversal convention Theta = complex conjugation)."""


class NumericalError(HeatLabError):
    """A numerical routine failed its residual contract."""


class DomainError(HeatLabError):
    """A scalar function was applied outside its domain."""


class ConditioningError(DomainError):
    """A state is too ill-conditioned for the requested fractional power."""


class RangeError(HeatLabError):
    """A quantity over- or underflowed despite shifting."""


class CommutationError(HeatLabError):
    """Operators that must commute do not."""


class StateMismatchError(HeatLabError):
    """A state and a measurement basis were built from different generators."""


class InfeasibleTargetError(HeatLabError):
    """Moment targets lie on or outside the boundary of the moment polytope."""


class ConvergenceError(HeatLabError):
    """An iterative solver exhausted its iteration budget."""


class ConfigError(HeatLabError):
    """An experiment configuration failed validation."""
