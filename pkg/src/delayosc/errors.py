"""Exception types shared across the toolkit."""


class DelayOscError(Exception):
    """Base class for all toolkit errors."""


class NonFiniteValue(DelayOscError):
    """A computed quantity overflowed or became NaN/Inf.

    Carries the first offending time in ``time`` when known.
    """

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class NoOscillation(DelayOscError):
    """No purely oscillatory delay exists for the given rates (|beta| <= |alpha|)."""


class ConvergenceFailure(DelayOscError):
    """An iterative solve did not reach tolerance within its iteration budget."""


class IndexOutOfRange(DelayOscError, IndexError):
    """A mode index does not exist in the tensor chain."""


class DimensionMismatch(DelayOscError, ValueError):
    """Operands live on different chains or have incompatible shapes."""


class BudgetExceeded(DelayOscError, MemoryError):
    """A simulation would exceed the configured memory budget.

    ``required`` and ``allowed`` are byte counts.
    """

    def __init__(self, required, allowed):
        super().__init__(
            "simulation needs about %d bytes but the budget allows %d"
            % (required, allowed)
        )
        self.required = int(required)
        self.allowed = int(allowed)


class GridMismatch(DelayOscError, ValueError):
    """Two time series use incompatible sampling grids (non-integer dt ratio)."""


class ClosureDiverged(DelayOscError):
    """Moment-system closure exceeded the configured word budget."""


class ConfigError(DelayOscError, ValueError):
    """A scenario configuration is invalid; message names the offending field."""
