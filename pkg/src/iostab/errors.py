"""Exception types shared across the package."""


class IostabError(Exception):
    """Base class for all package errors."""


class DimensionError(IostabError, ValueError):
    """Operands have incompatible or unsupported shapes."""


class CapacityError(IostabError, ValueError):
    """Problem size exceeds the supported desk-scale range."""


class NoUniqueSolutionError(IostabError, ValueError):
    """A linear matrix equation has no unique solution (spectra overlap)."""


class ConvergenceError(IostabError, RuntimeError):
    """An iterative kernel failed to converge to the requested accuracy."""


class ConditioningError(IostabError, RuntimeError):
    """A computed quantity is too ill-conditioned to be trusted."""


class NotObservableError(IostabError, ValueError):
    """State reconstruction requested for a non-observable realization."""


class ModelError(IostabError, ValueError):
    """A plant or filter description violates its structural requirements."""


class AssumptionError(IostabError, ValueError):
    """A precondition on the plant/filter pair does not hold."""


class ExcitationError(IostabError, RuntimeError):
    """An excitation sequence could not be certified at the requested order."""


class GateError(IostabError, RuntimeError):
    """An operation was invoked although its rank gate did not pass."""


class ConfigError(IostabError, ValueError):
    """A scenario configuration file is malformed or inconsistent."""
