"""Exception hierarchy shared by every module of the package."""


class IForgeError(Exception):
    """Base class for all errors raised by iforge."""


class DimensionMismatch(IForgeError, ValueError):
    pass


class NumericalFailure(IForgeError, ArithmeticError):
    pass


class Infeasible(IForgeError):
    """An optimisation problem has an empty feasible region."""


class EmptySet(IForgeError):
    pass


class UnboundedDirection(IForgeError):
    pass


class DegenerateGeometry(IForgeError):
    pass


class IterationLimit(IForgeError):
    def __init__(self, max_iter, message=None):
        self.max_iter = max_iter
        super().__init__(message or f"no convergence within {max_iter} iterations")


class SynthesisInfeasible(IForgeError):
    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"subsystem {index}: robust controlled invariant set is empty")


class OutsideDomain(IForgeError):
    pass


class ResolutionTooCoarse(IForgeError, ValueError):
    pass


class UnsupportedDimension(IForgeError, ValueError):
    pass


class SpecError(IForgeError, ValueError):
    """Malformed specification or data file."""
