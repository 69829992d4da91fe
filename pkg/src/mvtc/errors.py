"""Exception hierarchy shared by all modules."""


class MvtcError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(MvtcError, ValueError):
    pass


class StationarityError(MvtcError, ValueError):
    pass


class CovarianceError(MvtcError, ValueError):
    pass


class ConvergenceError(MvtcError, RuntimeError):
    """Series truncation did not reach the requested tolerance.

    ``error_bound`` carries the tail bound achieved when the cap was hit.
    """

    def __init__(self, message, error_bound=float("nan")):
        super().__init__(message)
        self.error_bound = error_bound


class SingularityError(MvtcError, ArithmeticError):
    pass


class DegenerateError(MvtcError, ArithmeticError):
    pass


class LengthError(MvtcError, ValueError):
    pass


class ConditionError(MvtcError, ValueError):
    pass


class DegreesOfFreedomError(MvtcError, ValueError):
    pass


class MissingValueError(MvtcError, ValueError):
    pass
