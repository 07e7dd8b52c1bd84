"""Exception types raised by the package."""


class LevelTooLargeError(ValueError):
    """Requested level N does not fit the grid (2N+1 > L)."""


class SamplingSetError(ValueError):
    """Invalid sampling locations (too few, unsorted, or outside [0, 1))."""


class NyquistViolatedError(ValueError):
    """The theoretical frame bounds need (2N+1) * gap < 1."""


class SizeMismatchError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """An iterative eigenvalue estimate hit its iteration cap."""


class ZeroDirectionError(ArithmeticError):
    """CGNE direction with ||T d|| = 0: normal equations solved or rank deficient."""


class SingularNormalMatrixError(ArithmeticError):
    pass


class ConfigError(ValueError):
    pass
