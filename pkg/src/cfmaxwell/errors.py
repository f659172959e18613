"""Exception types raised by the solver."""


class CFMError(Exception):
    """Base class for all solver errors."""


class NonConvergence(CFMError):
    """An iterative projection exceeded its iteration budget."""


class DegenerateGradient(CFMError):
    """The level-set gradient vanishes where a normal is required."""


class EmptyIntersection(CFMError):
    """No interface crossing was found inside a patch."""


class IndexOutOfRange(CFMError, IndexError):
    pass


class UnsupportedDegree(CFMError, ValueError):
    pass


class UnsupportedDerivative(CFMError, ValueError):
    pass


class SingularNormalMatrix(CFMError):
    """A patch normal matrix has a pivot below the admissible threshold."""


class OutsidePatch(CFMError, ValueError):
    pass


class MissingCorrection(CFMError, KeyError):
    """A stencil crosses the interface at a node without a correction entry."""


class UnknownProblem(CFMError, KeyError):
    pass


class DegenerateData(CFMError, ValueError):
    pass


class ConfigError(CFMError, ValueError):
    """Malformed run configuration."""
