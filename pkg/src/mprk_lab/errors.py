"""Exception hierarchy shared by all mprk_lab modules."""


class MPRKLabError(Exception):
    """Base class for every error raised by this package."""


class ShapeMismatch(MPRKLabError, ValueError):
    pass


class SingularMatrix(MPRKLabError, ArithmeticError):
    pass


class NoConvergence(MPRKLabError, ArithmeticError):
    pass


class Overflow(MPRKLabError, OverflowError):
    pass


class NotMetzler(MPRKLabError, ValueError):
    pass


class NoInvariant(MPRKLabError, ValueError):
    pass


class RankDeficient(MPRKLabError, ArithmeticError):
    pass


class DependentSpan(MPRKLabError, ValueError):
    pass


class NonPositiveState(MPRKLabError, ValueError):
    pass


class StageSolveFailure(MPRKLabError, ArithmeticError):
    pass


class PoleEvaluation(MPRKLabError, ZeroDivisionError):
    pass


class DomainError(MPRKLabError, ValueError):
    pass


class ParameterViolation(MPRKLabError, ValueError):
    pass
