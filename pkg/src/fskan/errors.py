"""Exception types raised by the solver library."""


class UndefinedParameterError(ValueError):
    """A derived parameter has no value for the given input (e.g. gamma at m=-1)."""


class DomainError(ValueError):
    """Argument outside the domain where a closed-form expression is defined."""


class NonFiniteError(ArithmeticError):
    """An integration stage produced inf or nan."""


class BracketError(RuntimeError):
    """No sign change of the shooting miss function inside the search range."""


class NoConvergentProbeError(RuntimeError):
    """Every probe of a shooting sweep failed to converge."""


class ExtrapolationError(ValueError):
    """Profile evaluated outside the similarity-variable range it was built on."""


class DegenerateFitError(ValueError):
    """Sample set cannot determine an external-velocity law."""
