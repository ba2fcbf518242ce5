"""Exception types raised across the package."""


class InvalidParameters(ValueError):
    """Parameters outside the admissible range of an operation."""


class DomainError(ValueError):
    """A closed-form quantity was requested outside its domain."""


class GenerationExhausted(RuntimeError):
    """Rejection sampling ran out of its retry budget."""


class DisconnectedGraph(ValueError):
    pass


class SupportMismatch(ValueError):
    pass


class DegenerateNormalizer(ArithmeticError):
    """All likelihood factors underflowed to zero."""


class NoNodeAtDistance(RuntimeError):
    pass


class UnreachableDestination(ValueError):
    pass


class ValidationError(RuntimeError):
    pass
