"""Exception and warning types shared across the package."""


class ConformalLabError(Exception):
    """Base class for all library errors."""


class ExprSyntaxError(SyntaxError, ConformalLabError):
    """Malformed expression text; ``offset`` is the byte offset of the problem."""

    def __init__(self, message, text="", offset=0):
        super().__init__(f"{message} at byte {offset}")
        self.msg = message
        self.text = text
        self.offset = offset


class UnknownIdentifier(ExprSyntaxError):
    pass


class DivisionNearZero(ConformalLabError, ArithmeticError):
    pass


class BasePointMismatch(ConformalLabError, ValueError):
    pass


class BudgetExceeded(ConformalLabError):
    pass


class HypothesisViolated(ConformalLabError, ValueError):
    """A mathematical precondition of an operation does not hold."""


class NotContracting(HypothesisViolated):
    pass


class EscapesInterval(HypothesisViolated):
    pass


class NonPositiveProb(HypothesisViolated):
    pass


class InvalidDistribution(HypothesisViolated):
    pass


class EmptyCell(ConformalLabError, ValueError):
    pass


class ZeroMass(ConformalLabError, ValueError):
    pass


class ZeroScale(ConformalLabError, ValueError):
    pass


class ExactOverlapDetected(ConformalLabError):
    def __init__(self, message, n=None, witness=None, enclosure=None):
        super().__init__(message)
        self.n = n
        self.witness = witness
        self.enclosure = enclosure


class NoRootBracket(ConformalLabError):
    pass


class OutOfRange(ConformalLabError, ValueError):
    pass


class NonDegenerateCheckFailed(ConformalLabError):
    pass


class InsufficientAlphabet(ConformalLabError, ValueError):
    pass


class DegenerateCommonFixedPoint(UserWarning):
    """All maps of the system share a fixed point (the attractor is a single point)."""
