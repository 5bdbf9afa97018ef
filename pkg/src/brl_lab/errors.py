"""Exception hierarchy.

Every numerical failure raised by the library derives from :class:`BRLError`;
shape problems additionally derive from :class:`ValueError` so that callers
validating user input can catch them generically.
"""


class BRLError(Exception):
    """Base class for all library errors."""


class NumericalFailure(BRLError):
    """A numerical kernel failed to converge or overflowed."""


class ShapeError(BRLError, ValueError):
    """Operand dimensions are not conformable."""


class NotPositiveSemidefinite(BRLError):
    pass


class NotPositiveDefinite(BRLError):
    pass


class NotContractive(BRLError):
    pass


class NotStrictlyContractive(BRLError):
    pass


class ResolventSingular(BRLError):
    """The evaluation point lies (numerically) in the spectrum of A."""


class NotExponentiallyStable(BRLError):
    pass


class EmptySystem(BRLError, ValueError):
    pass


class UnsupportedGrid(BRLError):
    pass


class Unreachable(BRLError):
    """The state is outside the range of the controllability map."""


class NotStrictSchur(BRLError):
    pass


class NotL2Controllable(BRLError):
    pass


class NotL2Observable(BRLError):
    pass


class InvalidDelta(BRLError, ValueError):
    pass


class NotAFeasiblePoint(BRLError):
    pass


class DilationExtractionFailed(BRLError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class FactorizationInconsistent(BRLError):
    pass
