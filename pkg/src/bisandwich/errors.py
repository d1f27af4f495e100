"""Exception hierarchy shared by every module."""


class BiregularError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParams(BiregularError, ValueError):
    pass


class SameVertex(BiregularError, ValueError):
    pass


class SideMismatch(BiregularError, ValueError):
    pass


class OutOfRange(BiregularError, ValueError):
    pass


class NegativeInput(BiregularError, ValueError):
    pass


class TooLarge(BiregularError):
    """An exact enumeration was requested above the configured cap."""


class InconsistentConstraint(BiregularError, ValueError):
    pass


class Inadmissible(BiregularError):
    """No biregular graph contains the given prefix."""


class EdgeInG(BiregularError, ValueError):
    pass


class EmptyClass(BiregularError):
    pass


class NotBiregular(BiregularError, ValueError):
    pass


class DegreeSumMismatch(BiregularError, ValueError):
    pass


class InfeasibleAssumptions(BiregularError):
    """The schedule assumptions fail for the requested parameters.

    ``failed`` lists the names of the failing assumptions.
    """

    def __init__(self, failed, detail=""):
        self.failed = list(failed)
        msg = "assumptions failed: " + ", ".join(self.failed)
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class InvalidOverride(BiregularError, ValueError):
    pass


class OracleUnavailable(BiregularError):
    pass


class NumericalNegativity(BiregularError):
    """A residual coupling probability came out negative.

    Cannot happen with exact arithmetic; signals a bug.
    """


class CapExceeded(BiregularError):
    pass


class SizeMismatch(BiregularError, ValueError):
    pass
