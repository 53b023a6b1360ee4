"""Exception and warning types raised across the package."""


class WishartLiborError(Exception):
    """Base class for all domain errors."""


class NotSPD(WishartLiborError, ValueError):
    pass


class Unstable(WishartLiborError, ValueError):
    """A mean-reversion matrix has an eigenvalue with nonnegative real part."""


class Singular(WishartLiborError, ArithmeticError):
    pass


class NegativeTau(WishartLiborError, ValueError):
    pass


class InvalidParameters(WishartLiborError, ValueError):
    pass


class InvalidTime(WishartLiborError, ValueError):
    pass


class InvalidCurve(WishartLiborError, ValueError):
    pass


class InsufficientMass(WishartLiborError):
    """The base direction cannot reach the first bond ratio (gamma condition fails)."""


class TransformBlowUp(WishartLiborError, ArithmeticError):
    """The Laplace transform is infinite at the requested argument."""


class DegenerateDistribution(WishartLiborError, ValueError):
    pass


class OutOfBand(WishartLiborError, ValueError):
    """Option price outside the no-arbitrage band of the Black formula."""


class NoConvergence(WishartLiborError, RuntimeError):
    pass


class ZeroVol(WishartLiborError, ZeroDivisionError):
    pass


class ConfigError(WishartLiborError, ValueError):
    """Configuration error carrying the offending field path (and line, if known)."""

    def __init__(self, message, path="", line=None):
        self.path = path
        self.line = line
        where = path or "<root>"
        if line is not None:
            where = f"{where} (line {line})"
        super().__init__(f"{where}: {message}")


class UnsupportedLaw(WishartLiborError, NotImplementedError):
    pass


class ConvergenceWarning(RuntimeWarning):
    pass


class ClippingWarning(RuntimeWarning):
    """A price or probability was clipped into its admissible range."""
