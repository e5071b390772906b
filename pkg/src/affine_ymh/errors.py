"""Exception hierarchy shared by all modules."""


class AffineYMHError(Exception):
    """Base class for every error raised by this package."""


class BadGrid(AffineYMHError, ValueError):
    pass


class NonSPDMetric(AffineYMHError, ValueError):
    pass


class DegreeMismatch(AffineYMHError, ValueError):
    pass


class TopDegree(AffineYMHError, ValueError):
    pass


class DegreeOverflow(AffineYMHError, ValueError):
    pass


class NonCommutingMonodromy(AffineYMHError, ValueError):
    pass


class HiggsNotFlat(AffineYMHError, ValueError):
    pass


class HiggsWedgeNonzero(AffineYMHError, ValueError):
    pass


class NoPrincipalLog(AffineYMHError, ValueError):
    pass


class RankMismatch(AffineYMHError, ValueError):
    pass


class ZeroVolume(AffineYMHError, ArithmeticError):
    pass


class NotAstheno(AffineYMHError, ValueError):
    pass


class NotPositive(AffineYMHError, ValueError):
    """A metric or endomorphism field left the positive-definite cone."""


class NotInvariant(AffineYMHError, ValueError):
    pass


class UnsolvableNormalization(AffineYMHError, RuntimeError):
    pass


class NoSpectralGap(AffineYMHError, RuntimeError):
    pass


class SlopeDefectMismatch(AffineYMHError, RuntimeError):
    pass


class ConfigError(AffineYMHError, ValueError):
    """Scenario config failed to parse; the message names the offending field."""
