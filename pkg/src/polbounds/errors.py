"""Exception hierarchy shared across the package."""


class PolarimetryError(Exception):
    """Base class for all package-specific errors."""


class InvalidStokes(PolarimetryError):
    """Stokes vector violates the full-polarization invariant or s0 < 0."""


class DegeneratePole(PolarimetryError):
    """A pole of the Poincare sphere where the relative phase is unobservable."""


class SingularQfi(PolarimetryError):
    """A required quantum Fisher information diagonal entry is effectively zero."""


class SingularFisher(PolarimetryError):
    """Classical Fisher matrix is not invertible on the estimated parameters."""


class SingularArm(PolarimetryError):
    """A detector arm mean vanishes with a genuinely divergent Fisher term."""


class CutoffTooSmall(PolarimetryError):
    """Fock truncation leaves more tail probability than tolerated."""


class IllConditioned(PolarimetryError):
    """SLD solve hit a near-zero eigenvalue denominator with nonzero numerator."""


class BadArity(PolarimetryError):
    """Free-parameter vector has the wrong length for the requested scenario."""


class WrongReceiver(PolarimetryError):
    """Operation applied to counts from an incompatible receiver kind."""


class AllZeroCounts(PolarimetryError):
    """Estimator invoked on a record with no detected photons."""


class NoConverge(PolarimetryError):
    """Iterative estimator exhausted its iteration budget."""


class OptimizerNoConverge(PolarimetryError):
    """Multi-start minimization restarts disagree beyond tolerance."""
