"""Exception hierarchy shared across the pipeline."""


class Ruin2dError(Exception):
    """Base class for all library errors."""


class NonConvergent(Ruin2dError):
    """Polynomial root finding failed to reach the residual tolerance."""


class DegreeViolation(Ruin2dError):
    """Kernel numerator degree in z is not strictly below the denominator degree."""


class RootOnAxis(Ruin2dError):
    """A root sits inside the imaginary-axis exclusion band; classification refused."""


class CountMismatch(Ruin2dError):
    """Zero/pole counts in the right half-plane disagree (root classification failure
    or a model violating the second-line safety loading)."""


class NotStable(Ruin2dError):
    """A stability condition (rho_1 < 1, or the structural zero at the origin)
    does not hold."""


class BoundFailure(Ruin2dError):
    """A transform value exceeded the LST bound |psi| <= 1 in the right quadrant."""


class InversionNonConvergent(Ruin2dError):
    """Acceleration residual of the Fourier sums exceeded tolerance."""


class LevelOutOfRange(Ruin2dError):
    """Requested quantile level lies outside the range of the tail grid."""


class UnsampleableModel(Ruin2dError):
    """The model was supplied as a raw rational transform and cannot be sampled."""


class ConfigError(Ruin2dError):
    """Configuration file failed to parse or validate."""
