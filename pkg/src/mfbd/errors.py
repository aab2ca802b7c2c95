"""Exception hierarchy shared across the package."""


class MFBDError(Exception):
    """Base class for every error raised by this package."""


class NonFiniteRate(MFBDError):
    """A rate evaluation produced NaN, infinity, or a negative value."""


class DeclaredConstantViolation(MFBDError):
    """A sampled tuple exceeded a bound built from the model's declared constants."""

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = violations or []


class UnboundedGrowth(MFBDError):
    """No finite envelope constant fits on the scanned state range."""


class SupportTooLarge(MFBDError):
    """Combined support exceeds what the exact transport oracle accepts."""


class SizeMismatch(MFBDError):
    """Paired sample sets do not have matching shapes."""


class SolverError(MFBDError):
    """Base class for deterministic-solver failures."""


class StepTooLarge(SolverError):
    """Time step violates the explicit-integrator stability guard."""


class CapOverflow(SolverError):
    """Truncation tail exceeded its budget even after adaptive cap doubling."""


class ClippingOverflow(SolverError):
    """Cumulative negative-mass clipping exceeded the allowed budget."""


class NoConvergence(SolverError):
    """An iterative scheme failed to reach its tolerance within max_iter."""


class ZeroDeathRate(SolverError):
    """Detailed balance requires a(i) > 0 above a state that still carries birth rate."""


class SimulationError(MFBDError):
    """Base class for stochastic-simulation failures."""


class DominationFailure(SimulationError):
    """A true jump rate exceeded its thinning bound inside a lookahead window."""


class RateOverflow(SimulationError):
    """Total jump rate exceeded the configured ceiling (runaway birth regime)."""


class MissingConstants(MFBDError):
    """An operation needs declared or fitted model constants that are unavailable."""


class ConfigError(MFBDError):
    """Invalid run configuration; the message names the offending field path."""
