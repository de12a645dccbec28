"""Exception types shared across the package."""


class NecLabError(Exception):
    """Base class for all package errors."""


class RateOutOfRange(NecLabError):
    """A dissipative channel rate came out negative for the given (T, h)."""


class SiteOutOfCluster(NecLabError):
    """A site coordinate lies outside the cluster."""


class DimensionMismatch(NecLabError):
    """Operator and state dimensions disagree."""


class StepUnderflow(NecLabError):
    """The adaptive integrator shrank the step below dt_min."""


class CapExceeded(NecLabError):
    """A dense construction would exceed the configured dimension cap."""


class NegativeRate(NecLabError):
    """A mean-field rate went negative beyond tolerance (non-projector probe)."""


class InsufficientBoundary(NecLabError):
    """Too few phase-boundary cells to fit the critical curve."""


class IncommensurateIsland(NecLabError):
    """Island size is not commensurate with the cluster grid."""


class NotConverged(NecLabError):
    """A trajectory did not reach its steady state within t_max."""


class NonLinearRegime(NecLabError):
    """Relaxation times are not linear in island size; no velocity defined."""


class WindowTooWide(NecLabError):
    """Velocity samples leave the linear response window."""


class SchemaError(NecLabError):
    """Configuration failed validation; carries all offending key paths."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
