"""Exception types shared across the package."""


class GravlearnError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(GravlearnError, ValueError):
    """A vector's length disagrees with the layout implied by its spec."""


class CoincidentBodies(GravlearnError, ValueError):
    """Two bodies are closer than the coincidence threshold."""


class NonFiniteState(GravlearnError, FloatingPointError):
    """An integration step produced NaN or Inf.

    ``interval`` is the index of the failing save interval where known.
    """

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class StepSizeUnderflow(GravlearnError, FloatingPointError):
    """The adaptive integrator's step size fell below its floor."""


class Diverged(GravlearnError, FloatingPointError):
    """A model trajectory became non-finite during loss evaluation.

    ``interval`` is the index of the save interval in which the rollout
    first left the finite range.
    """

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class GridMismatch(GravlearnError, ValueError):
    """Two trajectories that must share a time grid do not."""


class EmptyTrain(GravlearnError, ValueError):
    """A prefix split would leave fewer than two training points."""


class ConfigError(GravlearnError, ValueError):
    """An experiment configuration file is malformed."""
