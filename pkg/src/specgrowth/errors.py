"""Exception types shared across the package."""


class SpecGrowthError(Exception):
    """Base class for all structured errors raised by this package."""


class InvalidParameterError(SpecGrowthError, ValueError):
    """A scalar or array argument is outside its documented range."""

    def __init__(self, name, message):
        self.name = name
        super().__init__(f"{name}: {message}")


class DimensionMismatchError(SpecGrowthError, ValueError):
    """State and operator sizes (or basis tags) do not agree."""


class StrategyError(SpecGrowthError):
    """A fast-propagation strategy was requested that the operator
    structure does not support."""


class BreakdownError(SpecGrowthError):
    """The local matrix exponential failed to converge."""

    def __init__(self, step_index, message):
        self.step_index = step_index
        super().__init__(f"step {step_index}: {message}")


class LeakageError(SpecGrowthError):
    """Truncation tail mass crossed the abort threshold during a run."""

    def __init__(self, time, leakage, threshold):
        self.time = time
        self.leakage = leakage
        self.threshold = threshold
        super().__init__(
            f"tail mass {leakage:.3e} exceeds {threshold:.1e} at t = {time:g}; "
            "the mode count is too small for this horizon"
        )


class SupportWindowError(SpecGrowthError):
    """An initial state touches rows where truncation breaks the
    commutator identities."""


class DegenerateStateError(SpecGrowthError):
    """An initial state fails a non-degeneracy hypothesis (or a fitted
    quantity vanished where positivity is required)."""


class ExpansionMismatchError(SpecGrowthError):
    """Two mathematically equal evaluation routes disagreed beyond
    tolerance."""


class ConfigError(SpecGrowthError):
    """An experiment configuration key is unknown or out of range."""
