"""
Exception hierarchy for dtrlab.

Everything raised on purpose derives from DtrLabError so the CLI and the HTTP
layer can map failures to exit codes / status codes in one place. Input
problems also derive from ValueError, numerical breakdowns from RuntimeError.
"""


class DtrLabError(Exception):
    """Base class for all dtrlab failures."""


class ConfigError(DtrLabError, ValueError):
    """Invalid configuration file, flag combination or config value."""


class PositivityError(DtrLabError, ValueError):
    """A propensity falls below the declared positivity floor."""


class OffsetError(DtrLabError, ValueError):
    """Reward shift would leave a non-positive reward."""


class StageMismatchError(DtrLabError, ValueError):
    """History stage or length does not match what the policy expects."""


class UnsupportedSurrogateError(DtrLabError, ValueError):
    """Operation is not defined for this surrogate kind (or the key is unknown)."""


class PreconditionError(DtrLabError, ValueError):
    """Inputs fall outside the region where the requested check is defined."""


class SingularDesignError(DtrLabError, RuntimeError):
    """Regression design matrix could not be solved even after ridge."""


class TrainingDivergedError(DtrLabError, RuntimeError):
    """Objective or gradient became NaN/Inf during training."""
