"""Exception hierarchy shared by every stochfuzz module."""


class StochFuzzError(Exception):
    """Base class for all package errors."""


class SupportOverflowError(StochFuzzError, ValueError):
    """A membership support does not fit inside its universe."""


class ZeroMassError(StochFuzzError, ValueError):
    """Defuzzification of a mass vector that sums to zero."""


class DisjointSupportError(StochFuzzError, ValueError):
    """A product of densities vanishes everywhere."""


class NoRuleFiresError(StochFuzzError, ValueError):
    """Every rule has zero firing strength at the requested inputs."""


class ZeroSeedError(StochFuzzError, ValueError):
    """An LFSR was seeded with the all-zero lockup state."""


class InvalidTapsError(StochFuzzError, ValueError):
    """A feedback tap set cannot drive a non-singular shift register."""


class NoCoincidenceError(StochFuzzError, RuntimeError):
    """A simulation run accepted no samples.

    ``analytic_rate`` holds the acceptance probability per cycle predicted
    by the exact engine, which is usually the quickest diagnosis.
    """

    def __init__(self, message: str, analytic_rate: float = float("nan")):
        super().__init__(message)
        self.analytic_rate = analytic_rate


class InsufficientSamplesError(StochFuzzError, ValueError):
    """A goodness-of-fit test was asked to judge too few samples."""


class ConfigError(StochFuzzError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
