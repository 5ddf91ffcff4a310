"""Exception types shared across the package."""


class HypFppError(Exception):
    """Base class for all package errors."""


class ModelError(HypFppError):
    """Invalid graph model parameters or model spec string."""


class ResourceLimitError(HypFppError):
    """A construction would exceed the configured vertex cap."""


class ValidityError(HypFppError):
    """A word-metric query involves vertices too close to the truncation boundary."""


class CertificationError(HypFppError):
    """A distance or geodesic cannot be certified exact within the finite ball."""


class NonAdjacentStepError(HypFppError):
    """A path contains a step between non-adjacent vertices."""


class NoEligiblePairError(HypFppError):
    """No vertex pair satisfies the crossing precondition."""


class InsufficientPointsError(HypFppError):
    """Too few positive-survival points to fit a rate."""


class ConfigError(HypFppError):
    """Malformed or incomplete experiment configuration."""


class RunFailedError(HypFppError):
    """Too many replications of an experiment failed."""
