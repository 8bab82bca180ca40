"""Exception types shared across the package."""


class GspestError(Exception):
    """Base class for all package-specific errors."""


class InvalidGraphError(GspestError):
    """Raised when a weighted graph violates its structural contract."""


class DisconnectedGraphError(InvalidGraphError):
    """Raised when an operation requires a connected graph and the input is not."""


class UnstableFilterError(GspestError):
    """Raised when a filter response is undefined on the given spectrum
    (vanishing rational denominator, or inverse-spectrum terms on a
    disconnected graph)."""


class SingularMomentsError(GspestError):
    """Raised when sample moments are too ill-conditioned to invert."""


class PerturbationInfeasibleError(GspestError):
    """Raised when a constrained topology perturbation cannot be satisfied
    within the retry budget."""


class ConfigError(GspestError):
    """Raised on invalid experiment configuration input."""
