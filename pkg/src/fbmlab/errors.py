"""Exception types raised across fbmlab."""


class FbmlabError(Exception):
    """Base class for all fbmlab errors."""


class DomainError(FbmlabError, ValueError):
    """An argument lies outside the domain of the function."""


class RegimeError(FbmlabError, ValueError):
    """Parameters fall outside the (d, H) regime an operation is valid for."""


class ConfigError(FbmlabError, ValueError):
    """Invalid numerical configuration."""


class SingularityError(FbmlabError, ArithmeticError):
    """A determinant that must stay positive did not."""


class DivergenceError(FbmlabError, ArithmeticError):
    """The requested integral is infinite."""


class FactorizationError(FbmlabError, ArithmeticError):
    """Covariance matrix not positive definite within jitter tolerance."""


class EmbeddingError(FbmlabError, RuntimeError):
    """Circulant embedding produced negative eigenvalues (internal error)."""
