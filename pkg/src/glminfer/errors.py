"""Exception types raised by the numerical routines."""


class GlmOverflowError(FloatingPointError):
    """Linear predictor left the family's numerically safe range."""


class SingularHessianError(RuntimeError):
    """Empirical Hessian is singular or indefinite; direct inversion is refused."""


class DegenerateColumnError(RuntimeError):
    """A weighted-design column has (near-)zero residual scale in node-wise regression."""


class ContrastError(ValueError):
    """Contrast vector failed validation (normalization or unsupported estimator)."""


class ConfigError(ValueError):
    """Invalid, incomplete, or unknown configuration input."""
