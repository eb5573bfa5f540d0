"""Exponential-family losses and empirical score/Hessian assembly.

The per-observation loss is the negative log-likelihood (up to constants)
``-y * eta + b(eta)`` with linear predictor ``eta = x' xi``.  Supported
cumulants ``b``:

    gaussian:  b(a) = a^2 / 2
    logistic:  b(a) = log(1 + e^a)
    poisson:   b(a) = e^a
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import GlmOverflowError

GAUSSIAN = "gaussian"
LOGISTIC = "logistic"
POISSON = "poisson"
FAMILY_KINDS = (GAUSSIAN, LOGISTIC, POISSON)

# exp(eta) overflows float64 slightly above 709; fail loudly well before that
POISSON_ETA_MAX = 700.0


@dataclass(frozen=True)
class GlmFamily:
    """One of the supported one-parameter exponential families."""

    kind: str

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}; expected one of {FAMILY_KINDS}")

    # -- cumulant and derivatives (vectorized; scalars pass through as floats) --

    def cumulant(self, eta):
        """b(eta), computed in overflow-safe form."""
        eta = np.asarray(eta, dtype=np.float64)
        if self.kind == GAUSSIAN:
            out = 0.5 * eta * eta
        elif self.kind == LOGISTIC:
            # log(1 + e^a) = log1p(e^{-|a|}) + max(a, 0)
            out = np.log1p(np.exp(-np.abs(eta))) + np.maximum(eta, 0.0)
        else:
            self._check_poisson_eta(eta)
            out = np.exp(eta)
        return out if out.ndim else float(out)

    def mean(self, eta):
        """b'(eta): the conditional mean of the response."""
        eta = np.asarray(eta, dtype=np.float64)
        if self.kind == GAUSSIAN:
            out = eta.copy()
        elif self.kind == LOGISTIC:
            out = expit(eta)
        else:
            self._check_poisson_eta(eta)
            out = np.exp(eta)
        return out if out.ndim else float(out)

    def weight(self, eta):
        """b''(eta): the IRLS weight; nonnegative for every family."""
        eta = np.asarray(eta, dtype=np.float64)
        if self.kind == GAUSSIAN:
            out = np.ones_like(eta)
        elif self.kind == LOGISTIC:
            mu = expit(eta)
            out = mu * (1.0 - mu)
        else:
            self._check_poisson_eta(eta)
            out = np.exp(eta)
        return out if out.ndim else float(out)

    # -- loss surface -------------------------------------------------------

    def loss(self, y, eta):
        """-y * eta + b(eta)."""
        y = np.asarray(y, dtype=np.float64)
        out = -y * np.asarray(eta, dtype=np.float64) + self.cumulant(eta)
        return out if out.ndim else float(out)

    def loss_grad(self, y, eta):
        """d/d_eta of the loss: -y + b'(eta)."""
        y = np.asarray(y, dtype=np.float64)
        out = -y + self.mean(eta)
        return out if out.ndim else float(out)

    def loss_hess(self, y, eta):
        """Second eta-derivative of the loss; equals b''(eta) for these families."""
        del y  # independent of the response for the canonical links used here
        return self.weight(eta)

    # -- validation ---------------------------------------------------------

    def validate_response(self, y):
        y = np.asarray(y, dtype=np.float64)
        if self.kind == LOGISTIC:
            if not np.all((y == 0.0) | (y == 1.0)):
                raise ValueError("logistic family requires a response in {0, 1}")
        elif self.kind == POISSON:
            if np.any(y < 0) or not np.all(y == np.floor(y)):
                raise ValueError("poisson family requires a nonnegative integer-valued response")

    def intercept_only_mle(self, y):
        """Intercept of the covariate-free model; raises when it sits at infinity."""
        ybar = float(np.mean(y))
        if self.kind == GAUSSIAN:
            return ybar
        if self.kind == LOGISTIC:
            if ybar <= 0.0 or ybar >= 1.0:
                raise ValueError("intercept-only fit undefined: constant binary response")
            return float(np.log(ybar / (1.0 - ybar)))
        if ybar <= 0.0:
            raise ValueError("intercept-only fit undefined: all-zero count response")
        return float(np.log(ybar))

    def _check_poisson_eta(self, eta):
        if np.any(eta > POISSON_ETA_MAX):
            bad = float(np.max(eta))
            raise GlmOverflowError(
                f"poisson linear predictor {bad:.6g} exceeds the safe limit {POISSON_ETA_MAX:g}"
            )


@dataclass(frozen=True)
class Dataset:
    """Design matrix with a leading intercept column of ones, plus the response.

    Arrays are stored as read-only float64 so a Dataset can be shared across
    threads without copies.
    """

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("X must be a 2-d array")
        if X.shape[1] < 1 or not np.all(X[:, 0] == 1.0):
            raise ValueError("column 0 of X must be identically 1 (intercept)")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValueError("y must be a vector with one entry per row of X")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1] - 1


@dataclass(frozen=True)
class CoefficientVector:
    """Intercept plus penalized coefficients, (beta0, beta)."""

    beta0: float
    beta: np.ndarray

    def __post_init__(self):
        beta = np.ascontiguousarray(self.beta, dtype=np.float64)
        beta.flags.writeable = False
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "beta0", float(self.beta0))

    @classmethod
    def from_xi(cls, xi) -> "CoefficientVector":
        xi = np.asarray(xi, dtype=np.float64)
        return cls(float(xi[0]), xi[1:].copy())

    @property
    def xi(self) -> np.ndarray:
        return np.concatenate(([self.beta0], self.beta))

    @property
    def p(self) -> int:
        return self.beta.shape[0]


def _checked_etas(family: GlmFamily, data: Dataset, xi: np.ndarray) -> np.ndarray:
    etas = data.X @ xi
    if family.kind == POISSON and np.any(etas > POISSON_ETA_MAX):
        idx = int(np.argmax(etas))
        raise GlmOverflowError(
            f"poisson linear predictor overflow at sample index {idx} "
            f"(eta = {etas[idx]:.6g} > {POISSON_ETA_MAX:g})"
        )
    return etas


def empirical_loss(family: GlmFamily, data: Dataset, xi: CoefficientVector) -> float:
    """Mean loss over the sample."""
    etas = _checked_etas(family, data, xi.xi)
    return float(np.mean(family.loss(data.y, etas)))


def saturated_loss(family: GlmFamily, y) -> float:
    """Mean loss of the saturated model; anchors deviance ratios at zero."""
    y = np.asarray(y, dtype=np.float64)
    if family.kind == GAUSSIAN:
        return float(-0.5 * np.mean(y * y))
    if family.kind == LOGISTIC:
        return 0.0
    pos = y > 0
    vals = np.zeros_like(y)
    vals[pos] = -y[pos] * np.log(y[pos]) + y[pos]
    return float(np.mean(vals))


def score_vector(family: GlmFamily, data: Dataset, xi: CoefficientVector) -> np.ndarray:
    """Gradient of the mean loss: (1/n) X' (mean(eta) - y)."""
    etas = _checked_etas(family, data, xi.xi)
    return data.X.T @ (family.mean(etas) - data.y) / data.n


def hessian_matrix(family: GlmFamily, data: Dataset, xi: CoefficientVector) -> np.ndarray:
    """Mean-loss Hessian (1/n) X' diag(b''(eta)) X, assembled from the weighted design.

    The weighted-design factorization keeps the result PSD up to rounding; the
    output is symmetrized exactly.
    """
    etas = _checked_etas(family, data, xi.xi)
    sw = np.sqrt(family.weight(etas))
    Xw = data.X * sw[:, None]
    H = Xw.T @ Xw / data.n
    return (H + H.T) / 2.0
