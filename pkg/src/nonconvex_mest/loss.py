"""Empirical losses: corrected linear regression, GLMs and the graphical Lasso."""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.special import expit


class NotPositiveDefinite(ValueError):
    """Graphical-Lasso loss evaluated outside the positive-definite cone."""


class Provenance(str, enum.Enum):
    ADDITIVE_NOISE = "additive"
    MISSING_DATA = "missing"
    CLEAN = "clean"


class GlmFamily(str, enum.Enum):
    LOGISTIC = "logistic"
    GAUSSIAN = "gaussian"


def _symmetrize(M):
    return 0.5 * (M + M.T)


def log1pexp(t):
    """Overflow-safe ``log(1 + exp(t))``."""
    t = np.asarray(t, dtype=float)
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))


@dataclass(frozen=True, eq=False)
class CorrectedLinearLoss:
    """``L(beta) = 1/2 beta' Gamma beta - gamma' beta`` with a possibly indefinite Gamma."""

    gamma_hat: np.ndarray
    gamma_vec: np.ndarray
    provenance: Provenance = Provenance.CLEAN
    n: int | None = None

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.gamma_hat, dtype=float))
        g = np.asarray(self.gamma_vec, dtype=float).ravel()
        if G.shape != (g.size, g.size):
            raise ValueError(f"Gamma has shape {G.shape} but gamma has length {g.size}")
        object.__setattr__(self, "gamma_hat", _symmetrize(G))
        object.__setattr__(self, "gamma_vec", g)
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    kind = "corrected_linear"

    @property
    def dim(self) -> int:
        return self.gamma_vec.size

    @property
    def shape(self) -> tuple:
        return (self.dim,)

    def value(self, beta) -> float:
        beta = np.asarray(beta, dtype=float)
        return float(0.5 * beta @ self.gamma_hat @ beta - self.gamma_vec @ beta)

    def gradient(self, beta) -> np.ndarray:
        return self.gamma_hat @ np.asarray(beta, dtype=float) - self.gamma_vec

    def hessian(self, beta=None) -> np.ndarray:
        return self.gamma_hat


@dataclass(frozen=True, eq=False)
class GlmLoss:
    """Negative GLM log-likelihood ``1/n sum psi(x_i' beta) - y_i x_i' beta``."""

    X: np.ndarray
    y: np.ndarray
    family: GlmFamily = GlmFamily.LOGISTIC

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.size:
            raise ValueError(f"design {X.shape} does not match response length {y.size}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("GLM data must be finite")
        family = GlmFamily(self.family)
        if family is GlmFamily.LOGISTIC and not np.all((y == 0) | (y == 1)):
            raise ValueError("logistic responses must be 0/1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "family", family)

    kind = "glm"

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def shape(self) -> tuple:
        return (self.dim,)

    def _psi(self, t):
        if self.family is GlmFamily.LOGISTIC:
            return log1pexp(t)
        return 0.5 * t * t

    def _dpsi(self, t):
        if self.family is GlmFamily.LOGISTIC:
            return expit(t)
        return t

    def _d2psi(self, t):
        if self.family is GlmFamily.LOGISTIC:
            s = expit(t)
            return s * (1 - s)
        return np.ones_like(t)

    def value(self, beta) -> float:
        eta = self.X @ np.asarray(beta, dtype=float)
        return float(np.mean(self._psi(eta) - self.y * eta))

    def gradient(self, beta) -> np.ndarray:
        eta = self.X @ np.asarray(beta, dtype=float)
        return self.X.T @ (self._dpsi(eta) - self.y) / self.n

    def hessian(self, beta) -> np.ndarray:
        w = self._d2psi(self.X @ np.asarray(beta, dtype=float))
        return (self.X.T * w) @ self.X / self.n


@dataclass(frozen=True, eq=False)
class GlassoLoss:
    """``L(Theta) = tr(Sigma_hat Theta) - log det Theta`` on symmetric PD matrices."""

    sigma_hat: np.ndarray
    n: int | None = None

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.sigma_hat, dtype=float))
        if S.shape[0] != S.shape[1]:
            raise ValueError(f"Sigma_hat must be square, got {S.shape}")
        object.__setattr__(self, "sigma_hat", _symmetrize(S))

    kind = "glasso"

    @property
    def dim(self) -> int:
        return self.sigma_hat.shape[0]

    @property
    def shape(self) -> tuple:
        return (self.dim, self.dim)

    def _chol(self, Theta):
        Theta = np.asarray(Theta, dtype=float)
        if Theta.shape != self.shape:
            raise ValueError(f"Theta has shape {Theta.shape}, expected {self.shape}")
        try:
            return np.linalg.cholesky(_symmetrize(Theta))
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite("Theta is not positive definite") from exc

    def value(self, Theta) -> float:
        C = self._chol(Theta)
        logdet = 2.0 * float(np.sum(np.log(np.diag(C))))
        return float(np.sum(self.sigma_hat * Theta)) - logdet

    def gradient(self, Theta) -> np.ndarray:
        C = self._chol(Theta)
        Cinv = np.linalg.inv(C)
        return self.sigma_hat - Cinv.T @ Cinv


LossHandle = Union[CorrectedLinearLoss, GlmLoss, GlassoLoss]


def loss_value(loss: LossHandle, point) -> float:
    return loss.value(point)


def loss_gradient(loss: LossHandle, point) -> np.ndarray:
    return loss.gradient(point)


def taylor_error(loss: LossHandle, beta1, beta2) -> float:
    """First-order Taylor remainder of the loss at ``beta2`` in direction ``beta1 - beta2``."""
    beta1 = np.asarray(beta1, dtype=float)
    beta2 = np.asarray(beta2, dtype=float)
    return loss.value(beta1) - loss.value(beta2) - float(np.vdot(loss.gradient(beta2), beta1 - beta2))


def prediction_error(loss: LossHandle, beta_tilde, beta_star) -> float:
    """``<grad L(beta_tilde) - grad L(beta_star), beta_tilde - beta_star>``."""
    beta_tilde = np.asarray(beta_tilde, dtype=float)
    beta_star = np.asarray(beta_star, dtype=float)
    diff = loss.gradient(beta_tilde) - loss.gradient(beta_star)
    return float(np.vdot(diff, beta_tilde - beta_star))


def build_corrected_gamma(Z, y, sigma_w) -> CorrectedLinearLoss:
    """Errors-in-variables surrogates ``Gamma = Z'Z/n - Sigma_w``, ``gamma = Z'y/n``.

    ``sigma_w`` may be a p x p matrix or a scalar multiple of the identity.
    """
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if Z.ndim != 2 or Z.shape[0] != y.size:
        raise ValueError(f"Z {Z.shape} does not match y of length {y.size}")
    n, p = Z.shape
    Sw = np.asarray(sigma_w, dtype=float)
    if Sw.ndim == 0:
        Sw = float(Sw) * np.eye(p)
    if Sw.shape != (p, p):
        raise ValueError(f"Sigma_w must be {p}x{p}, got {Sw.shape}")
    gamma_hat = Z.T @ Z / n - Sw
    provenance = Provenance.CLEAN if not np.any(Sw) else Provenance.ADDITIVE_NOISE
    return CorrectedLinearLoss(gamma_hat, Z.T @ y / n, provenance, n)


def build_missing_gamma(Z, y, vartheta: float) -> CorrectedLinearLoss:
    """Unbiased surrogates from a design with entries missing at rate ``vartheta``.

    Missing entries are ``NaN`` and are zero-filled.  Off-diagonal Gram
    entries are divided by ``(1 - vartheta)^2``, diagonal entries and the
    cross-moment vector by ``(1 - vartheta)``.
    """
    if not 0 <= vartheta < 1:
        raise ValueError(f"vartheta must lie in [0, 1), got {vartheta}")
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if Z.ndim != 2 or Z.shape[0] != y.size:
        raise ValueError(f"Z {Z.shape} does not match y of length {y.size}")
    n = Z.shape[0]
    missing = np.isnan(Z)
    empty = np.all(missing, axis=0)
    if np.any(empty):
        warnings.warn(f"columns {np.flatnonzero(empty).tolist()} are entirely missing; "
                      "their Gamma rows/columns are set to 0", RuntimeWarning, stacklevel=2)
    Zf = np.where(missing, 0.0, Z)
    keep = 1.0 - vartheta
    gram = Zf.T @ Zf / n
    gamma_hat = gram / keep**2
    np.fill_diagonal(gamma_hat, np.diag(gram) / keep)
    return CorrectedLinearLoss(gamma_hat, Zf.T @ y / (n * keep), Provenance.MISSING_DATA, n)
