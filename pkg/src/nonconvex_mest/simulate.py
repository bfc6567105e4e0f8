"""Seeded synthetic data for the simulation studies.

All randomness goes through ``numpy.random.Generator(PCG64(seed))``.  PCG64
output for a given seed is stable across platforms and numpy releases, so
generated data (and everything downstream) replays bit for bit.  Trial seeds
are derived with :func:`child_seed`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz
from scipy.special import expit

from .penalty import PenaltySpec, make_penalty, side_function, penalty_total

PRNG_NAME = "numpy.random.PCG64"


def rng_for(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def child_seed(master_seed: int, *index: int) -> int:
    """Deterministic 64-bit seed for a trial, independent of execution order."""
    ss = np.random.SeedSequence([int(master_seed) & (2**64 - 1), *[int(i) for i in index]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def default_sparsity(p: int) -> int:
    return int(math.isqrt(p))


def default_lambda(n: int, p: int) -> float:
    return math.sqrt(math.log(p) / n)


def oracle_radius(penalty: PenaltySpec, beta_star, rule: str = "side", slack: float = 1.1) -> float:
    """Constraint radius keeping ``beta_star`` feasible.

    ``rule="side"`` uses ``slack * g(beta_star)``.  ``rule="paper"`` uses
    ``slack * rho(beta_star) / lam``, which coincides for L1 but leaves
    ``beta_star`` outside the g-ball for SCAD/MCP once ``mu > 0``.
    """
    if rule == "side":
        return slack * side_function(penalty, beta_star, strict=False)
    if rule == "paper":
        return slack * penalty_total(penalty, beta_star) / penalty.lam
    raise ValueError(f"unknown radius rule {rule!r}")


@dataclass(frozen=True)
class DesignSpec:
    n: int
    p: int
    covariance: str = "identity"
    zeta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be positive")
        if self.covariance not in ("identity", "toeplitz"):
            raise ValueError(f"unknown covariance {self.covariance!r}")
        if not 0 <= self.zeta < 1:
            raise ValueError(f"zeta must lie in [0, 1), got {self.zeta}")

    def sigma(self) -> np.ndarray:
        if self.covariance == "identity":
            return np.eye(self.p)
        return toeplitz(self.zeta ** np.arange(self.p))


@dataclass(frozen=True)
class TargetSpec:
    p: int
    k: int | None = None
    normalize: bool = True
    seed: int = 0

    @property
    def sparsity(self) -> int:
        return default_sparsity(self.p) if self.k is None else int(self.k)


@dataclass(frozen=True)
class CorruptionSpec:
    mode: str = "additive"
    sigma_w: float = 0.2
    vartheta: float = 0.0
    noise_sd: float = 0.1

    def __post_init__(self):
        if self.mode not in ("additive", "missing", "none"):
            raise ValueError(f"unknown corruption mode {self.mode!r}")
        if not 0 <= self.vartheta < 1:
            raise ValueError(f"vartheta must lie in [0, 1), got {self.vartheta}")


def gen_target(spec: TargetSpec) -> np.ndarray:
    k = spec.sparsity
    if k > spec.p:
        raise ValueError(f"k={k} exceeds p={spec.p}")
    rng = rng_for(spec.seed)
    beta = np.zeros(spec.p)
    support = rng.choice(spec.p, size=k, replace=False)
    beta[np.sort(support)] = rng.standard_normal(k)
    if spec.normalize and k > 0:
        beta /= np.linalg.norm(beta)
    return beta


def gen_design(spec: DesignSpec) -> np.ndarray:
    rng = rng_for(spec.seed)
    W = rng.standard_normal((spec.n, spec.p))
    if spec.covariance == "identity" or spec.zeta == 0:
        return W
    return W @ np.linalg.cholesky(spec.sigma()).T


def gen_linear_response(X, beta_star, noise_sd: float, seed) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    y = X @ np.asarray(beta_star, dtype=float)
    if noise_sd > 0:
        y = y + noise_sd * rng_for(seed).standard_normal(X.shape[0])
    return y


def corrupt(X, spec: CorruptionSpec, seed) -> np.ndarray:
    """Observed covariates; missing entries come back as ``NaN``."""
    X = np.asarray(X, dtype=float)
    rng = rng_for(seed)
    if spec.mode == "additive":
        if spec.sigma_w == 0:
            return X.copy()
        return X + spec.sigma_w * rng.standard_normal(X.shape)
    if spec.mode == "missing":
        return np.where(rng.random(X.shape) < spec.vartheta, np.nan, X)
    return X.copy()


def gen_logistic_response(X, beta_star, seed) -> np.ndarray:
    prob = expit(np.asarray(X, dtype=float) @ np.asarray(beta_star, dtype=float))
    return (rng_for(seed).random(prob.shape) < prob).astype(float)


def noise_sd_for_snr(beta_star, sigma_x, snr: float) -> float:
    """Response noise level giving ``beta' Sigma_x beta / sigma_eps^2 = snr``."""
    beta_star = np.asarray(beta_star, dtype=float)
    Sx = np.asarray(sigma_x, dtype=float)
    signal = float(beta_star @ (Sx @ beta_star if Sx.ndim == 2 else Sx * beta_star))
    return math.sqrt(signal / snr)


@dataclass(frozen=True, eq=False)
class PrecisionSample:
    theta: np.ndarray
    sigma: np.ndarray
    samples: np.ndarray | None
    sigma_hat: np.ndarray | None


def gen_sparse_precision(p: int, s: int, seed, n: int | None = None,
                         magnitude=(0.2, 0.5), diag_margin: float = 0.5) -> PrecisionSample:
    """Sparse diagonally dominant precision matrix, plus ``n`` Gaussian samples.

    ``s`` counts off-diagonal nonzero entries; they come in symmetric pairs,
    so ``s // 2`` pairs are placed.  The diagonal is the absolute row sum plus
    ``diag_margin`` (at least 0.1), which bounds the smallest eigenvalue below
    by ``diag_margin``.
    """
    if s > p * (p - 1):
        raise ValueError(f"s={s} exceeds p(p-1)={p * (p - 1)}")
    rng = rng_for(seed)
    iu = np.triu_indices(p, 1)
    pairs = rng.choice(iu[0].size, size=s // 2, replace=False)
    theta = np.zeros((p, p))
    vals = rng.uniform(*magnitude, size=pairs.size) * rng.choice([-1.0, 1.0], size=pairs.size)
    theta[iu[0][pairs], iu[1][pairs]] = vals
    theta = theta + theta.T
    np.fill_diagonal(theta, np.abs(theta).sum(axis=1) + max(diag_margin, 0.1))
    sigma = np.linalg.inv(theta)
    sigma = 0.5 * (sigma + sigma.T)
    samples = sigma_hat = None
    if n is not None:
        samples = rng.standard_normal((n, p)) @ np.linalg.cholesky(sigma).T
        sigma_hat = samples.T @ samples / n
    return PrecisionSample(theta, sigma, samples, sigma_hat)


@dataclass(frozen=True, eq=False)
class LinearProblem:
    """Everything a corrected-linear trial needs."""

    X: np.ndarray
    Z: np.ndarray
    y: np.ndarray
    beta_star: np.ndarray
    sigma_x: np.ndarray
    corruption: CorruptionSpec


def make_linear_problem(n, p, k=None, corruption=CorruptionSpec(), seed=0,
                        covariance="identity", zeta=0.0) -> LinearProblem:
    """Draw target, design, response and corruption from one master seed."""
    beta = gen_target(TargetSpec(p, k, True, child_seed(seed, 0)))
    design = DesignSpec(n, p, covariance, zeta, child_seed(seed, 1))
    X = gen_design(design)
    y = gen_linear_response(X, beta, corruption.noise_sd, child_seed(seed, 2))
    Z = corrupt(X, corruption, child_seed(seed, 3))
    return LinearProblem(X, Z, y, beta, design.sigma(), corruption)


def make_penalty_for(kind: str, n: int, p: int, a=3.7, b=3.5, c=1.0, lam=None) -> PenaltySpec:
    return make_penalty(kind, default_lambda(n, p) if lam is None else lam, a=a, b=b, c=c)
