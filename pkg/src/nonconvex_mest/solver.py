"""Composite gradient descent for ``min L(beta) + rho(beta)`` s.t. ``g(beta) <= R``.

The objective is split as ``(L - mu/2 ||.||^2) + lam * g`` so that the
nonsmooth part is convex.  Each step takes a gradient step on the modified
loss, applies the closed-form prox of ``lam/eta * g`` and, if the result
leaves the g-ball, projects the gradient point onto the ball instead.  The
inverse stepsize ``eta`` is found by doubling until the quadratic upper
model holds at the candidate; it never decreases during a run.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .loss import GlassoLoss, NotPositiveDefinite
from .penalty import (
    PenaltyKind,
    PenaltySpec,
    UnsupportedPenalty,
    penalty_derivative,
    penalty_total,
    prox_scalar,
    side_function,
    side_prox,
)

PROJECTED = 1
PSD_CLIPPED = 2
MAX_DOUBLINGS = 60


class SolverError(RuntimeError):
    pass


class ProjectionError(SolverError):
    pass


class Divergence(SolverError):
    pass


class Mode(str, enum.Enum):
    STRICT = "strict"
    EXPERIMENTAL_CAPPED = "experimental"


@dataclass(frozen=True)
class SolverConfig:
    """Hyperparameters of one run.

    ``init`` is ``"zero"``, ``"random"`` (uniform in an L2 ball of radius
    ``init_radius``, drawn from ``seed``) or an explicit starting point.
    ``"zero"`` means the identity for graphical-Lasso problems.
    """

    R: float
    eta: float = 1.0
    max_iters: int = 1000
    tol_obj: float = 1e-10
    tol_stat: float = 1e-6
    init: object = "zero"
    init_radius: float = 1.5
    seed: int = 0
    mode: Mode = Mode.STRICT
    psd_floor: float = 1e-6
    backtracking: bool = True
    window: int = 5

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not self.R > 0:
            raise ValueError(f"R must be positive, got {self.R}")
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.max_iters < 0 or self.window < 1:
            raise ValueError("max_iters must be >= 0 and window >= 1")
        if not self.psd_floor > 0:
            raise ValueError("psd_floor must be positive")


class TraceRow(NamedTuple):
    iter: int
    objective: float
    opt_error: float
    stat_error: float
    eta: float
    projected_flag: int


@dataclass
class SolverState:
    beta: np.ndarray
    t: int
    objective: float
    eta: float
    flags: int = 0
    trace: list = field(default_factory=list)


@dataclass
class StationaryPoint:
    beta: np.ndarray
    residual: float
    objective: float
    iterations: int
    converged: bool
    stop_reason: str
    eta: float
    trace: list
    iterates: list | None = None

    def summary(self) -> dict:
        return {
            "residual": self.residual,
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "eta": self.eta,
        }


def _experimental(penalty: PenaltySpec, cfg: SolverConfig) -> bool:
    if penalty.kind is PenaltyKind.CAPPED_L1:
        if cfg.mode is not Mode.EXPERIMENTAL_CAPPED:
            raise UnsupportedPenalty("capped-L1 needs mode='experimental' (no convex side function)")
        return True
    return False


def _mu(penalty, cfg) -> float:
    return 0.0 if _experimental(penalty, cfg) else penalty.mu


def side_value(beta, penalty, cfg) -> float:
    return side_function(penalty, beta, strict=not _experimental(penalty, cfg))


def objective(loss, penalty, beta) -> float:
    """Composite objective ``L(beta) + rho(beta)``."""
    return loss.value(beta) + penalty_total(penalty, beta)


def project_l1_ball(v, R: float) -> np.ndarray:
    """Euclidean projection onto ``{||x||_1 <= R}`` (sort and threshold)."""
    v = np.asarray(v, dtype=float)
    flat = v.ravel()
    if np.abs(flat).sum() <= R:
        return v.copy()
    u = np.sort(np.abs(flat))[::-1]
    css = np.cumsum(u)
    j = np.arange(1, u.size + 1)
    rho = np.nonzero(u * j > css - R)[0][-1]
    theta = (css[rho] - R) / (rho + 1.0)
    return (np.sign(flat) * np.maximum(np.abs(flat) - theta, 0.0)).reshape(v.shape)


def project_g_ball(v, penalty: PenaltySpec, R: float, tol: float = 1e-12,
                   max_steps: int = 200) -> np.ndarray:
    """Projection onto ``{g(beta) <= R}`` by bisection on the Lagrange multiplier.

    For multiplier ``w`` the minimizer of ``1/2 ||x - v||^2 + w g(x)`` is a
    closed-form prox, and ``g`` of it decreases continuously in ``w``.  The
    returned point is on the feasible side with ``g`` within ``tol``
    (relative) of ``R``.
    """
    v = np.asarray(v, dtype=float)
    if side_function(penalty, v) <= R:
        return v.copy()
    lo, hi = 0.0, penalty.lam
    x_hi = side_prox(penalty, v, hi)
    steps = 0
    while side_function(penalty, x_hi) > R:
        lo, hi = hi, 2.0 * hi
        x_hi = side_prox(penalty, v, hi)
        steps += 1
        if steps > max_steps:
            raise ProjectionError("could not bracket the projection multiplier")
    for _ in range(max_steps):
        if R - side_function(penalty, x_hi) <= tol * R:
            return x_hi
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        x_mid = side_prox(penalty, v, mid)
        if side_function(penalty, x_mid) > R:
            lo = mid
        else:
            hi, x_hi = mid, x_mid
    if R - side_function(penalty, x_hi) <= 1e-6 * R:
        return x_hi
    raise ProjectionError(f"g-ball projection did not converge in {max_steps} bisection steps")


def _enforce_omega(Theta, floor):
    """Symmetrize and lift eigenvalues below ``floor``; returns (matrix, clipped)."""
    Theta = 0.5 * (Theta + Theta.T)
    w, V = np.linalg.eigh(Theta)
    if w[0] >= floor:
        return Theta, False
    Theta = (V * np.maximum(w, floor)) @ V.T
    return 0.5 * (Theta + Theta.T), True


def _constrained_prox(v, eta, loss, penalty, cfg):
    """Solve the composite subproblem at gradient point ``v``; returns (point, flags)."""
    flags = 0
    if _experimental(penalty, cfg):
        cand = np.asarray(prox_scalar(penalty, v, 1.0 / eta))
        if side_function(penalty, cand, strict=False) > cfg.R:
            # inner convex approximation of the nonconvex capped ball
            cand = project_l1_ball(v, cfg.R)
            flags |= PROJECTED
    else:
        cand = side_prox(penalty, v, penalty.lam / eta)
        if side_function(penalty, cand) > cfg.R:
            cand = project_g_ball(v, penalty, cfg.R)
            flags |= PROJECTED
    if isinstance(loss, GlassoLoss):
        cand, clipped = _enforce_omega(cand, cfg.psd_floor)
        if clipped:
            flags |= PSD_CLIPPED
            if side_value(cand, penalty, cfg) > cfg.R * (1 + 1e-9):
                cand = project_g_ball(cand, penalty, cfg.R)
                cand = 0.5 * (cand + cand.T)
                flags |= PROJECTED
    return cand, flags


def composite_step(state: SolverState, loss, penalty: PenaltySpec, cfg: SolverConfig,
                   grad=None) -> SolverState:
    """One composite gradient update with stepsize backtracking."""
    mu = _mu(penalty, cfg)
    beta = state.beta
    if grad is None:
        grad = loss.gradient(beta)
    if not np.all(np.isfinite(grad)):
        raise Divergence(f"non-finite gradient at iteration {state.t} (eta={state.eta:g})")
    grad_bar = grad - mu * beta
    f0 = loss.value(beta)
    eta = state.eta
    for _ in range(MAX_DOUBLINGS):
        cand, flags = _constrained_prox(beta - grad_bar / eta, eta, loss, penalty, cfg)
        try:
            f1 = loss.value(cand)
        except NotPositiveDefinite:
            eta *= 2.0
            continue
        if not cfg.backtracking:
            break
        d = cand - beta
        dd = float(np.vdot(d, d))
        taylor_bar = f1 - f0 - float(np.vdot(grad, d)) - 0.5 * mu * dd
        if taylor_bar <= 0.5 * eta * dd + 1e-12 * max(1.0, abs(f0)):
            break
        eta *= 2.0
    else:
        raise Divergence(f"stepsize search failed at iteration {state.t} (eta={eta:g})")
    obj = f1 + penalty_total(penalty, cand)
    if not np.isfinite(obj):
        raise Divergence(f"non-finite objective at iteration {state.t + 1}")
    return SolverState(cand, state.t + 1, obj, eta, flags, state.trace)


def _interior_residual(beta, grad, penalty):
    b = np.ravel(beta)
    gr = np.ravel(grad)
    if b.size == 0:
        return 0.0
    res = np.empty_like(b)
    zero = b == 0
    res[zero] = np.maximum(np.abs(gr[zero]) - penalty.lam * penalty.L, 0.0)
    nz = ~zero
    if penalty.kind is PenaltyKind.CAPPED_L1:
        # derivative of the majorant anchored at beta
        deriv = np.where(np.abs(b[nz]) <= penalty.kink, penalty.lam * np.sign(b[nz]), 0.0)
    else:
        deriv = penalty_derivative(penalty, b[nz])
    res[nz] = np.abs(gr[nz] + deriv)
    return float(res.max())


def check_stationarity(beta, loss, penalty: PenaltySpec, cfg: SolverConfig, grad=None,
                       eta: float | None = None) -> float:
    """Stationarity residual of a feasible point.

    Interior points: sup-norm distance of ``-grad L`` to the subdifferential
    of ``rho``.  Points on the g-ball boundary: ``eta * ||beta - T(beta)||``
    where ``T`` is the composite gradient map (prox and projection, no
    backtracking); it vanishes exactly at fixed points.
    """
    beta = np.asarray(beta, dtype=float)
    if grad is None:
        grad = loss.gradient(beta)
    if side_value(beta, penalty, cfg) >= cfg.R * (1 - 1e-6):
        eta = cfg.eta if eta is None else eta
        v = beta - (grad - _mu(penalty, cfg) * beta) / eta
        mapped, _ = _constrained_prox(v, eta, loss, penalty, cfg)
        return float(eta * np.linalg.norm(beta - mapped))
    return _interior_residual(beta, grad, penalty)


def initial_point(loss, penalty: PenaltySpec, cfg: SolverConfig) -> np.ndarray:
    shape = loss.shape
    matrix = isinstance(loss, GlassoLoss)
    init = cfg.init
    if isinstance(init, str):
        if init == "zero":
            beta = np.eye(shape[0]) if matrix else np.zeros(shape)
        elif init == "random":
            rng = np.random.Generator(np.random.PCG64(cfg.seed))
            d = int(np.prod(shape))
            u = rng.standard_normal(d)
            u *= cfg.init_radius * rng.random() ** (1.0 / d) / np.linalg.norm(u)
            if matrix:
                U = u.reshape(shape)
                beta = np.eye(shape[0]) + 0.5 * (U + U.T)
            else:
                beta = u
        else:
            raise ValueError(f"unknown init {init!r}")
    else:
        beta = np.array(init, dtype=float).reshape(shape)
    if matrix:
        beta, _ = _enforce_omega(beta, cfg.psd_floor)
    if side_value(beta, penalty, cfg) > cfg.R:
        beta = project_l1_ball(beta, cfg.R) if _experimental(penalty, cfg) \
            else project_g_ball(beta, penalty, cfg.R)
    return beta


def _errors(beta, beta_ref, beta_star):
    opt = float(np.linalg.norm(beta - beta_ref)) if beta_ref is not None else float("nan")
    stat = float(np.linalg.norm(beta - beta_star)) if beta_star is not None else float("nan")
    return opt, stat


def run(loss, penalty: PenaltySpec, cfg: SolverConfig, beta_ref=None, beta_star=None,
        record_iterates: bool = False) -> StationaryPoint:
    """Iterate composite steps until a stopping rule fires.

    Stops when the objective changes by less than ``tol_obj`` (relative)
    over ``cfg.window`` steps, when the stationarity residual drops below
    ``tol_stat``, or after ``max_iters`` steps.  ``converged`` is false only
    in the last case.
    """
    mu = _mu(penalty, cfg)
    if cfg.eta < mu:
        raise ValueError(f"eta={cfg.eta} must be at least mu={mu}")
    beta = initial_point(loss, penalty, cfg)
    state = SolverState(beta, 0, objective(loss, penalty, beta), cfg.eta)
    state.trace.append(TraceRow(0, state.objective, *_errors(beta, beta_ref, beta_star), state.eta, 0))
    iterates = [beta.copy()] if record_iterates else None
    objectives = [state.objective]
    stop = "max_iters"
    grad = None
    for _ in range(cfg.max_iters):
        grad = loss.gradient(state.beta)
        if check_stationarity(state.beta, loss, penalty, cfg, grad=grad, eta=state.eta) < cfg.tol_stat:
            stop = "stationarity"
            break
        state = composite_step(state, loss, penalty, cfg, grad=grad)
        grad = None
        state.trace.append(TraceRow(state.t, state.objective, *_errors(state.beta, beta_ref, beta_star),
                                    state.eta, state.flags))
        if record_iterates:
            iterates.append(state.beta.copy())
        objectives.append(state.objective)
        if len(objectives) > cfg.window:
            prev = objectives[-1 - cfg.window]
            if abs(state.objective - prev) <= cfg.tol_obj * max(1.0, abs(state.objective)):
                stop = "objective"
                break
    residual = check_stationarity(state.beta, loss, penalty, cfg, grad=grad, eta=state.eta)
    if stop == "max_iters" and residual < cfg.tol_stat:
        stop = "stationarity"
    return StationaryPoint(state.beta, residual, state.objective, state.t, stop != "max_iters",
                           stop, state.eta, state.trace, iterates)


@dataclass(frozen=True)
class ContractionEstimate:
    """Diagnostic-only contraction factor and iteration-count estimate (``c = 1``)."""

    kappa: float
    varphi: float
    t_star: int | None
    in_range: bool


def contraction_estimate(alpha, mu, eta, tau, k, n, p, delta=None, gap=None, lam=None,
                         R=None, L=1.0) -> ContractionEstimate:
    """Contraction factor ``kappa`` and the iteration bound ``T*(delta)``.

    ``t_star`` is only computed when ``delta``, the objective ``gap``,
    ``lam`` and ``R`` are all supplied and ``kappa`` lies in (0, 1).
    """
    denom = 2.0 * alpha - mu
    if not denom > 0:
        raise ValueError(f"need 2*alpha > mu, got alpha={alpha}, mu={mu}")
    varphi = tau * k * np.log(p) / n / denom
    kappa = (1.0 - denom / (8.0 * eta) + varphi) / (1.0 - varphi) if varphi != 1 else np.inf
    in_range = bool(0 < kappa < 1)
    t_star = None
    if in_range and None not in (delta, gap, lam, R):
        d2 = float(delta) ** 2
        inv = np.log(1.0 / kappa)
        head = 2.0 * np.log(max(gap, d2) / d2) / inv
        tail = (1.0 + np.log(2.0) / inv) * np.log(max(np.log(max(lam * R * L / d2, np.e)), 1.0))
        t_star = int(np.ceil(head + tail))
    return ContractionEstimate(float(kappa), float(varphi), t_star, in_range)


@dataclass(frozen=True)
class RscFit:
    """Fitted lower-curvature constants; ``ok`` is false when no positive ``alpha`` fits."""

    alpha1: float
    tau1: float
    alpha2: float
    tau2: float
    ok: bool
    n_negative: int


def _sparse_direction(rng, p, k):
    d = np.zeros(p)
    idx = rng.choice(p, size=k, replace=False)
    d[idx] = rng.standard_normal(k)
    return d


def _cone_direction(rng, p, k):
    d = _sparse_direction(rng, p, k)
    S = d != 0
    tail = rng.standard_normal(p) * ~S
    budget = 3.0 * np.abs(d[S]).sum() * rng.random()
    if np.abs(tail).sum() > 0:
        tail *= budget / np.abs(tail).sum()
    return d + tail


def _truncate(d, k):
    out = np.zeros_like(d)
    idx = np.argsort(-np.abs(d))[:k]
    out[idx] = d[idx]
    return out


def _fit_pair(e, a, b, restricted):
    alpha = float(np.min(e[restricted] / a[restricted]))
    if not alpha > 0:
        return alpha, float("nan"), False
    tau = float(max(0.0, np.max((alpha * a - e) / b)))
    return alpha, tau, True


def rsc_probe(loss, beta_star, n_pairs: int = 200, seed=0, k: int | None = None) -> RscFit:
    """Fit restricted strong convexity constants from sampled directions.

    Samples ``Delta`` in two regimes (``||Delta||_2`` in (0, 1] and in
    [1, 3]) and evaluates ``E(Delta) = <grad L(beta* + Delta) - grad L(beta*), Delta>``.
    ``alpha`` is the smallest curvature ratio over k-sparse directions; ``tau``
    is then the smallest tolerance making the lower bound hold on every
    sample, including cone-shaped and low-curvature directions.
    """
    beta_star = np.asarray(beta_star, dtype=float)
    shape = beta_star.shape
    p = beta_star.size
    n = getattr(loss, "n", None)
    if n is None:
        raise ValueError("rsc_probe needs the sample size on the loss (loss.n)")
    if k is None:
        k = int(np.count_nonzero(beta_star)) or max(1, int(np.sqrt(p)))
    k = min(k, p)
    rate = np.log(p) / n
    rng = np.random.Generator(np.random.PCG64(seed))
    g0 = np.ravel(loss.gradient(beta_star))

    dirs, restricted = [], []
    hess = getattr(loss, "hessian", None)
    if hess is not None and loss.shape == (p,):
        w, V = np.linalg.eigh(hess(beta_star))
        for j in range(min(3, p)):
            dirs += [V[:, j], _truncate(V[:, j], k)]
            restricted += [k >= p, True]
    for i in range(n_pairs):
        if i % 2 == 0:
            dirs.append(_sparse_direction(rng, p, k))
            restricted.append(True)
        else:
            dirs.append(_cone_direction(rng, p, k))
            restricted.append(False)

    fits = []
    for lo, hi in ((1e-3, 1.0), (1.0, 3.0)):
        e, a, b = [], [], []
        for d in dirs:
            d = d / np.linalg.norm(d) * rng.uniform(lo, hi)
            gd = np.ravel(loss.gradient(beta_star + d.reshape(shape)))
            e.append(float((gd - g0) @ d))
            l2, l1 = np.linalg.norm(d), np.abs(d).sum()
            if hi <= 1.0:
                a.append(l2**2), b.append(rate * l1**2)
            else:
                a.append(l2), b.append(np.sqrt(rate) * l1)
        fits.append((np.array(e), np.array(a), np.array(b)))

    mask = np.array(restricted)
    n_neg = int(sum(np.sum(f[0] < 0) for f in fits))
    if all(np.all(f[0] <= 0) for f in fits):
        return RscFit(float("nan"), float("nan"), float("nan"), float("nan"), False, n_neg)
    a1, t1, ok1 = _fit_pair(*fits[0], mask)
    a2, t2, ok2 = _fit_pair(*fits[1], mask)
    return RscFit(a1, t1, a2, t2, ok1 and ok2, n_neg)
