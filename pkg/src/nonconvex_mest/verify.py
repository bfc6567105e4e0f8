"""Brute-force checks of the closed-form proximal maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .penalty import PenaltyKind, make_penalty, penalty_value, prox_scalar

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def prox_objective(spec, x, z, nu):
    """``1/2 (x - z)^2 + nu * rho(x)``, elementwise."""
    return 0.5 * (np.asarray(x) - z) ** 2 + nu * penalty_value(spec, np.asarray(x, dtype=float))


def _breakpoints(spec):
    pts = [0.0, spec.lam]
    if spec.kind is PenaltyKind.SCAD:
        pts.append(spec.a * spec.lam)
    elif spec.kind is PenaltyKind.MCP:
        pts.append(spec.b * spec.lam)
    elif spec.kind is PenaltyKind.CAPPED_L1:
        pts.append(spec.kink)
    return np.array(pts)


def prox_oracle(spec, z, nu, grid: int = 4001, refine: int = 90):
    """Minimize the scalar prox objective by dense grid search plus golden-section refinement.

    The minimizer lies between 0 and ``z``; the grid covers that interval
    and includes the penalty breakpoints.  Each best grid point is refined
    inside its neighbouring cells.  Vectorized over ``z``.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    nu = np.broadcast_to(np.asarray(nu, dtype=float), z.shape)
    sgn = np.where(z < 0, -1.0, 1.0)
    za = np.abs(z)
    # search on |x| in [0, |z|]; the objective is symmetric under sign flip
    u = np.linspace(0.0, 1.0, grid)
    X = za[:, None] * u[None, :]
    bp = _breakpoints(spec)
    X = np.concatenate([X, np.broadcast_to(np.minimum(bp[None, :], za[:, None]), (za.size, bp.size)),
                        za[:, None]], axis=1)
    X.sort(axis=1)
    F = prox_objective(spec, X, za[:, None], nu[:, None])
    j = np.argmin(F, axis=1)
    rows = np.arange(za.size)
    lo = X[rows, np.maximum(j - 1, 0)]
    hi = X[rows, np.minimum(j + 1, X.shape[1] - 1)]
    best_x, best_f = X[rows, j], F[rows, j]
    for lo_b, hi_b in ((lo, best_x), (best_x, hi)):
        a, b = lo_b.copy(), hi_b.copy()
        c = b - GOLDEN * (b - a)
        d = a + GOLDEN * (b - a)
        fc, fd = prox_objective(spec, c, za, nu), prox_objective(spec, d, za, nu)
        for _ in range(refine):
            left = fc < fd
            b = np.where(left, d, b)
            a = np.where(left, a, c)
            c_new = b - GOLDEN * (b - a)
            d_new = a + GOLDEN * (b - a)
            c, d = np.where(left, c_new, d), np.where(left, c, d_new)
            fc, fd = (np.where(left, prox_objective(spec, c, za, nu), fd),
                      np.where(left, fc, prox_objective(spec, d, za, nu)))
        x = 0.5 * (a + b)
        f = prox_objective(spec, x, za, nu)
        better = f < best_f
        best_x, best_f = np.where(better, x, best_x), np.where(better, f, best_f)
    return sgn * best_x, best_f


@dataclass(frozen=True)
class ProxCheckResult:
    kind: str
    instances: int
    max_deviation: float
    passed: bool
    worst: dict


def prox_instances(kind: str, count: int, seed: int = 0, a: float = 3.7, b: float = 3.5, c: float = 1.0):
    """Random ``(spec, z, nu)`` instances with lam in [0.1, 2], z in [-10, 10] and a valid nu."""
    rng = np.random.Generator(np.random.PCG64(seed))
    nu_max = min(1.0, a - 1.0, b) - 0.05
    lam = rng.uniform(0.1, 2.0, count)
    nu = rng.uniform(0.1, nu_max, count)
    z = rng.uniform(-10.0, 10.0, count)
    return [(make_penalty(kind, lam[i], a=a, b=b, c=c), z[i], nu[i]) for i in range(count)]


def check_prox(kind: str, count: int = 1000, seed: int = 0, tol: float = 1e-8, prox_fn=prox_scalar,
               a: float = 3.7, b: float = 3.5, c: float = 1.0) -> ProxCheckResult:
    """Closed-form prox objective versus the brute-force oracle on random instances.

    The oracle runs once for all instances at ``lam = 1`` and is mapped back
    with ``prox_lam(z) = lam * prox_1(z / lam)``, which holds for every
    penalty here since ``rho_lam(t) = lam^2 rho_1(t / lam)``.
    """
    inst = prox_instances(kind, count, seed, a, b, c)
    lam = np.array([s.lam for s, _, _ in inst])
    z = np.array([zz for _, zz, _ in inst])
    nu = np.array([n for _, _, n in inst])
    unit = make_penalty(kind, 1.0, a=a, b=b, c=c)
    s_or, _ = prox_oracle(unit, z / lam, nu)
    worst_dev, worst = -1.0, {}
    for i, (spec, zi, nui) in enumerate(inst):
        x = float(prox_fn(spec, zi, nui))
        x_or = float(lam[i] * s_or[i])
        f_closed = float(prox_objective(spec, x, zi, nui))
        f_or = float(prox_objective(spec, x_or, zi, nui))
        dev = abs(f_closed - f_or)
        if dev > worst_dev:
            worst_dev = dev
            worst = {"penalty": spec.describe(), "z": zi, "nu": nui, "closed_form": x, "oracle": x_or,
                     "objective_closed": f_closed, "objective_oracle": f_or}
    return ProxCheckResult(kind, count, worst_dev, worst_dev <= tol, worst)
