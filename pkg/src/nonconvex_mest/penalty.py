"""Separable sparsity penalties: values, derivatives, proximal maps.

Every penalty here acts coordinatewise on a vector (or entrywise on a
matrix).  The weakly convex ones (L1, SCAD, MCP) admit a convex side
function ``g(beta) = (rho(beta) + mu/2 ||beta||^2) / lam``; the capped-L1
penalty does not, and is only usable through its majorant or in the
solver's experimental mode.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class PenaltyError(ValueError):
    """Base class for penalty misuse."""


class PenaltyDomainError(PenaltyError):
    """Derivative requested at a point where the penalty is not differentiable."""


class InvalidProxParameter(PenaltyError):
    """Prox weight outside the range where the closed form is a minimizer."""


class UnsupportedPenalty(PenaltyError):
    """Operation needs a finite weak-convexity constant."""


class PenaltyKind(str, enum.Enum):
    L1 = "l1"
    SCAD = "scad"
    MCP = "mcp"
    CAPPED_L1 = "capped"


@dataclass(frozen=True)
class PenaltySpec:
    """A separable regularizer ``rho_lam`` and its constants.

    ``a`` is only read for SCAD, ``b`` for MCP and ``c`` for capped-L1.
    """

    kind: PenaltyKind
    lam: float
    a: float = 3.7
    b: float = 3.5
    c: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", PenaltyKind(self.kind))
        if not self.lam > 0:
            raise PenaltyError(f"lambda must be positive, got {self.lam}")
        if self.kind is PenaltyKind.SCAD and not self.a > 2:
            raise PenaltyError(f"SCAD needs a > 2, got {self.a}")
        if self.kind is PenaltyKind.MCP and not self.b > 0:
            raise PenaltyError(f"MCP needs b > 0, got {self.b}")
        if self.kind is PenaltyKind.CAPPED_L1 and not self.c >= 1:
            raise PenaltyError(f"capped-L1 needs c >= 1, got {self.c}")

    @property
    def L(self) -> float:
        return 1.0

    @property
    def mu(self) -> float | None:
        """Weak-convexity constant; ``None`` for capped-L1 (no finite value)."""
        if self.kind is PenaltyKind.L1:
            return 0.0
        if self.kind is PenaltyKind.SCAD:
            return 1.0 / (self.a - 1.0)
        if self.kind is PenaltyKind.MCP:
            return 1.0 / self.b
        return None

    @property
    def majorant_mu(self) -> tuple[float, float]:
        """``(mu1, mu2)`` of the convex-majorant argument (capped-L1 only)."""
        if self.kind is not PenaltyKind.CAPPED_L1:
            return (self.mu, 0.0)
        return (0.0, 1.0 / self.c)

    @property
    def kink(self) -> float | None:
        """Positive non-differentiable point of capped-L1."""
        if self.kind is PenaltyKind.CAPPED_L1:
            return self.lam * self.c / 2.0
        return None

    def with_lam(self, lam: float) -> "PenaltySpec":
        return PenaltySpec(self.kind, lam, self.a, self.b, self.c)

    def describe(self) -> str:
        extra = {PenaltyKind.SCAD: f", a={self.a}", PenaltyKind.MCP: f", b={self.b}",
                 PenaltyKind.CAPPED_L1: f", c={self.c}"}.get(self.kind, "")
        return f"{self.kind.value}(lam={self.lam:g}{extra})"


def make_penalty(kind, lam, a=3.7, b=3.5, c=1.0) -> PenaltySpec:
    return PenaltySpec(PenaltyKind(str(kind).lower()), float(lam), float(a), float(b), float(c))


def _out(x, like):
    return float(x) if np.ndim(like) == 0 else x


def penalty_value(spec: PenaltySpec, t):
    """Elementwise ``rho_lam(t)``."""
    t_abs = np.abs(np.asarray(t, dtype=float))
    lam = spec.lam
    if spec.kind is PenaltyKind.L1:
        val = lam * t_abs
    elif spec.kind is PenaltyKind.SCAD:
        a = spec.a
        val = np.where(
            t_abs <= lam,
            lam * t_abs,
            np.where(
                t_abs <= a * lam,
                -(t_abs**2 - 2 * a * lam * t_abs + lam**2) / (2 * (a - 1)),
                (a + 1) * lam**2 / 2,
            ),
        )
    elif spec.kind is PenaltyKind.MCP:
        b = spec.b
        val = np.where(t_abs <= b * lam, lam * t_abs - t_abs**2 / (2 * b), b * lam**2 / 2)
    else:
        val = np.minimum(lam**2 * spec.c / 2, lam * t_abs)
    return _out(val, t)


def penalty_total(spec: PenaltySpec, beta) -> float:
    """``rho_lam(beta)`` summed over all coordinates/entries."""
    return float(np.sum(penalty_value(spec, np.asarray(beta, dtype=float))))


def penalty_derivative(spec: PenaltySpec, t):
    """Elementwise ``rho_lam'(t)`` for ``t != 0``.

    Raises
    ------
    PenaltyDomainError
        If any ``t`` is zero (use :func:`subgradient_interval`) or sits on a
        capped-L1 kink.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t == 0):
        raise PenaltyDomainError("rho is not differentiable at 0; subgradient is [-lam*L, lam*L]")
    t_abs, sgn = np.abs(t), np.sign(t)
    lam = spec.lam
    if spec.kind is PenaltyKind.L1:
        d = np.full_like(t_abs, lam)
    elif spec.kind is PenaltyKind.SCAD:
        d = np.where(t_abs <= lam, lam, np.maximum(spec.a * lam - t_abs, 0.0) / (spec.a - 1))
    elif spec.kind is PenaltyKind.MCP:
        d = lam * np.maximum(1 - t_abs / (lam * spec.b), 0.0)
    else:
        if np.any(t_abs == spec.kink):
            raise PenaltyDomainError(f"capped-L1 has a kink at |t| = {spec.kink}")
        d = np.where(t_abs < spec.kink, lam, 0.0)
    return _out(sgn * d, t)


def subgradient_interval(spec: PenaltySpec) -> tuple[float, float]:
    """Subdifferential of ``rho_lam`` at zero."""
    return (-spec.lam * spec.L, spec.lam * spec.L)


def prox_limit(spec: PenaltySpec) -> float:
    """Supremum of prox weights for which the closed forms are valid."""
    if spec.kind is PenaltyKind.SCAD:
        return spec.a - 1.0
    if spec.kind is PenaltyKind.MCP:
        return spec.b
    return np.inf


def prox_scalar(spec: PenaltySpec, z, nu: float):
    """Elementwise ``argmin_x 1/2 (x - z)^2 + nu * rho_lam(x)``.

    SCAD and MCP use their piecewise closed forms, which are minimizers only
    while the scalar objective stays convex (``nu < a - 1`` resp. ``nu < b``).
    Capped-L1 compares the best point on each side of the kink and keeps the
    lower objective, preferring the smaller magnitude on ties.
    """
    if not nu > 0:
        raise InvalidProxParameter(f"prox weight must be positive, got {nu}")
    if nu >= prox_limit(spec):
        raise InvalidProxParameter(
            f"prox weight {nu} outside the valid range (< {prox_limit(spec)}) for {spec.kind.value}"
        )
    z_arr = np.asarray(z, dtype=float)
    z_abs, sgn = np.abs(z_arr), np.sign(z_arr)
    lam = spec.lam
    if spec.kind is PenaltyKind.L1:
        x = np.maximum(z_abs - nu * lam, 0.0)
    elif spec.kind is PenaltyKind.SCAD:
        a = spec.a
        x = np.where(
            z_abs <= nu * lam,
            0.0,
            np.where(
                z_abs <= (nu + 1) * lam,
                z_abs - nu * lam,
                np.where(
                    z_abs <= a * lam,
                    (z_abs - a * nu * lam / (a - 1)) / (1 - nu / (a - 1)),
                    z_abs,
                ),
            ),
        )
    elif spec.kind is PenaltyKind.MCP:
        b = spec.b
        x = np.where(
            z_abs <= nu * lam,
            0.0,
            np.where(z_abs <= b * lam, (z_abs - nu * lam) / (1 - nu / b), z_abs),
        )
    else:
        x = _capped_prox_magnitude(spec, z_abs, nu)
    return _out(sgn * x, z)


def _capped_prox_magnitude(spec, z_abs, nu):
    knee = spec.kink
    inner = np.minimum(np.maximum(z_abs - nu * spec.lam, 0.0), knee)
    outer = np.maximum(z_abs, knee)
    f_inner = 0.5 * (inner - z_abs) ** 2 + nu * penalty_value(spec, inner)
    f_outer = 0.5 * (outer - z_abs) ** 2 + nu * penalty_value(spec, outer)
    return np.where(f_outer < f_inner, outer, inner)


@dataclass(frozen=True)
class ProxRequest:
    """Shifted gradient point with the prox weight and pre-scaling of one step."""

    z: np.ndarray
    nu: float
    shrink: float = 1.0

    def __post_init__(self):
        if not self.nu > 0:
            raise InvalidProxParameter(f"nu must be positive, got {self.nu}")
        if not 0 < self.shrink <= 1:
            raise InvalidProxParameter(f"shrink must lie in (0, 1], got {self.shrink}")


def prox_vector(spec: PenaltySpec, req: ProxRequest) -> np.ndarray:
    return np.asarray(prox_scalar(spec, req.shrink * np.asarray(req.z, dtype=float), req.nu))


def side_function(spec: PenaltySpec, beta, strict: bool = True) -> float:
    """``g(beta) = (rho_lam(beta) + mu/2 ||beta||_2^2) / lam``.

    With ``strict=False`` capped-L1 is accepted and evaluated with ``mu = 0``
    (the resulting ``g`` is not convex).
    """
    mu = spec.mu
    if mu is None:
        if strict:
            raise UnsupportedPenalty("capped-L1 has no convex side function")
        mu = 0.0
    beta = np.asarray(beta, dtype=float)
    return (penalty_total(spec, beta) + 0.5 * mu * float(np.sum(beta * beta))) / spec.lam


def side_prox(spec: PenaltySpec, v, weight: float, strict: bool = True) -> np.ndarray:
    """``argmin_x 1/2 ||x - v||^2 + weight * g(x)``, coordinatewise.

    ``weight = lam / eta`` gives the unconstrained composite step; the g-ball
    projection bisects on ``weight``.
    """
    v = np.asarray(v, dtype=float)
    if weight == 0:
        return v.copy()
    mu = spec.mu
    if mu is None:
        if strict:
            raise UnsupportedPenalty("capped-L1 has no convex side function")
        mu = 0.0
    shrink = 1.0 / (1.0 + weight * mu / spec.lam)
    return prox_vector(spec, ProxRequest(v, (weight / spec.lam) * shrink, shrink))


@dataclass(frozen=True)
class CappedMajorant:
    """Convex coordinatewise upper bound of capped-L1 anchored at a point.

    Coordinates where the anchor lies inside the cap use ``lam |t|``; the
    others use the constant cap value.
    """

    lam: float
    c: float
    linear_mask: np.ndarray

    def value(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.where(self.linear_mask, self.lam * np.abs(t), self.lam**2 * self.c / 2)

    def total(self, beta) -> float:
        return float(np.sum(self.value(beta)))

    @property
    def mu1(self) -> float:
        return 0.0

    @property
    def mu2(self) -> float:
        return 1.0 / self.c


def capped_l1_majorant(spec: PenaltySpec, beta_tilde) -> CappedMajorant:
    if spec.kind is not PenaltyKind.CAPPED_L1:
        raise UnsupportedPenalty("majorant construction is specific to capped-L1")
    beta_tilde = np.asarray(beta_tilde, dtype=float)
    return CappedMajorant(spec.lam, spec.c, np.abs(beta_tilde) <= spec.kink)
