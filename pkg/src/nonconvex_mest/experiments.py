"""Simulation studies and bound checkers.

Every study is a deterministic function of its config dataclass: trial
seeds are derived from ``config.seed`` with :func:`~.simulate.child_seed`,
records are assembled in a fixed order regardless of ``threads``, and the
metadata written next to the CSV is enough to rerun the study.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import io
from ._version import __version__
from .loss import GlassoLoss, GlmLoss, build_corrected_gamma, build_missing_gamma, prediction_error
from .penalty import PenaltyKind, PenaltySpec, capped_l1_majorant
from .simulate import (
    PRNG_NAME,
    CorruptionSpec,
    child_seed,
    default_lambda,
    default_sparsity,
    gen_design,
    gen_logistic_response,
    gen_sparse_precision,
    gen_target,
    DesignSpec,
    TargetSpec,
    make_linear_problem,
    make_penalty_for,
    oracle_radius,
)
from .solver import Mode, SolverConfig, SolverError, rsc_probe, run

log = logging.getLogger(__name__)

CONE_SLACK = 1.5


def _pmap(fn, items, threads: int = 1):
    """Ordered map; the output order never depends on ``threads``."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _config_dict(cfg) -> dict:
    return {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)}


def _config_from_dict(cls, d: dict):
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in d:
            v = d[f.name]
            kwargs[f.name] = tuple(v) if isinstance(v, list) else v
    return cls(**kwargs)


def sample_size(p: int, k: int, factor: float) -> int:
    """``floor(factor * k * log p)``."""
    return int(math.floor(factor * k * math.log(p)))


def cone_ok(delta, k: int, slack: float = CONE_SLACK) -> bool:
    """``||d||_1 <= slack * 4 sqrt(k) ||d||_2`` (the cone relation with slack)."""
    d = np.ravel(delta)
    return bool(np.abs(d).sum() <= slack * 4.0 * math.sqrt(max(k, 0)) * np.linalg.norm(d) + 1e-12)


# ---------------------------------------------------------------- reports


@dataclass
class ExperimentReport:
    """Per-trial records plus the metadata needed to regenerate them."""

    kind: str
    columns: list
    records: list
    metadata: dict
    summary: dict = field(default_factory=dict)
    traces: list | None = None
    trace_columns: list | None = None

    def save(self, out_dir, stem: str | None = None) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = stem or self.kind
        paths = {"records": out / f"{stem}.csv", "metadata": out / f"{stem}.json"}
        io.write_table(paths["records"], self.columns, self.records)
        if self.traces is not None:
            paths["traces"] = out / f"{stem}_traces.csv"
            io.write_table(paths["traces"], self.trace_columns, self.traces)
        io.write_json(paths["metadata"], {"metadata": self.metadata, "summary": self.summary})
        return paths


def _metadata(kind: str, cfg) -> dict:
    return {
        "kind": kind,
        "config": _config_dict(cfg),
        "code_version": __version__,
        "prng": PRNG_NAME,
        "seed_rule": "child_seed(config.seed, *trial_index) via numpy SeedSequence",
    }


def rerun(metadata: dict, threads: int = 1) -> ExperimentReport:
    """Regenerate a report from its metadata sidecar (or the ``metadata`` block of it)."""
    meta = metadata.get("metadata", metadata)
    kind = meta["kind"]
    if kind not in RUNNERS:
        raise ValueError(f"unknown experiment kind {kind!r}")
    cls, runner = RUNNERS[kind]
    return runner(_config_from_dict(cls, meta["config"]), threads=threads)


# ---------------------------------------------------------------- bound checks


@dataclass(frozen=True)
class BoundCheck:
    """One observed error against its theoretical bound.

    ``satisfied`` is ``None`` when the curvature precondition fails, in
    which case the bound is not applicable (``rhs`` is NaN).
    """

    name: str
    lhs: float
    rhs: float
    satisfied: bool | None

    @property
    def applicable(self) -> bool:
        return self.satisfied is not None


def bound_values(penalty: PenaltySpec, alpha1: float, k: int) -> dict | None:
    """Right-hand sides of the l2, l1 and prediction bounds, or ``None`` if not applicable."""
    lam, L = penalty.lam, penalty.L
    if penalty.kind is PenaltyKind.CAPPED_L1:
        mu1, mu2 = penalty.majorant_mu
        d = 2 * alpha1 - mu1 - mu2
        if not d > 0:
            return None
        return {
            "l2": 7 * lam * L * math.sqrt(k) / (2 * d),
            "l1": 28 * lam * L * k / d,
            "pred": lam**2 * L**2 * k * (21 / (4 * d) + 49 * (mu1 + mu2) / (8 * d**2)),
        }
    mu = penalty.mu
    d = 4 * alpha1 - 3 * mu
    if not d > 0:
        return None
    return {
        "l2": 6 * lam * L * math.sqrt(k) / d,
        "l1": 24 * lam * L * k / d,
        "pred": lam**2 * L**2 * k * (9 / d + 27 * mu / d**2),
    }


def theorem1_check(beta_tilde, beta_star, penalty: PenaltySpec, alpha1: float, loss=None,
                   k: int | None = None) -> list[BoundCheck]:
    """Compare a stationary point's errors with the l2, l1 and prediction bounds.

    ``alpha1`` is the plug-in curvature (typically from :func:`rsc_probe`).
    The prediction check needs ``loss``; without it that check is skipped.
    Capped-L1 uses the constants of its majorant-based variant.
    """
    beta_tilde = np.asarray(beta_tilde, dtype=float)
    beta_star = np.asarray(beta_star, dtype=float)
    if k is None:
        k = int(np.count_nonzero(beta_star))
    delta = beta_tilde - beta_star
    lhs = {"l2": float(np.linalg.norm(delta)), "l1": float(np.abs(delta).sum())}
    if loss is not None:
        lhs["pred"] = prediction_error(loss, beta_tilde, beta_star)
    rhs = bound_values(penalty, alpha1, k)
    out = []
    for name in lhs:
        if rhs is None:
            out.append(BoundCheck(name, lhs[name], float("nan"), None))
        else:
            out.append(BoundCheck(name, lhs[name], rhs[name], bool(lhs[name] <= rhs[name] + 1e-12)))
    return out


def capped_majorant_penalty(penalty: PenaltySpec, beta_tilde):
    """Majorant used when checking a capped-L1 stationary point (exposed for reports)."""
    return capped_l1_majorant(penalty, beta_tilde)


# ---------------------------------------------------------------- shared helpers


def _linear_loss(problem, corruption: CorruptionSpec):
    if corruption.mode == "missing":
        return build_missing_gamma(problem.Z, problem.y, corruption.vartheta)
    sigma_w = corruption.sigma_w**2 if corruption.mode == "additive" else 0.0
    return build_corrected_gamma(problem.Z, problem.y, sigma_w)


def _corruption(mode, sigma_w, vartheta, noise_sd) -> CorruptionSpec:
    return CorruptionSpec(mode=mode, sigma_w=sigma_w, vartheta=vartheta, noise_sd=noise_sd)


def _penalty(kind, n, p, a, b, c=1.0) -> PenaltySpec:
    return make_penalty_for(kind, n, p, a=a, b=b, c=c)


def _mode_for(pen):
    return Mode.EXPERIMENTAL_CAPPED if pen.kind is PenaltyKind.CAPPED_L1 else Mode.STRICT


def _radius(pen, beta_star, rule):
    return oracle_radius(pen, beta_star, rule=rule)


def _error_row(beta, beta_star, k):
    d = np.ravel(beta) - np.ravel(beta_star)
    return float(np.linalg.norm(d)), float(np.abs(d).sum()), cone_ok(d, k)


# ---------------------------------------------------------------- scaling


@dataclass(frozen=True)
class ScalingRun:
    """Error versus rescaled sample size ``n / (k log p)``."""

    p_list: tuple = (64, 128, 256)
    rescaled_samples: tuple = (2, 4, 6, 8, 10)
    trials: int = 20
    penalties: tuple = ("l1", "scad", "mcp")
    a: float = 3.7
    b: float = 3.5
    corruption: str = "additive"
    sigma_w: float = 0.2
    vartheta: float = 0.0
    noise_sd: float = 0.1
    radius_rule: str = "side"
    max_iters: int = 2000
    tol_stat: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.p_list or not self.rescaled_samples or not self.penalties:
            raise ValueError("p_list, rescaled_samples and penalties must be non-empty")


SCALING_COLUMNS = ["penalty", "p", "k", "n", "grid", "trial", "l2_error", "l1_error", "pred_error",
                   "residual", "converged", "iterations", "cone_ok", "status"]


def _scaling_cell(args):
    cfg, p, gi, grid, trial = args
    k = default_sparsity(p)
    n = sample_size(p, k, grid)
    corr = _corruption(cfg.corruption, cfg.sigma_w, cfg.vartheta, cfg.noise_sd)
    prob = make_linear_problem(n, p, k, corr, seed=child_seed(cfg.seed, p, gi, trial))
    loss = _linear_loss(prob, corr)
    rows = []
    for kind in cfg.penalties:
        pen = _penalty(kind, n, p, cfg.a, cfg.b)
        row = {"penalty": kind, "p": p, "k": k, "n": n, "grid": grid, "trial": trial}
        try:
            scfg = SolverConfig(R=_radius(pen, prob.beta_star, cfg.radius_rule), max_iters=cfg.max_iters,
                                tol_stat=cfg.tol_stat, mode=_mode_for(pen))
            sp = run(loss, pen, scfg)
            l2, l1, cone = _error_row(sp.beta, prob.beta_star, k)
            row.update(l2_error=l2, l1_error=l1, pred_error=prediction_error(loss, sp.beta, prob.beta_star),
                       residual=sp.residual, converged=sp.converged, iterations=sp.iterations,
                       cone_ok=cone, status="ok")
            if not cone:
                log.warning("cone relation violated: penalty=%s p=%d n=%d trial=%d", kind, p, n, trial)
        except SolverError as exc:
            row.update(status=f"error: {exc}")
        rows.append(row)
    return rows


def scaling_summary(records, penalties, p_list, grid, tol_stat) -> dict:
    cells = []
    for kind in penalties:
        for p in p_list:
            for g in grid:
                errs = [r["l2_error"] for r in records
                        if r["penalty"] == kind and r["p"] == p and r["grid"] == g and r.get("status") == "ok"
                        and r["residual"] <= tol_stat * 10]
                cells.append({"penalty": kind, "p": p, "grid": g, "n_ok": len(errs),
                              "mean_l2": float(np.mean(errs)) if errs else float("nan"),
                              "se_l2": float(np.std(errs, ddof=1) / math.sqrt(len(errs))) if len(errs) > 1
                              else float("nan")})
    return {"cells": cells, "checks": scaling_checks(cells, penalties, p_list, grid)}


def scaling_checks(cells, penalties, p_list, grid) -> dict:
    """Monotone decrease, halving from first to last grid point, and stacking across p."""
    mean = {(c["penalty"], c["p"], c["grid"]): c["mean_l2"] for c in cells}
    monotone, halving, stacking = {}, {}, {}
    for kind in penalties:
        for p in p_list:
            m = [mean[(kind, p, g)] for g in grid]
            monotone[f"{kind}/{p}"] = bool(all(x > y for x, y in zip(m, m[1:])))
            halving[f"{kind}/{p}"] = float(m[-1] / m[0])
        for g in grid:
            vals = [mean[(kind, p, g)] for p in p_list]
            stacking[f"{kind}/{g}"] = float((max(vals) - min(vals)) / np.mean(vals))
    return {"monotone": monotone, "last_over_first": halving, "stack_spread": stacking}


def run_scaling(cfg: ScalingRun, threads: int = 1) -> ExperimentReport:
    """Mean l2 error per (penalty, p, grid point) over independent trials."""
    jobs = [(cfg, p, gi, g, t) for p in cfg.p_list for gi, g in enumerate(cfg.rescaled_samples)
            for t in range(cfg.trials)]
    records = [r for rows in _pmap(_scaling_cell, jobs, threads) for r in rows]
    summary = scaling_summary(records, cfg.penalties, cfg.p_list, cfg.rescaled_samples, cfg.tol_stat)
    summary["excluded"] = sum(1 for r in records if r.get("status") != "ok" or r["residual"] > cfg.tol_stat * 10)
    return ExperimentReport("scaling", SCALING_COLUMNS, records, _metadata("scaling", cfg), summary)


# ---------------------------------------------------------------- convergence


@dataclass(frozen=True)
class ConvergenceRun:
    """Multi-start trajectories on one data set (linear with additive noise, or logistic)."""

    p: int = 128
    k: int | None = None
    n: int | None = None
    n_factor: float = 20.0
    n_inits: int = 10
    penalty: str = "l1"
    a: float = 3.7
    b: float = 3.5
    loss: str = "linear"
    sigma_w: float = 0.2
    noise_sd: float = 0.1
    radius_rule: str = "side"
    init_radius: float = 1.5
    max_iters: int = 2000
    tol_stat: float = 1e-9
    ref_factor: int = 10
    cluster_tol: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.loss not in ("linear", "logistic"):
            raise ValueError(f"loss must be 'linear' or 'logistic', got {self.loss!r}")
        if self.n_inits < 1:
            raise ValueError("n_inits must be >= 1")
        k = self.sparsity
        if k > self.p:
            raise ValueError(f"k={k} exceeds p={self.p}")

    @property
    def sparsity(self) -> int:
        return default_sparsity(self.p) if self.k is None else int(self.k)

    @property
    def sample_size(self) -> int:
        return sample_size(self.p, self.sparsity, self.n_factor) if self.n is None else int(self.n)


CONVERGENCE_COLUMNS = ["init", "cluster", "iterations", "converged", "residual", "stat_error", "point_stat_error",
                       "opt_plateau",
                       "ref_stat_error", "slope", "r2", "n_fit", "objective"]
TRACE_COLUMNS = ["init", "iter", "opt_error", "stat_error"]


def make_convergence_problem(cfg: ConvergenceRun):
    """Data, loss and target for a convergence study."""
    p, k, n = cfg.p, cfg.sparsity, cfg.sample_size
    if cfg.loss == "linear":
        corr = _corruption("additive", cfg.sigma_w, 0.0, cfg.noise_sd)
        prob = make_linear_problem(n, p, k, corr, seed=child_seed(cfg.seed, 0))
        return _linear_loss(prob, corr), prob.beta_star
    beta = gen_target(TargetSpec(p, k, True, child_seed(cfg.seed, 0, 0)))
    X = gen_design(DesignSpec(n, p, seed=child_seed(cfg.seed, 0, 1)))
    y = gen_logistic_response(X, beta, child_seed(cfg.seed, 0, 2))
    return GlmLoss(X, y, "logistic"), beta


def preplateau_fit(errors, knee: float = 1.1):
    """Least-squares line through ``log(errors)`` up to the plateau.

    The segment ends at the first iterate whose error is within ``knee``
    times the final error.  Returns ``(slope, r2, n_points)``.
    """
    e = np.asarray(errors, dtype=float)
    final = e[-1]
    idx = np.nonzero(e <= knee * final)[0]
    end = int(idx[0]) if idx.size else e.size - 1
    seg = e[: end + 1]
    t = np.arange(seg.size)
    ok = seg > 0
    if ok.sum() < 3:
        return float("nan"), float("nan"), int(ok.sum())
    res = stats.linregress(t[ok], np.log(seg[ok]))
    return float(res.slope), float(res.rvalue**2), int(ok.sum())


def _cluster(points, tol):
    reps, labels = [], []
    for b in points:
        for j, r in enumerate(reps):
            if np.linalg.norm(b - r) <= tol * max(1.0, np.linalg.norm(r)):
                labels.append(j)
                break
        else:
            reps.append(b)
            labels.append(len(reps) - 1)
    return reps, labels


def run_convergence(cfg: ConvergenceRun, threads: int = 1) -> ExperimentReport:
    """Trajectories from random starts, measured against per-cluster reference solutions.

    Final points are grouped into distinct stationary points; each group
    gets a reference from an extended run started at its first member.
    Optimization error is measured against the own-group reference; the
    plateau is the distance of the final point to the reference of the
    largest group.
    """
    loss, beta_star = make_convergence_problem(cfg)
    n, p = cfg.sample_size, cfg.p
    pen = _penalty(cfg.penalty, n, p, cfg.a, cfg.b)
    R = _radius(pen, beta_star, cfg.radius_rule)
    base = SolverConfig(R=R, max_iters=cfg.max_iters, tol_stat=cfg.tol_stat, tol_obj=0.0,
                        init="random", init_radius=cfg.init_radius, mode=_mode_for(pen))

    def one(i):
        scfg = dataclasses.replace(base, seed=child_seed(cfg.seed, 1, i))
        return run(loss, pen, scfg, beta_star=beta_star, record_iterates=True)

    runs = _pmap(one, range(cfg.n_inits), threads)
    reps, labels = _cluster([r.beta for r in runs], cfg.cluster_tol)
    ref_cfg = dataclasses.replace(base, max_iters=cfg.max_iters * cfg.ref_factor, tol_stat=min(cfg.tol_stat, 1e-12))
    refs = [run(loss, pen, dataclasses.replace(ref_cfg, init=rep)).beta for rep in reps]
    sizes = np.bincount(labels, minlength=len(reps))
    primary = int(np.argmax(sizes))
    ref_stat = float(np.linalg.norm(refs[primary] - beta_star))

    records, traces = [], []
    for i, (sp, lab) in enumerate(zip(runs, labels)):
        opt = [float(np.linalg.norm(b - refs[lab])) for b in sp.iterates]
        stat = [float(np.linalg.norm(b - beta_star)) for b in sp.iterates]
        slope, r2, n_fit = preplateau_fit(opt)
        records.append({"init": i, "cluster": lab, "iterations": sp.iterations, "converged": sp.converged,
                        "residual": sp.residual, "stat_error": stat[-1],
                        "point_stat_error": float(np.linalg.norm(refs[lab] - beta_star)),
                        "opt_plateau": float(np.linalg.norm(sp.beta - refs[primary])),
                        "ref_stat_error": ref_stat, "slope": slope, "r2": r2, "n_fit": n_fit,
                        "objective": sp.objective})
        traces.extend({"init": i, "iter": t, "opt_error": o, "stat_error": s}
                      for t, (o, s) in enumerate(zip(opt, stat)))
    # spread over the distinct stationary points reached, so solver noise cannot create one
    stat_errs = [r["point_stat_error"] for r in records]
    summary = {
        "n": n, "k": cfg.sparsity, "lam": pen.lam, "R": R,
        "distinct_points": len(reps),
        "cluster_sizes": sizes.tolist(),
        "spread": float(max(stat_errs) / min(stat_errs)),
        "all_slopes_negative": bool(all(r["slope"] < 0 for r in records)),
        "min_r2": float(min(r["r2"] for r in records)),
        "plateau_ok": bool(all(r["opt_plateau"] <= 2 * ref_stat for r in records)),
        "all_converged": bool(all(r["converged"] for r in records)),
    }
    return ExperimentReport("convergence", CONVERGENCE_COLUMNS, records, _metadata("convergence", cfg), summary,
                            traces, TRACE_COLUMNS)


# ---------------------------------------------------------------- breakdown


@dataclass(frozen=True)
class BreakdownRun:
    """Clean least squares with Toeplitz covariates, Lasso and SCAD at several ``a``."""

    zeta_list: tuple = (0.5, 0.9)
    a_list: tuple = (2.5, 3.7)
    include_lasso: bool = True
    p: int = 512
    k: int | None = None
    n_factor: float = 10.0
    n_inits: int = 10
    noise_sd: float = 0.1
    radius_rule: str = "side"
    init_radius: float = 1.5
    max_iters: int = 5000
    tol_obj: float = 1e-12
    tol_stat: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if any(not 0 <= z < 1 for z in self.zeta_list):
            raise ValueError("zeta must lie in [0, 1)")
        if not self.zeta_list:
            raise ValueError("zeta_list must be non-empty")


BREAKDOWN_COLUMNS = ["zeta", "penalty", "a", "init", "converged", "stop_reason", "iterations", "residual",
                     "stat_error", "opt_error"]
BREAKDOWN_TRACE_COLUMNS = ["zeta", "penalty", "a", "init", "iter", "opt_error", "stat_error"]


def run_breakdown(cfg: BreakdownRun, threads: int = 1) -> ExperimentReport:
    """Converged-run fractions as the design correlation grows."""
    p = cfg.p
    k = default_sparsity(p) if cfg.k is None else cfg.k
    n = sample_size(p, k, cfg.n_factor)
    settings = ([("l1", 3.7)] if cfg.include_lasso else []) + [("scad", a) for a in cfg.a_list]
    records, traces, fractions = [], [], {}
    for zi, zeta in enumerate(cfg.zeta_list):
        prob = make_linear_problem(n, p, k, _corruption("none", 0.0, 0.0, cfg.noise_sd),
                                   seed=child_seed(cfg.seed, zi), covariance="toeplitz", zeta=zeta)
        loss = build_corrected_gamma(prob.X, prob.y, 0.0)
        for kind, a in settings:
            pen = _penalty(kind, n, p, a, 3.5)
            base = SolverConfig(R=_radius(pen, prob.beta_star, cfg.radius_rule), max_iters=cfg.max_iters,
                                tol_obj=cfg.tol_obj, tol_stat=cfg.tol_stat, init_radius=cfg.init_radius)
            ref = run(loss, pen, dataclasses.replace(base, max_iters=2 * cfg.max_iters)).beta

            def one(i, pen=pen, base=base, ref=ref):
                scfg = dataclasses.replace(base, init="random", seed=child_seed(cfg.seed, zi, 1, i))
                return run(loss, pen, scfg, beta_ref=ref, beta_star=prob.beta_star)

            runs = _pmap(one, range(cfg.n_inits), threads)
            a_out = a if kind == "scad" else float("nan")
            for i, sp in enumerate(runs):
                records.append({"zeta": zeta, "penalty": kind, "a": a_out, "init": i, "converged": sp.converged,
                                "stop_reason": sp.stop_reason, "iterations": sp.iterations,
                                "residual": sp.residual, "stat_error": sp.trace[-1].stat_error,
                                "opt_error": sp.trace[-1].opt_error})
                traces.extend({"zeta": zeta, "penalty": kind, "a": a_out, "init": i, "iter": row.iter,
                               "opt_error": row.opt_error, "stat_error": row.stat_error} for row in sp.trace)
            label = kind if kind == "l1" else f"scad_a{a:g}"
            fractions[f"{label}@zeta={zeta:g}"] = float(np.mean([sp.converged for sp in runs]))
    summary = {"n": n, "k": k, "converged_fraction": fractions}
    return ExperimentReport("breakdown", BREAKDOWN_COLUMNS, records, _metadata("breakdown", cfg), summary,
                            traces, BREAKDOWN_TRACE_COLUMNS)


# ---------------------------------------------------------------- graphical Lasso


@dataclass(frozen=True)
class GlassoRun:
    """Frobenius error of the penalized log-det estimator versus ``n``."""

    p: int = 30
    s: int = 30
    n_list: tuple = (200, 800, 3200)
    trials: int = 10
    penalty: str = "l1"
    a: float = 3.7
    b: float = 3.5
    radius_rule: str = "side"
    max_iters: int = 2000
    tol_stat: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if not self.n_list or list(self.n_list) != sorted(self.n_list):
            raise ValueError("n_list must be non-empty and increasing")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


GLASSO_COLUMNS = ["n", "trial", "frobenius_error", "residual", "converged", "iterations", "psd_clips", "status"]


def _glasso_cell(args):
    cfg, theta, ni, n, trial = args
    rng = np.random.Generator(np.random.PCG64(child_seed(cfg.seed, 1, ni, trial)))
    sigma = np.linalg.inv(theta)
    x = rng.standard_normal((n, cfg.p)) @ np.linalg.cholesky(0.5 * (sigma + sigma.T)).T
    loss = GlassoLoss(x.T @ x / n, n)
    pen = _penalty(cfg.penalty, n, cfg.p, cfg.a, cfg.b)
    row = {"n": n, "trial": trial}
    try:
        scfg = SolverConfig(R=_radius(pen, theta, cfg.radius_rule), max_iters=cfg.max_iters, tol_stat=cfg.tol_stat)
        sp = run(loss, pen, scfg)
        row.update(frobenius_error=float(np.linalg.norm(sp.beta - theta)), residual=sp.residual,
                   converged=sp.converged, iterations=sp.iterations,
                   psd_clips=sum(1 for r in sp.trace if r.projected_flag & 2), status="ok")
    except SolverError as exc:
        row.update(status=f"error: {exc}")
    return row


def run_glasso_rate(cfg: GlassoRun, threads: int = 1) -> ExperimentReport:
    """Frobenius error per (n, trial) and the fitted log-log slope of the mean error."""
    theta = gen_sparse_precision(cfg.p, cfg.s, child_seed(cfg.seed, 0)).theta
    jobs = [(cfg, theta, ni, n, t) for ni, n in enumerate(cfg.n_list) for t in range(cfg.trials)]
    records = _pmap(_glasso_cell, jobs, threads)
    means = []
    for n in cfg.n_list:
        errs = [r["frobenius_error"] for r in records if r["n"] == n and r.get("status") == "ok"]
        means.append(float(np.mean(errs)) if errs else float("nan"))
    slope = float("nan")
    if len(cfg.n_list) >= 2 and np.all(np.isfinite(means)):
        slope = float(stats.linregress(np.log(cfg.n_list), np.log(means)).slope)
    summary = {"mean_error": dict(zip(map(str, cfg.n_list), means)), "loglog_slope": slope,
               "theta_min_eig": float(np.linalg.eigvalsh(theta)[0])}
    return ExperimentReport("glasso", GLASSO_COLUMNS, records, _metadata("glasso", cfg), summary)


# ---------------------------------------------------------------- bound study


@dataclass(frozen=True)
class BoundRun:
    """Seeded clean least-squares instances checked against the error bounds."""

    p: int = 64
    k: int = 8
    n_factor: float = 20.0
    trials: int = 20
    penalties: tuple = ("l1", "scad", "mcp")
    a: float = 3.7
    b: float = 3.5
    noise_sd: float = 0.1
    radius_rule: str = "side"
    n_pairs: int = 200
    max_iters: int = 2000
    tol_stat: float = 1e-6
    seed: int = 0


BOUND_COLUMNS = ["penalty", "trial", "n", "alpha1", "tau1", "residual", "excluded", "applicable",
                 "l2_lhs", "l2_rhs", "l1_lhs", "l1_rhs", "pred_lhs", "pred_rhs", "satisfied", "cone_ok"]


def _bound_trial(args):
    cfg, trial = args
    n = sample_size(cfg.p, cfg.k, cfg.n_factor)
    prob = make_linear_problem(n, cfg.p, cfg.k, _corruption("none", 0.0, 0.0, cfg.noise_sd),
                               seed=child_seed(cfg.seed, trial))
    loss = build_corrected_gamma(prob.X, prob.y, 0.0)
    fit = rsc_probe(loss, prob.beta_star, cfg.n_pairs, seed=child_seed(cfg.seed, trial, 1), k=cfg.k)
    rows = []
    for kind in cfg.penalties:
        pen = _penalty(kind, n, cfg.p, cfg.a, cfg.b)
        scfg = SolverConfig(R=_radius(pen, prob.beta_star, cfg.radius_rule), max_iters=cfg.max_iters,
                            tol_stat=cfg.tol_stat, mode=_mode_for(pen))
        sp = run(loss, pen, scfg)
        checks = {c.name: c for c in theorem1_check(sp.beta, prob.beta_star, pen, fit.alpha1, loss, cfg.k)}
        applicable = fit.ok and all(c.applicable for c in checks.values())
        excluded = bool(sp.residual > cfg.tol_stat * 10)
        row = {"penalty": kind, "trial": trial, "n": n, "alpha1": fit.alpha1, "tau1": fit.tau1,
               "residual": sp.residual, "excluded": excluded, "applicable": applicable,
               "cone_ok": cone_ok(sp.beta - prob.beta_star, cfg.k)}
        for name, c in checks.items():
            row[f"{name}_lhs"], row[f"{name}_rhs"] = c.lhs, c.rhs
        row["satisfied"] = bool(applicable and all(c.satisfied for c in checks.values())) if applicable else None
        rows.append(row)
    return rows


def run_bounds(cfg: BoundRun, threads: int = 1) -> ExperimentReport:
    """Fraction of trials where all three bounds hold, per penalty."""
    records = [r for rows in _pmap(_bound_trial, [(cfg, t) for t in range(cfg.trials)], threads) for r in rows]
    frac = {}
    for kind in cfg.penalties:
        rows = [r for r in records if r["penalty"] == kind and not r["excluded"] and r["applicable"]]
        frac[kind] = {"satisfied": sum(bool(r["satisfied"]) for r in rows), "checked": len(rows),
                      "not_applicable": sum(1 for r in records if r["penalty"] == kind and not r["applicable"]),
                      "excluded": sum(1 for r in records if r["penalty"] == kind and r["excluded"])}
    return ExperimentReport("bounds", BOUND_COLUMNS, records, _metadata("bounds", cfg), {"per_penalty": frac})


RUNNERS = {
    "scaling": (ScalingRun, run_scaling),
    "convergence": (ConvergenceRun, run_convergence),
    "breakdown": (BreakdownRun, run_breakdown),
    "glasso": (GlassoRun, run_glasso_rate),
    "bounds": (BoundRun, run_bounds),
}
