"""Command-line driver: ``nonconvex-mest {solve,simulate,prox-check,experiment}``.

Configuration is an INI file with one flat section per concern.  Exit
codes: 0 success, 1 usage or config error, 2 solver hit its iteration
limit, 3 verification failure.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments as E
from . import io, plotting
from .loss import GlassoLoss, GlmLoss, build_corrected_gamma, build_missing_gamma
from .penalty import PenaltyError, make_penalty
from .simulate import (
    CorruptionSpec,
    DesignSpec,
    TargetSpec,
    child_seed,
    corrupt,
    default_lambda,
    gen_design,
    gen_linear_response,
    gen_logistic_response,
    gen_target,
    oracle_radius,
)
from .solver import SolverConfig, SolverError, run
from .verify import check_prox

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_VERIFY = 0, 1, 2, 3
PENALTIES = ("l1", "scad", "mcp", "capped")
THREADS_ENV = "NONCONVEX_MEST_THREADS"

log = logging.getLogger("nonconvex_mest")


class ConfigError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class SimulateKeys:
    """Keys of the [simulate] section."""

    loss: str = "linear"
    n: int = 500
    p: int = 128
    k: int | None = None
    covariance: str = "identity"
    zeta: float = 0.0
    corruption: str = "additive"
    sigma_w: float = 0.2
    vartheta: float = 0.0
    noise_sd: float = 0.1
    seed: int = 0


@dataclasses.dataclass(frozen=True)
class DataKeys:
    """Keys of the [data] section (file inputs for ``solve``)."""

    loss: str = "corrected_linear"
    design: str = ""
    response: str = ""
    sigma_w: str = "0"
    vartheta: float = 0.0
    covariance: str = ""
    n: int | None = None
    beta_star: str = ""


@dataclasses.dataclass(frozen=True)
class PenaltyKeys:
    """Keys of the [penalty] section; ``lam`` defaults to sqrt(log p / n)."""

    kind: str = "l1"
    lam: float | None = None
    a: float = 3.7
    b: float = 3.5
    c: float = 1.0


@dataclasses.dataclass(frozen=True)
class SolverKeys:
    """Keys of the [solver] section; ``R`` defaults to 1.1 g(beta*) when beta* is known."""

    R: float | None = None
    eta: float = 1.0
    max_iters: int = 1000
    tol_obj: float = 1e-10
    tol_stat: float = 1e-6
    init: str = "zero"
    init_radius: float = 1.5
    seed: int = 0
    mode: str = "strict"
    psd_floor: float = 1e-6
    backtracking: bool = True


EXPERIMENT_CLASSES = {kind: cls for kind, (cls, _) in E.RUNNERS.items()}


# ---------------------------------------------------------------- config parsing


def _field_type(f):
    t = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    return t


def _convert(cls, section, key, raw):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    if key not in fields:
        raise ConfigError(f"[{section}] unknown key {key!r}; valid keys: {', '.join(fields)}")
    f = fields[key]
    t = _field_type(f)
    raw = raw.strip()
    try:
        if raw.lower() in ("", "none") and "None" in t:
            return None
        if t.startswith("tuple"):
            default = f.default
            elem = type(default[0]) if default else float
            return tuple(elem(x.strip()) for x in raw.split(",") if x.strip())
        if t.startswith("bool"):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if t.startswith("int"):
            return int(raw)
        if t.startswith("float"):
            return float(raw)
        if t == "object":
            return raw
        return raw
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None


def read_config(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    if path is None:
        return parser
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        parser.read(p)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parser


def section_values(parser, section, cls) -> dict:
    if not parser.has_section(section):
        return {}
    return {k: _convert(cls, section, k, v) for k, v in parser.items(section)}


def build(cls, parser, section, **overrides):
    values = section_values(parser, section, cls)
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def describe_keys(cls, section) -> str:
    lines = [f"  [{section}]"]
    for f in dataclasses.fields(cls):
        default = f.default
        if isinstance(default, tuple):
            default = ", ".join(str(x) for x in default)
        lines.append(f"    {f.name} = {default}")
    return "\n".join(lines)


# ---------------------------------------------------------------- problem assembly


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _simulated(sim: SimulateKeys):
    """Generate data from a [simulate] block; returns (loss, beta_star, arrays)."""
    k = sim.k
    beta = gen_target(TargetSpec(sim.p, k, True, child_seed(sim.seed, 0)))
    X = gen_design(DesignSpec(sim.n, sim.p, sim.covariance, sim.zeta, child_seed(sim.seed, 1)))
    if sim.loss == "logistic":
        y = gen_logistic_response(X, beta, child_seed(sim.seed, 2))
        return GlmLoss(X, y, "logistic"), beta, {"design": X, "response": y}
    if sim.loss != "linear":
        raise ConfigError(f"[simulate] loss must be 'linear' or 'logistic', got {sim.loss!r}")
    corr = CorruptionSpec(sim.corruption, sim.sigma_w, sim.vartheta, sim.noise_sd)
    y = gen_linear_response(X, beta, sim.noise_sd, child_seed(sim.seed, 2))
    Z = corrupt(X, corr, child_seed(sim.seed, 3))
    if corr.mode == "missing":
        loss = build_missing_gamma(Z, y, corr.vartheta)
    else:
        loss = build_corrected_gamma(Z, y, sim.sigma_w**2 if corr.mode == "additive" else 0.0)
    return loss, beta, {"design": Z, "response": y, "clean_design": X}


def _from_files(data: DataKeys, base: Path):
    def path(name):
        p = Path(name)
        return p if p.is_absolute() else base / p

    def need(key):
        value = getattr(data, key)
        if not value:
            raise ConfigError(f"[data] {key} is required for loss={data.loss}")
        if not path(value).is_file():
            raise ConfigError(f"[data] {key}: file not found: {value}")
        return path(value)

    beta = io.read_vector(need("beta_star")) if data.beta_star else None
    if data.loss == "glasso":
        if data.n is None:
            raise ConfigError("[data] n is required for loss=glasso")
        return GlassoLoss(io.read_matrix(need("covariance")), data.n), beta
    Z = io.read_matrix(need("design"))
    y = io.read_vector(need("response"))
    if data.loss == "logistic":
        return GlmLoss(Z, y, "logistic"), beta
    if data.loss == "missing":
        return build_missing_gamma(Z, y, data.vartheta), beta
    if data.loss != "corrected_linear":
        raise ConfigError(f"[data] unknown loss {data.loss!r}")
    try:
        sigma_w = float(data.sigma_w)
    except ValueError:
        sigma_w = io.read_matrix(need("sigma_w"))
    return build_corrected_gamma(Z, y, sigma_w), beta


# ---------------------------------------------------------------- commands


def cmd_solve(args, parser) -> int:
    if parser.has_section("data"):
        data = build(DataKeys, parser, "data")
        loss, beta_star = _from_files(data, Path(args.config).resolve().parent)
    else:
        sim = build(SimulateKeys, parser, "simulate", seed=args.seed)
        loss, beta_star, _ = _simulated(sim)
    pk = build(PenaltyKeys, parser, "penalty", kind=args.penalty)
    n = getattr(loss, "n", None)
    p = loss.dim
    lam = pk.lam if pk.lam is not None else (default_lambda(n, p) if n else None)
    if lam is None:
        raise ConfigError("[penalty] lam is required when the sample size is unknown")
    try:
        pen = make_penalty(pk.kind, lam, a=pk.a, b=pk.b, c=pk.c)
    except (PenaltyError, ValueError) as exc:
        raise ConfigError(f"[penalty] {exc}") from None
    sk = build(SolverKeys, parser, "solver")
    R = sk.R
    if R is None:
        if beta_star is None:
            raise ConfigError("[solver] R is required when beta_star is unknown")
        R = oracle_radius(pen, beta_star.reshape(loss.shape))
    if args.seed is not None:
        sk = dataclasses.replace(sk, seed=args.seed)
    fields = dataclasses.asdict(sk)
    fields["R"] = R
    if pen.kind.value == "capped" and sk.mode == "strict":
        fields["mode"] = "experimental"
    try:
        cfg = SolverConfig(**fields)
    except ValueError as exc:
        raise ConfigError(f"[solver] {exc}") from None
    star = None if beta_star is None else beta_star.reshape(loss.shape)
    sp = run(loss, pen, cfg, beta_star=star)
    out = _out_dir(args)
    io.write_matrix(out / "solution.csv", sp.beta if sp.beta.ndim == 2 else sp.beta.reshape(-1, 1))
    io.write_trace(out / "trace.csv", sp.trace)
    summary = sp.summary() | {"penalty": pen.describe(), "R": R, "lam": lam}
    if star is not None:
        summary["stat_error"] = float(np.linalg.norm(sp.beta - star))
    io.write_json(out / "summary.json", summary)
    print(f"{sp.stop_reason}: iterations={sp.iterations} residual={sp.residual:.3e} objective={sp.objective:.10g}")
    return EXIT_OK if sp.converged else EXIT_NOT_CONVERGED


def cmd_simulate(args, parser) -> int:
    sim = build(SimulateKeys, parser, "simulate", seed=args.seed)
    _, beta, arrays = _simulated(sim)
    out = _out_dir(args)
    for name, arr in arrays.items():
        if arr.ndim == 1:
            io.write_vector(out / f"{name}.csv", arr)
        else:
            io.write_matrix(out / f"{name}.csv", arr)
    io.write_vector(out / "beta_star.csv", beta)
    io.write_json(out / "simulate.json", dataclasses.asdict(sim))
    print(f"wrote {', '.join(sorted(arrays))} and beta_star to {out}")
    return EXIT_OK


def cmd_prox_check(args, parser, prox_fn=None) -> int:
    kinds = [args.penalty] if args.penalty else list(PENALTIES)
    kwargs = {} if prox_fn is None else {"prox_fn": prox_fn}
    seed = 0 if args.seed is None else args.seed
    failed = []
    for kind in kinds:
        res = check_prox(kind, count=args.instances, seed=seed, **kwargs)
        print(f"{kind:7s} instances={res.instances} max_deviation={res.max_deviation:.3e} "
              f"{'ok' if res.passed else 'FAIL'}")
        if not res.passed:
            failed.append(res)
    if failed:
        out = _out_dir(args)
        worst = max(failed, key=lambda r: r.max_deviation)
        io.write_json(out / "prox_check_worst.json", worst.worst)
        print(f"worst case: {worst.worst}")
        return EXIT_VERIFY
    return EXIT_OK


def cmd_experiment(args, parser) -> int:
    threads = args.threads
    if args.from_metadata:
        meta = io.read_json(args.from_metadata)
        report = E.rerun(meta, threads=threads)
    else:
        kind = args.kind
        cls, runner = E.RUNNERS[kind]
        overrides = {"seed": args.seed}
        if args.penalty:
            names = {f.name for f in dataclasses.fields(cls)}
            if "penalties" in names:
                overrides["penalties"] = (args.penalty,)
            elif "penalty" in names:
                overrides["penalty"] = args.penalty
        cfg = build(cls, parser, kind, **overrides)
        report = runner(cfg, threads=threads)
    out = _out_dir(args)
    paths = list(report.save(out).values())
    if not args.no_plots:
        paths += plotting.emit(report, out, svg=not args.no_svg)
    for path in paths:
        print(path)
    return EXIT_OK


# ---------------------------------------------------------------- argument parsing


def _threads_default() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def make_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--out", default="out", help="output directory (all files go here)")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--threads", type=int, default=_threads_default(),
                        help=f"worker threads for experiments (default ${THREADS_ENV} or 1)")
    common.add_argument("--penalty", choices=PENALTIES, help="restrict/override the penalty")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="nonconvex-mest", description=__doc__, formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True)
    solve_keys = "\n".join([
        "config keys (defaults shown):",
        describe_keys(DataKeys, "data"),
        describe_keys(SimulateKeys, "simulate"),
        describe_keys(PenaltyKeys, "penalty"),
        describe_keys(SolverKeys, "solver"),
        "  Use [data] for file inputs (CSV, 'NA' marks missing entries) or [simulate] to generate data.",
        "exit codes: 0 converged, 1 config error, 2 iteration limit reached",
    ])
    sub.add_parser("solve", parents=[common], formatter_class=fmt, help="solve one problem",
                   epilog=solve_keys)
    sub.add_parser("simulate", parents=[common], formatter_class=fmt, help="write a synthetic data set",
                   epilog="config keys (defaults shown):\n" + describe_keys(SimulateKeys, "simulate"))
    pc = sub.add_parser("prox-check", parents=[common], formatter_class=fmt,
                        help="check closed-form prox maps against a brute-force oracle",
                        epilog="no config keys; exit 3 and prox_check_worst.json on mismatch")
    pc.add_argument("--instances", type=int, default=1000, help="random instances per penalty")
    exp_keys = "config keys per experiment section (defaults shown):\n" + "\n".join(
        describe_keys(cls, kind) for kind, cls in EXPERIMENT_CLASSES.items())
    ex = sub.add_parser("experiment", parents=[common], formatter_class=fmt, help="run a simulation study",
                        epilog=exp_keys)
    ex.add_argument("kind", nargs="?", choices=list(E.RUNNERS), help="study to run")
    ex.add_argument("--from-metadata", help="rerun a study from its JSON sidecar")
    ex.add_argument("--no-plots", action="store_true", help="skip plot data and scripts")
    ex.add_argument("--no-svg", action="store_true", help="skip matplotlib SVG rendering")
    return parser


COMMANDS = {"solve": cmd_solve, "simulate": cmd_simulate, "prox-check": cmd_prox_check,
            "experiment": cmd_experiment}


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    if args.command == "experiment" and not args.kind and not args.from_metadata:
        print("error: experiment needs a kind or --from-metadata", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = read_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, io.DataFormatError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, PenaltyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
