"""Figure emission: gnuplot data blocks and scripts, plus SVG via matplotlib when installed.

The gnuplot output needs no Python plotting stack.  SVG rendering is
optional and deterministic (fixed hash salt, no date metadata).
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .io import fmt


class Series:
    __slots__ = ("title", "x", "y", "color")

    def __init__(self, title, x, y, color=None):
        self.title, self.x, self.y, self.color = title, list(x), list(y), color


class Panel:
    def __init__(self, title, xlabel, ylabel, series, logx=False, logy=False):
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.series, self.logx, self.logy = series, logx, logy


def _write_gnuplot(panels, out: Path, stem: str) -> list[Path]:
    dat = out / f"{stem}_plot.dat"
    gp = out / f"{stem}.gp"
    blocks, lines = [], [
        "set datafile separator ','",
        "set terminal svg size 480,360",
        f"set output '{stem}_gnuplot.svg'",
    ]
    if len(panels) > 1:
        cols = min(2, len(panels))
        rows = math.ceil(len(panels) / cols)
        lines[1] = f"set terminal svg size {480 * cols},{360 * rows}"
        lines.append(f"set multiplot layout {rows},{cols}")
    index = 0
    for panel in panels:
        lines += [f"set title '{panel.title}'", f"set xlabel '{panel.xlabel}'", f"set ylabel '{panel.ylabel}'",
                  "set logscale x" if panel.logx else "unset logscale x",
                  "set logscale y" if panel.logy else "unset logscale y"]
        terms = []
        for s in panel.series:
            rows = [f"{fmt(float(x))},{fmt(float(y))}" for x, y in zip(s.x, s.y)
                    if np.isfinite(y) and (not panel.logy or y > 0)]
            blocks.append(f"# {s.title}\n" + "\n".join(rows or ["NA,NA"]))
            color = f" lc rgb '{s.color}'" if s.color else ""
            title = f"title '{s.title}'" if s.title else "notitle"
            terms.append(f"'{dat.name}' index {index} using 1:2 with lines{color} {title}")
            index += 1
        lines.append("plot " + ", \\\n     ".join(terms))
    if len(panels) > 1:
        lines.append("unset multiplot")
    dat.write_text("\n\n\n".join(blocks) + "\n")
    gp.write_text("\n".join(lines) + "\n")
    return [dat, gp]


def _write_svg(panels, out: Path, stem: str) -> list[Path]:
    try:
        import matplotlib
    except ImportError:
        return []
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "nonconvex-mest"
    cols = min(2, len(panels))
    rows = math.ceil(len(panels) / cols)
    fig, axes = plt.subplots(rows, cols, figsize=(5 * cols, 3.6 * rows), squeeze=False)
    for ax, panel in zip(axes.flat, panels):
        labelled = False
        for s in panel.series:
            ax.plot(s.x, s.y, color=s.color, lw=1.0, label=s.title or None)
            labelled = labelled or bool(s.title)
        ax.set_title(panel.title, fontsize=9)
        ax.set_xlabel(panel.xlabel)
        ax.set_ylabel(panel.ylabel)
        if panel.logx:
            ax.set_xscale("log")
        if panel.logy:
            ax.set_yscale("log")
        if labelled:
            ax.legend(fontsize=7)
    for ax in list(axes.flat)[len(panels):]:
        ax.set_visible(False)
    fig.tight_layout()
    path = out / f"{stem}.svg"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return [path]


def render(panels, out_dir, stem: str, svg: bool = True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = _write_gnuplot(panels, out, stem)
    if svg:
        paths += _write_svg(panels, out, stem)
    return paths


_STYLE = {"l1": "#1f77b4", "scad": "#d62728", "mcp": "#2ca02c", "capped": "#9467bd"}


def _num(x):
    try:
        return float(x)
    except (TypeError, ValueError):
        return float("nan")


def scaling_panels(report):
    cells = report.summary["cells"]
    penalties = list(dict.fromkeys(c["penalty"] for c in cells))
    ps = list(dict.fromkeys(c["p"] for c in cells))
    series = []
    for kind in penalties:
        for p in ps:
            cs = [c for c in cells if c["penalty"] == kind and c["p"] == p]
            series.append(Series(f"{kind} p={p}", [c["grid"] for c in cs], [c["mean_l2"] for c in cs],
                                 _STYLE.get(kind)))
    return [Panel("mean l2 error vs rescaled sample size", "n / (k log p)", "||beta - beta*||_2", series)]


def _trace_series(rows, key, color):
    by_init = {}
    for r in rows:
        by_init.setdefault(r["init"], []).append(r)
    out = []
    for rs in by_init.values():
        out.append(Series("", [r["iter"] for r in rs], [_num(r[key]) for r in rs], color))
    return out


def convergence_panels(report):
    cfg = report.metadata["config"]
    series = _trace_series(report.traces, "opt_error", "#1f77b4") + \
        _trace_series(report.traces, "stat_error", "#d62728")
    if series:
        series[0].title = "optimization error"
        series[len(series) // 2].title = "statistical error"
    title = f"{cfg['loss']} {cfg['penalty']} (p={cfg['p']})"
    return [Panel(title, "iteration", "l2 error", series, logy=True)]


def breakdown_panels(report):
    groups = {}
    for r in report.traces:
        groups.setdefault((r["zeta"], r["penalty"], r["a"]), []).append(r)
    panels = []
    for (zeta, kind, a), rows in groups.items():
        label = kind if kind == "l1" else f"{kind} a={a:g}"
        panels.append(Panel(f"{label}, zeta={zeta:g}", "iteration", "||beta^t - beta_ref||_2",
                            _trace_series(rows, "opt_error", "#1f77b4"), logy=True))
    return panels


def glasso_panels(report):
    means = report.summary["mean_error"]
    ns = [float(n) for n in means]
    return [Panel("graphical Lasso Frobenius error", "n", "||Theta - Theta*||_F",
                  [Series("mean error", ns, list(means.values()), "#1f77b4")], logx=True, logy=True)]


PANELS = {
    "scaling": scaling_panels,
    "convergence": convergence_panels,
    "breakdown": breakdown_panels,
    "glasso": glasso_panels,
}


def emit(report, out_dir, stem: str | None = None, svg: bool = True) -> list[Path]:
    """Write plot data, a gnuplot script and (if possible) an SVG for a report."""
    if report.kind not in PANELS:
        return []
    return render(PANELS[report.kind](report), out_dir, stem or report.kind, svg=svg)
