"""Figure rendering for CLI reports.

Figures are drawn with the Agg canvas from already-aggregated report data, in
the main thread, with pinned dpi and PNG metadata, so the bytes depend only
on the report contents and the library versions.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

_DPI = 110
_PNG_META = {"Software": "follmer"}

_PASS_COLOR = "#2a7e43"
_FAIL_COLOR = "#b03030"
_BOUND_COLORS = {
    "bound_em": "#1f5fa8",
    "bound_ada": "#2a7e43",
    "bound_fisher": "#8a5fb0",
    "bound_lowdim": "#c07820",
}


def _save(fig: Figure, path: Path) -> Path:
    fig.savefig(path, dpi=_DPI, metadata=_PNG_META)
    return path


def render_verify_figure(report, path) -> Path:
    """One horizontal bar per check: statistic / threshold, pass line at 1."""
    path = Path(path)
    checks = list(report.checks)
    ratios = []
    for c in checks:
        if not math.isfinite(c.statistic):
            ratios.append(3.0)
        else:
            ratios.append(c.statistic / c.threshold if c.threshold > 0 else c.statistic)
    n = max(len(checks), 1)
    fig = Figure(figsize=(7.0, 0.32 * n + 1.2))
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)
    y = np.arange(len(checks))
    colors = [_PASS_COLOR if c.passed else _FAIL_COLOR for c in checks]
    ax.barh(y, ratios, color=colors, height=0.62)
    for yi, c, r in zip(y, checks, ratios):
        mark = "" if math.isfinite(c.statistic) else " (not finite)"
        ax.text(min(r, 2.9) + 0.03, yi, f"{c.statistic:.3g}{mark}", va="center", fontsize=7)
    ax.axvline(1.0, color="black", lw=1.0, ls="--")
    ax.set_yticks(y)
    ax.set_yticklabels([c.name for c in checks], fontsize=7)
    ax.invert_yaxis()
    ax.set_xlim(0, 3.05)
    ax.set_xlabel("statistic / threshold (pass when <= 1)")
    ax.set_title("identity checks" + ("" if report.passed else "  [FAILED]"))
    ax.grid(True, axis="x", alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def render_bounds_figure(report, path) -> Path:
    """Empirical divergence vs certified upper bounds, per sweep row."""
    path = Path(path)
    rows = list(report.rows)
    fig = Figure(figsize=(7.0, 4.2))
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)
    x = np.arange(len(rows))
    emp = np.array([r["empirical"] for r in rows], dtype=float)
    err = np.array([r["empirical_stderr"] for r in rows], dtype=float)
    excluded = np.array([bool(r["excluded"]) for r in rows])
    ok = ~excluded & np.isfinite(emp)
    if ok.any():
        ax.errorbar(x[ok], emp[ok], yerr=4.0 * err[ok], fmt="o", ms=4, lw=1,
                    color="black", capsize=2, label="empirical KL (4 se)")
    if excluded.any():
        ax.plot(x[excluded], np.where(np.isfinite(emp[excluded]), emp[excluded], np.nan),
                "x", color="gray", ms=5, label="excluded")
    for key, color in _BOUND_COLORS.items():
        vals = np.array([r[key] if r[key] != "" else np.nan for r in rows], dtype=float)
        if np.isfinite(vals).any():
            ax.plot(x, vals, "-s", ms=3, lw=1.1, color=color, label=key.replace("bound_", "bound: "))
    ax.set_yscale("log")
    ax.set_xticks(x)
    ax.set_xticklabels([f"{r['index']}\n{r['scheme']}" for r in rows], fontsize=6)
    ax.set_xlabel("sweep row")
    ax.set_ylabel("KL divergence")
    ax.set_title("bound dominance" + ("" if report.passed else "  [FAILED]"))
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    fig.tight_layout()
    return _save(fig, path)


def render_sample_figures(result, out_dir) -> list[Path]:
    """Terminal-law view (histogram for d=1, scatter of first two coords
    otherwise) plus a trajectory fan when trajectories were kept."""
    out_dir = Path(out_dir)
    written = []
    term = np.asarray(result.terminal, dtype=float)
    n, d = term.shape

    fig = Figure(figsize=(5.2, 4.0))
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)
    if n == 0:
        ax.text(0.5, 0.5, "no paths requested", ha="center", va="center")
        ax.set_axis_off()
    elif d == 1:
        ax.hist(term[:, 0], bins=min(60, max(10, n // 20)), color="#1f5fa8", alpha=0.85)
        ax.set_xlabel("terminal value")
        ax.set_ylabel("count")
    else:
        ax.plot(term[:, 0], term[:, 1], ".", ms=2.5, color="#1f5fa8", alpha=0.6)
        ax.set_xlabel("coordinate 0")
        ax.set_ylabel("coordinate 1")
        ax.set_aspect("equal", adjustable="datalim")
    ax.set_title(f"{result.scheme}: terminal samples (n={n}, d={d})")
    fig.tight_layout()
    written.append(_save(fig, out_dir / "sample_terminal.png"))

    if result.trajectory is not None and n > 0:
        fig = Figure(figsize=(5.6, 4.0))
        FigureCanvasAgg(fig)
        ax = fig.add_subplot(111)
        shown = min(n, 50)
        for i in range(shown):
            ax.plot(result.times, result.trajectory[i, :, 0], lw=0.7, alpha=0.5, color="#1f5fa8")
        ax.set_xlabel("time")
        ax.set_ylabel("coordinate 0")
        ax.set_title(f"{result.scheme}: first {shown} trajectories")
        fig.tight_layout()
        written.append(_save(fig, out_dir / "sample_trajectories.png"))
    return written
