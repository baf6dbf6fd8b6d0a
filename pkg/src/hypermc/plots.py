"""Figure rendering for the report paths: every CLI command that writes a
delimited table also drops a PNG next to it."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .experiments import SemiRealRow, SweepRow

_VARIANT_STYLE = {
    "mch": dict(color="tab:blue", marker="o", label="graph + hypergraphs"),
    "graph": dict(color="tab:orange", marker="s", label="graph only"),
    "clique": dict(color="tab:green", marker="^", label="clique expansion"),
}

_AXIS_LABEL = {
    "p_ratio": "normalized sample probability p / p*",
    "i3hat": "normalized 3-uniform layer quality",
    "q": "edge retention probability q",
}


def save_sweep_figure(rows: Sequence[SweepRow], axis: str, path: str | Path) -> None:
    """Empirical error probability vs the sweep axis, one curve per variant,
    with Wilson 95% half-width error bars."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    variants = sorted({r.variant for r in rows}, key=list(_VARIANT_STYLE).index)
    for variant in variants:
        sub = sorted((r for r in rows if r.variant == variant), key=lambda r: r.axis_value)
        xs = [r.axis_value for r in sub]
        ys = [r.err_prob for r in sub]
        es = [r.err_ci for r in sub]
        ax.errorbar(xs, ys, yerr=es, capsize=3, **_VARIANT_STYLE[variant])
    if axis == "p_ratio":
        ax.axvline(1.0, color="gray", linestyle="--", linewidth=1)
    ax.set_xlabel(_AXIS_LABEL.get(axis, axis))
    ax.set_ylabel("empirical error probability")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_semi_real_figure(rows: Sequence[SemiRealRow], path: str | Path) -> None:
    """Mean MAE per variant as a bar chart (one group per q value)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    qs = sorted({r.q for r in rows})
    variants = sorted({r.variant for r in rows}, key=list(_VARIANT_STYLE).index)
    width = 0.8 / max(len(variants), 1)
    for vi, variant in enumerate(variants):
        sub = {r.q: r for r in rows if r.variant == variant}
        xs = [qi + vi * width for qi in range(len(qs))]
        ys = [sub[q].mean_mae for q in qs]
        es = [sub[q].mae_sd for q in qs]
        style = _VARIANT_STYLE[variant]
        ax.bar(xs, ys, width=width, yerr=es, capsize=3,
               color=style["color"], label=style["label"])
    ax.set_xticks([qi + width * (len(variants) - 1) / 2 for qi in range(len(qs))])
    ax.set_xticklabels([f"q = {q:g}" for q in qs])
    ax.set_ylabel("mean MAE")
    ax.legend()
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_threshold_figure(
    series: Sequence[tuple[float, float]],
    kink: float,
    g_star: float,
    path: str | Path,
) -> None:
    """Sharp threshold p* as a function of the aggregate network quality."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    xs = [point[0] for point in series]
    ys = [point[1] for point in series]
    ax.plot(xs, ys, color="tab:blue", marker="o")
    if min(xs) <= kink <= max(xs):
        ax.axvline(kink, color="gray", linestyle="--", linewidth=1, label="saturation")
        ax.legend()
    ax.set_xlabel("aggregate network quality")
    ax.set_ylabel("optimal sample probability p*")
    ax.set_title(f"maximum network gain g* = {g_star:.4g}")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
