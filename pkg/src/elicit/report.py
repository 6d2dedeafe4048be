"""Render benchmark results to figure and summary files.

Output is headless by design: every function takes a target path and writes
a file, so reports can be produced on machines without a display.
"""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import (
    PermutationTestResult,
    RunResult,
    mean_curve,
    summarize_runs,
)
from .errors import ValidationError

_CONDITION_STYLE = {
    "c1": ("#444444", "no interaction"),
    "c2": ("#e69f00", "random order"),
    "c3": ("#0072b2", "model-guided"),
}


def save_mse_curves(runs: Sequence[RunResult], path) -> str:
    """Mean MSE per iteration for each condition, with per-run traces."""
    if not runs:
        raise ValidationError("no runs to plot")
    by_cond: dict[str, list[RunResult]] = {}
    for run in runs:
        by_cond.setdefault(run.condition, []).append(run)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for cond in sorted(by_cond):
        color, label = _CONDITION_STYLE.get(cond, ("#888888", cond))
        group = by_cond[cond]
        for run in group:
            ax.plot(run.mse_curve, color=color, alpha=0.15, linewidth=0.8)
        mean = mean_curve(group)
        ax.plot(mean, color=color, linewidth=2.0, marker="o", markersize=3,
                label=f"{label} (n={len(group)})")
    ax.set_xlabel("feedback iteration")
    ax.set_ylabel("test MSE")
    ax.legend(frameon=False)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    fig.savefig(str(path), dpi=150)
    plt.close(fig)
    return str(path)


def save_permutation_histogram(result: PermutationTestResult, path) -> str:
    """Permutation-statistic distribution with the observed value marked."""
    if result.distribution is None:
        raise ValidationError(
            "permutation test was run without keep_distribution; nothing to plot"
        )
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.hist(result.distribution, bins=40, color="#bbbbbb", edgecolor="white")
    ax.axvline(result.observed_stat, color="#d55e00", linewidth=2.0,
               label=f"observed = {result.observed_stat:.4f}")
    ax.set_xlabel("max distance between mean curves")
    ax.set_ylabel("permutations")
    ax.set_title(f"p = {result.p_value:.4g} ({result.n_permutations} permutations)")
    ax.legend(frameon=False)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    fig.savefig(str(path), dpi=150)
    plt.close(fig)
    return str(path)


def write_summary(runs: Sequence[RunResult], path) -> str:
    """Per-condition aggregates as a small delimited table."""
    rows = summarize_runs(runs)
    cols = ("condition", "n_runs", "mse_initial_mean", "mse_final_mean", "auc_mean")
    with open(str(path), "w", encoding="utf-8") as fh:
        fh.write("\t".join(cols) + "\n")
        for row in rows:
            fh.write(
                "\t".join(
                    repr(row[c]) if isinstance(row[c], float) else str(row[c])
                    for c in cols
                )
                + "\n"
            )
    return str(path)
