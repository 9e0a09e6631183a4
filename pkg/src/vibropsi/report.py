"""Matplotlib figure rendering for the CLI report path.

Figures are written next to the CSV exports; the CSVs remain the canonical
machine-readable output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .psymodel import NOT_REACHED, CurveSamples
from .analysis import ComparisonReport, ReferenceCurve, ThresholdReport


def render_session_scatter(record: dict, path) -> Path:
    """Trial scatter: separation over trial index, circles correct, crosses not."""
    trials = record["trials"]
    idx = [t["index"] for t in trials]
    sep = [t["separation_mm"] for t in trials]
    ok = [t["correct"] for t in trials]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True,
                                   height_ratios=[2, 1])
    ax1.scatter([i for i, c in zip(idx, ok) if c],
                [s for s, c in zip(sep, ok) if c],
                marker="o", facecolors="none", edgecolors="tab:blue",
                label="correct")
    ax1.scatter([i for i, c in zip(idx, ok) if not c],
                [s for s, c in zip(sep, ok) if not c],
                marker="x", color="tab:red", label="incorrect")
    ax1.set_ylabel("separation [mm]")
    ax1.set_title(f"{record['tsid']} / {record['session_id']}")
    ax1.legend(loc="best", fontsize=8)
    trace = record.get("entropy_trace", [])
    ax2.plot(range(len(trace)), trace, color="tab:gray")
    ax2.set_xlabel("trial")
    ax2.set_ylabel("entropy [nats]")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_mean_curve(curve: CurveSamples, path, individuals=None,
                      title="Mean psychometric function") -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if individuals:
        for c in individuals:
            ax.plot(c.x_values, c.y_values, color="lightsteelblue", lw=0.8,
                    alpha=0.7)
    ax.plot(curve.x_values, curve.y_values, color="tab:blue", lw=2,
            label="cohort mean")
    if curve.se_values is not None:
        ax.fill_between(curve.x_values,
                        curve.y_values - curve.se_values,
                        curve.y_values + curve.se_values,
                        color="tab:blue", alpha=0.2, label="±1 SE")
    ax.axhline(0.5, ls=":", color="gray")
    ax.set_xlabel("separation [mm]")
    ax.set_ylabel("recognition rate")
    ax.set_ylim(0, 1)
    ax.set_title(title)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_thresholds(report: ThresholdReport, path,
                      reference_report: ThresholdReport | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.012
    levels = np.asarray(report.levels)
    vals = [np.nan if s is NOT_REACHED else s for s in report.separations]
    ax.bar(levels - (width / 2 if reference_report else 0), vals, width=width,
           label="cohort", color="tab:blue",
           yerr=report.se if report.se else None, capsize=3)
    if reference_report:
        rvals = [np.nan if s is NOT_REACHED else s
                 for s in reference_report.separations]
        ax.bar(levels + width / 2, rvals, width=width, label="reference",
               color="tab:orange")
    for lv, s in zip(report.levels, report.separations):
        if s is NOT_REACHED:
            ax.annotate("n.r.", (lv, 1), ha="center", fontsize=8)
    ax.set_xlabel("threshold level")
    ax.set_ylabel("separation [mm]")
    ax.set_xticks(levels)
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_comparison(comparison: ComparisonReport, mean_curve: CurveSamples,
                      reference: ReferenceCurve, path) -> Path:
    """Two panels: superimposed curves on top, log-scale corrected p below."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6.5), sharex=True,
                                   height_ratios=[2, 1])
    ax1.plot(mean_curve.x_values, mean_curve.y_values, color="tab:blue",
             label="cohort mean")
    if mean_curve.se_values is not None:
        ax1.fill_between(mean_curve.x_values,
                         mean_curve.y_values - mean_curve.se_values,
                         mean_curve.y_values + mean_curve.se_values,
                         color="tab:blue", alpha=0.2)
    ax1.plot(reference.x_values, reference.y_values, color="tab:orange",
             label=reference.label)
    ax1.plot(comparison.x_values,
             np.interp(comparison.x_values, mean_curve.x_values,
                       mean_curve.y_values),
             "+", color="k", ms=8)
    ax1.set_ylabel("recognition rate")
    ax1.set_ylim(0.5, 1.0)
    ax1.legend(loc="lower right", fontsize=8)
    ps = np.asarray([max(p, 1e-300) for p in comparison.p_bonferroni])
    ax2.semilogy(comparison.x_values, ps, "+-", color="k")
    ax2.axhline(comparison.alpha, ls="--", color="tab:red",
                label=f"α = {comparison.alpha}")
    ax2.set_xlabel("separation [mm]")
    ax2.set_ylabel("corrected p")
    ax2.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
