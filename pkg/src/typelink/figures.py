"""Matplotlib renderings that accompany the delimited report files.

Every CLI report path gets a sibling ``.png`` with the matching figure:
polysemy histograms for simplification, per-edge-kind AUC views for
learnability, J traces for searches, and the four sweep panels for the
size-penalty study.
"""

from __future__ import annotations

import os
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .learnability import EdgeKindRow
from .simplify import SimplificationReport


def figure_path(report_path: str) -> str:
    base, _ = os.path.splitext(report_path)
    return base + ".png"


def render_simplification(report: SimplificationReport, path: str) -> str:
    fig, (ax_hist, ax_iter) = plt.subplots(1, 2, figsize=(9, 3.5))
    before = report.polysemy_before.histogram if report.polysemy_before else {}
    after = report.polysemy_after.histogram if report.polysemy_after else {}
    senses = sorted(set(before) | set(after))
    xs = np.arange(len(senses))
    width = 0.4
    ax_hist.bar(xs - width / 2, [before.get(s, 0) for s in senses], width, label="before")
    ax_hist.bar(xs + width / 2, [after.get(s, 0) for s in senses], width, label="after")
    ax_hist.set_xticks(xs, [str(s) for s in senses])
    ax_hist.set_xlabel("senses per mention")
    ax_hist.set_ylabel("mentions")
    ax_hist.set_title("mention polysemy")
    ax_hist.legend()
    steps = [r.step for r in report.iterations]
    ax_iter.bar(steps, [r.replacements for r in report.iterations])
    ax_iter.set_xlabel("iteration")
    ax_iter.set_ylabel("replacements")
    ax_iter.set_title("folds per iteration")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_learnability(rows: Sequence[EdgeKindRow], path: str) -> str:
    fig, (ax_hist, ax_scatter) = plt.subplots(1, 2, figsize=(9, 3.5))
    for row in rows:
        means = [m for m, _ in row.scatter]
        ax_hist.hist(means, bins=np.linspace(0.4, 1.0, 25), alpha=0.6, label=row.edge_kind)
        ax_scatter.scatter(means, [s for _, s in row.scatter], s=14, alpha=0.7, label=row.edge_kind)
    ax_hist.set_xlabel("mean AUC")
    ax_hist.set_ylabel("axes")
    ax_hist.set_title("AUC by edge kind")
    ax_hist.legend()
    ax_scatter.set_xlabel("mean AUC")
    ax_scatter.set_ylabel("AUC std over runs")
    ax_scatter.set_title("score stability")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_trace(rows: Sequence[tuple[int, float, float]], path: str) -> str:
    """rows: (step, J, oracle accuracy)."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    steps = [r[0] for r in rows]
    ax.plot(steps, [r[1] for r in rows], marker="o", label="J")
    accs = [r[2] for r in rows]
    if not any(np.isnan(a) for a in accs):
        ax.plot(steps, accs, marker=".", label="oracle accuracy")
    ax.set_xlabel("step")
    ax.set_ylabel("objective")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_lambda_sweep(rows: Sequence[dict], path: str) -> str:
    """rows: aggregated per-lambda dicts with mean/std fields."""
    fig, axes = plt.subplots(1, 4, figsize=(14, 3.2))
    lams = [r["lam"] for r in rows]
    panels = [
        ("size_mean", "size_std", "type axes"),
        ("iterations_mean", "iterations_std", "iterations"),
        ("accuracy_mean", "accuracy_std", "oracle accuracy"),
        ("j_mean", "j_std", "objective J"),
    ]
    for ax, (mean_key, std_key, title) in zip(axes, panels):
        means = np.array([r[mean_key] for r in rows])
        stds = np.array([r[std_key] for r in rows])
        ax.plot(lams, means, marker="o")
        ax.fill_between(lams, means - stds, means + stds, color="red", alpha=0.25)
        ax.set_xscale("log")
        ax.set_xlabel("per-axis penalty")
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
