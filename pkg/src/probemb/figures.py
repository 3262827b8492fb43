"""Matplotlib figures rendered next to the delimited reports."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .harness import BenchmarkReport, MetricRow  # noqa: E402

_BAR_METRICS = ["recall_at_1", "map_at_r", "verification_accuracy", "ceda"]


def _agg_value(row: MetricRow, name: str):
    v = getattr(row, name)
    if v is None:
        return None
    if isinstance(v, tuple):
        return v
    return (v, 0.0)


def save_benchmark_figure(report: BenchmarkReport, path) -> str:
    """Grouped bars of mean±std per method for the four bounded metrics,
    plus a Spearman panel."""
    aggs = report.aggregates
    labels = [f"{r.method}{(':' + r.axis_value) if r.axis_value else ''}" for r in aggs]
    fig, axes = plt.subplots(1, 2, figsize=(12, 4.5),
                             gridspec_kw={"width_ratios": [3, 1]})
    ax = axes[0]
    width = 0.8 / max(1, len(_BAR_METRICS))
    for mi, metric in enumerate(_BAR_METRICS):
        xs, means, stds = [], [], []
        for i, row in enumerate(aggs):
            v = _agg_value(row, metric)
            if v is None or math.isnan(v[0]):
                continue
            xs.append(i + mi * width)
            means.append(v[0])
            stds.append(v[1])
        ax.bar(xs, means, width=width, yerr=stds, capsize=2, label=metric)
    ax.set_xticks([i + 1.5 * width for i in range(len(aggs))])
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("metric value")
    ax.legend(fontsize=8)
    ax.set_title("test metrics (mean ± std over seeds)")

    ax = axes[1]
    xs, means, stds = [], [], []
    for i, row in enumerate(aggs):
        v = _agg_value(row, "spearman")
        if v is None or math.isnan(v[0]):
            continue
        xs.append(i)
        means.append(v[0])
        stds.append(v[1])
    ax.bar(xs, means, yerr=stds, capsize=2, color="tab:purple")
    ax.set_xticks(range(len(aggs)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_title("confidence vs quality (Spearman)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def save_filterout_figure(report: BenchmarkReport, path) -> str:
    """Mean MAP@R against filter-out rate per method/axis value."""
    by_key: dict[str, dict[float, list[float]]] = {}
    for (method, axis_value, _seed), curve in report.curves.items():
        label = f"{method}{(':' + axis_value) if axis_value else ''}"
        store = by_key.setdefault(label, {})
        for alpha, value in curve:
            if value is not None:
                store.setdefault(alpha, []).append(value)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for label, store in sorted(by_key.items()):
        alphas = sorted(store)
        means = [sum(store[a]) / len(store[a]) for a in alphas]
        ax.plot(alphas, means, marker="o", ms=3, label=label)
    ax.set_xlabel("filter-out rate")
    ax.set_ylabel("MAP@R (corrupted test)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def save_confidence_figure(curves: dict[str, list[tuple[float, float | None]]],
                           spearmans: dict[str, float], path) -> str:
    """Filter-out curves per confidence source plus a Spearman inset."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 4.2),
                             gridspec_kw={"width_ratios": [2, 1]})
    ax = axes[0]
    for source, curve in sorted(curves.items()):
        pts = [(a, v) for a, v in curve if v is not None]
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts],
                    marker="o", ms=3, label=source)
    ax.set_xlabel("filter-out rate")
    ax.set_ylabel("MAP@R (corrupted test)")
    ax.legend(fontsize=8)
    ax = axes[1]
    names = sorted(spearmans)
    ax.bar(range(len(names)), [spearmans[n] for n in names], color="tab:green")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_title("Spearman(confidence, quality)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)
