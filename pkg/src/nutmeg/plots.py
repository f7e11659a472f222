"""Figure rendering from sweep results.

Reads the long-format results.csv produced by the sweep command and writes
PNG figures next to it: per-method accuracy against divisiveness,
estimated-vs-true divisiveness, and a minority-accuracy heatmap over
(minority proportion x annotations per item).
"""
from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def load_results(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.DictReader(fh)
                if row.get("status") == "ok" and row.get("value") != ""]
    for row in rows:
        row["value"] = float(row["value"])
    return rows


def _mean_by(rows, keys, metric):
    grouped = defaultdict(list)
    for row in rows:
        if row["metric_name"] == metric:
            grouped[tuple(row[k] for k in keys)].append(row["value"])
    return {k: float(np.mean(v)) for k, v in grouped.items()}


def plot_accuracy_vs_divisiveness(rows, out_path) -> bool:
    """One panel per method: majority (solid) and minority (dashed)
    accuracy against the true divisiveness rate, colored by spam rate."""
    methods = sorted({r["method"] for r in rows})
    spams = sorted({r["global_spam_rate"] for r in rows}, key=float)
    if not methods or len({r["divisiveness_rate"] for r in rows}) < 2:
        return False
    fig, axes = plt.subplots(1, len(methods),
                             figsize=(3.2 * len(methods), 3.2),
                             sharey=True, squeeze=False)
    cmap = plt.get_cmap("viridis")
    for ax, method in zip(axes[0], methods):
        sub = [r for r in rows if r["method"] == method]
        for si, spam in enumerate(spams):
            color = cmap(si / max(1, len(spams) - 1))
            for group, style in (("majority", "-"), ("minority", "--")):
                mean = _mean_by(
                    [r for r in sub if r["global_spam_rate"] == spam],
                    ["divisiveness_rate"], f"accuracy_{group}")
                if not mean:
                    continue
                xs = sorted(mean, key=lambda k: float(k[0]))
                ax.plot([float(x[0]) for x in xs], [mean[x] for x in xs],
                        style, color=color,
                        label=f"{group}, spam={spam}")
        ax.set_title(method)
        ax.set_xlabel("divisiveness rate")
        ax.set_ylim(-0.02, 1.02)
    axes[0][0].set_ylabel("accuracy")
    axes[0][-1].legend(fontsize=6, loc="lower left")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return True


def plot_divisiveness_recovery(rows, out_path) -> bool:
    """Estimated vs true divisiveness per spam rate, with the identity
    line marking perfect recovery."""
    sub = [r for r in rows if r["method"] == "nutmeg"]
    mean = _mean_by(sub, ["global_spam_rate", "divisiveness_rate"],
                    "divisiveness_estimate")
    if len({k[1] for k in mean}) < 2:
        return False
    fig, ax = plt.subplots(figsize=(4, 4))
    spams = sorted({k[0] for k in mean}, key=float)
    cmap = plt.get_cmap("viridis")
    for si, spam in enumerate(spams):
        pts = sorted(((float(d), v) for (s, d), v in mean.items()
                      if s == spam))
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-",
                color=cmap(si / max(1, len(spams) - 1)),
                label=f"spam={spam}")
    ax.plot([0, 1], [0, 1], ":", color="gray")
    ax.set_xlabel("true divisiveness rate")
    ax.set_ylabel("estimated divisiveness rate")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return True


def plot_subpop_size_heatmap(rows, out_path) -> bool:
    """Minority accuracy over (minority proportion, annotations/item)."""
    sub = [r for r in rows if r["method"] == "nutmeg"]
    mean = _mean_by(sub, ["minority_proportion", "annotations_per_item"],
                    "accuracy_minority")
    props = sorted({k[0] for k in mean}, key=float)
    counts = sorted({k[1] for k in mean}, key=float)
    if len(props) < 2 or len(counts) < 2:
        return False
    grid = np.full((len(props), len(counts)), np.nan)
    for (p, c), v in mean.items():
        grid[props.index(p), counts.index(c)] = v
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(grid, origin="lower", aspect="auto", vmin=0.5, vmax=1.0,
                   cmap="viridis")
    ax.set_xticks(range(len(counts)), counts)
    ax.set_yticks(range(len(props)), props)
    ax.set_xlabel("annotations per item")
    ax.set_ylabel("minority proportion")
    fig.colorbar(im, ax=ax, label="minority accuracy")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return True


def render_report(results_path, out_dir) -> list:
    """Render every figure the results support; returns written paths."""
    rows = load_results(results_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, fn in (
            ("accuracy_vs_divisiveness.png", plot_accuracy_vs_divisiveness),
            ("divisiveness_recovery.png", plot_divisiveness_recovery),
            ("subpop_size_heatmap.png", plot_subpop_size_heatmap)):
        path = out_dir / name
        if fn(rows, path):
            written.append(path)
    return written
