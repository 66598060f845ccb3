"""Figure rendering from the pipeline's delimited outputs.

Every plot here is derived purely from the emitted tables in the output
directory, so the report can be regenerated (or skipped) without touching
the numerical pipeline.  Figures land under <output_dir>/figures as PNG.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import cluster as clustermod
from . import network as netmod
from . import timeseries
from .cli import (
    CLUSTERS_FILE,
    EDGES_FILE,
    ENRICHMENT_FILE,
    EXPRESSION_FILE,
    METRICS_FILE,
)

plt.rcParams.update(
    {
        "figure.dpi": 110,
        "savefig.dpi": 150,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "font.size": 9,
    }
)

_STATUS_COLOR = {"1": "#c0392b", "NA": "#2e6da4", "0": "#9a9a9a"}
_STATUS_LABEL = {"1": "known", "NA": "unknown", "0": "unlikely"}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def _read_metrics(path: Path) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        rows = [ln.rstrip("\n").split("\t") for ln in fh if ln.strip()]
    cols = {name: [r[k] for r in rows] for k, name in enumerate(header)}
    out: dict[str, np.ndarray] = {}
    for name, vals in cols.items():
        if name in ("gene_i", "gene_j", "w_status", "flags"):
            out[name] = np.array(vals, dtype=object)
        else:
            out[name] = np.array([float(v) for v in vals])
    return out


def figure_trajectories(out_dir: Path) -> Path | None:
    """Per-cluster panels of the expression trajectories."""
    expr_path = out_dir / EXPRESSION_FILE
    if not expr_path.exists():
        return None
    matrix = timeseries.read_expression_csv(expr_path)
    clusters_path = out_dir / CLUSTERS_FILE
    if clusters_path.exists():
        labels = clustermod.read_cluster_csv(clusters_path).labels
    else:
        labels = {g: 1 for g in matrix.gene_ids}
    groups = sorted(set(labels.values()))
    ncols = min(4, len(groups))
    nrows = (len(groups) + ncols - 1) // ncols
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(3.2 * ncols, 2.4 * nrows), squeeze=False, sharex=True
    )
    t = matrix.grid.times
    for ax in axes.flat:
        ax.set_visible(False)
    for slot, lab in enumerate(groups):
        ax = axes.flat[slot]
        ax.set_visible(True)
        members = [g for g in matrix.gene_ids if labels.get(g) == lab]
        for g in members:
            ax.plot(t, matrix.values[matrix.index_of(g)], lw=0.8, alpha=0.7)
        ax.set_title(f"cluster {lab} ({len(members)} series)")
    for ax in axes[-1]:
        ax.set_xlabel("time (h)")
    for row in axes:
        row[0].set_ylabel("log2 fold change")
    fig.suptitle("Trajectories by cluster")
    return _save(fig, out_dir / "figures" / "trajectories.png")


def figure_metric_scatter(out_dir: Path) -> Path | None:
    """Partner-only R2 against the gain over the self-only model."""
    path = out_dir / METRICS_FILE
    if not path.exists():
        return None
    cols = _read_metrics(path)
    fig, ax = plt.subplots(figsize=(5, 4))
    for status in ("0", "NA", "1"):
        mask = cols["w_status"] == status
        if not mask.any():
            continue
        ax.scatter(
            cols["llr2_other"][mask],
            cols["diff_ij"][mask],
            s=8,
            alpha=0.55,
            c=_STATUS_COLOR[status],
            label=f"{_STATUS_LABEL[status]} ({int(mask.sum())})",
            edgecolors="none",
        )
    ax.set_xlabel("partner-only R2")
    ax.set_ylabel("pair R2 minus self-only R2")
    ax.set_xlim(-0.02, 1.02)
    ax.legend(loc="upper left", fontsize=8)
    ax.set_title("Pair diagnostics by prior status")
    return _save(fig, out_dir / "figures" / "metric_scatter.png")


def figure_similarity_hist(out_dir: Path) -> Path | None:
    path = out_dir / METRICS_FILE
    if not path.exists():
        return None
    cols = _read_metrics(path)
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.hist(cols["llr2_sym"], bins=50, color="#2e6da4", alpha=0.85)
    q95 = float(np.quantile(cols["llr2_sym"], 0.95))
    ax.axvline(q95, color="#c0392b", lw=1.2, label=f"95th pct = {q95:.3f}")
    ax.set_xlabel("symmetrized pair R2")
    ax.set_ylabel("pairs")
    ax.legend(fontsize=8)
    ax.set_title("Similarity distribution")
    return _save(fig, out_dir / "figures" / "similarity_hist.png")


def figure_degree_distribution(out_dir: Path) -> Path | None:
    path = out_dir / EDGES_FILE
    if not path.exists():
        return None
    net = netmod.read_edge_tsv(path)
    report = netmod.degree_report(net)
    if not report:
        return None
    top = report[:30]
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.bar(range(len(top)), [d for _, d in top], color="#2e6da4")
    ax.set_xticks(range(len(top)))
    ax.set_xticklabels([g for g, _ in top], rotation=90, fontsize=6)
    ax.set_ylabel("degree")
    ax.set_title("Highest-degree nodes")
    return _save(fig, out_dir / "figures" / "degree_distribution.png")


def figure_enrichment(out_dir: Path) -> Path | None:
    path = out_dir / ENRICHMENT_FILE
    if not path.exists():
        return None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        for ln in fh:
            parts = ln.rstrip("\n").split(",")
            if len(parts) < 9:
                continue
            rows.append((int(parts[0]), parts[1], float(parts[7]), parts[8] == "true"))
    sig = [r for r in rows if r[3]][:20]
    if not sig:
        sig = sorted(rows, key=lambda r: r[2])[:10]
    if not sig:
        return None
    labels = [f"c{c}: {t}" for c, t, _, _ in sig]
    scores = [-np.log10(max(p, 1e-300)) for _, _, p, _ in sig]
    fig, ax = plt.subplots(figsize=(6, 0.3 * len(sig) + 1.2))
    ax.barh(range(len(sig)), scores, color="#2e6da4")
    ax.set_yticks(range(len(sig)))
    ax.set_yticklabels(labels, fontsize=7)
    ax.invert_yaxis()
    ax.set_xlabel("-log10 adjusted p")
    ax.set_title("Top enriched terms")
    return _save(fig, out_dir / "figures" / "enrichment_top.png")


def render_all(out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    (out_dir / "figures").mkdir(parents=True, exist_ok=True)
    written = []
    for fn in (
        figure_trajectories,
        figure_metric_scatter,
        figure_similarity_hist,
        figure_degree_distribution,
        figure_enrichment,
    ):
        path = fn(out_dir)
        if path is not None:
            written.append(path)
    return written
