"""Command-line pipeline: simulate -> compute -> cluster -> network -> enrich.

Each command takes `--config <file>` plus per-key override flags and hands
files to the next stage through the shared output directory, so every
intermediate can be inspected or replaced.  Exit codes: 0 success, 2 usage
error, 3 data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import cluster as clustermod
from . import enrich as enrichmod
from . import network as netmod
from . import pairwise, prior, simulate, timeseries
from .config import REGISTRY, RunConfig, UsageError, parse_config_file, registry_help_lines

log = logging.getLogger("leadlag")

COMMANDS = ("simulate", "compute", "cluster", "network", "enrich", "report")

EXPRESSION_FILE = "expression.csv"
TRUTH_FILE = "truth_prior.csv"
SIMILARITY_FILE = "similarity.csv"
METRICS_FILE = "pair_metrics.tsv"
PRIOR_USED_FILE = "prior_used.csv"
CLUSTERS_FILE = "clusters.csv"
DENDROGRAM_FILE = "dendrogram.json"
EDGES_FILE = "network_edges.tsv"
DEGREES_FILE = "degrees.csv"
NEIGHBORHOOD_FILE = "neighborhood_edges.tsv"
DOT_FILE = "network.dot"
ENRICHMENT_FILE = "enrichment.csv"


def _build_parser() -> argparse.ArgumentParser:
    epilog = "config keys:\n" + "\n".join(registry_help_lines())
    parser = argparse.ArgumentParser(
        prog="leadlag",
        description="Lead-lag association pipeline over a shared config file.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, blurb in (
        ("simulate", "write a synthetic expression cohort and its ground-truth prior"),
        ("compute", "score all series pairs and write similarity + metrics tables"),
        ("cluster", "Ward-cluster the similarity matrix and cut the dendrogram"),
        ("network", "extract the thresholded association network"),
        ("enrich", "hypergeometric term enrichment per cluster"),
        ("report", "render figures from the emitted tables"),
    ):
        p = sub.add_parser(
            name,
            help=blurb,
            epilog=epilog,
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        p.add_argument("--config", metavar="FILE", help="key-value config file")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override any config key (repeatable)",
        )
        for key in REGISTRY:
            p.add_argument(f"--{key}", dest=key, metavar="VALUE", help=argparse.SUPPRESS)
    return parser


def _load_config(args) -> RunConfig:
    cfg = parse_config_file(args.config) if args.config else RunConfig()
    for key in REGISTRY:
        raw = getattr(args, key, None)
        if raw is not None:
            cfg.set(key, raw)
    for item in args.set:
        key, eq, val = item.partition("=")
        if not eq:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        cfg.set(key.strip(), val)
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg["paths.output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _expression_path(cfg: RunConfig) -> Path:
    if cfg["paths.expression"]:
        return Path(cfg["paths.expression"])
    return Path(cfg["paths.output_dir"]) / EXPRESSION_FILE


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

_DYN_FIELDS = {"alpha", "beta", "kappa", "noise_sd", "init"}


def _parse_dynamics(raw: str, key: str) -> simulate.GeneDynamics:
    fields = {}
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        name, eq, val = item.partition("=")
        name = name.strip()
        if not eq or name not in _DYN_FIELDS:
            raise UsageError(f"malformed dynamics field {item!r} in key {key!r}")
        try:
            fields[name] = float(val)
        except ValueError:
            raise UsageError(f"bad number {val!r} in key {key!r}") from None
    return simulate.GeneDynamics(
        alpha=fields.get("alpha", 1.0),
        beta=fields.get("beta", 0.0),
        kappa=fields.get("kappa", 0.1),
        noise_sd=fields.get("noise_sd", 0.0),
        initial=fields.get("init", 0.0),
    )


def _parse_times(raw: str) -> timeseries.TimeGrid:
    raw = raw.strip()
    try:
        if raw.startswith("linspace:"):
            parts = raw[len("linspace:") :].split(",")
            if len(parts) != 3:
                raise UsageError(
                    "simulate.times linspace form is linspace:start,stop,num"
                )
            start, stop, num = float(parts[0]), float(parts[1]), int(float(parts[2]))
            return timeseries.TimeGrid(np.linspace(start, stop, num))
        return timeseries.TimeGrid(np.array([float(x) for x in raw.split(",")]))
    except (ValueError, timeseries.DataError) as exc:
        raise UsageError(f"bad 'simulate.times' value {raw!r}: {exc}") from None


def _cohort_from_config(cfg: RunConfig) -> simulate.CohortSpec:
    extras = dict(cfg.extras)
    times_raw = extras.pop("simulate.times", None)
    try:
        seed = int(extras.pop("simulate.seed", cfg["seed"]))
    except ValueError:
        raise UsageError("bad 'simulate.seed' value") from None
    extras.pop("simulate.substeps", None)
    benchmark = extras.pop("simulate.benchmark", None)

    if benchmark is not None:
        if extras:
            raise UsageError(
                f"simulate.benchmark cannot be combined with {sorted(extras)[0]!r}"
            )
        fields = {}
        for item in benchmark.split(","):
            item = item.strip()
            if not item:
                continue
            name, eq, val = item.partition("=")
            if not eq or name.strip() not in {
                "shared",
                "independent",
                "noise_sd",
                "points",
                "t_end",
            }:
                raise UsageError(f"malformed field {item!r} in key 'simulate.benchmark'")
            try:
                fields[name.strip()] = float(val)
            except ValueError:
                raise UsageError(
                    f"bad number {val!r} in key 'simulate.benchmark'"
                ) from None
        bench = simulate.recovery_benchmark(
            n_shared_pairs=int(fields.get("shared", 20)),
            n_independent_pairs=int(fields.get("independent", 20)),
            noise_sd=fields.get("noise_sd", 0.1),
            seed=seed,
            n_points=int(fields.get("points", 17)),
            t_end=fields.get("t_end", 48.0),
        )
        return bench.spec

    if times_raw is None:
        raise UsageError("simulate needs 'simulate.times' (or simulate.benchmark)")
    grid = _parse_times(times_raw)

    groups: dict[str, dict] = {}
    independent: dict[str, dict] = {}
    for key, raw in extras.items():
        parts = key.split(".")
        if parts[:2] == ["simulate", "group"] and len(parts) == 4 and parts[3] == "signal":
            groups.setdefault(parts[2], {"signal": None, "genes": {}})["signal"] = (
                simulate.parse_signal(raw)
            )
        elif parts[:2] == ["simulate", "group"] and len(parts) == 5 and parts[3] == "gene":
            groups.setdefault(parts[2], {"signal": None, "genes": {}})["genes"][
                parts[4]
            ] = _parse_dynamics(raw, key)
        elif parts[:2] == ["simulate", "independent"] and len(parts) == 3:
            independent.setdefault(parts[2], {})["dyn"] = _parse_dynamics(raw, key)
        elif (
            parts[:2] == ["simulate", "independent"]
            and len(parts) == 4
            and parts[3] == "signal"
        ):
            independent.setdefault(parts[2], {})["signal"] = simulate.parse_signal(raw)
        else:
            raise UsageError(f"malformed simulate key {key!r}")

    spec_groups = []
    for gname, info in groups.items():
        if info["signal"] is None:
            raise UsageError(f"group {gname!r} is missing 'simulate.group.{gname}.signal'")
        if not info["genes"]:
            raise UsageError(f"group {gname!r} has no genes")
        spec_groups.append((info["signal"], list(info["genes"].items())))
    spec_indep = []
    for gene, info in independent.items():
        if "dyn" not in info:
            raise UsageError(f"independent gene {gene!r} has a signal but no dynamics")
        if "signal" not in info:
            raise UsageError(
                f"independent gene {gene!r} is missing 'simulate.independent.{gene}.signal'"
            )
        spec_indep.append((gene, info["dyn"], info["signal"]))
    return simulate.CohortSpec(
        grid=grid, groups=spec_groups, independent=spec_indep, seed=seed
    )


def _cmd_simulate(cfg: RunConfig) -> int:
    spec = _cohort_from_config(cfg)
    try:
        substeps = int(cfg.extras.get("simulate.substeps", simulate.DEFAULT_SUBSTEPS))
    except ValueError:
        raise UsageError("bad 'simulate.substeps' value") from None
    matrix, truth = simulate.simulate_cohort(spec, substeps=substeps)
    out = _out_dir(cfg)
    timeseries.write_expression_csv(matrix, out / EXPRESSION_FILE)
    prior.write_dense_prior_csv(truth, out / TRUTH_FILE)
    log.info(
        "simulated %d series at %d time points -> %s",
        matrix.n_genes,
        matrix.grid.n,
        out,
    )
    return 0


# ---------------------------------------------------------------------------
# compute
# ---------------------------------------------------------------------------


def _resolve_prior(cfg: RunConfig, gene_ids: list[str]) -> prior.PriorAdjacency:
    dense_path = cfg["paths.prior"]
    if dense_path:
        dense = prior.read_dense_prior_csv(dense_path)
        missing = [g for g in gene_ids if g not in dense.gene_ids]
        if missing:
            raise timeseries.DataError(
                f"prior file lacks {len(missing)} expression ids (first: {missing[0]!r})"
            )
        pos = [dense.gene_ids.index(g) for g in gene_ids]
        codes = dense.codes[np.ix_(pos, pos)]
        return prior.PriorAdjacency(list(gene_ids), codes)
    scores_path = cfg["paths.scores"]
    if scores_path:
        rows = prior.read_score_csv(scores_path)
        db_path = cfg["paths.database_genes"]
        if db_path:
            db = prior.read_gene_list(db_path)
        else:
            db = {g for a, b, _ in rows for g in (a, b)}
        table = prior.ScoreTable.from_rows(rows, db)
        rep = None
        if cfg["paths.replicate_corr"]:
            rep = prior.read_dense_matrix_csv(cfg["paths.replicate_corr"], gene_ids)
        return prior.build_prior(
            table,
            gene_ids,
            replicate_corr=rep,
            score_threshold=cfg["prior.score_threshold"],
            corr_threshold=cfg["prior.corr_threshold"],
        )
    log.warning("no prior file configured; treating every pair as unknown (NA)")
    return prior.PriorAdjacency.all_na(gene_ids)


def _cmd_compute(cfg: RunConfig) -> int:
    matrix = timeseries.read_expression_csv(_expression_path(cfg))
    if cfg["filter.apply"]:
        keep = set(timeseries.fold_change_filter(matrix, cfg["filter.fold_change"]))
        idx = [k for k, g in enumerate(matrix.gene_ids) if g in keep]
        if len(idx) < 2:
            raise timeseries.DataError("fold-change filter left fewer than 2 series")
        log.info("fold-change filter kept %d of %d series", len(idx), matrix.n_genes)
        matrix = timeseries.ExpressionMatrix(
            [matrix.gene_ids[k] for k in idx], matrix.values[idx], matrix.grid
        )
    if matrix.grid.n <= 5:
        raise timeseries.DataError("the full design needs more than 5 time points")
    w = _resolve_prior(cfg, matrix.gene_ids)
    pcfg = pairwise.PairwiseConfig(
        estimator=cfg["compute.estimator"],
        adaptive_xi=cfg["compute.adaptive_xi"],
        a=cfg["compute.a"],
        b=cfg["compute.b"],
        g_floor=cfg["compute.g_floor"],
        g_cap=cfg["compute.g_cap"],
        p_cov=cfg["compute.p_cov"],
        workers=cfg["compute.workers"],
    )
    start = time.perf_counter()
    sim, table = pairwise.compute_all(matrix, w, pcfg)
    elapsed = time.perf_counter() - start
    n_pairs = len(table)
    log.info(
        "scored %d pairs in %.2f s (%.0f pairs/s, %d workers)",
        n_pairs,
        elapsed,
        n_pairs / elapsed if elapsed > 0 else float("inf"),
        pcfg.workers,
    )
    out = _out_dir(cfg)
    pairwise.write_similarity_csv(sim, out / SIMILARITY_FILE)
    pairwise.write_metrics_tsv(table, out / METRICS_FILE)
    prior.write_dense_prior_csv(w, out / PRIOR_USED_FILE)
    return 0


# ---------------------------------------------------------------------------
# cluster / network / enrich / report
# ---------------------------------------------------------------------------


def _cmd_cluster(cfg: RunConfig) -> int:
    k = cfg["cluster.k"]
    height = cfg["cluster.height"]
    if (k is None) == (height is None):
        raise UsageError("set exactly one of cluster.k or cluster.height")
    out = _out_dir(cfg)
    sim = pairwise.read_similarity_csv(out / SIMILARITY_FILE)
    dend = clustermod.ward_cluster(sim, square_input=cfg["cluster.squared"])
    assignment = clustermod.cut(dend, height=height, k=k)
    clustermod.write_cluster_csv(assignment, out / CLUSTERS_FILE)
    clustermod.write_dendrogram_json(dend, out / DENDROGRAM_FILE)
    log.info("cut dendrogram into %d clusters", assignment.n_clusters)
    return 0


def _cmd_network(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    sim = pairwise.read_similarity_csv(out / SIMILARITY_FILE)
    prior_path = out / PRIOR_USED_FILE
    if prior_path.exists():
        w = prior.read_dense_prior_csv(prior_path)
        if w.gene_ids != sim.gene_ids:
            raise timeseries.DataError("stored prior ids do not match similarity matrix")
    else:
        w = _resolve_prior(cfg, sim.gene_ids)
    threshold = cfg["network.threshold"]
    if cfg["network.quantile"] is not None:
        offdiag = sim.S[np.triu_indices(len(sim.gene_ids), k=1)]
        threshold = pairwise.percentile_threshold(offdiag, cfg["network.quantile"])
        log.info("quantile %.3f gives edge threshold %.4f", cfg["network.quantile"], threshold)
    net = netmod.build_network(sim, w, threshold=threshold)
    netmod.write_edge_tsv(net, out / EDGES_FILE)
    netmod.write_degree_csv(net, out / DEGREES_FILE)
    if cfg["network.dot"]:
        netmod.write_dot(net, out / DOT_FILE)
    if cfg["network.seeds"]:
        seeds = [s.strip() for s in cfg["network.seeds"].split(",") if s.strip()]
        sub = netmod.neighborhood(net, seeds)
        netmod.write_edge_tsv(sub, out / NEIGHBORHOOD_FILE)
    log.info("network has %d edges above %.4f", len(net.edges), threshold)
    return 0


def _cmd_enrich(cfg: RunConfig) -> int:
    if not cfg["paths.annotations"]:
        raise UsageError("enrich needs paths.annotations")
    out = _out_dir(cfg)
    assignment = clustermod.read_cluster_csv(out / CLUSTERS_FILE)
    universe = set(assignment.labels)
    annotations = enrichmod.read_annotation_tsv(cfg["paths.annotations"], universe)
    rows = enrichmod.enrich_clusters(assignment, annotations, alpha=cfg["enrich.alpha"])
    enrichmod.write_enrichment_csv(rows, out / ENRICHMENT_FILE)
    n_sig = sum(r.significant for r in rows)
    log.info("%d of %d (cluster, term) cells significant", n_sig, len(rows))
    return 0


def _cmd_report(cfg: RunConfig) -> int:
    from . import report

    out = _out_dir(cfg)
    written = report.render_all(out)
    log.info("wrote %d figures under %s", len(written), out / "figures")
    return 0


_DISPATCH = {
    "simulate": _cmd_simulate,
    "compute": _cmd_compute,
    "cluster": _cmd_cluster,
    "network": _cmd_network,
    "enrich": _cmd_enrich,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        return _DISPATCH[args.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (timeseries.DataError, FileNotFoundError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
