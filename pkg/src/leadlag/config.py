"""Flat key-value run configuration shared by every CLI command.

A config file holds `dotted.key = value` lines ('#' starts a comment); every
key can also be overridden by a same-named command-line flag.  Keys under
`simulate.` describe the synthetic cohort and are validated by the simulate
command; all other keys come from the fixed registry below.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class UsageError(Exception):
    """Bad configuration or command line; exits with status 2."""


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"expected a boolean, got {text!r}")


# key -> (type tag, default, help)
REGISTRY: dict[str, tuple[str, object, str]] = {
    "paths.expression": ("str", None, "input expression CSV; defaults to <output_dir>/expression.csv"),
    "paths.scores": ("str", None, "sparse score CSV: gene_a,gene_b,score (NA allowed)"),
    "paths.database_genes": ("str", None, "ids covered by the score database, one per line"),
    "paths.replicate_corr": ("str", None, "dense replicate-correlation CSV"),
    "paths.prior": ("str", None, "dense prior CSV with cells 1/0/NA"),
    "paths.annotations": ("str", None, "annotation TSV: term<TAB>gene per membership"),
    "paths.output_dir": ("str", "out", "directory receiving all emitted files"),
    "prior.score_threshold": ("float", 0.5, "score above this marks a pair associated (default 0.5)"),
    "prior.corr_threshold": ("float", 0.8, "replicate correlation above this promotes an unknown score (default 0.8)"),
    "filter.fold_change": ("float", 2.0, "max |value| a series needs to pass the filter (default 2.0)"),
    "filter.apply": ("bool", False, "apply the fold-change filter before computing"),
    "compute.estimator": ("str", "bayes", "'bayes' (shrunken) or 'ols' (unshrunken)"),
    "compute.adaptive_xi": ("bool", False, "adapt the associated-pair prior mean from the data"),
    "compute.a": ("float", 1e-3, "inverse-gamma shape hyperprior"),
    "compute.b": ("float", 1e-3, "inverse-gamma scale hyperprior"),
    "compute.g_floor": ("float", 1e-6, "lower clamp for the shrinkage parameter g"),
    "compute.g_cap": ("float", 1e12, "upper clamp for the shrinkage parameter g"),
    "compute.p_cov": ("int", 4, "covariate count used by the Bayes factor (default 4)"),
    "compute.workers": ("int", 1, "worker processes for the pair sweep"),
    "cluster.k": ("int", None, "cut the dendrogram into k clusters"),
    "cluster.height": ("float", None, "cut the dendrogram strictly below this height"),
    "cluster.squared": ("bool", True, "square dissimilarities before the Ward update"),
    "network.threshold": ("float", 0.9, "similarity above this gets an edge (default 0.9)"),
    "network.quantile": ("float", None, "derive the edge threshold from this similarity quantile"),
    "network.seeds": ("str", None, "comma-separated ids; also emit their neighborhood"),
    "network.dot": ("bool", False, "also emit a Graphviz DOT file"),
    "enrich.alpha": ("float", 0.05, "adjusted-p significance level (default 0.05)"),
    "seed": ("int", 0, "global random seed"),
}

_PARSERS = {"str": str, "int": int, "float": float, "bool": _parse_bool}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)  # simulate.* keys, raw strings

    def __getitem__(self, key: str):
        if key in self.values:
            return self.values[key]
        if key in REGISTRY:
            return REGISTRY[key][1]
        raise KeyError(key)

    def set(self, key: str, raw: str) -> None:
        if key.startswith("simulate."):
            self.extras[key] = raw.strip()
            return
        if key not in REGISTRY:
            raise UsageError(f"unknown config key {key!r}")
        tag = REGISTRY[key][0]
        try:
            self.values[key] = _PARSERS[tag](raw.strip())
        except UsageError:
            raise
        except ValueError:
            raise UsageError(f"bad value {raw!r} for key {key!r} (expected {tag})") from None


def parse_config_file(path) -> RunConfig:
    cfg = RunConfig()
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    with fh:
        for lineno, ln in enumerate(fh, start=1):
            ln = ln.split("#", 1)[0].strip()
            if not ln:
                continue
            key, eq, val = ln.partition("=")
            if not eq:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            cfg.set(key.strip(), val)
    return cfg


def registry_help_lines() -> list[str]:
    lines = []
    for key, (tag, default, help_text) in REGISTRY.items():
        shown = "" if default is None else f" [default: {default}]"
        lines.append(f"  {key} ({tag}): {help_text}{shown}")
    lines.append("  simulate.* : cohort description, see README")
    return lines
