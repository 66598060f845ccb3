"""Lead-lag association scoring for time-course data.

Pairs of series are scored by fitting an ODE-derived linear model with an
empirical-Bayes g-prior whose shrinkage level minimizes Stein's unbiased
risk estimate; the resulting similarity matrix feeds Ward clustering,
thresholded network extraction, and hypergeometric term enrichment.  A
built-in coupled-ODE simulator provides ground-truth cohorts for
validation.
"""

from .cluster import ClusterAssignment, Dendrogram, cut, ward_cluster, ward_linkage
from .enrich import AnnotationSets, bh_adjust, enrich_clusters, hypergeom_test
from .network import GeneNetwork, build_network, degree_report, neighborhood
from .pairwise import (
    PairMetrics,
    PairTable,
    PairwiseConfig,
    SimilarityMatrix,
    compute_all,
    compute_pair,
    percentile_threshold,
    symmetrize,
)
from .prior import PriorAdjacency, ScoreTable, Ternary, build_prior
from .regress import (
    DesignPair,
    ModelVariant,
    PosteriorFit,
    bayes_factor,
    bayesian_r2,
    build_design,
    classic_r2,
    log10_bayes_factor,
    ols_fit,
    optimal_g,
    optimal_g_xi,
    posterior,
    prior_mean,
    sample_posterior,
    select_g,
    sure,
)
from .simulate import (
    CohortSpec,
    GeneDynamics,
    SignalSpec,
    recovery_benchmark,
    simulate_cohort,
    simulate_gene,
)
from .timeseries import (
    ExpressionMatrix,
    SplineInterpolant,
    TimeGrid,
    cumulative_integral,
    fit_spline,
    fold_change_filter,
    pearson_similarity,
)

__version__ = "0.1.0"
