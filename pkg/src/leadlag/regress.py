"""Empirical-Bayes g-prior regression for the lead-lag linear model.

One series (the response) is regressed on another series, the running
integrals of both, a linear trend, and an intercept.  Coefficients get a
Zellner g-prior whose mean encodes external evidence of association and
whose scale g is chosen by minimizing Stein's unbiased risk estimate (SURE)
in closed form.  The module covers the full-design fit, the two reduced
designs (partner-only and self-only), the conditional g rule, the
variance-ratio R-squared, Bayes factors against the intercept-only model,
and posterior simulation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .timeseries import TimeGrid

G_FLOOR = 1e-6
G_CAP = 1e12
DEFAULT_A = 1e-3
DEFAULT_B = 1e-3
DEFAULT_P_COV = 4

# Spectral cutoff for treating a singular value as zero, relative to the
# largest one.
RANK_RCOND = 1e-12


def is_perfect_fit(sigma2: float, Y: np.ndarray) -> bool:
    """Residual variance indistinguishable from an exact interpolation.

    Exact fits leave O(eps)-level residuals after the factorization, so the
    test is relative to the response scale rather than literal zero.
    """
    scale = float(np.mean(np.square(Y)))
    return sigma2 <= 1e-24 * max(scale, np.finfo(float).tiny)


class ModelVariant(enum.Enum):
    """Column layout of the regression design.

    FULL:  [partner, int(partner), int(self), t, 1]
    OTHER: [partner, int(partner), 1]
    OWN:   [int(self), t, 1]
    """

    FULL = "full"
    OTHER = "other"
    OWN = "own"

    @property
    def p(self) -> int:
        return 5 if self is ModelVariant.FULL else 3


@dataclass(frozen=True)
class DesignPair:
    X: np.ndarray
    Y: np.ndarray
    variant: ModelVariant

    def __post_init__(self):
        n, p = self.X.shape
        if p != self.variant.p:
            raise ValueError(f"{self.variant} expects {self.variant.p} columns")
        if self.Y.shape != (n,):
            raise ValueError("response length does not match design")
        if n <= p:
            raise ValueError(f"need n > p ({n} rows, {p} columns)")
        if not np.all(self.X[:, -1] == 1.0):
            raise ValueError("last design column must be the intercept")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def build_design(
    a_vals: np.ndarray,
    b_vals: np.ndarray,
    int_a: np.ndarray,
    int_b: np.ndarray,
    grid: TimeGrid,
    variant: ModelVariant = ModelVariant.FULL,
) -> DesignPair:
    """Assemble the design for regressing series A on series B.

    `int_a`/`int_b` are the cumulative integrals of the two series from the
    first grid point, so their first entries are 0.
    """
    n = grid.n
    cols = {
        "a": np.asarray(a_vals, dtype=float),
        "b": np.asarray(b_vals, dtype=float),
        "ia": np.asarray(int_a, dtype=float),
        "ib": np.asarray(int_b, dtype=float),
    }
    for name, v in cols.items():
        if v.shape != (n,):
            raise ValueError(f"vector {name!r} length does not match grid")
    ones = np.ones(n)
    t = grid.times
    if variant is ModelVariant.FULL:
        X = np.column_stack([cols["b"], cols["ib"], cols["ia"], t, ones])
    elif variant is ModelVariant.OTHER:
        X = np.column_stack([cols["b"], cols["ib"], ones])
    else:
        X = np.column_stack([cols["ia"], t, ones])
    return DesignPair(X, cols["a"], variant)


@dataclass(frozen=True)
class OLSFit:
    beta: np.ndarray
    sigma2: float
    fitted: np.ndarray
    rank: int
    rank_deficient: bool


def ols_fit(d: DesignPair) -> OLSFit:
    """Least squares through an orthogonal (SVD) factorization.

    Rank-deficient designs yield the minimum-norm solution plus a flag.
    sigma2 is the residual sum of squares over (n - p), with p the design's
    column count regardless of rank.
    """
    u, s, vt = np.linalg.svd(d.X, full_matrices=False)
    tol = RANK_RCOND * s[0] if s[0] > 0 else 0.0
    keep = s > tol
    rank = int(keep.sum())
    c = u.T @ d.Y
    c_scaled = np.where(keep, c / np.where(keep, s, 1.0), 0.0)
    beta = vt.T @ c_scaled
    fitted = u @ np.where(keep, c, 0.0)
    rss = float(np.sum((d.Y - fitted) ** 2))
    sigma2 = rss / (d.n - d.p)
    return OLSFit(beta, sigma2, fitted, rank, rank < d.p)


def variance_ratio_r2(fitted: np.ndarray, Y: np.ndarray) -> float:
    """R-squared as var(fit) / (var(fit) + var(residual)), in [0, 1].

    Sample variances use the (n - 1) denominator.  Returns 0 when both
    variances vanish (degenerate constant data).
    """
    fitted = np.asarray(fitted, dtype=float)
    Y = np.asarray(Y, dtype=float)
    vf = float(np.var(fitted, ddof=1))
    vr = float(np.var(Y - fitted, ddof=1))
    denom = vf + vr
    if denom == 0.0:
        return 0.0
    return vf / denom


def classic_r2(d: DesignPair, fitted: np.ndarray) -> float:
    """Coefficient of determination ||fit - mean||^2 / ||Y - mean||^2.

    Returns 0 for a zero-variance response (degenerate case).
    """
    ybar = float(np.mean(d.Y))
    sst = float(np.sum((d.Y - ybar) ** 2))
    if sst == 0.0:
        return 0.0
    ssr = float(np.sum((fitted - ybar) ** 2))
    return ssr / sst


def sure(g: float, d: DesignPair, beta0: np.ndarray, ols: OLSFit) -> float:
    """Unbiased risk estimate of the shrunken fit at a given g.

    delta0 = ||Y - X beta*(g)||^2 + (2 g p / (1 + g) - n) * sigma2_hat,
    where beta*(g) blends the prior mean and the OLS estimate.
    """
    if g <= 0:
        raise ValueError("g must be positive")
    y0 = d.X @ np.asarray(beta0, dtype=float)
    fitted_star = (y0 + g * ols.fitted) / (1.0 + g)
    rss = float(np.sum((d.Y - fitted_star) ** 2))
    return rss + (2.0 * g * d.p / (1.0 + g) - d.n) * ols.sigma2


def shrinkage_g(prior_fit_dist2: float, p: int, sigma2: float) -> float:
    """Unclamped SURE-minimizing g: ||fit_OLS - fit_prior||^2 / (p sigma2) - 1."""
    return prior_fit_dist2 / (p * sigma2) - 1.0


@dataclass(frozen=True)
class GSelection:
    g: float
    unclamped: float
    clamped: bool
    perfect_fit: bool


def _clamp_g(unclamped: float, g_floor: float, g_cap: float) -> GSelection:
    g = min(max(unclamped, g_floor), g_cap)
    return GSelection(g, unclamped, g != unclamped, False)


def optimal_g(
    d: DesignPair,
    beta0: np.ndarray,
    ols: OLSFit,
    g_floor: float = G_FLOOR,
    g_cap: float = G_CAP,
) -> GSelection:
    """Closed-form SURE minimizer over g, clamped to [g_floor, g_cap].

    A zero residual variance (perfect OLS fit) sends g to the cap with a
    flag rather than dividing by zero.
    """
    if is_perfect_fit(ols.sigma2, d.Y):
        return GSelection(g_cap, math.inf, True, True)
    y0 = d.X @ np.asarray(beta0, dtype=float)
    dist2 = float(np.sum((ols.fitted - y0) ** 2))
    return _clamp_g(shrinkage_g(dist2, d.p, ols.sigma2), g_floor, g_cap)


@dataclass(frozen=True)
class XiGSelection:
    xi: float
    g: float
    unclamped: float
    clamped: bool
    perfect_fit: bool


def optimal_g_xi(
    d: DesignPair,
    ols: OLSFit,
    g_floor: float = G_FLOOR,
    g_cap: float = G_CAP,
) -> XiGSelection:
    """Joint SURE minimizer over (xi, g) for the adaptive prior mean.

    The prior mean puts xi on the two partner columns and 0 elsewhere;
    xi* projects Y onto the elementwise sum of those columns, and g* is the
    closed-form minimizer at xi*.  Requires that sum to be nonzero.
    """
    x12 = d.X[:, 0] + d.X[:, 1]
    x12_norm2 = float(np.sum(x12 * x12))
    if x12_norm2 == 0.0:
        raise ValueError("partner columns sum to zero; adaptive prior undefined")
    yx = float(d.Y @ x12)
    xi = yx / x12_norm2
    if is_perfect_fit(ols.sigma2, d.Y):
        return XiGSelection(xi, g_cap, math.inf, True, True)
    yhat_norm2 = float(np.sum(ols.fitted**2))
    unclamped = (yhat_norm2 * x12_norm2 - yx * yx) / (
        x12_norm2 * d.p * ols.sigma2
    ) - 1.0
    sel = _clamp_g(unclamped, g_floor, g_cap)
    return XiGSelection(xi, sel.g, sel.unclamped, sel.clamped, False)


def select_g(w, g_star: float) -> float:
    """Conditional g: keep the SURE-optimal value unless the pair is marked
    unlikely, in which case g = 1 pins the fit halfway to the zero prior."""
    from .prior import Ternary

    if w is Ternary.ZERO:
        return 1.0
    return g_star


def prior_mean(w, variant: ModelVariant, adaptive_xi: float | None = None) -> np.ndarray:
    """Prior coefficient mean for a pair with ternary evidence `w`.

    Associated pairs put unit (or xi, in adaptive mode) mass on the two
    partner columns of the FULL design; the OTHER design gets (1, 1, 0);
    the self-only design is always centered at zero.
    """
    from .prior import Ternary

    p = variant.p
    beta0 = np.zeros(p)
    if w is Ternary.ONE and variant is ModelVariant.FULL:
        v = 1.0 if adaptive_xi is None else float(adaptive_xi)
        beta0[0] = beta0[1] = v
    elif w is Ternary.ONE and variant is ModelVariant.OTHER:
        beta0[0] = beta0[1] = 1.0
    return beta0


@dataclass(frozen=True)
class PosteriorFit:
    """Normal-inverse-gamma posterior under the g-prior."""

    beta0: np.ndarray
    beta_ols: np.ndarray
    beta_star: np.ndarray
    v_star: np.ndarray
    a_star: float
    b_star: float
    g: float
    sigma2_hat: float
    fitted: np.ndarray
    y0: np.ndarray
    rank_deficient: bool


def posterior(
    d: DesignPair,
    beta0: np.ndarray,
    g: float,
    a: float = DEFAULT_A,
    b: float = DEFAULT_B,
) -> PosteriorFit:
    """Conjugate update with prior covariance sigma2 * g * (X'X)^-1.

    beta* is the convex combination (beta0 + g beta_OLS) / (1 + g) and
    V* = g/(1+g) (X'X)^-1.  b* is evaluated in the cancellation-free form
    b + (||Y - X beta*||^2 + (beta* - beta0)' X'X (beta* - beta0) / g) / 2,
    which equals the textbook quadratic-form expression and stays positive.
    Singular X'X goes through the pseudoinverse with a rank flag.
    """
    if g <= 0:
        raise ValueError("g must be positive")
    if a <= 0 or b <= 0:
        raise ValueError("hyperpriors a, b must be positive")
    beta0 = np.asarray(beta0, dtype=float)
    if beta0.shape != (d.p,):
        raise ValueError("prior mean length does not match design")
    ols = ols_fit(d)
    beta_star = (beta0 + g * ols.beta) / (1.0 + g)
    xtx = d.X.T @ d.X
    if ols.rank_deficient:
        xtx_inv = np.linalg.pinv(xtx, rcond=RANK_RCOND, hermitian=True)
    else:
        xtx_inv = np.linalg.inv(xtx)
        xtx_inv = (xtx_inv + xtx_inv.T) / 2.0
    v_star = (g / (1.0 + g)) * xtx_inv
    a_star = a + d.n / 2.0
    fitted = d.X @ beta_star
    diff = beta_star - beta0
    quad = float(diff @ xtx @ diff) / g
    rss = float(np.sum((d.Y - fitted) ** 2))
    b_star = b + 0.5 * (rss + quad)
    y0 = d.X @ beta0
    return PosteriorFit(
        beta0=beta0,
        beta_ols=ols.beta,
        beta_star=beta_star,
        v_star=v_star,
        a_star=a_star,
        b_star=b_star,
        g=g,
        sigma2_hat=ols.sigma2,
        fitted=fitted,
        y0=y0,
        rank_deficient=ols.rank_deficient,
    )


def bayesian_r2(fit: PosteriorFit, Y: np.ndarray) -> float:
    """Variance-ratio R-squared of the posterior-mean fit."""
    return variance_ratio_r2(fit.fitted, Y)


def log10_bayes_factor(r2: float, g: float, n: int, p_cov: int = DEFAULT_P_COV) -> float:
    """log10 Bayes factor of the covariate model against intercept-only.

    Works in log space so large g cannot overflow; r2 = 1 hits the finite
    limit (1+g)^((n - p_cov - 1)/2).
    """
    if not (0.0 <= r2 <= 1.0):
        raise ValueError("r2 must lie in [0, 1]")
    if g <= 0:
        raise ValueError("g must be positive")
    lead = 0.5 * (n - p_cov - 1) * math.log10(1.0 + g)
    tail = 0.5 * (n - 1) * math.log10(1.0 + g * (1.0 - r2))
    return lead - tail


def bayes_factor(r2: float, g: float, n: int, p_cov: int = DEFAULT_P_COV) -> float:
    return 10.0 ** log10_bayes_factor(r2, g, n, p_cov)


def sample_posterior(
    fit: PosteriorFit,
    d: DesignPair,
    k: int,
    seed: int,
    null_prior: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo draws from the coefficient posterior.

    sigma2 is drawn inverse-gamma(a*, b*), then beta is drawn normal with
    mean beta* and covariance g sigma2 V*.  With `null_prior`, beta* is
    recomputed at a zero prior mean before sampling (same g), which gives a
    reference distribution for pairs whose association is presumed known.
    Fixed seed means bit-identical draws.  Returns (k, p) coefficient draws
    and the k variance-ratio R-squared values of the drawn fits.
    """
    if k < 1:
        raise ValueError("need at least one draw")
    if fit.a_star <= 0 or fit.b_star <= 0:
        raise ValueError("posterior shape/scale must be positive")
    rng = np.random.default_rng(seed)
    center = fit.beta_star
    if null_prior:
        center = (fit.g / (1.0 + fit.g)) * fit.beta_ols
    sigma2 = fit.b_star / rng.gamma(shape=fit.a_star, scale=1.0, size=k)
    # Factor V* once; PSD with possible zero eigenvalues under rank deficiency.
    evals, evecs = np.linalg.eigh(fit.v_star)
    evals = np.clip(evals, 0.0, None)
    root = evecs * np.sqrt(evals)
    z = rng.standard_normal((k, fit.v_star.shape[0]))
    betas = center + np.sqrt(fit.g * sigma2)[:, None] * (z @ root.T)
    fits = betas @ d.X.T
    vf = fits.var(axis=1, ddof=1)
    resid = d.Y - fits
    vr = resid.var(axis=1, ddof=1)
    denom = vf + vr
    r2s = np.where(denom > 0, vf / np.where(denom > 0, denom, 1.0), 0.0)
    return betas, r2s
