"""Maximum-likelihood fitting, goodness of fit, model ranking and tail-index estimation.

The estimators follow the scikit-learn conventions (``fit`` returns ``self``,
learned state ends in an underscore, hyper-parameters round-trip through
``get_params``), so they drop into pipelines and grid searches::

    >>> fitter = DistributionFitter("gpd").fit(losses)      # doctest: +SKIP
    >>> fitter.report_.aic                                   # doctest: +SKIP

The functional helpers :func:`fit_mle`, :func:`hill_tail_index`, :func:`gof`
and :func:`select_model` wrap the same code paths.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.optimize import minimize_scalar
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import dist
from .exceptions import (
    DataDomainError,
    EmptyInputError,
    FitConvergenceError,
    IncomparableReportsError,
    InsufficientTailError,
    ThresholdDegeneracyError,
    UnsupportedEvaluationError,
)

FAMILIES = ("normal", "lognormal", "gpd", "powerlaw")
_PARAM_COUNT = {"normal": 2, "lognormal": 2, "gpd": 2, "powerlaw": 1}


@dataclass(frozen=True)
class GoodnessOfFit:
    log_likelihood: float
    aic: float
    bic: float
    ks_statistic: float
    ad_statistic: float


@dataclass(frozen=True)
class FitReport:
    family: str
    params: dict
    spec: object
    log_likelihood: float
    aic: float
    bic: float
    ks_statistic: float
    ad_statistic: float
    sample_size: int
    param_count: int = field(default=0)


def _as_1d(data):
    x = check_array(np.asarray(data, dtype=float).reshape(-1, 1), ensure_2d=True, ensure_min_samples=1)
    return x.ravel()


def _losses(data):
    try:
        return _as_1d(data)
    except ValueError as exc:
        if np.asarray(data).size == 0:
            raise EmptyInputError("data must be non-empty") from exc
        raise


def ks_statistic(data, cdf):
    """Sup-norm distance between the empirical cdf of ``data`` and ``cdf``."""
    xs = np.sort(np.asarray(data, dtype=float))
    n = xs.size
    f = np.asarray(cdf(xs), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n), 0.0))


def ad_statistic(data, cdf, sf=None):
    """Anderson-Darling A^2 against a fully specified cdf."""
    xs = np.sort(np.asarray(data, dtype=float))
    n = xs.size
    f = np.asarray(cdf(xs), dtype=float)
    s = np.asarray(sf(xs), dtype=float) if sf is not None else 1.0 - f
    tiny = np.finfo(float).tiny
    log_f = np.log(np.maximum(f, tiny))
    log_s = np.log(np.maximum(s, tiny))[::-1]
    i = np.arange(1, n + 1)
    return float(max(-n - np.sum((2 * i - 1) * (log_f + log_s)) / n, 0.0))


def gof(spec, data, param_count=0):
    """Likelihood, information criteria and EDF statistics of ``spec`` on ``data``."""
    if not dist.has_closed_form(spec):
        raise UnsupportedEvaluationError(f"goodness of fit needs a closed-form cdf; {spec!r} has none")
    x = _losses(data)
    n = x.size
    ll = float(np.sum(dist.log_density(spec, x)))
    return GoodnessOfFit(
        log_likelihood=ll,
        aic=2.0 * param_count - 2.0 * ll,
        bic=param_count * math.log(n) - 2.0 * ll,
        ks_statistic=ks_statistic(x, lambda v: dist.cdf(spec, v)),
        ad_statistic=ad_statistic(x, lambda v: dist.cdf(spec, v), lambda v: dist.survival(spec, v)),
    )


def _gpd_mle(x):
    """Profile-likelihood GPD fit with threshold 0.

    With theta = xi / sigma fixed, the likelihood is maximized in closed form
    by xi = mean(log1p(theta x)), leaving a one-dimensional search over
    t = theta * mean(x).
    """
    n = x.size
    xbar = float(x.mean())
    xmax = float(x.max())
    trace = []

    def negll(t):
        theta = t / xbar
        if abs(t) < 1e-300:
            val = n * (math.log(xbar) + 1.0)
        else:
            m = float(np.mean(np.log1p(theta * x)))
            ratio = m / theta
            if not (ratio > 0.0 and math.isfinite(ratio)):
                val = math.inf
            else:
                val = n * (1.0 + math.log(ratio) + m)
        trace.append((t, val))
        return val

    t_lo = -xbar / xmax
    grid = np.concatenate([
        t_lo * (1.0 - np.geomspace(1e-9, 1.0, 40)),
        np.geomspace(1e-7, 1e9, 320),
    ])
    grid = np.unique(grid)
    values = np.array([negll(t) for t in grid])
    j = int(np.argmin(values))
    if j == 0:
        raise FitConvergenceError(
            "GPD likelihood increases toward the support boundary (shape < -1); no interior maximum",
            trace,
        )
    if j == grid.size - 1:
        raise FitConvergenceError("GPD profile likelihood has no maximum inside the search range", trace)
    lo, hi = grid[j - 1], grid[j + 1]
    res = minimize_scalar(
        negll,
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-10 * max(1.0, abs(grid[j])), "maxiter": 1000},
    )
    if not res.success:
        raise FitConvergenceError(f"bounded search failed: {res.message}", trace)
    t = float(res.x) if res.fun <= values[j] else float(grid[j])
    theta = t / xbar
    if abs(t) < 1e-300:
        return 0.0, xbar
    xi = float(np.mean(np.log1p(theta * x)))
    return xi, xi / theta


def _mle(family, x):
    if family == "normal":
        if x.size < 2 or np.ptp(x) == 0.0:
            raise DataDomainError("normal fit needs at least two distinct observations")
        params = {"mean": float(x.mean()), "stdev": float(x.std(ddof=0))}
        return dist.Normal(**params), params
    if family in ("lognormal", "gpd", "powerlaw"):
        bad = np.flatnonzero(~(x > 0))
        if bad.size:
            raise DataDomainError(
                f"{family} fit needs positive data; observation {int(bad[0])} is {x[bad[0]]!r}"
            )
    if family == "lognormal":
        lx = np.log(x)
        if x.size < 2 or np.ptp(lx) == 0.0:
            raise DataDomainError("log-normal fit needs at least two distinct observations")
        params = {"log_mean": float(lx.mean()), "log_stdev": float(lx.std(ddof=0))}
        return dist.LogNormal(**params), params
    if family == "gpd":
        xi, sigma = _gpd_mle(x)
        params = {"shape": xi, "scale": sigma, "threshold": 0.0}
        return dist.GPD(**params), params
    if family == "powerlaw":
        below = np.flatnonzero(x < 1.0)
        if below.size:
            raise DataDomainError(f"power-law support is [1, inf); observation {int(below[0])} is {x[below[0]]!r}")
        total = float(np.sum(np.log(x)))
        if total == 0.0:
            raise DataDomainError("power-law fit is degenerate: every observation equals 1")
        params = {"tail_index": x.size / total}
        return dist.PowerLaw(**params), params
    raise ValueError(f"unknown family {family!r}; choose from {FAMILIES}")


class DistributionFitter(BaseEstimator):
    """Maximum-likelihood fit of one parametric family.

    Parameters
    ----------
    family : {"normal", "lognormal", "gpd", "powerlaw"}
        GPD fits use a fixed threshold of 0 over the full sample.

    Attributes
    ----------
    spec_ : distribution spec at the fitted parameters
    report_ : FitReport
    """

    def __init__(self, family="gpd"):
        self.family = family

    def fit(self, X, y=None):
        x = _losses(X)
        spec, params = _mle(self.family, x)
        k = _PARAM_COUNT[self.family]
        stats = gof(spec, x, k)
        self.spec_ = spec
        self.n_samples_ = x.size
        self.report_ = FitReport(
            family=self.family,
            params=params,
            spec=spec,
            log_likelihood=stats.log_likelihood,
            aic=stats.aic,
            bic=stats.bic,
            ks_statistic=stats.ks_statistic,
            ad_statistic=stats.ad_statistic,
            sample_size=x.size,
            param_count=k,
        )
        return self

    def score(self, X, y=None):
        """Mean log-likelihood of ``X`` under the fitted law."""
        check_is_fitted(self, "spec_")
        return float(np.mean(dist.log_density(self.spec_, _losses(X))))

    def sample(self, n_samples, seed=None):
        check_is_fitted(self, "spec_")
        return dist.sample(self.spec_, n_samples, seed)


def fit_mle(family, data):
    return DistributionFitter(family).fit(data).report_


def select_model(reports):
    """Rank fit reports by AIC, then BIC, then KS; ties keep input order."""
    reports = list(reports)
    if len(reports) <= 1:
        return reports
    sizes = {r.sample_size for r in reports}
    if len(sizes) > 1:
        raise IncomparableReportsError(f"reports cover different sample sizes {sorted(sizes)}")
    order = sorted(range(len(reports)), key=lambda i: (reports[i].aic, reports[i].bic, reports[i].ks_statistic, i))
    return [reports[i] for i in order]


@dataclass(frozen=True)
class HillResult:
    tail_index: float
    stderr: float
    n_tail: int
    threshold: float


class HillEstimator(BaseEstimator):
    """Hill estimator of the power-law tail index on the upper order statistics.

    With k = floor(top_fraction * n) and x_(1) <= ... <= x_(n)::

        alpha = k / sum_{i=1..k} log(x_(n-i+1) / x_(n-k))

    The estimate is invariant to rescaling the data. ``stderr_`` is the
    asymptotic alpha / sqrt(k).
    """

    def __init__(self, top_fraction=0.1, min_tail=30):
        self.top_fraction = top_fraction
        self.min_tail = min_tail

    def fit(self, X, y=None):
        if not 0.0 < self.top_fraction < 1.0:
            raise ValueError(f"top_fraction must lie in (0, 1), got {self.top_fraction}")
        xs = np.sort(_losses(X))
        n = xs.size
        k = int(math.floor(self.top_fraction * n + 1e-9))
        if k < self.min_tail:
            raise InsufficientTailError(
                f"only {k} order statistics in the top {self.top_fraction:g} of {n}; need {self.min_tail}"
            )
        threshold = xs[n - k - 1]
        if threshold <= 0.0:
            raise DataDomainError(f"Hill threshold must be positive, got {threshold!r}")
        if xs[n - k] == threshold:
            raise ThresholdDegeneracyError(f"tied order statistics at the threshold value {threshold!r}")
        alpha = k / float(np.sum(np.log(xs[n - k:] / threshold)))
        self.tail_index_ = alpha
        self.extreme_value_index_ = 1.0 / alpha
        self.stderr_ = alpha / math.sqrt(k)
        self.n_tail_ = k
        self.threshold_ = float(threshold)
        return self


def hill_tail_index(data, top_fraction=0.1):
    est = HillEstimator(top_fraction).fit(data)
    return HillResult(est.tail_index_, est.stderr_, est.n_tail_, est.threshold_)
