"""Empirical risk measures and Monte Carlo / bootstrap VaR sweeps.

Quantiles are lower order statistics with no interpolation: the VaR at
confidence level ``c`` of ``m`` samples is the ``ceil(c*m)``-th smallest one.
This keeps translation and scale equivariance exact.
"""
from dataclasses import dataclass
import math
from typing import Optional

import numpy as np
from scipy import stats

from . import dist
from . import rng as _rng
from .exceptions import EmptyInputError, InsufficientTailError, ParameterDomainError, ResolutionError

DEFAULT_BATCHES = 20


@dataclass(frozen=True)
class RiskMeasureReport:
    measure: str
    level: float
    point_estimate: float
    ci_low: float
    ci_high: float
    sample_count: int
    seed: object = None
    aggregation_count: Optional[int] = None

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise ParameterDomainError("level", f"must lie in (0, 1), got {self.level}")
        if not self.ci_low <= self.point_estimate <= self.ci_high:
            raise ValueError(
                f"interval [{self.ci_low}, {self.ci_high}] does not contain {self.point_estimate}"
            )


def _check_level(level):
    if not 0.0 < level < 1.0:
        raise ParameterDomainError("level", f"must lie in (0, 1), got {level}")


def order_index(level, m):
    """Zero-based position of the VaR order statistic among ``m`` samples."""
    _check_level(level)
    raw = level * m
    # level*m can land a few ulps above an integer (0.07*100 = 7.000000000000001)
    k = math.ceil(raw - 1e-9 * max(1.0, raw))
    return min(max(k, 1), m) - 1


def _samples(samples):
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise EmptyInputError("samples must be non-empty")
    return x


def var(samples, level):
    x = _samples(samples)
    k = order_index(level, x.size)
    return float(np.partition(x, k)[k])


def cvar(samples, level):
    """Mean of the samples ranked strictly above the VaR order statistic."""
    x = _samples(samples)
    k = order_index(level, x.size)
    tail = x.size - k - 1
    if tail < 2:
        raise InsufficientTailError(f"only {tail} samples beyond the level-{level} order statistic; need 2")
    part = np.partition(x, k)
    return float(part[k + 1:].mean())


def section_ci(samples, statistic, batches=DEFAULT_BATCHES, ci_level=0.95):
    """Point estimate on all samples with a sectioning (batch-means) t-interval.

    ``samples`` is split along its first axis into ``batches`` contiguous
    blocks; the spread of the per-block statistic sets the interval width.
    Returns ``(point, low, high)``.
    """
    x = np.asarray(samples)
    point = float(statistic(x))
    m = x.shape[0]
    b = min(batches, m // 2)
    if b < 2:
        return point, -math.inf, math.inf
    parts = [float(statistic(chunk)) for chunk in np.array_split(x, b)]
    spread = float(np.std(parts, ddof=1))
    half = stats.t.ppf(0.5 + ci_level / 2.0, b - 1) * spread / math.sqrt(b)
    return point, point - half, point + half


def measure_report(samples, level, measure="VaR", seed=None, aggregation_count=None, batches=DEFAULT_BATCHES):
    fn = {"VaR": var, "CVaR": cvar}[measure]
    point, lo, hi = section_ci(samples, lambda s: fn(s, level), batches)
    return RiskMeasureReport(measure, level, point, lo, hi, int(np.asarray(samples).shape[0]), seed, aggregation_count)


def mean_sweep_draws(spec, max_count, mc_count, seed):
    """Matrix whose column ``j`` holds ``mc_count`` draws of the mean of ``j+1`` risks.

    All columns are cumulative means over the same rows, so every portfolio
    size shares one set of random numbers.
    """
    draws = dist.sample(spec, mc_count * max_count, seed).reshape(mc_count, max_count)
    np.cumsum(draws, axis=1, out=draws)
    draws /= np.arange(1, max_count + 1)
    return draws


def sample_means(spec, n, count, seed=None, chunk_cells=1 << 22):
    """``count`` draws of the mean of ``n`` i.i.d. risks, generated in row chunks.

    Chunk ``c`` uses sub-stream ``c`` of ``seed``, so memory stays at about
    ``chunk_cells`` doubles whatever ``n * count`` is.
    """
    n, count = int(n), int(count)
    if n < 1 or count < 1:
        raise ParameterDomainError("n", "n and count must be >= 1")
    rows = max(1, chunk_cells // n)
    out = np.empty(count)
    for c, start in enumerate(range(0, count, rows)):
        stop = min(start + rows, count)
        block = dist.sample(spec, (stop - start) * n, _rng.child(seed, c)).reshape(stop - start, n)
        out[start:stop] = block.mean(axis=1)
    return out


def mc_var_sweep(spec, counts, levels, mc_count, seed=None, measures=("VaR",)):
    """VaR (and optionally CVaR) of the equal-weight mean of ``n`` i.i.d. risks for each ``n``."""
    counts = [int(n) for n in counts]
    if not counts or min(counts) < 1:
        raise ParameterDomainError("counts", "need at least one aggregation count, all >= 1")
    for level in levels:
        _check_level(level)
    means = mean_sweep_draws(spec, max(counts), int(mc_count), seed)
    out = []
    for n in counts:
        column = np.ascontiguousarray(means[:, n - 1])
        for level in levels:
            for measure in measures:
                out.append(measure_report(column, level, measure, seed, n))
    return out


def _bootstrap_var(data, n, level, reps, gen, chunk_rows):
    """Empirical VaR of ``reps`` means of ``n`` draws with replacement from ``data``."""
    m = data.size
    means = np.empty(reps)
    done = 0
    while done < reps:
        rows = min(chunk_rows, reps - done)
        idx = gen.integers(0, m, size=(rows, n))
        means[done:done + rows] = data[idx].mean(axis=1)
        done += rows
    return var(means, level)


def bootstrap_var_sweep(data, counts, level=0.995, inner_reps=100_000, outer_reps=200, seed=None, ci_level=0.95):
    """Double-bootstrap VaR of equal-weight portfolios built from observed losses.

    The inner loop forms ``inner_reps`` portfolios, each the mean of ``n``
    losses resampled from ``data``, and takes their empirical VaR. The point
    estimate runs the inner loop on ``data`` itself. The percentile interval
    comes from rerunning it on ``outer_reps`` full-size resamples of ``data``.
    """
    x = _samples(data)
    if x.size < 30:
        raise ParameterDomainError("data", f"need at least 30 observations, got {x.size}")
    _check_level(level)
    counts = [int(n) for n in counts]
    if not counts or min(counts) < 1:
        raise ParameterDomainError("counts", "need at least one aggregation count, all >= 1")
    if (1.0 - level) * inner_reps < 10:
        raise ResolutionError(
            f"inner_reps={inner_reps} leaves fewer than 10 samples beyond level {level}"
        )
    if outer_reps < 2:
        raise ParameterDomainError("outer_reps", f"must be >= 2, got {outer_reps}")
    lo_q, hi_q = 0.5 - ci_level / 2.0, 0.5 + ci_level / 2.0
    out = []
    for i, n in enumerate(counts):
        chunk_rows = max(1, 4_000_000 // n)
        point = _bootstrap_var(x, n, level, inner_reps, _rng.generator(_rng.child(seed, i, 0)), chunk_rows)
        outer = np.empty(outer_reps)
        for j in range(outer_reps):
            gen = _rng.generator(_rng.child(seed, i, j + 1))
            resample = x[gen.integers(0, x.size, size=x.size)]
            outer[j] = _bootstrap_var(resample, n, level, inner_reps, gen, chunk_rows)
        lo, hi = np.quantile(outer, [lo_q, hi_q])
        out.append(RiskMeasureReport(
            "VaR", level, point, min(float(lo), point), max(float(hi), point), inner_reps, seed, n
        ))
    return out
