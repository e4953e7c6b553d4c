"""Weighted aggregation, majorization and diversification scans.

A portfolio of ``n`` i.i.d. risks with weight vector ``w`` has aggregate
``Z_w = sum_i w_i X_i``. The helpers here build majorization chains between
the equal-weight vector ``(1/n, ..., 1/n)`` and the concentrated vector
``(1, 0, ..., 0)``, estimate VaR along such chains with common random numbers,
and evaluate the support-length bound beyond which truncated heavy-tailed
risks still make diversification riskier.
"""
from dataclasses import dataclass, field
import math
from typing import List, Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from . import dist
from . import rng as _rng
from .exceptions import (
    BoundUndefinedError,
    DegenerateScanError,
    IncomparableError,
    ParameterDomainError,
    ResolutionError,
    ShapeError,
)
from .risk import section_ci, var

SUM_TOLERANCE = 1e-12
SAFETY_FACTOR = 1.05
CHUNK_ROWS = 1 << 20
_Z95 = 1.959963984540054

VERDICT_UP = "increasing-toward-equal"
VERDICT_DOWN = "decreasing-toward-equal"
VERDICT_FLAT = "flat"
VERDICT_INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class WeightVector:
    weights: Tuple[float, ...]
    simplex: bool = True

    def __post_init__(self):
        w = tuple(float(v) for v in np.atleast_1d(np.asarray(self.weights, dtype=float)))
        if not w:
            raise ParameterDomainError("weights", "need at least one weight")
        if any(not math.isfinite(v) or v < 0.0 for v in w):
            raise ParameterDomainError("weights", f"weights must be finite and >= 0, got {w}")
        if self.simplex and abs(math.fsum(w) - 1.0) > SUM_TOLERANCE:
            raise ParameterDomainError("weights", f"simplex weights must sum to 1, got {math.fsum(w)!r}")
        object.__setattr__(self, "weights", w)

    @classmethod
    def equal(cls, n):
        return cls((1.0 / n,) * n)

    @classmethod
    def concentrated(cls, n):
        return cls((1.0,) + (0.0,) * (n - 1))

    @property
    def n(self):
        return len(self.weights)

    @property
    def descending(self):
        return tuple(sorted(self.weights, reverse=True))

    def as_array(self):
        return np.array(self.weights)


def _weights(w):
    return w if isinstance(w, WeightVector) else WeightVector(tuple(w), simplex=False)


@dataclass(frozen=True)
class TruncationSpec:
    support: float
    mode: str = "zero-out"

    def __post_init__(self):
        if not self.support > 0.0:
            raise ParameterDomainError("support", f"must be > 0, got {self.support}")
        if self.mode not in ("zero-out", "clip"):
            raise ParameterDomainError("mode", f"must be 'zero-out' or 'clip', got {self.mode!r}")


@dataclass(frozen=True)
class AggregationReport:
    weights: WeightVector
    level: float
    var_estimate: float
    ci_low: float
    ci_high: float
    sample_count: int


@dataclass(frozen=True)
class GapEstimate:
    estimate: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class ScanResult:
    reports: List[AggregationReport]
    gaps: List[GapEstimate]
    verdict: str


@dataclass(frozen=True)
class ProbabilityEstimate:
    """Monte Carlo probability (or difference of probabilities) with a normal 95% interval."""

    estimate: float
    stderr: float
    count: int
    ci_low: float = field(init=False)
    ci_high: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "ci_low", self.estimate - _Z95 * self.stderr)
        object.__setattr__(self, "ci_high", self.estimate + _Z95 * self.stderr)


def aggregate(draws, w):
    """Row-wise weighted sum of a replications-by-risks draw matrix."""
    w = _weights(w)
    x = np.asarray(draws, dtype=float)
    if x.ndim != 2 or x.shape[1] != w.n:
        raise ShapeError(f"draw matrix with shape {x.shape} does not match {w.n} weights")
    return x @ w.as_array()


def majorizes(v, w):
    """True when ``v`` is majorized by ``w`` (v is at least as spread out as w)."""
    v, w = _weights(v), _weights(w)
    if v.n != w.n:
        raise ShapeError(f"weight vectors have lengths {v.n} and {w.n}")
    sv, sw = math.fsum(v.weights), math.fsum(w.weights)
    if abs(sv - sw) > SUM_TOLERANCE:
        raise IncomparableError(f"weight totals differ: {sv!r} vs {sw!r}")
    pv = np.cumsum(v.descending)
    pw = np.cumsum(w.descending)
    return bool(np.all(pv[:-1] <= pw[:-1] + SUM_TOLERANCE))


def majorization_chain(n, steps):
    """Vectors ``t*(1,0,...,0) + (1-t)*(1/n,...,1/n)`` for ``steps`` evenly spaced ``t`` in [0, 1]."""
    if n < 1:
        raise ParameterDomainError("n", f"must be >= 1, got {n}")
    if n == 1:
        return [WeightVector((1.0,))]
    if steps < 2:
        raise ParameterDomainError("steps", f"must be >= 2, got {steps}")
    top = np.zeros(n)
    top[0] = 1.0
    flat = np.full(n, 1.0 / n)
    chain = []
    for t in np.linspace(0.0, 1.0, steps):
        if t == 0.0:
            chain.append(WeightVector.equal(n))
            continue
        w = t * top + (1.0 - t) * flat
        w[-1] = 0.0 if t == 1.0 else 1.0 - math.fsum(w[:-1])
        chain.append(WeightVector(tuple(w)))
    return chain


def draw_matrix(spec, rows, n, seed=None):
    return dist.sample(spec, int(rows) * int(n), seed).reshape(int(rows), int(n))


def simulate_aggregate(spec, w, mc_count, seed=None):
    return aggregate(draw_matrix(spec, mc_count, _weights(w).n, seed), w)


def schur_scan(spec, chain, level, mc_count, seed=None, batches=20, familywise=0.95):
    """VaR along a majorization chain, with a CI-based ordering verdict.

    One draw matrix is shared by every weight vector. Each consecutive VaR
    gap gets a sectioning interval; the intervals are Bonferroni-adjusted so
    that all of them hold jointly at ``familywise`` confidence. A direction
    is reported only when every gap excludes zero with the same sign, and
    ``flat`` only when every gap interval contains zero.
    """
    chain = [_weights(w) for w in chain]
    if len(chain) < 2:
        raise DegenerateScanError("a scan needs at least two weight vectors")
    n = chain[0].n
    draws = draw_matrix(spec, mc_count, n, seed)
    aggregates = [aggregate(draws, w) for w in chain]
    reports = []
    for w, z in zip(chain, aggregates):
        point, lo, hi = section_ci(z, lambda s: var(s, level), batches)
        reports.append(AggregationReport(w, level, point, lo, hi, int(mc_count)))

    # orient gaps so that a positive gap means VaR grows toward equal weights
    toward_concentrated = majorizes(chain[0], chain[-1])
    sign = -1.0 if toward_concentrated else 1.0
    per_gap = 1.0 - (1.0 - familywise) / (len(chain) - 1)
    gaps = []
    for a, b in zip(aggregates[:-1], aggregates[1:]):
        pair = np.column_stack([a, b])
        point, lo, hi = section_ci(pair, lambda s: sign * (var(s[:, 1], level) - var(s[:, 0], level)), batches, per_gap)
        gaps.append(GapEstimate(point, lo, hi))
    return ScanResult(reports, gaps, _verdict(gaps))


def _verdict(gaps):
    if all(g.ci_low > 0.0 for g in gaps):
        return VERDICT_UP
    if all(g.ci_high < 0.0 for g in gaps):
        return VERDICT_DOWN
    if all(g.ci_low <= 0.0 <= g.ci_high for g in gaps):
        return VERDICT_FLAT
    return VERDICT_INCONCLUSIVE


def truncate(samples, tspec):
    """Zero-out (x * 1{|x| <= a}) or clip (sign(x) * min(|x|, a)) truncation."""
    x = np.asarray(samples, dtype=float)
    a = tspec.support
    if math.isinf(a):
        return x.copy()
    if tspec.mode == "clip":
        return np.clip(x, -a, a)
    return np.where(np.abs(x) <= a, x, 0.0)


def _indicator_difference(spec, n, mc_count, seed, events):
    """Paired Monte Carlo estimate of P(A) - P(B) with common random numbers.

    ``events(block)`` maps a rows-by-n draw block to boolean arrays (A, B).
    Draws come in fixed-size row chunks, each from its own sub-stream.
    """
    mc_count = int(mc_count)
    if mc_count < 2:
        raise ParameterDomainError("mc_count", f"must be >= 2, got {mc_count}")
    hits_a = hits_b = hits_both = 0
    for i, rows in enumerate(_chunks(mc_count)):
        block = draw_matrix(spec, rows, n, _rng.child(seed, i))
        a, b = events(block)
        hits_a += int(np.count_nonzero(a))
        hits_b += int(np.count_nonzero(b))
        hits_both += int(np.count_nonzero(a & b))
    m = mc_count
    mean = (hits_a - hits_b) / m
    second = (hits_a + hits_b - 2 * hits_both) / m
    variance = max(second - mean * mean, 0.0) * m / (m - 1)
    return ProbabilityEstimate(mean, math.sqrt(variance / m), m), hits_a, hits_b


def _chunks(total):
    full, rest = divmod(total, CHUNK_ROWS)
    return [CHUNK_ROWS] * full + ([rest] if rest else [])


def estimate_G(spec, w, z, mc_count, seed=None):
    """P(w_[1] X_1 + w_[2] X_2 > z) - P(X_1 > z) from the two largest weights."""
    w = _weights(w)
    if w.n < 2:
        raise ParameterDomainError("weights", "need at least two weights")
    if not z > 0.0:
        raise ParameterDomainError("z", f"must be > 0, got {z}")
    w1, w2 = w.descending[:2]
    if w1 == 1.0:
        return ProbabilityEstimate(0.0, 0.0, 0)
    est, _, _ = _indicator_difference(
        spec, 2, mc_count, seed, lambda x: (w1 * x[:, 0] + w2 * x[:, 1] > z, x[:, 0] > z)
    )
    return est


def estimate_Fn(spec, n, z, mc_count, seed=None):
    """P(mean of n risks > z) - P(X_1 > z)."""
    if n < 3:
        raise ParameterDomainError("n", f"must be >= 3, got {n}")
    est, _, _ = _indicator_difference(spec, n, mc_count, seed, lambda x: (x.mean(axis=1) > z, x[:, 0] > z))
    return est


@dataclass(frozen=True)
class SupportBound:
    support: float
    variant: str
    moment: dist.MomentEstimate
    divisor: ProbabilityEstimate
    safety_factor: float = SAFETY_FACTOR


_VARIANTS = ("symmetric", "skewed", "equal-weight-Fn")


def support_bound(spec, w, z, r, n, variant="symmetric", mc_count=1_000_000, seed=None):
    """Plug-in support length ``a`` above which truncated aggregation stays riskier.

    ``a = (E|X|^r (n-1) / (c * D))^(1/r) * 1.05`` where ``D`` is G(w, z) with
    ``c = 2`` (symmetric), G(w, z) with ``c = 1`` (skewed), or F_n(z) with
    ``c = 2`` (equal-weight-Fn). The moment and ``D`` use independent
    sub-streams of ``seed`` so that variants share the same plug-ins.
    """
    if variant not in _VARIANTS:
        raise ParameterDomainError("variant", f"must be one of {_VARIANTS}, got {variant!r}")
    if not 0.0 < r < 1.0:
        raise ParameterDomainError("r", f"must lie in (0, 1), got {r}")
    if n < 2:
        raise ParameterDomainError("n", f"must be >= 2, got {n}")
    moment = dist.fractional_moment(spec, r, mc_count, _rng.child(seed, 0))
    if variant == "equal-weight-Fn":
        divisor = estimate_Fn(spec, n, z, mc_count, _rng.child(seed, 1))
    else:
        divisor = estimate_G(spec, w, z, mc_count, _rng.child(seed, 1))
    if not divisor.estimate > 0.0:
        raise BoundUndefinedError(f"{variant} divisor estimate is {divisor.estimate!r}; the bound needs it positive")
    c = 1.0 if variant == "skewed" else 2.0
    a = (moment.estimate * (n - 1) / (c * divisor.estimate)) ** (1.0 / r) * SAFETY_FACTOR
    return SupportBound(a, variant, moment, divisor)


@dataclass(frozen=True)
class TruncatedOrdering:
    aggregate_probability: float
    single_probability: float
    difference: ProbabilityEstimate
    verdict: bool


def verify_truncated_ordering(spec, w, z, tspec, mc_count, seed=None):
    """Compare P(Y_w(a) > z) with P(Y_1(a) > z) for truncated risks.

    The verdict is true when the 95% interval of the paired difference lies
    strictly above zero.
    """
    w = _weights(w)
    a = tspec.support
    if a <= z and a * math.fsum(w.weights) <= z:
        zero = ProbabilityEstimate(0.0, 0.0, 0)
        return TruncatedOrdering(0.0, 0.0, zero, False)
    weights = w.as_array()

    def events(block):
        y = truncate(block, tspec)
        return y @ weights > z, y[:, 0] > z

    diff, hits_w, hits_1 = _indicator_difference(spec, w.n, mc_count, seed, events)
    if hits_w == 0 and hits_1 == 0:
        raise ResolutionError(f"no draw exceeded z={z} in either probability at mc_count={mc_count}")
    m = diff.count
    return TruncatedOrdering(hits_w / m, hits_1 / m, diff, diff.ci_low > 0.0)


class PortfolioAggregator(TransformerMixin, BaseEstimator):
    """Transformer mapping a replications-by-risks matrix to the weighted aggregate column."""

    def __init__(self, weights=None):
        self.weights = weights

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        w = self.weights if self.weights is not None else WeightVector.equal(X.shape[1])
        self.weight_vector_ = _weights(w)
        if self.weight_vector_.n != X.shape[1]:
            raise ShapeError(f"{X.shape[1]} columns but {self.weight_vector_.n} weights")
        return self

    def transform(self, X):
        X = check_array(X)
        return aggregate(X, self.weight_vector_).reshape(-1, 1)


class Truncator(TransformerMixin, BaseEstimator):
    """Element-wise truncation transformer."""

    def __init__(self, support=math.inf, mode="zero-out"):
        self.support = support
        self.mode = mode

    def fit(self, X, y=None):
        self.spec_ = TruncationSpec(self.support, self.mode)
        return self

    def transform(self, X):
        return truncate(check_array(X, ensure_2d=False), self.spec_)
