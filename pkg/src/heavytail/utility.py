"""Limited liability, power utility and pooled expected-utility sweeps.

A cyber-risk manager with liability cap ``k`` pays ``V(x) = min(x, k)``.
Utility defaults to the remaining-capital form ``(k - V)^beta``, which is
zero when the cap is exhausted; the ``literal-loss-negated`` convention
``-V^beta`` is available for sensitivity runs.

In a pooled sweep each of ``m`` managers carries the share
``Z = (1/m) * mean(Y_1, ..., Y_n)`` of an equal-weight portfolio of ``n``
i.i.d. risks, where ``Y_i`` is risk ``i`` curtailed to a finite support.
"""
from dataclasses import dataclass
import math
from typing import List, Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.isotonic import IsotonicRegression
from sklearn.utils.validation import check_array

from . import dist
from . import rng as _rng
from .exceptions import DataDomainError, EmptyInputError, ParameterDomainError, UnboundedBaseError
from .portfolio import TruncationSpec, truncate

_Z95 = 1.959963984540054
CONVENTIONS = ("remaining-capital", "literal-loss-negated")
DEFAULT_CURTAILMENT = TruncationSpec(3500.0, "clip")
CHUNK_CELLS = 1 << 22


@dataclass(frozen=True)
class LiabilitySpec:
    cap: float = 70.0
    risk_aversion: float = 0.0315
    convention: str = "remaining-capital"

    def __post_init__(self):
        if not self.cap > 0.0:
            raise ParameterDomainError("cap", f"must be > 0, got {self.cap}")
        if not 0.0 < self.risk_aversion < 1.0:
            raise ParameterDomainError("risk_aversion", f"must lie in (0, 1), got {self.risk_aversion}")
        if self.convention not in CONVENTIONS:
            raise ParameterDomainError("convention", f"must be one of {CONVENTIONS}, got {self.convention!r}")


def liability_transform(x, cap):
    """min(x, cap) for nonnegative losses; the identity when cap is infinite."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr >= 0.0)):
        raise DataDomainError("losses must be >= 0")
    out = arr if math.isinf(cap) else np.minimum(arr, cap)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class UtilityEstimate:
    estimate: float
    stderr: float
    count: int

    @property
    def ci_low(self):
        return self.estimate - _Z95 * self.stderr

    @property
    def ci_high(self):
        return self.estimate + _Z95 * self.stderr

    @property
    def half_width(self):
        return _Z95 * self.stderr


def utility_values(draws, lspec):
    v = liability_transform(np.asarray(draws, dtype=float), lspec.cap)
    if lspec.convention == "remaining-capital":
        if math.isinf(lspec.cap):
            raise UnboundedBaseError("remaining-capital utility needs a finite cap")
        return (lspec.cap - v) ** lspec.risk_aversion
    return -(v ** lspec.risk_aversion)


def expected_utility(draws, lspec):
    u = np.atleast_1d(utility_values(draws, lspec))
    if u.size == 0:
        raise EmptyInputError("draws must be non-empty")
    se = float(u.std(ddof=1) / math.sqrt(u.size)) if u.size > 1 else 0.0
    return UtilityEstimate(float(u.mean()), se, int(u.size))


class LiabilityCap(TransformerMixin, BaseEstimator):
    """Transformer applying ``min(x, cap)`` element-wise."""

    def __init__(self, cap=70.0):
        self.cap = cap

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return liability_transform(check_array(X, ensure_2d=False), self.cap)


@dataclass(frozen=True)
class EUGrid:
    counts: List[int]
    pools: List[int]
    estimates: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    seed: object = None

    def __post_init__(self):
        shape = (len(self.counts), len(self.pools))
        for name in ("estimates", "ci_low", "ci_high"):
            if np.shape(getattr(self, name)) != shape:
                raise ValueError(f"{name} has shape {np.shape(getattr(self, name))}, expected {shape}")

    def curve(self, pool_index=0):
        """(x, value, ci half-width) rows along n for one pool size."""
        est = self.estimates[:, pool_index]
        half = (self.ci_high[:, pool_index] - self.ci_low[:, pool_index]) / 2.0
        return np.column_stack([np.asarray(self.counts, dtype=float), est, half])


def pooled_eu_sweep(spec, counts, pools, lspec=None, mc_count=100_000, seed=None, curtailment=DEFAULT_CURTAILMENT):
    """Expected utility of a pooled share for every (n, m) pair.

    One draw matrix of ``mc_count`` rows feeds every cell: column ``n`` of
    its running mean is the portfolio of the first ``n`` risks. Rows are
    processed in chunks from per-chunk sub-streams, so memory stays bounded.
    Pass ``curtailment=None`` to keep the risks unbounded.
    """
    lspec = lspec or LiabilitySpec()
    counts = [int(n) for n in counts]
    pools = [int(m) for m in pools]
    if not counts or not pools or min(counts) < 1 or min(pools) < 1:
        raise ParameterDomainError("counts", "aggregation counts and pool sizes must be nonempty and >= 1")
    mc_count = int(mc_count)
    if mc_count < 2:
        raise ParameterDomainError("mc_count", f"must be >= 2, got {mc_count}")
    max_n = max(counts)
    cols = np.array(counts) - 1
    shares = 1.0 / np.array(pools, dtype=float)
    total = np.zeros((len(counts), len(pools)))
    total_sq = np.zeros_like(total)
    rows_per_chunk = max(1, CHUNK_CELLS // max_n)
    full, rest = divmod(mc_count, rows_per_chunk)
    for c, rows in enumerate([rows_per_chunk] * full + ([rest] if rest else [])):
        draws = dist.sample(spec, rows * max_n, _rng.child(seed, c)).reshape(rows, max_n)
        if np.any(draws < 0.0):
            raise DataDomainError("pooled sweeps need nonnegative losses")
        if curtailment is not None:
            draws = truncate(draws, curtailment)
        np.cumsum(draws, axis=1, out=draws)
        means = draws[:, cols] / (cols + 1.0)
        u = utility_values(means[:, :, None] * shares[None, None, :], lspec)
        total += u.sum(axis=0)
        total_sq += np.einsum("rij,rij->ij", u, u)
    est = total / mc_count
    var = np.maximum(total_sq / mc_count - est * est, 0.0) * mc_count / (mc_count - 1)
    half = _Z95 * np.sqrt(var / mc_count)
    lo, hi = est - half, est + half
    return EUGrid(counts, pools, est, lo, hi, seed)


@dataclass(frozen=True)
class ShapeVerdict:
    verdict: str
    argmin: Optional[float]
    depth: float
    sse_decreasing: float
    sse_increasing: float
    sse_two_piece: float


def _isotonic(y, increasing):
    x = np.arange(y.size, dtype=float)
    return IsotonicRegression(increasing=increasing).fit_transform(x, y)


def ushape_detect(curve):
    """Classify a noisy curve as u-shaped, monotone or flat.

    ``curve`` rows are ``(x, value, ci_half_width)``. A decreasing and an
    increasing isotonic fit are compared with the best decreasing-then-
    increasing fit over all split points. The curve is u-shaped when the
    two-piece fit has strictly smaller squared error than both monotone fits
    and its valley lies more than twice the median half-width below the
    lower of its two ends.
    """
    arr = np.asarray(curve, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 5:
        raise ParameterDomainError("curve", "need at least 5 rows of (x, value, ci_half_width)")
    arr = arr[np.argsort(arr[:, 0], kind="stable")]
    x, y, half = arr[:, 0], arr[:, 1], np.abs(arr[:, 2])
    band = 2.0 * float(np.median(half))
    scale = max(float(np.max(np.abs(y))), 1.0)
    eps = 1e-12 * scale * scale * y.size

    dec = _isotonic(y, False)
    inc = _isotonic(y, True)
    sse_dec = float(np.sum((y - dec) ** 2))
    sse_inc = float(np.sum((y - inc) ** 2))

    best = (math.inf, None)
    for j in range(1, y.size - 1):
        left = _isotonic(y[: j + 1], False)
        right = _isotonic(y[j + 1:], True)
        fit = np.concatenate([left, right])
        sse = float(np.sum((y - fit) ** 2))
        if sse < best[0] - eps:
            best = (sse, fit)
    sse_two, fit = best
    valley = float(fit.min())
    depth = min(fit[0], fit[-1]) - valley
    plateau = np.flatnonzero(fit == valley)
    argmin = float(x[plateau[np.argmin(y[plateau])]])

    if sse_two < sse_dec - eps and sse_two < sse_inc - eps and depth > band:
        verdict = "u-shaped"
    elif float(np.ptp(y)) <= band:
        verdict = "flat"
    elif sse_dec <= sse_inc and dec[0] - dec[-1] > band:
        verdict = "monotone-decreasing"
    elif sse_inc < sse_dec and inc[-1] - inc[0] > band:
        verdict = "monotone-increasing"
    else:
        verdict = "inconclusive"
    return ShapeVerdict(verdict, argmin if verdict == "u-shaped" else None, float(depth), sse_dec, sse_inc, sse_two)
