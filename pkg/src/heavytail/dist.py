"""Marginal loss distributions: parameterization, sampling and evaluation.

Each family is a frozen dataclass validated on construction. The module-level
functions (:func:`sample`, :func:`density`, :func:`cdf`, :func:`quantile`,
:func:`fractional_moment`) are the public entry points; they accept any of
the spec classes below.

Stable laws are sampling-only except for the three parameter points that
coincide with a closed-form family (alpha = 2, 1 and 1/2).
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy import special

from . import rng as _rng
from .exceptions import (
    InfiniteMomentError,
    ParameterDomainError,
    UnsupportedEvaluationError,
)
from .stable import sample_stable

__all__ = [
    "Stable",
    "Normal",
    "LogNormal",
    "Levy",
    "Cauchy",
    "GPD",
    "PowerLaw",
    "MomentEstimate",
    "sample",
    "density",
    "log_density",
    "cdf",
    "survival",
    "quantile",
    "fractional_moment",
    "has_closed_form",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _real(name, value):
    value = float(value)
    if not math.isfinite(value):
        raise ParameterDomainError(name, f"must be finite, got {value}")
    return value


def _positive(name, value):
    value = _real(name, value)
    if value <= 0.0:
        raise ParameterDomainError(name, f"must be > 0, got {value}")
    return value


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _ret(out, scalar):
    return float(out) if scalar else out


class _Family:
    """Shared evaluation plumbing; subclasses provide the vectorized kernels."""

    closed_form = True

    def _pdf(self, x):
        return np.exp(self._logpdf(x))

    def _logpdf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self._pdf(x))

    def _sf(self, x):
        return 1.0 - self._cdf(x)

    def moment_limit(self):
        """Supremum of r with E|X|^r finite."""
        return math.inf


@dataclass(frozen=True)
class Normal(_Family):
    mean: float = 0.0
    stdev: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mean", _real("mean", self.mean))
        object.__setattr__(self, "stdev", _positive("stdev", self.stdev))

    def _rvs(self, gen, size):
        return gen.normal(self.mean, self.stdev, size)

    def _logpdf(self, x):
        z = (x - self.mean) / self.stdev
        return -0.5 * z * z - math.log(self.stdev * _SQRT_2PI)

    def _cdf(self, x):
        return special.ndtr((x - self.mean) / self.stdev)

    def _sf(self, x):
        return special.ndtr((self.mean - x) / self.stdev)

    def _ppf(self, p):
        return self.mean + self.stdev * special.ndtri(p)


@dataclass(frozen=True)
class LogNormal(_Family):
    log_mean: float = 0.0
    log_stdev: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "log_mean", _real("log_mean", self.log_mean))
        object.__setattr__(self, "log_stdev", _positive("log_stdev", self.log_stdev))

    def _rvs(self, gen, size):
        return gen.lognormal(self.log_mean, self.log_stdev, size)

    def _logpdf(self, x):
        out = np.full(x.shape, -np.inf)
        pos = x > 0
        lx = np.log(x[pos])
        z = (lx - self.log_mean) / self.log_stdev
        out[pos] = -0.5 * z * z - lx - math.log(self.log_stdev * _SQRT_2PI)
        return out

    def _z(self, x):
        with np.errstate(divide="ignore"):
            return (np.log(np.maximum(x, 0.0)) - self.log_mean) / self.log_stdev

    def _cdf(self, x):
        return special.ndtr(self._z(x))

    def _sf(self, x):
        return special.ndtr(-self._z(x))

    def _ppf(self, p):
        return np.exp(self.log_mean + self.log_stdev * special.ndtri(p))


@dataclass(frozen=True)
class Cauchy(_Family):
    location: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "location", _real("location", self.location))
        object.__setattr__(self, "scale", _positive("scale", self.scale))

    def _rvs(self, gen, size):
        return self.location + self.scale * gen.standard_cauchy(size)

    def _logpdf(self, x):
        z = (x - self.location) / self.scale
        return -np.log1p(z * z) - math.log(math.pi * self.scale)

    def _cdf(self, x):
        return 0.5 + np.arctan((x - self.location) / self.scale) / math.pi

    def _sf(self, x):
        return 0.5 - np.arctan((x - self.location) / self.scale) / math.pi

    def _ppf(self, p):
        return self.location + self.scale * np.tan(math.pi * (p - 0.5))

    def moment_limit(self):
        return 1.0


LEVY_ORIENTATIONS = ("right", "left")


@dataclass(frozen=True)
class Levy(_Family):
    """Levy law. ``orientation="left"`` is the mirrored form supported on x < location."""

    location: float = 0.0
    scale: float = 1.0
    orientation: str = "right"

    def __post_init__(self):
        object.__setattr__(self, "location", _real("location", self.location))
        object.__setattr__(self, "scale", _positive("scale", self.scale))
        if self.orientation not in LEVY_ORIENTATIONS:
            raise ParameterDomainError(
                "orientation", f"must be one of {LEVY_ORIENTATIONS}, got {self.orientation!r}"
            )

    @property
    def _sign(self):
        return 1.0 if self.orientation == "right" else -1.0

    def _rvs(self, gen, size):
        z = gen.standard_normal(size)
        return self.location + self._sign * self.scale / (z * z)

    def _dist(self, x):
        # distance into the support; <= 0 outside
        return self._sign * (x - self.location)

    def _logpdf(self, x):
        d = self._dist(x)
        out = np.full(x.shape, -np.inf)
        pos = d > 0
        dp = d[pos]
        out[pos] = 0.5 * math.log(self.scale / (2.0 * math.pi)) - self.scale / (2.0 * dp) - 1.5 * np.log(dp)
        return out

    def _erf_pair(self, x):
        # (erf, erfc) of sqrt(scale / 2d) inside the support, (1, 0) outside
        d = self._dist(x)
        pos = d > 0
        arg = np.sqrt(self.scale / (2.0 * np.where(pos, d, 1.0)))
        return np.where(pos, special.erf(arg), 1.0), np.where(pos, special.erfc(arg), 0.0)

    def _cdf(self, x):
        e, ec = self._erf_pair(x)
        return ec if self.orientation == "right" else e

    def _sf(self, x):
        e, ec = self._erf_pair(x)
        return e if self.orientation == "right" else ec

    def _ppf(self, p):
        if self.orientation == "right":
            return self.location + self.scale / (2.0 * special.erfcinv(p) ** 2)
        return self.location - self.scale / (2.0 * special.erfinv(p) ** 2)

    def moment_limit(self):
        return 0.5


@dataclass(frozen=True)
class GPD(_Family):
    """Generalized Pareto law with shape xi, scale sigma and threshold u."""

    shape: float = 0.0
    scale: float = 1.0
    threshold: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "shape", _real("shape", self.shape))
        object.__setattr__(self, "scale", _positive("scale", self.scale))
        threshold = _real("threshold", self.threshold)
        if threshold < 0.0:
            raise ParameterDomainError("threshold", f"must be >= 0, got {threshold}")
        object.__setattr__(self, "threshold", threshold)

    def _rvs(self, gen, size):
        return self._ppf(gen.random(size))

    def _y(self, x):
        return (x - self.threshold) / self.scale

    def _in_support(self, y):
        ok = y >= 0
        if self.shape < 0:
            ok &= y <= -1.0 / self.shape
        return ok

    def _logpdf(self, x):
        y = self._y(x)
        ok = self._in_support(y)
        out = np.full(x.shape, -np.inf)
        yy = y[ok]
        xi = self.shape
        if xi == 0.0:
            out[ok] = -yy - math.log(self.scale)
        else:
            with np.errstate(divide="ignore"):
                out[ok] = -(1.0 + 1.0 / xi) * np.log1p(xi * yy) - math.log(self.scale)
        return out

    def _sf(self, x):
        y = np.maximum(self._y(x), 0.0)
        xi = self.shape
        if xi == 0.0:
            return np.exp(-y)
        if xi < 0:
            y = np.minimum(y, -1.0 / xi)
        with np.errstate(divide="ignore"):
            return np.exp(-np.log1p(xi * y) / xi)

    def _cdf(self, x):
        y = np.maximum(self._y(x), 0.0)
        xi = self.shape
        if xi == 0.0:
            return -np.expm1(-y)
        if xi < 0:
            y = np.minimum(y, -1.0 / xi)
        with np.errstate(divide="ignore"):
            return -np.expm1(-np.log1p(xi * y) / xi)

    def _ppf(self, p):
        xi = self.shape
        if xi == 0.0:
            return self.threshold - self.scale * np.log1p(-p)
        return self.threshold + self.scale * np.expm1(-xi * np.log1p(-p)) / xi

    def moment_limit(self):
        return 1.0 / self.shape if self.shape > 0 else math.inf


@dataclass(frozen=True)
class PowerLaw(_Family):
    """Pareto law P(X > x) = x**-tail_index on [1, inf)."""

    tail_index: float = 1.0

    xmin = 1.0

    def __post_init__(self):
        object.__setattr__(self, "tail_index", _positive("tail_index", self.tail_index))

    def _rvs(self, gen, size):
        # 1 - U lies in (0, 1], keeping draws finite
        return (1.0 - gen.random(size)) ** (-1.0 / self.tail_index)

    def _logpdf(self, x):
        out = np.full(x.shape, -np.inf)
        ok = x >= 1.0
        a = self.tail_index
        out[ok] = math.log(a) - (a + 1.0) * np.log(x[ok])
        return out

    def _sf(self, x):
        return np.where(x >= 1.0, np.maximum(x, 1.0) ** (-self.tail_index), 1.0)

    def _cdf(self, x):
        return np.where(x >= 1.0, -np.expm1(-self.tail_index * np.log(np.maximum(x, 1.0))), 0.0)

    def _ppf(self, p):
        return np.exp(-np.log1p(-p) / self.tail_index)

    def moment_limit(self):
        return self.tail_index


@dataclass(frozen=True)
class Stable(_Family):
    """Alpha-stable law S_alpha(scale, skewness, location)."""

    alpha: float
    scale: float = 1.0
    skewness: float = 0.0
    location: float = 0.0

    def __post_init__(self):
        alpha = _real("alpha", self.alpha)
        if not 0.0 < alpha <= 2.0:
            raise ParameterDomainError("alpha", f"must lie in (0, 2], got {alpha}")
        skew = _real("skewness", self.skewness)
        if not -1.0 <= skew <= 1.0:
            raise ParameterDomainError("skewness", f"must lie in [-1, 1], got {skew}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "skewness", skew)
        object.__setattr__(self, "scale", _positive("scale", self.scale))
        object.__setattr__(self, "location", _real("location", self.location))

    def equivalent(self):
        """The closed-form family this law coincides with, or ``None``."""
        a, s, b, m = self.alpha, self.scale, self.skewness, self.location
        if a == 2.0:
            return Normal(m, s * math.sqrt(2.0))
        if a == 1.0 and b == 0.0:
            return Cauchy(m, s)
        if a == 0.5 and abs(b) == 1.0:
            return Levy(m, s, "right" if b > 0 else "left")
        return None

    @property
    def closed_form(self):
        return self.equivalent() is not None

    def _rvs(self, gen, size):
        return sample_stable(self.alpha, self.scale, self.skewness, self.location, size, gen)

    def _delegate(self):
        eq = self.equivalent()
        if eq is None:
            raise UnsupportedEvaluationError(
                f"{self!r} has no closed-form density or cdf; it can only be sampled"
            )
        return eq

    def _logpdf(self, x):
        return self._delegate()._logpdf(x)

    def _cdf(self, x):
        return self._delegate()._cdf(x)

    def _sf(self, x):
        return self._delegate()._sf(x)

    def _ppf(self, p):
        return self._delegate()._ppf(p)

    def moment_limit(self):
        return math.inf if self.alpha == 2.0 else self.alpha


def has_closed_form(spec):
    return bool(spec.closed_form)


def _check_spec(spec):
    if not isinstance(spec, _Family):
        raise TypeError(f"expected a distribution spec, got {type(spec).__name__}")


def sample(spec, count, seed=None, streams=1, n_jobs=1):
    """Draw ``count`` i.i.d. variates.

    The draws are a deterministic function of ``(spec, count, seed, streams)``;
    ``n_jobs`` only controls how many threads fill the stream partitions.
    """
    _check_spec(spec)
    count = int(count)
    if count < 1:
        raise ParameterDomainError("count", f"must be >= 1, got {count}")
    if streams == 1:
        return spec._rvs(_rng.generator(seed), count)
    parts = _rng.run_streams(spec._rvs, seed, _rng.partition(count, int(streams)), n_jobs)
    return np.concatenate(parts)


def _evaluable(spec):
    _check_spec(spec)
    if not spec.closed_form:
        raise UnsupportedEvaluationError(
            f"{spec!r} has no closed-form density or cdf; it can only be sampled"
        )


def density(spec, x):
    _evaluable(spec)
    arr, scalar = _as_array(x)
    return _ret(spec._pdf(arr), scalar)


def log_density(spec, x):
    _evaluable(spec)
    arr, scalar = _as_array(x)
    return _ret(spec._logpdf(arr), scalar)


def cdf(spec, x):
    _evaluable(spec)
    arr, scalar = _as_array(x)
    return _ret(np.clip(spec._cdf(arr), 0.0, 1.0), scalar)


def survival(spec, x):
    _evaluable(spec)
    arr, scalar = _as_array(x)
    return _ret(np.clip(spec._sf(arr), 0.0, 1.0), scalar)


def _bisect_quantile(spec, p):
    lo, hi = -1.0, 1.0
    while spec._cdf(np.array(lo)) > p:
        lo *= 2.0
    while spec._cdf(np.array(hi)) < p:
        hi *= 2.0
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if spec._cdf(np.array(mid)) < p:
            lo = mid
        else:
            hi = mid
    return hi


def quantile(spec, p, method="analytic"):
    """Inverse cdf. ``method="bisect"`` inverts the cdf numerically instead."""
    _evaluable(spec)
    arr, scalar = _as_array(p)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise ParameterDomainError("p", "probabilities must lie strictly inside (0, 1)")
    if method == "analytic":
        out = spec._ppf(arr)
    elif method == "bisect":
        out = np.array([_bisect_quantile(spec, float(q)) for q in arr.ravel()]).reshape(arr.shape)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _ret(out, scalar)


@dataclass(frozen=True)
class MomentEstimate:
    estimate: float
    stderr: float
    count: int

    def ci(self, z=1.959963984540054):
        return self.estimate - z * self.stderr, self.estimate + z * self.stderr


def fractional_moment(spec, r, mc_count, seed=None):
    """Monte Carlo estimate of E|X|^r with its CLT standard error."""
    _check_spec(spec)
    r = _positive("r", r)
    limit = spec.moment_limit()
    if r >= limit:
        raise InfiniteMomentError(f"E|X|^{r} is infinite for {spec!r} (requires r < {limit})")
    draws = np.abs(sample(spec, mc_count, seed)) ** r
    n = draws.size
    se = float(draws.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return MomentEstimate(float(draws.mean()), se, n)
