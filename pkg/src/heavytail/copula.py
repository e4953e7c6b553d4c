"""EFGM and polynomial (power-type) copulas over heavy-tailed marginals.

A power-type copula is a polynomial ``C(u) = sum_k c_k prod_j u_j^{e_kj}``
stored as ``{exponent tuple: coefficient}``. The multivariate EFGM copula
``C(u) = prod u_j * (1 + gamma * prod (1 - u_j))`` is the special case
returned by :func:`efgm_coefficients`, so density, conditional laws and the
validity check share one polynomial code path.

Tail probabilities of sums use the conditional Monte Carlo estimator of
Asmussen and Kroese: with ``M_-i`` and ``S_-i`` the maximum and sum of the
other risks,

    P(S > t) = sum_i E[ P(X_i > max(M_-i, t - S_-i) | X_-i) ],

which stays accurate far into the tail where crude indicators have few hits.
"""
from dataclasses import dataclass, field
import itertools
import math
from typing import Dict, List, Tuple

import numpy as np

from . import dist
from . import rng as _rng
from .exceptions import (
    EnvelopeError,
    ParameterDomainError,
    ResolutionError,
    ShapeError,
    UnsupportedMarginalError,
)
from .portfolio import ProbabilityEstimate
from .risk import section_ci, var

_Z95 = 1.959963984540054
_OPEN_LOW = 2.0 ** -54
_OPEN_HIGH = 1.0 - 2.0 ** -53
CHUNK_ROWS = 1 << 18


@dataclass(frozen=True)
class EFGM:
    dimension: int = 2
    dependence: float = 0.0

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 2:
            raise ParameterDomainError("dimension", f"must be an integer >= 2, got {self.dimension}")
        g = float(self.dependence)
        if not -1.0 <= g <= 1.0:
            raise ParameterDomainError("dependence", f"|gamma| must be <= 1, got {g}")
        object.__setattr__(self, "dimension", int(self.dimension))
        object.__setattr__(self, "dependence", g)

    @property
    def coefficients(self):
        return efgm_coefficients(self.dimension, self.dependence)

    def kendall_tau(self):
        """Kendall's tau of any bivariate margin: 2 gamma / 9."""
        return 2.0 * self.dependence / 9.0


@dataclass(frozen=True)
class PowerTypeCopula:
    coefficients: Dict[Tuple[int, ...], float]
    dimension: int = field(init=False)

    def __post_init__(self):
        if not self.coefficients:
            raise ParameterDomainError("coefficients", "need at least one term")
        clean = {}
        for exps, c in self.coefficients.items():
            exps = tuple(int(e) for e in exps)
            if any(e < 0 for e in exps):
                raise ParameterDomainError("coefficients", f"exponents must be >= 0, got {exps}")
            clean[exps] = clean.get(exps, 0.0) + float(c)
        dims = {len(e) for e in clean}
        if len(dims) != 1:
            raise ParameterDomainError("coefficients", f"mixed exponent lengths {sorted(dims)}")
        object.__setattr__(self, "coefficients", clean)
        object.__setattr__(self, "dimension", dims.pop())


def efgm_coefficients(n, gamma):
    """Polynomial form of the n-variate EFGM copula."""
    coeffs = {(1,) * n: 1.0}
    if gamma != 0.0:
        for exps in itertools.product((1, 2), repeat=n):
            sign = -1.0 if sum(e == 2 for e in exps) % 2 else 1.0
            coeffs[exps] = coeffs.get(exps, 0.0) + sign * gamma
    return coeffs


def cubic_section_example(gamma1=0.3, gamma2=0.3):
    """Bivariate copula with cubic sections.

    ``C = uv + g1 uv(1-u)(1-v) + g2 h(u) h(v)`` with ``h(u) = u(1-u)(1-2u)``.
    Its density ``1 + g1 (1-2u)(1-2v) + g2 h'(u) h'(v)`` stays nonnegative
    when ``|g1| + |g2| <= 1`` because ``|h'| <= 1`` on [0, 1].
    """
    h = {1: 1.0, 2: -3.0, 3: 2.0}
    coeffs = dict(efgm_coefficients(2, gamma1))
    for (a, ca), (b, cb) in itertools.product(h.items(), h.items()):
        coeffs[(a, b)] = coeffs.get((a, b), 0.0) + gamma2 * ca * cb
    return PowerTypeCopula(coeffs)


class _Poly:
    def __init__(self, coefficients):
        items = sorted(coefficients.items())
        self.exps = np.array([e for e, _ in items], dtype=int)
        self.coefs = np.array([c for _, c in items], dtype=float)
        self.n = self.exps.shape[1]

    def cdf(self, u):
        terms = np.prod(u[:, None, :] ** self.exps[None, :, :], axis=2)
        return terms @ self.coefs

    def _derivative_factors(self, u):
        # d/du u^e = e u^(e-1), which is identically 0 when e == 0
        e = self.exps[None, :, :]
        return np.where(e == 0, 0.0, e * u[:, None, :] ** np.maximum(e - 1, 0))

    def density(self, u):
        return np.prod(self._derivative_factors(u), axis=2) @ self.coefs

    def conditional_survival(self, i, u, survival):
        """P(U_i > 1 - survival | U_-i = u_-i) for rows of ``u``.

        The conditional cdf of U_i is the mixed partial of C in the other
        coordinates, normalized by its value at u_i = 1. The survival side is
        computed as 1 - (1 - s)^e via expm1/log1p so small tail
        probabilities keep full relative precision.
        """
        d = self._derivative_factors(u)
        others = np.prod(np.delete(d, i, axis=2), axis=2) * self.coefs
        e_i = self.exps[:, i][None, :]
        s = np.asarray(survival, dtype=float)[:, None]
        tail = -np.expm1(e_i * np.log1p(-np.minimum(s, 1.0)))
        tail = np.where(s >= 1.0, (e_i > 0).astype(float), tail)
        top = np.sum(others * tail, axis=1)
        bottom = np.sum(others * (e_i > 0), axis=1)
        return np.clip(top / bottom, 0.0, 1.0)


def _poly(cspec):
    if isinstance(cspec, EFGM):
        return _Poly(cspec.coefficients)
    if isinstance(cspec, PowerTypeCopula):
        return _Poly(cspec.coefficients)
    raise TypeError(f"expected EFGM or PowerTypeCopula, got {type(cspec).__name__}")


def _unit_points(u, n=None):
    arr = np.asarray(u, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if n is not None and arr.shape[1] != n:
        raise ShapeError(f"points have {arr.shape[1]} coordinates, copula has {n}")
    if np.any(~((arr >= 0.0) & (arr <= 1.0))):
        raise ParameterDomainError("u", "coordinates must lie in [0, 1]")
    return arr, single


def _check_gamma(gamma):
    if not -1.0 <= gamma <= 1.0:
        raise ParameterDomainError("dependence", f"|gamma| must be <= 1, got {gamma}")


def efgm_cdf(u, gamma):
    _check_gamma(gamma)
    arr, single = _unit_points(u)
    out = np.prod(arr, axis=1) * (1.0 + gamma * np.prod(1.0 - arr, axis=1))
    return float(out[0]) if single else out


def efgm_density(u, gamma):
    _check_gamma(gamma)
    arr, single = _unit_points(u)
    out = 1.0 + gamma * np.prod(1.0 - 2.0 * arr, axis=1)
    return float(out[0]) if single else out


def copula_cdf(cspec, u):
    poly = _poly(cspec)
    arr, single = _unit_points(u, poly.n)
    out = poly.cdf(arr)
    return float(out[0]) if single else out


def copula_density(cspec, u):
    poly = _poly(cspec)
    arr, single = _unit_points(u, poly.n)
    out = poly.density(arr)
    return float(out[0]) if single else out


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    witnesses: List[dict]


def power_copula_validity_check(coeffs, grid_resolution=20, tolerance=1e-12, margin_tolerance=1e-10):
    """Grid check of the copula axioms for a polynomial.

    Checks uniform margins, groundedness and nonnegative rectangle volumes on
    a regular grid with ``grid_resolution`` cells per axis. Returns the
    verdict with the first violation of each kind found.
    """
    if isinstance(coeffs, (EFGM, PowerTypeCopula)):
        coeffs = coeffs.coefficients
    if not coeffs:
        raise ParameterDomainError("coefficients", "need at least one term")
    poly = _Poly(PowerTypeCopula(dict(coeffs)).coefficients)
    n = poly.n
    ticks = np.linspace(0.0, 1.0, grid_resolution + 1)
    witnesses = []

    for i in range(n):
        pts = np.ones((ticks.size, n))
        pts[:, i] = ticks
        err = poly.cdf(pts) - ticks
        bad = np.flatnonzero(np.abs(err) > margin_tolerance)
        if bad.size:
            j = int(bad[0])
            witnesses.append({"kind": "margin", "axis": i, "point": tuple(pts[j]), "error": float(err[j])})
            break

    mesh = np.stack(np.meshgrid(*([ticks] * n), indexing="ij"), axis=-1).reshape(-1, n)
    values = poly.cdf(mesh).reshape((ticks.size,) * n)
    on_floor = np.any(mesh == 0.0, axis=1)
    floor_vals = values.reshape(-1)[on_floor]
    bad = np.flatnonzero(np.abs(floor_vals) > margin_tolerance)
    if bad.size:
        j = int(bad[0])
        witnesses.append({"kind": "grounded", "point": tuple(mesh[on_floor][j]), "value": float(floor_vals[j])})

    volumes = values
    for axis in range(n):
        volumes = np.diff(volumes, axis=axis)
    bad = np.argwhere(volumes < -tolerance)
    if bad.size:
        idx = tuple(int(k) for k in bad[0])
        witnesses.append({
            "kind": "volume",
            "lower": tuple(float(ticks[k]) for k in idx),
            "upper": tuple(float(ticks[k + 1]) for k in idx),
            "volume": float(volumes[idx]),
        })
    return ValidityReport(not witnesses, witnesses)


def _envelope(cspec, poly):
    if isinstance(cspec, EFGM):
        return 1.0 + abs(cspec.dependence)
    # polynomial densities are smooth, so a fine grid maximum with a margin
    # bounds them; any proposal above the bound is reported, never silently used
    res = max(4, int(round(200_000 ** (1.0 / poly.n))))
    ticks = np.linspace(0.0, 1.0, res + 1)
    mesh = np.stack(np.meshgrid(*([ticks] * poly.n), indexing="ij"), axis=-1).reshape(-1, poly.n)
    return 1.05 * float(np.max(poly.density(mesh)))


def _efgm_inversion(gamma, rows, gen):
    u = gen.random(rows)
    p = gen.random(rows)
    a = gamma * (1.0 - 2.0 * u)
    safe = np.where(a == 0.0, 1.0, a)
    b = 1.0 + a
    # the smaller root of a v^2 - (1 + a) v + p = 0, written to avoid cancellation
    v = np.where(a == 0.0, p, 2.0 * p / (b + np.sqrt(np.maximum(b * b - 4.0 * safe * p, 0.0))))
    return np.column_stack([u, v])


def _rejection(poly, envelope, rows, gen):
    if 1.0 / envelope < 0.01:
        raise EnvelopeError(f"envelope {envelope:.3g} gives acceptance below 1%")
    out = []
    have = 0
    proposed = accepted = 0
    while have < rows:
        batch = int(math.ceil((rows - have) * envelope * 1.1)) + 16
        u = gen.random((batch, poly.n))
        dens = poly.density(u)
        if np.any(dens > envelope):
            raise EnvelopeError(f"density {float(dens.max()):.6g} exceeds the envelope {envelope:.6g}")
        keep = gen.random(batch) * envelope < dens
        proposed += batch
        accepted += int(keep.sum())
        if accepted < 0.01 * proposed:
            raise EnvelopeError(f"acceptance rate {accepted / proposed:.3%} is below 1%")
        out.append(u[keep])
        have += int(keep.sum())
    return np.concatenate(out)[:rows]


def sample_uniforms(cspec, count, seed=None, method="auto"):
    """Draw ``count`` points of the copula on the unit cube.

    ``method="auto"`` uses exact conditional inversion for the bivariate EFGM
    and rejection from the independence proposal otherwise.
    """
    count = int(count)
    if count < 1:
        raise ParameterDomainError("count", f"must be >= 1, got {count}")
    poly = _poly(cspec)
    if isinstance(cspec, PowerTypeCopula):
        report = power_copula_validity_check(cspec.coefficients)
        if not report.valid:
            raise ParameterDomainError("coefficients", f"not a copula: {report.witnesses[0]}")
    inversion = isinstance(cspec, EFGM) and cspec.dimension == 2 and method in ("auto", "inversion")
    if method == "inversion" and not inversion:
        raise ParameterDomainError("method", "conditional inversion is only available for the bivariate EFGM")
    if method not in ("auto", "inversion", "rejection"):
        raise ParameterDomainError("method", f"unknown method {method!r}")
    envelope = None if inversion else _envelope(cspec, poly)
    parts = []
    full, rest = divmod(count, CHUNK_ROWS)
    for i, rows in enumerate([CHUNK_ROWS] * full + ([rest] if rest else [])):
        gen = _rng.generator(_rng.child(seed, i))
        if inversion:
            parts.append(_efgm_inversion(cspec.dependence, rows, gen))
        else:
            parts.append(_rejection(poly, envelope, rows, gen))
    return np.concatenate(parts)


def _push_marginals(u, marginals):
    n = u.shape[1]
    if len(marginals) != n:
        raise ShapeError(f"{len(marginals)} marginals for a {n}-dimensional copula")
    out = np.empty_like(u)
    for j, spec in enumerate(marginals):
        if not dist.has_closed_form(spec):
            raise UnsupportedMarginalError(f"marginal {j} ({spec!r}) has no quantile function")
        out[:, j] = dist.quantile(spec, np.clip(u[:, j], _OPEN_LOW, _OPEN_HIGH))
    return out


def sample_copula(cspec, marginals=None, count=1, seed=None, method="auto"):
    """Joint draws with the given copula; ``marginals=None`` returns the uniforms."""
    u = sample_uniforms(cspec, count, seed, method)
    if marginals is None:
        return u
    return _push_marginals(u, list(marginals))


def _powerlaw_survival(x, alpha):
    x = np.asarray(x, dtype=float)
    return np.where(x <= 1.0, 1.0, np.exp(-alpha * np.log(np.maximum(x, 1.0))))


def conditional_tail_probability(cspec, alpha, threshold, mc_count, seed=None, n_risks=2):
    """P(X_1 + ... + X_n > threshold) for PowerLaw(alpha) margins under ``cspec``.

    ``cspec=None`` means ``n_risks`` independent margins. Returns a
    ProbabilityEstimate from the conditional estimator described in the
    module docstring.
    """
    n = n_risks if cspec is None else _poly(cspec).n
    poly = _Poly({(1,) * n: 1.0}) if cspec is None else _poly(cspec)
    total = 0.0
    total_sq = 0.0
    mc_count = int(mc_count)
    full, rest = divmod(mc_count, CHUNK_ROWS)
    for i, rows in enumerate([CHUNK_ROWS] * full + ([rest] if rest else [])):
        gen = _rng.generator(_rng.child(seed, i))
        if cspec is None:
            u = gen.random((rows, n))
        elif isinstance(cspec, EFGM) and n == 2:
            u = _efgm_inversion(cspec.dependence, rows, gen)
        else:
            u = _rejection(poly, _envelope(cspec, poly), rows, gen)
        x = (1.0 - np.clip(u, 0.0, _OPEN_HIGH)) ** (-1.0 / alpha)
        est = np.zeros(rows)
        for k in range(n):
            rest_x = np.delete(x, k, axis=1)
            cut = np.maximum(rest_x.max(axis=1), threshold - rest_x.sum(axis=1))
            est += poly.conditional_survival(k, u, _powerlaw_survival(cut, alpha))
        total += float(est.sum())
        total_sq += float(np.dot(est, est))
    mean = total / mc_count
    variance = max(total_sq / mc_count - mean * mean, 0.0) * mc_count / max(mc_count - 1, 1)
    return ProbabilityEstimate(mean, math.sqrt(variance / mc_count), mc_count)


def crude_tail_probability(cspec, alpha, threshold, mc_count, seed=None, n_risks=2):
    n = n_risks if cspec is None else _poly(cspec).n
    hits = 0
    full, rest = divmod(int(mc_count), CHUNK_ROWS)
    for i, rows in enumerate([CHUNK_ROWS] * full + ([rest] if rest else [])):
        gen = _rng.generator(_rng.child(seed, i))
        if cspec is None:
            u = gen.random((rows, n))
        else:
            u = sample_uniforms(cspec, rows, _rng.child(seed, i, 1))
        x = (1.0 - np.clip(u, 0.0, _OPEN_HIGH)) ** (-1.0 / alpha)
        hits += int(np.count_nonzero(x.sum(axis=1) > threshold))
    p = hits / mc_count
    return ProbabilityEstimate(p, math.sqrt(p * (1.0 - p) / mc_count), int(mc_count))


@dataclass(frozen=True)
class TailRatio:
    ratio: float
    ci_low: float
    ci_high: float
    dependent: ProbabilityEstimate
    independent: ProbabilityEstimate
    threshold: float


def tail_equivalence_ratio(cspec, alpha, n_risks, z, mc_count, seed=None, method="conditional", min_hits=100):
    """Ratio of P(sum > z n) under ``cspec`` to the same probability for independent copies.

    Both probabilities use PowerLaw(alpha) margins and independent
    sub-streams of ``seed``; the interval is the delta-method 95% interval
    of the ratio. ``method="crude"`` uses plain indicator averages.
    """
    dim = _poly(cspec).n
    if dim != n_risks:
        raise ShapeError(f"copula dimension {dim} differs from n_risks={n_risks}")
    if not alpha > 0.0:
        raise ParameterDomainError("alpha", f"must be > 0, got {alpha}")
    threshold = z * n_risks
    estimator = {"conditional": conditional_tail_probability, "crude": crude_tail_probability}[method]
    indep = estimator(None, alpha, threshold, mc_count, _rng.child(seed, 1), n_risks)
    if indep.estimate * mc_count < min_hits:
        raise ResolutionError(
            f"expected tail hits {indep.estimate * mc_count:.1f} < {min_hits}; raise mc_count or lower z"
        )
    dep = estimator(cspec, alpha, threshold, mc_count, _rng.child(seed, 0))
    if dep.estimate <= 0.0:
        raise ResolutionError("dependent tail probability estimate is zero")
    ratio = dep.estimate / indep.estimate
    rel = math.sqrt((dep.stderr / dep.estimate) ** 2 + (indep.stderr / indep.estimate) ** 2)
    half = _Z95 * ratio * rel
    return TailRatio(ratio, ratio - half, ratio + half, dep, indep, threshold)


def independent_mean_quantile(alpha, n_risks, level, mc_count, seed=None):
    """Empirical ``level``-quantile of the mean of ``n_risks`` independent PowerLaw(alpha) risks."""
    gen = _rng.generator(seed)
    x = (1.0 - gen.random((int(mc_count), n_risks))) ** (-1.0 / alpha)
    return var(x.mean(axis=1), level)


@dataclass(frozen=True)
class DependentVarComparison:
    aggregate_var: float
    single_var: float
    gap: float
    gap_ci_low: float
    gap_ci_high: float
    verdict: str


def var_compare_dependent(alpha, gamma, level, mc_count, seed=None, batches=20):
    """VaR of (X_1 + X_2)/2 against VaR of X_1 under EFGM(gamma) with PowerLaw(alpha) margins.

    Both VaRs come from the same draws. The verdict is ``aggregate-greater``
    or ``aggregate-smaller`` when the sectioning interval of the gap excludes
    zero, otherwise ``inconclusive``.
    """
    if not 0.99 <= level < 1.0:
        raise ParameterDomainError("level", f"must lie in [0.99, 1), got {level}")
    x = sample_copula(EFGM(2, gamma), [dist.PowerLaw(alpha)] * 2, mc_count, seed)
    pair = np.column_stack([x.mean(axis=1), x[:, 0]])
    gap, lo, hi = section_ci(pair, lambda s: var(s[:, 0], level) - var(s[:, 1], level), batches)
    agg = var(pair[:, 0], level)
    single = var(pair[:, 1], level)
    if lo > 0.0:
        verdict = "aggregate-greater"
    elif hi < 0.0:
        verdict = "aggregate-smaller"
    else:
        verdict = "inconclusive"
    return DependentVarComparison(agg, single, gap, lo, hi, verdict)
