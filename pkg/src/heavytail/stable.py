"""Chambers-Mallows-Stuck sampler for alpha-stable laws.

Locations follow the (sigma, beta, mu) convention in which
``Stable(1/2, sigma, 1, mu)`` is the right-tailed Levy law ``Levy(mu, sigma)``
and ``Stable(1, sigma, 0, mu)`` is ``Cauchy(mu, sigma)``.
"""
import numpy as np

HALF_PI = 0.5 * np.pi


def standard_stable(alpha, skewness, size, rng):
    """Draw ``size`` variates from S_alpha(1, skewness, 0)."""
    v = rng.uniform(-HALF_PI, HALF_PI, size)
    w = rng.standard_exponential(size)
    if alpha == 1.0:
        b = skewness
        shifted = HALF_PI + b * v
        return (shifted * np.tan(v) - b * np.log(HALF_PI * w * np.cos(v) / shifted)) / HALF_PI
    tan_term = skewness * np.tan(HALF_PI * alpha)
    shift = np.arctan(tan_term) / alpha
    scale = (1.0 + tan_term * tan_term) ** (0.5 / alpha)
    av = alpha * (v + shift)
    return (
        scale
        * np.sin(av)
        / np.cos(v) ** (1.0 / alpha)
        * (np.cos(v - av) / w) ** ((1.0 - alpha) / alpha)
    )


def sample_stable(alpha, scale, skewness, location, size, rng):
    z = standard_stable(alpha, skewness, size, rng)
    if alpha == 1.0:
        return scale * z + (skewness * scale * np.log(scale) / HALF_PI + location)
    return scale * z + location
