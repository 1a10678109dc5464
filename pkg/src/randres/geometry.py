"""Euclidean balls: volumes, the Stirling-type volume bound, uniform sampling."""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln


def vol_ball(q: int, R: float = 1.0) -> float:
    """Volume pi^{q/2} R^q / Gamma(q/2 + 1) of the radius-R ball in R^q."""
    if q < 1 or R <= 0:
        raise ValueError("need q >= 1 and R > 0")
    return float(np.exp(0.5 * q * np.log(np.pi) + q * np.log(R) - gammaln(0.5 * q + 1)))


def vol_ball_bound(q: int, R: float = 1.0) -> float:
    """Upper bound (q pi)^{-1/2} (2 pi e / q)^{q/2} R^q on the ball volume."""
    if q < 1 or R <= 0:
        raise ValueError("need q >= 1 and R > 0")
    return float(np.exp(-0.5 * np.log(q * np.pi) + 0.5 * q * np.log(2 * np.pi * np.e / q) + q * np.log(R)))


def sphere_area(q: int) -> float:
    """Surface area of the unit sphere S^{q-1} in R^q."""
    return float(np.exp(np.log(2.0) + 0.5 * q * np.log(np.pi) - gammaln(0.5 * q)))


def sample_ball(rng: np.random.Generator, n: int, q: int, R: float) -> np.ndarray:
    """Uniform draws on the closed ball B_R in R^q, shape (n, q).

    Direction is a normalised Gaussian vector, radius is R * U^{1/q}
    (inverse CDF of the radial law).
    """
    d = rng.standard_normal((n, q))
    nrm = np.linalg.norm(d, axis=1, keepdims=True)
    # a zero Gaussian vector has probability zero; guard anyway
    nrm[nrm == 0] = 1.0
    r = R * rng.random(n) ** (1.0 / q)
    return d / nrm * r[:, None]
