"""Numerical infrastructure: RNG streams, integrators, confidence intervals, rate fits.

Random numbers come from numpy's Philox generator (counter based, period
2**256). A stream is identified by a master seed and a stream id; the pair is
mapped through ``SeedSequence(seed, spawn_key=(stream,))`` so that streams with
different ids are statistically independent and every (seed, stream, draw
index) triple yields the same value on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, stats

from .errors import NonConvergenceError

_Z95 = float(stats.norm.ppf(0.975))


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Return an independent Philox generator for ``(seed, stream)``."""
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be nonnegative integers")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def stream_id(*parts: int) -> int:
    """Fold a tuple of small nonnegative integers into one 64-bit stream id."""
    out = 0
    for p in parts:
        out = (out * 1_000_003 + int(p) + 1) % (1 << 63)
    return out


@dataclass(frozen=True)
class EstimateCI:
    """Mean with standard error and a normal-approximation 95% interval."""

    mean: float
    stderr: float
    n: int
    lo: float
    hi: float

    @classmethod
    def from_moments(cls, mean: float, stderr: float, n: int) -> "EstimateCI":
        return cls(float(mean), float(stderr), int(n), float(mean - _Z95 * stderr), float(mean + _Z95 * stderr))


def summarize(samples) -> EstimateCI:
    """Sample mean, stderr = sd/sqrt(n) and 95% normal interval."""
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise ValueError("need at least two samples")
    return EstimateCI.from_moments(x.mean(), x.std(ddof=1) / np.sqrt(n), n)


def median_ci(samples, level: float = 0.95) -> tuple[float, float, float]:
    """Median with a distribution-free order-statistic interval.

    The interval ``[x_(k), x_(n-k+1)]`` uses the binomial(n, 1/2) quantile, so
    it holds for any continuous law without a normal approximation.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < 3:
        raise ValueError("need at least three samples")
    k = int(stats.binom.ppf((1 - level) / 2, n, 0.5))
    k = max(k, 1)
    return float(np.median(x)), float(x[k - 1]), float(x[n - k])


def mc_integrate(
    f: Callable[[np.ndarray], np.ndarray],
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    n: int,
    seed: int | np.random.Generator,
    chunk: int = 1 << 18,
) -> EstimateCI:
    """Plain Monte Carlo estimate of ``E[f(X)]`` with ``X ~ sampler``.

    Samples are drawn in chunks to bound memory; per-chunk sums are combined
    with the pairwise variance update so the result does not depend on the
    chunk size beyond floating point reassociation.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    count, mean, m2 = 0, 0.0, 0.0
    remaining = n
    while remaining > 0:
        m = min(chunk, remaining)
        y = np.asarray(f(sampler(rng, m)), dtype=float).ravel()
        cm = y.mean()
        cm2 = float(np.sum((y - cm) ** 2))
        tot = count + m
        delta = cm - mean
        mean += delta * m / tot
        m2 += cm2 + delta * delta * count * m / tot
        count = tot
        remaining -= m
    var = m2 / (count - 1)
    return EstimateCI.from_moments(mean, np.sqrt(max(var, 0.0) / count), count)


def quad_1d(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-10,
    points: Sequence[float] | None = None,
    limit: int = 500,
) -> float:
    """Adaptive Gauss-Kronrod quadrature on ``[a, b]`` (infinite ends allowed).

    Raises NonConvergenceError unless the reported error is at most
    ``tol * max(1, |value|)``.
    """
    if a == b:
        return 0.0
    kw = dict(epsabs=tol, epsrel=tol, limit=limit, full_output=1)
    if points is not None and np.isfinite(a) and np.isfinite(b):
        pts = [p for p in points if a < p < b]
        if pts:
            kw["points"] = pts
    with np.errstate(all="ignore"):
        res = integrate.quad(f, a, b, **kw)
    val, err = res[0], res[1]
    if not np.isfinite(val) or not np.isfinite(err) or err > tol * max(1.0, abs(val)):
        raise NonConvergenceError(f"quadrature on [{a}, {b}] did not converge (value={val}, error={err})")
    return float(val)


def quad_halfline(f: Callable[[float], float], a: float, tol: float = 1e-10, breaks: Sequence[float] = ()) -> float:
    """Integrate ``f`` over ``[a, inf)`` splitting at the given finite breakpoints."""
    edges = [a] + sorted(p for p in breaks if p > a) + [np.inf]
    return sum(quad_1d(f, lo, hi, tol) for lo, hi in zip(edges[:-1], edges[1:]))


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float


def fit_rate(N, err) -> RateFit:
    """Least-squares line through ``(log N, log err)``."""
    x = np.log(np.asarray(N, dtype=float))
    y = np.log(np.asarray(err, dtype=float))
    if x.size < 3 or x.size != y.size:
        raise ValueError("need at least three (N, err) pairs")
    if np.unique(x).size < 2:
        raise ValueError("abscissae are degenerate")
    X = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(icpt), float(min(max(r2, 0.0), 1.0)))
