"""Approximation targets and the scalar functionals of their Fourier densities.

A :class:`FourierTarget` is a real function ``f`` on R^q together with a
density ``g`` such that ``f(v) = int exp(i <w, v>) g(w) dw`` for ``||v|| <= M``.
Only closed-form pairs are provided so that every test has an exact oracle.

Dynamic targets
---------------
``GaussianFunctionalTarget`` is the fading-memory functional
``z -> exp(-0.5 * sum_i lam^i z_{-i}^2)`` on scalar input sequences.
``ContractionTarget`` is the state map ``F(x, z) = a * exp(-(|x|^2 + |z|^2)/2)``
of a contracting reservoir system used for output-feedback networks.

Sequences passed to ``GaussianFunctionalTarget.evaluate`` are in *lag order*
``(z_0, z_{-1}, ..., z_{-T})``; the reservoir module works chronologically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import integrate, special

from . import stats
from .errors import ConfigError, NonConvergenceError
from .geometry import sphere_area, vol_ball


class TargetKind(str, Enum):
    GAUSSIAN_BUMP = "GaussianBump"
    SCALED_GAUSSIAN_BUMP = "ScaledGaussianBump"
    ZERO = "ZeroTarget"
    USER = "UserClosedForm"


def _as_points(x, q: int) -> tuple[np.ndarray, bool]:
    a = np.asarray(x, dtype=float)
    single = a.ndim == 1 or (q == 1 and a.ndim == 0)
    a = a.reshape(-1, q) if not single else a.reshape(1, q)
    return a, single


@dataclass(frozen=True, eq=False)
class FourierTarget:
    """Closed-form pair (f, g) on R^q with input radius ``bound_M``.

    ``f`` and ``g`` act on arrays of shape (n, q). ``g_radial`` is set when g is
    real and depends on ||w|| only; ``abs_g_radial`` when |g| is radial. These
    enable one-dimensional quadrature for every moment. ``g_cutoff`` is a radius
    beyond which g vanishes identically (inf for untruncated targets).
    """

    dim_q: int
    bound_M: float
    kind: TargetKind
    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    abs_g_radial: Callable[[np.ndarray], np.ndarray] | None = None
    g_radial: Callable[[np.ndarray], np.ndarray] | None = None
    g_cutoff: float = np.inf
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.dim_q) < 1:
            raise ConfigError("dim_q must be a positive integer")
        if not self.bound_M > 0:
            raise ConfigError("bound_M must be positive")

    def eval_f(self, v):
        pts, single = _as_points(v, self.dim_q)
        out = np.asarray(self.f(pts), dtype=float)
        return float(out[0]) if single else out

    def eval_g(self, w):
        pts, single = _as_points(w, self.dim_q)
        out = np.asarray(self.g(pts), dtype=complex)
        if np.isfinite(self.g_cutoff):
            out = np.where(np.linalg.norm(pts, axis=1) <= self.g_cutoff, out, 0.0)
        return complex(out[0]) if single else out

    @property
    def is_zero(self) -> bool:
        return self.kind is TargetKind.ZERO

    @cached_property
    def moments(self) -> "FourierMoments":
        return FourierMoments(self)


def _gaussian_pair(q: int, amplitude: float, variance, center):
    var = np.broadcast_to(np.asarray(variance, dtype=float), (q,)).copy()
    mu = np.zeros(q) if center is None else np.broadcast_to(np.asarray(center, dtype=float), (q,)).copy()
    if np.any(var <= 0):
        raise ConfigError("variances must be positive")
    log_norm = -0.5 * q * np.log(2 * np.pi) - 0.5 * np.sum(np.log(var))

    def f(v):
        return amplitude * np.exp(-0.5 * np.sum(var * (v - mu) ** 2, axis=1))

    def g(w):
        dens = amplitude * np.exp(log_norm - 0.5 * np.sum(w * w / var, axis=1))
        if np.any(mu != 0):
            return dens * np.exp(-1j * (w @ mu))
        return dens.astype(complex)

    radial = bool(np.all(var == var[0]))
    abs_prof = g_prof = None
    if radial:
        s = var[0]

        def abs_prof(r):
            return abs(amplitude) * np.exp(log_norm - 0.5 * np.asarray(r) ** 2 / s)

        if not np.any(mu != 0):
            def g_prof(r):
                return amplitude * np.exp(log_norm - 0.5 * np.asarray(r) ** 2 / s)

    return f, g, abs_prof, g_prof, dict(amplitude=amplitude, variance=var, center=mu)


def make_gaussian_bump(q: int, M: float) -> FourierTarget:
    """f(v) = exp(-|v|^2/2); g is the standard normal density on R^q."""
    if int(q) != q or q < 1:
        raise ConfigError("q must be a positive integer")
    if not M > 0:
        raise ConfigError("M must be positive")
    f, g, ap, gp, params = _gaussian_pair(int(q), 1.0, 1.0, None)
    return FourierTarget(int(q), float(M), TargetKind.GAUSSIAN_BUMP, f, g, ap, gp, params=params)


def make_scaled_gaussian_bump(q: int, M: float, amplitude: float = 1.0, variance=1.0, center=None) -> FourierTarget:
    """f(v) = a exp(-0.5 sum_i s_i (v_i - c_i)^2).

    The density is ``a * N(0, diag(s))(w) * exp(-i <w, c>)``; a nonzero center
    gives a complex g with odd imaginary part.
    """
    if int(q) != q or q < 1:
        raise ConfigError("q must be a positive integer")
    if not M > 0:
        raise ConfigError("M must be positive")
    f, g, ap, gp, params = _gaussian_pair(int(q), float(amplitude), variance, center)
    return FourierTarget(int(q), float(M), TargetKind.SCALED_GAUSSIAN_BUMP, f, g, ap, gp, params=params)


def make_zero_target(q: int, M: float) -> FourierTarget:
    if int(q) != q or q < 1:
        raise ConfigError("q must be a positive integer")

    def zero(x):
        return np.zeros(len(x))

    def zero_prof(r):
        return np.zeros_like(np.asarray(r, dtype=float))

    return FourierTarget(int(q), float(M), TargetKind.ZERO, zero, lambda w: np.zeros(len(w), complex),
                         zero_prof, zero_prof)


def make_user_target(q: int, M: float, f, g, abs_g_radial=None, g_radial=None) -> FourierTarget:
    """Wrap a user-supplied closed-form pair; the pair is trusted, not verified."""
    return FourierTarget(int(q), float(M), TargetKind.USER, f, g, abs_g_radial, g_radial)


def radial_fourier_integral(g_radial, q: int, s: float, r_max: float = np.inf, tol: float = 1e-11) -> float:
    """``int_{|w| <= r_max} exp(i <w, v>) g(|w|) dw`` at ``|v| = s`` for real radial g.

    Uses the spherical average ``(2 pi)^{q/2} (r s)^{1 - q/2} J_{q/2-1}(r s)``
    of the plane wave, which reduces the integral to one dimension.
    """
    nu = 0.5 * q - 1.0
    if s == 0:
        def h(r):
            return sphere_area(q) * g_radial(r) * r ** (q - 1)
    else:
        def h(r):
            x = r * s
            ang = (2 * np.pi) ** (0.5 * q) * special.jv(nu, x) * x ** (-nu) if x > 0 else sphere_area(q)
            return ang * g_radial(r) * r ** (q - 1)
    if np.isfinite(r_max):
        # oscillatory integrand on a finite interval; split at the zeros scale
        n_pieces = max(1, int(np.ceil(r_max * max(s, 1.0) / np.pi)))
        edges = np.linspace(0.0, r_max, n_pieces + 1)
        return float(sum(stats.quad_1d(h, a, b, tol) for a, b in zip(edges[:-1], edges[1:])))
    return stats.quad_halfline(h, 0.0, tol, breaks=[1.0, 5.0, 10.0])


def truncate_target(t: FourierTarget, radius: float) -> FourierTarget:
    """Target whose density is ``g * 1{|w| <= radius}``.

    ``f`` of the truncated target is computed by radial quadrature, so the
    original density must be real and radial.
    """
    if t.g_radial is None:
        raise ConfigError("truncation requires a real radial Fourier density")
    if not radius > 0:
        raise ConfigError("truncation radius must be positive")
    q, gp = t.dim_q, t.g_radial
    r_cut = float(min(radius, t.g_cutoff))

    def f(v):
        s = np.linalg.norm(v, axis=1)
        return np.array([radial_fourier_integral(gp, q, float(si), r_cut) for si in s])

    def g_prof(r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= r_cut, gp(r), 0.0)

    ap = t.abs_g_radial

    def abs_prof(r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= r_cut, ap(r), 0.0)

    params = dict(t.params, truncation_radius=r_cut, parent_kind=t.kind.value)
    return FourierTarget(q, t.bound_M, t.kind, f, t.g, abs_prof, g_prof, r_cut, params)


class FourierMoments:
    """Moment and tail functionals of |g| and |g|^2.

    Radial densities use one-dimensional quadrature in the radius. Other
    densities use direct quadrature in one dimension, nested spherical
    quadrature in two and three dimensions and Monte Carlo beyond that.
    """

    def __init__(self, target: FourierTarget, tol: float = 1e-10, mc_samples: int = 1 << 20, seed: int = 0):
        self.t = target
        self.tol = tol
        self.mc_samples = mc_samples
        self.seed = seed

    # generic integral of h(|w|) |g(w)|^power over a radial region
    def integrate(self, h: Callable[[float], float], power: int, lo: float = 0.0, hi: float = np.inf) -> float:
        t = self.t
        if t.is_zero:
            return 0.0
        hi = min(hi, t.g_cutoff)
        if hi <= lo:
            return 0.0
        q = t.dim_q
        if t.abs_g_radial is not None:
            prof = t.abs_g_radial
            area = sphere_area(q)

            def integrand(r):
                return area * h(r) * float(prof(r)) ** power * r ** (q - 1)

            breaks = [b for b in (1.0, 3.0, 10.0) if lo < b < hi]
            edges = [lo] + breaks + [hi]
            return float(sum(stats.quad_1d(integrand, a, b, self.tol) for a, b in zip(edges[:-1], edges[1:])))
        return self._integrate_nonradial(h, power, lo, hi)

    def _integrate_nonradial(self, h, power, lo, hi) -> float:
        q, g = self.t.dim_q, self.t.eval_g
        if q == 1:
            def integrand(r):
                return h(r) * (abs(g(np.array([r]))) ** power + abs(g(np.array([-r]))) ** power)
            edges = [lo] + [b for b in (1.0, 3.0, 10.0) if lo < b < hi] + [hi]
            return float(sum(stats.quad_1d(integrand, a, b, self.tol) for a, b in zip(edges[:-1], edges[1:])))
        if q in (2, 3):
            opts = dict(epsabs=self.tol, epsrel=1e-8, limit=200)
            if q == 2:
                def integrand(theta, r):
                    w = r * np.array([np.cos(theta), np.sin(theta)])
                    return h(r) * abs(g(w)) ** power * r
                val, err = integrate.nquad(integrand, [[0, 2 * np.pi], [lo, hi]], opts=[opts, opts])
            else:
                def integrand(phi, theta, r):
                    w = r * np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
                    return h(r) * abs(g(w)) ** power * r * r * np.sin(theta)
                val, err = integrate.nquad(integrand, [[0, 2 * np.pi], [0, np.pi], [lo, hi]], opts=[opts] * 3)
            if not np.isfinite(val) or err > 1e-6 * max(1.0, abs(val)):
                raise NonConvergenceError(f"nested quadrature did not converge (value={val}, error={err})")
            return float(val)
        return self._integrate_mc(h, power, lo, hi)

    def _integrate_mc(self, h, power, lo, hi) -> float:
        # heavy-tailed proposal: multivariate t with 3 degrees of freedom
        q, g = self.t.dim_q, self.t.eval_g
        nu = 3.0
        log_c = special.gammaln((nu + q) / 2) - special.gammaln(nu / 2) - 0.5 * q * np.log(nu * np.pi)

        def sampler(rng, n):
            z = rng.standard_normal((n, q))
            return z / np.sqrt(rng.chisquare(nu, n) / nu)[:, None]

        def f(w):
            r = np.linalg.norm(w, axis=1)
            dens = np.exp(log_c - 0.5 * (nu + q) * np.log1p(r * r / nu))
            hv = np.array([h(ri) for ri in r])
            inside = (r >= lo) & (r <= hi)
            return np.where(inside, hv * np.abs(g(w)) ** power / dens, 0.0)

        est = stats.mc_integrate(f, sampler, self.mc_samples, self.seed)
        if est.stderr > 1e-2 * max(abs(est.mean), 1e-300):
            raise NonConvergenceError("Monte Carlo moment estimate has relative error above 1%")
        return est.mean

    def tail_mass(self, R: float) -> float:
        """int_{|w| > R} |g(w)| dw."""
        return self.integrate(lambda r: 1.0, 1, lo=R)

    def abs_moment(self, k: float) -> float:
        """int |w|^k |g(w)| dw."""
        return self.integrate(lambda r: r**k, 1)

    def exp_moment(self, k: float, C: float) -> float:
        """int exp(C |w|^k) |g(w)| dw."""
        return self.integrate(lambda r: np.exp(C * r**k), 1)

    def weighted_l2(self, p: float, R: float | None = None, region: str = "all") -> float:
        """int max(1, |w|^p) |g(w)|^2 over R^q, B_R ("inside") or its complement ("outside")."""
        def h(r):
            return max(1.0, r**p)

        if region == "all" or R is None:
            return self.integrate(h, 2)
        if region == "inside":
            return self.integrate(h, 2, hi=R)
        if region == "outside":
            return self.integrate(h, 2, lo=R)
        raise ValueError(f"unknown region {region!r}")

    @cached_property
    def v_star(self) -> float:
        """int max(1, |w|^{2q+6}) |g(w)|^2 dw."""
        return self.weighted_l2(2 * self.t.dim_q + 6)

    def l1_norm(self) -> float:
        return self.integrate(lambda r: 1.0, 1)


def moments(t: FourierTarget) -> FourierMoments:
    return t.moments


# ---------------------------------------------------------------- dynamic targets


@dataclass(frozen=True)
class GaussianFunctionalTarget:
    """H(z) = exp(-0.5 sum_i lam^i z_{-i}^2) on sequences with |z_t| <= M."""

    lam: float
    bound_M: float = 1.0
    d: int = 1

    def __post_init__(self):
        if not 0 < self.lam < 1:
            raise ConfigError("lam must lie in (0, 1)")
        if not self.bound_M > 0:
            raise ConfigError("bound_M must be positive")
        if self.d != 1:
            raise ConfigError("only scalar inputs (d = 1) are supported")

    @property
    def lipschitz_L(self) -> float:
        # |H(z) - H(z')| <= M sum_i lam^i |z_{-i} - z'_{-i}|
        return self.bound_M

    def weights(self, T: int) -> np.ndarray:
        return self.lam ** np.arange(T + 1)

    def evaluate(self, z_lags) -> np.ndarray | float:
        z = np.asarray(z_lags, dtype=float)
        single = z.ndim == 1
        z = np.atleast_2d(z)
        out = np.exp(-0.5 * (z * z) @ self.weights(z.shape[1] - 1))
        return float(out[0]) if single else out

    def truncation_tail_bound(self, T: int) -> float:
        """L M sum_{i > T} lam^i."""
        return self.lipschitz_L * self.bound_M * self.lam ** (T + 1) / (1 - self.lam)

    def covariance_diag(self, T: int) -> np.ndarray:
        return self.weights(T)

    def truncated_target(self, T: int) -> FourierTarget:
        """H_T as a static target on R^{T+1}; its density is the N(0, Sigma) pdf."""
        return make_scaled_gaussian_bump(T + 1, np.sqrt(T + 1) * self.bound_M, 1.0, self.covariance_diag(T))

    def readout_target(self, T: int, rho: float) -> FourierTarget:
        """The function G with G(K x) = H_T(x) for the shift reservoir gain rho.

        With rho = sqrt(lam) this is exactly the standard Gaussian bump on R^{T+1}.
        """
        q = T + 1
        M_T = np.sqrt(q) * self.bound_M
        var = self.lam ** np.arange(q) / rho ** (2 * np.arange(q))
        if np.allclose(var, 1.0, rtol=1e-14, atol=0):
            return make_gaussian_bump(q, M_T)
        return make_scaled_gaussian_bump(q, M_T, 1.0, var)


def eval_dynamic_target(t: GaussianFunctionalTarget, z_lags) -> np.ndarray | float:
    """Evaluate the truncated functional on lag-ordered input(s) ``(z_0, ..., z_{-T})``."""
    z = np.asarray(z_lags, dtype=float)
    if np.any(np.abs(z) > t.bound_M * (1 + 1e-12)):
        raise ConfigError("inputs must satisfy |z_t| <= M")
    return t.evaluate(z)


@dataclass(frozen=True, eq=False)
class ContractionTarget:
    """F(x, z) = a * exp(-(|x|^2 + |z|^2) / 2), an r-contraction in x.

    The gradient of exp(-|y|^2/2) has norm at most e^{-1/2}, so the Lipschitz
    constant in x is |a| e^{-1/2}.
    """

    state_dim: int
    input_dim: int
    amplitude: np.ndarray
    bound_M: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.amplitude, dtype=float).reshape(-1)
        object.__setattr__(self, "amplitude", a)
        if a.size != self.state_dim:
            raise ConfigError("amplitude must have state_dim entries")
        if self.input_dim < 1 or self.state_dim < 1:
            raise ConfigError("dimensions must be positive")
        if np.linalg.norm(a) > self.bound_M * (1 + 1e-12):
            raise ConfigError("range must lie in B_M: need |a| <= M")
        if self.contraction_r >= 1:
            raise ConfigError("F(., z) must be a contraction")

    @property
    def contraction_r(self) -> float:
        return float(np.linalg.norm(self.amplitude) * np.exp(-0.5))

    @property
    def joint_dim(self) -> int:
        return self.state_dim + self.input_dim

    def F(self, x, z) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = np.atleast_2d(np.asarray(z, dtype=float))
        s = np.sum(x * x, axis=1) + np.sum(z * z, axis=1)
        return np.exp(-0.5 * s)[:, None] * self.amplitude[None, :]

    def component_target(self, j: int) -> FourierTarget:
        """F_j as a static target on R^{N*+d} valid on B_{M+1}."""
        return make_scaled_gaussian_bump(self.joint_dim, self.bound_M + 1.0, float(self.amplitude[j]))

    def c_f(self, j: int) -> float:
        """(Vol(B_1) int max(1, |w|^{2(p+3)}) |g_j|^2)^{1/2} with p = N* + d."""
        t = self.component_target(j)
        p = self.joint_dim
        return float(np.sqrt(vol_ball(p, 1.0) * t.moments.weighted_l2(2 * (p + 3))))

    @property
    def c_h(self) -> float:
        return float(sum(self.c_f(j) for j in range(self.state_dim)))

    def run(self, z_chrono, xi) -> np.ndarray:
        """Iterate x_t = F(x_{t-1}, z_t) from ``xi``; returns the final state(s).

        ``z_chrono`` has shape (L, d) or (n, L, d), oldest input first.
        """
        z = np.asarray(z_chrono, dtype=float)
        single = z.ndim == 2
        if single:
            z = z[None]
        x = np.broadcast_to(np.asarray(xi, dtype=float), (z.shape[0], self.state_dim)).copy()
        for t in range(z.shape[1]):
            x = self.F(x, z[:, t, :])
        return x[0] if single else x


def make_contraction_target(state_dim: int = 2, input_dim: int = 1, M: float = 1.0, amplitude=None) -> ContractionTarget:
    """Default amplitude splits |a| = M/2 evenly across the components."""
    if amplitude is None:
        amplitude = np.full(state_dim, 0.5 * M / np.sqrt(state_dim))
    return ContractionTarget(state_dim, input_dim, np.asarray(amplitude, dtype=float), M)
