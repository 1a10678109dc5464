"""Echo state networks with output feedback (Jordan networks).

The recursion is

    x_t = relu(A y_{t-1} + C z_t + zeta),    y_t = W x_t,    y_{-T-1} = Xi.

There are N hidden blocks of size N* (state dimension N N*). Rows of ``[A, C]``
are uniform on the unit ball of R^{N*+d} and biases are uniform on
``[-(M+1), M+1]``. The readout is block diagonal,
``W = (1/N) (diag(V^(1)), ..., diag(V^(N)))``, where ``V_j^(i)`` is the density
ratio of the representation of the j-th target component at hidden unit (i, j).
Output j is therefore a Monte Carlo average over the N units assigned to it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from . import stats
from .errors import ConfigError
from .geometry import sample_ball
from .representation import ReprDensity, build_repr
from .targets import ContractionTarget, radial_fourier_integral, truncate_target


@dataclass(frozen=True, eq=False)
class JordanEsn:
    """Unit k = i N* + j is hidden unit i of output component j."""

    N: int
    state_dim: int  # N*
    input_dim: int  # d
    A: np.ndarray  # (N N*, N*)
    C: np.ndarray  # (N N*, d)
    zeta: np.ndarray  # (N N*,)
    V: np.ndarray  # (N, N*)
    bound_M: float

    @cached_property
    def W(self) -> np.ndarray:
        Ns = self.state_dim
        W = np.zeros((Ns, self.N * Ns))
        for j in range(Ns):
            W[j, j::Ns] = self.V[:, j]
        return W / self.N

    def step(self, y, z) -> np.ndarray:
        """W relu(A y + C z + zeta) for batched (n, N*) and (n, d) arrays."""
        y = np.atleast_2d(y)
        z = np.atleast_2d(z)
        x = np.maximum(y @ self.A.T + z @ self.C.T + self.zeta, 0.0)
        # block-diagonal readout without materialising W
        return (x.reshape(len(x), self.N, self.state_dim) * self.V[None]).sum(axis=1) / self.N


def _unit_targets(target: ContractionTarget, truncation_radius: float | None):
    out = []
    for j in range(target.state_dim):
        t = target.component_target(j)
        if truncation_radius is not None:
            t = truncate_target(t, truncation_radius)
        out.append(t)
    return out


def component_reprs(target: ContractionTarget, truncation_radius: float | None = None) -> list[ReprDensity]:
    """Representation of each F_j on R^{N*+d} with radius 1 and input radius M+1."""
    return [build_repr(t, 1.0, target.bound_M + 1.0) for t in _unit_targets(target, truncation_radius)]


def build_jordan(target: ContractionTarget, N: int, seed: int = 0, stream: int = 0,
                 truncation_radius: float | None = None) -> JordanEsn:
    if N < 1:
        raise ConfigError("N must be at least 1")
    if target.contraction_r >= 1:
        raise ConfigError("target must be a contraction")
    Ns, d, M = target.state_dim, target.input_dim, target.bound_M
    p = Ns + d
    rng = stats.make_rng(seed, stream)
    U = sample_ball(rng, N * Ns, p, 1.0)
    zeta = rng.uniform(-(M + 1), M + 1, N * Ns)
    V = np.zeros((N, Ns))
    for j, rep in enumerate(component_reprs(target, truncation_radius)):
        # dpi_j / dpi = 2 Vol(B_1) (M+1) pi_j, i.e. the support box volume times pi_j
        V[:, j] = rep.box_volume * rep.eval_pi(U[j::Ns], zeta[j::Ns])
    return JordanEsn(N, Ns, d, U[:, :Ns].copy(), U[:, Ns:].copy(), zeta, V, M)


def run_jordan(j: JordanEsn, z, xi) -> np.ndarray:
    """Outputs (y_{-T}, ..., y_0) for inputs (z_{-T}, ..., z_0), started at ``xi``.

    ``z`` has shape (T+1, d) or (n, T+1, d); the result has shape (..., T+1, N*).
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 2
    if single:
        z = z[None]
    if z.shape[-1] != j.input_dim:
        raise ConfigError("input dimension mismatch")
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != j.state_dim:
        raise ConfigError("initial output dimension mismatch")
    if np.any(np.linalg.norm(np.atleast_2d(xi), axis=1) > j.bound_M * (1 + 1e-12)):
        raise ConfigError("initial output must satisfy |xi| <= M")
    y = np.broadcast_to(xi, (z.shape[0], j.state_dim)).copy()
    out = np.empty(z.shape[:2] + (j.state_dim,))
    for t in range(z.shape[1]):
        y = j.step(y, z[:, t, :])
        out[:, t, :] = y
    return out[0] if single else out


# ---------------------------------------------------------------- risk


@dataclass(frozen=True)
class RiskSpec:
    """Loss ``L(x, y)`` on outputs and labels with its Lipschitz constant.

    ``absolute``: |x - y| (L_L = 1). ``squared_clipped``: min(|x - y|, clip)^2
    (L_L = 2 clip). Labels are ``H(Z) + noise`` with i.i.d. centred Gaussian
    noise of standard deviation ``noise_scale`` per component.
    """

    loss: str = "absolute"
    clip: float = 1.0
    noise_scale: float = 0.01
    T: int | None = None

    def __post_init__(self):
        if self.loss not in ("absolute", "squared_clipped"):
            raise ConfigError(f"unknown loss {self.loss!r}")

    @property
    def lipschitz(self) -> float:
        return 1.0 if self.loss == "absolute" else 2.0 * self.clip

    def __call__(self, x, y) -> np.ndarray:
        e = np.linalg.norm(np.atleast_2d(x) - np.atleast_2d(y), axis=1)
        return e if self.loss == "absolute" else np.minimum(e, self.clip) ** 2


def horizon_for(target: ContractionTarget, tol: float = 1e-6) -> int:
    """Smallest T with r^{T+1} <= tol."""
    r = target.contraction_r
    if r == 0:
        return 0
    return max(int(np.ceil(np.log(tol) / np.log(r))) - 1, 0)


def cstar_feedback(target: ContractionTarget) -> float:
    """16 sqrt(3 ((M+1)^3 + M + 3)(M+1)) sum_j C_{F_j}."""
    M = target.bound_M
    return float(16.0 * np.sqrt(3.0 * ((M + 1) ** 3 + M + 3) * (M + 1)) * target.c_h)


def risk_bound(target: ContractionTarget, N: int, T: int, delta: float, L_L: float = 1.0) -> float:
    """(L_L/delta) [2(M+1) C / ((1-r) sqrt(N)) + 2(M+1) r^{T+1}]."""
    M, r = target.bound_M, target.contraction_r
    return float(L_L / delta * (2 * (M + 1) * cstar_feedback(target) / ((1 - r) * np.sqrt(N))
                                + 2 * (M + 1) * r ** (T + 1)))


def esp_failure_bound(target: ContractionTarget, N: int) -> float:
    """4 C (M+1) / sqrt(N): the allowance for leaving the event in the probability statement."""
    return float(4 * cstar_feedback(target) * (target.bound_M + 1) / np.sqrt(N))


def ball_grid(dim: int, radius: float, size: int) -> np.ndarray:
    """Deterministic points in the closed ball: origin, axis extremes, Halton points.

    The unscrambled Halton sequence fills the cube; points outside the ball are
    dropped until ``size`` points are collected.
    """
    pts = [np.zeros(dim)]
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = radius
        pts += [e, -e]
    need = max(size - len(pts), 0)
    if need:
        h = qmc.Halton(d=dim, scramble=False)
        h.fast_forward(1)  # skip the origin
        got = []
        while len(got) < need:
            c = (2.0 * h.random(4 * need) - 1.0) * radius
            got.extend(c[np.linalg.norm(c, axis=1) <= radius])
        pts += got[:need]
    return np.asarray(pts[: max(size, 1 + 2 * dim)])


@dataclass(frozen=True)
class EspResult:
    probability: float
    sups: np.ndarray = field(repr=False)
    grid_points: int
    n_probes: int


def esp_event_probability(target: ContractionTarget, N: int, T: int, n_trials: int = 50, grid_size: int = 400,
                          seed: int = 0, n_probes: int = 100) -> EspResult:
    """Fraction of builds with sup_{x, t} |W F(x, Z_t)| <= M + 1.

    The supremum over x in B_{M+1} is taken over a deterministic grid plus
    ``n_probes`` uniform random points, so it under-approximates the true sup.
    """
    if n_trials < 30:
        raise ConfigError("n_trials must be at least 30")
    M, Ns, d = target.bound_M, target.state_dim, target.input_dim
    grid = ball_grid(Ns, M + 1, grid_size)
    sups = np.empty(n_trials)
    for k in range(n_trials):
        j = build_jordan(target, N, seed, stats.stream_id(3, N, k))
        rng = stats.make_rng(seed, stats.stream_id(4, N, k))
        X = np.vstack([grid, sample_ball(rng, n_probes, Ns, M + 1)])
        Z = rng.uniform(-M, M, (T + 1, d))
        y = j.step(np.repeat(X, T + 1, axis=0), np.tile(Z, (len(X), 1)))
        sups[k] = np.linalg.norm(y, axis=1).max()
    return EspResult(float(np.mean(sups <= M + 1)), sups, len(grid), n_probes)


def _f_n_values(target: ContractionTarget, pts: np.ndarray, truncation_radius: float | None) -> np.ndarray:
    """Components of F^N = int pi_j^N relu(...) at joint points, via the Fourier form.

    All components share the radial profile of the unit Gaussian up to the
    amplitude, so one radial integral per point suffices.
    """
    base = target.component_target(0)
    a0 = target.amplitude[0]
    p = target.joint_dim
    r_max = np.inf if truncation_radius is None else truncation_radius

    def unit_prof(r):
        return base.g_radial(r) / a0 if a0 != 0 else np.exp(-0.5 * np.asarray(r) ** 2) / (2 * np.pi) ** (p / 2)

    s = np.linalg.norm(pts, axis=1)
    vals = np.array([radial_fourier_integral(unit_prof, p, float(si), r_max, tol=1e-12) for si in s])
    return vals[:, None] * target.amplitude[None, :]


def s_n_estimate(target: ContractionTarget, N: int, T: int, n_grid: int = 40, seed: int = 0,
                 truncation_radius: float | None = None, n_paths: int = 4) -> float:
    """Grid-and-MC estimate of E[max_t sup_x |F^N(x, Z_t) - F(x, Z_t)|].

    ``F^N`` is the function represented by the readout density (constant in N);
    without truncation it equals F and only quadrature error remains. The grid
    sup is a lower bound of the true sup.
    """
    M, Ns, d = target.bound_M, target.state_dim, target.input_dim
    grid = ball_grid(Ns, M + 1, n_grid)
    rng = stats.make_rng(seed, stats.stream_id(5, N))
    vals = []
    for _ in range(n_paths):
        Z = rng.uniform(-M, M, (T + 1, d))
        X = np.repeat(grid, T + 1, axis=0)
        ZZ = np.tile(Z, (len(grid), 1))
        pts = np.hstack([X, ZZ])
        diff = _f_n_values(target, pts, truncation_radius) - target.F(X, ZZ)
        vals.append(np.linalg.norm(diff, axis=1).max())
    return float(np.mean(vals))


def risk_gap(target: ContractionTarget, spec: RiskSpec, N_grid: Sequence[int], n_mc: int = 2000, n_seeds: int = 40,
             seed: int = 0, delta: float = 0.5, esp_trials: int = 50, grid_size: int = 400,
             s_n_grid: int = 40) -> list[dict]:
    """Empirical |R(H_W) - R(H)| per N against the bound at confidence 1 - delta.

    Both risks use the same inputs and labels. Labels are generated from a
    history three times longer than the network's horizon, so the reported gap
    includes the effect of starting the network at -T-1.
    """
    T = horizon_for(target) if spec.T is None else spec.T
    M, Ns, d = target.bound_M, target.state_dim, target.input_dim
    xi = np.zeros(Ns)
    s_n = s_n_estimate(target, 0, T, s_n_grid, seed)
    rows = []
    for N in N_grid:
        gaps = np.empty(n_seeds)
        for s in range(n_seeds):
            j = build_jordan(target, N, seed, stats.stream_id(6, N, s))
            rng = stats.make_rng(seed, stats.stream_id(7, N, s))
            hist = rng.uniform(-M, M, (n_mc, 3 * (T + 1), d))
            h_star = target.run(hist, xi)
            labels = h_star + spec.noise_scale * rng.standard_normal(h_star.shape)
            y_net = run_jordan(j, hist[:, -(T + 1):, :], xi)[:, -1, :]
            gaps[s] = abs(np.mean(spec(y_net, labels)) - np.mean(spec(h_star, labels)))
        med, lo, hi = stats.median_ci(gaps)
        esp = esp_event_probability(target, N, T, esp_trials, grid_size, seed).probability
        rows.append(dict(N=int(N), gap_median=med, gap_lo=lo, gap_hi=hi,
                         bound_delta_half=risk_bound(target, N, T, delta, spec.lipschitz),
                         esp_prob=esp, s_n=s_n, gaps=gaps))
    return rows
