"""Shift-register reservoirs and the echo state network built on top of them.

A shift reservoir with gain rho stores the last T+1 inputs:

    x_t = S x_{t-1} + c z_t,   x_t = (z_t, rho z_{t-1}, ..., rho^T z_{t-T})

after T+1 steps, whatever the initial state, because S^{T+1} = 0.

The echo state network realises ``y_t = w . relu(a x_t + b)`` with a single
ReLU recursion ``X_t = relu(A X_{t-1} + C z_t + zeta)`` of dimension
2(q + N). The state is the stacked pair ``(relu(Xb_t), relu(-Xb_t))`` of the
linear vector ``Xb_t = (x_t, a x_t + b)``, so ``relu(v) - relu(-v) = v``
recovers the linear reservoir inside a purely ReLU system.

Input sequences are chronological: ``z[..., 0, :]`` is the oldest entry.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import stats
from .errors import ConfigError, InsufficientWarmupError
from .geometry import vol_ball, vol_ball_bound  # noqa: F401  (re-exported)
from .ranfeat import RandomFeatureNet, UniformBallSampler, oracle_readout
from .representation import build_repr
from .targets import FourierTarget, GaussianFunctionalTarget, make_gaussian_bump, truncate_target


@dataclass(frozen=True)
class ShiftReservoir:
    d: int
    T: int
    rho: float

    @property
    def q(self) -> int:
        return self.d * (self.T + 1)

    @cached_property
    def S(self) -> np.ndarray:
        q, d = self.q, self.d
        S = np.zeros((q, q))
        S[d:, : q - d] = self.rho * np.eye(q - d)
        return S

    @cached_property
    def c(self) -> np.ndarray:
        c = np.zeros((self.q, self.d))
        c[: self.d] = np.eye(self.d)
        return c

    @cached_property
    def K(self) -> np.ndarray:
        """(c, S c, ..., S^T c); block diagonal with blocks rho^i I_d."""
        cols, v = [], self.c
        for _ in range(self.T + 1):
            cols.append(v)
            v = self.S @ v
        return np.hstack(cols)

    def lag_vector(self, z_chrono) -> np.ndarray:
        """Flushed state (z_t, rho z_{t-1}, ..., rho^T z_{t-T}) from the last T+1 inputs."""
        z = np.asarray(z_chrono, dtype=float)
        last = z[..., -(self.T + 1):, :][..., ::-1, :]
        scale = self.rho ** np.arange(self.T + 1)
        return (last * scale[:, None]).reshape(*z.shape[:-2], self.q)


def build_shift(d: int, T: int, rho: float = 1.0) -> ShiftReservoir:
    if d < 1 or T < 0:
        raise ConfigError("need d >= 1 and T >= 0")
    if not 0 < rho <= 1:
        raise ConfigError("rho must lie in (0, 1]")
    r = ShiftReservoir(int(d), int(T), float(rho))
    if np.any(np.diag(r.K) == 0):
        raise ConfigError("K is singular")
    return r


def _as_sequence(z, d):
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.shape[-1] != d:
        raise ConfigError(f"inputs must have trailing dimension d={d}")
    return z


def run_linear(r: ShiftReservoir, z, x_init=None) -> np.ndarray:
    """States of ``x_t = S x_{t-1} + c z_t``; shape (..., L, q) for inputs (..., L, d)."""
    z = _as_sequence(z, r.d)
    batch = z.shape[:-2]
    x = np.zeros(batch + (r.q,)) if x_init is None else np.broadcast_to(np.asarray(x_init, float), batch + (r.q,)).copy()
    if x.shape[-1] != r.q:
        raise ConfigError("x_init has the wrong dimension")
    out = np.empty(batch + (z.shape[-2], r.q))
    ST, cT = r.S.T, r.c.T
    for t in range(z.shape[-2]):
        x = x @ ST + z[..., t, :] @ cT
        out[..., t, :] = x
    return out


def linres_functional(r: ShiftReservoir, net: RandomFeatureNet, z, x_init=None) -> np.ndarray:
    """Output ``W relu(A x_0 + zeta)`` at the final time of the input sequence(s)."""
    z = _as_sequence(z, r.d)
    if z.shape[-2] < r.T + 1:
        raise InsufficientWarmupError(f"need at least T+1 = {r.T + 1} inputs to flush the initial state")
    x0 = run_linear(r, z, x_init)[..., -1, :]
    y = net.forward(x0.reshape(-1, r.q))
    return y.reshape(x0.shape[:-1] + (y.shape[-1],))[..., 0]


# ---------------------------------------------------------------- ESN


@dataclass(frozen=True, eq=False)
class EsnSystem:
    """Doubled ReLU system for a shift reservoir with a random feature readout.

    Hidden rows ``a`` (N x q), biases ``b`` (N,) and readout ``w`` (N,).
    """

    shift: ShiftReservoir
    a: np.ndarray
    b: np.ndarray
    w: np.ndarray

    @property
    def N(self) -> int:
        return self.a.shape[0]

    @property
    def q(self) -> int:
        return self.shift.q

    @property
    def state_dim(self) -> int:
        return 2 * (self.N + self.q)

    @cached_property
    def A_bar(self) -> np.ndarray:
        q, N = self.q, self.N
        Ab = np.zeros((q + N, q + N))
        Ab[:q, :q] = self.shift.S
        Ab[q:, :q] = self.a @ self.shift.S
        return Ab

    @cached_property
    def C_bar(self) -> np.ndarray:
        return np.vstack([self.shift.c, self.a @ self.shift.c])

    @cached_property
    def zeta_bar(self) -> np.ndarray:
        return np.concatenate([np.zeros(self.q), self.b])

    @cached_property
    def A(self) -> np.ndarray:
        Ab = self.A_bar
        return np.block([[Ab, -Ab], [-Ab, Ab]])

    @cached_property
    def C(self) -> np.ndarray:
        return np.vstack([self.C_bar, -self.C_bar])

    @cached_property
    def zeta(self) -> np.ndarray:
        return np.concatenate([self.zeta_bar, -self.zeta_bar])

    @cached_property
    def W(self) -> np.ndarray:
        W = np.zeros((1, self.state_dim))
        W[0, self.q: self.q + self.N] = self.w
        return W

    @property
    def readout_net(self) -> RandomFeatureNet:
        return RandomFeatureNet(self.a, self.b, self.w[None, :])

    def linear_init(self, X0) -> np.ndarray:
        """Shift-reservoir state equivalent to the ESN state X0 after one step."""
        X0 = np.asarray(X0, dtype=float)
        h = self.q + self.N
        return X0[..., : self.q] - X0[..., h: h + self.q]


def assemble_esn(shift: ShiftReservoir, a, b, w) -> EsnSystem:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    w = np.asarray(w, dtype=float).reshape(-1)
    if a.shape[1] != shift.q or a.shape[0] != b.size or b.size != w.size:
        raise ConfigError("inconsistent readout network shapes")
    return EsnSystem(shift, a, b, w)


def build_esn(d: int, T: int, N: int, R: float, M_T: float | None = None, seed: int = 0, *, M: float = 1.0,
              rho: float = 1.0, target: FourierTarget | None = None, stream: int = 0) -> EsnSystem:
    """Sample hidden rows uniformly on B_R and biases on [-max(M_T R, 1), max(M_T R, 1)].

    The readout ``w`` is the importance-sampling oracle for ``target`` (default:
    the Gaussian bump on R^q) with input radius ``M_T`` (default sqrt(T+1) M).
    """
    if N < 1 or R <= 0:
        raise ConfigError("need N >= 1 and R > 0")
    shift = build_shift(d, T, rho)
    q = shift.q
    M_T = np.sqrt(T + 1) * M if M_T is None else float(M_T)
    if target is None:
        target = make_gaussian_bump(q, M_T)
    if target.dim_q != q:
        raise ConfigError("readout target must live on R^{d(T+1)}")
    sampler = UniformBallSampler(R, q, M_T)
    rng = stats.make_rng(seed, stream)
    a, b = sampler.sample(rng, N)
    rep = build_repr(target, R, M_T)
    w = oracle_readout(rep, a, b, sampler)[0]
    return EsnSystem(shift, a, b, w)


def run_esn(e: EsnSystem, z, x_init=None) -> tuple[np.ndarray, np.ndarray]:
    """Iterate ``X_t = relu(A X_{t-1} + C z_t + zeta)``; returns (states, outputs W X_t)."""
    z = _as_sequence(z, e.shift.d)
    batch = z.shape[:-2]
    n = e.state_dim
    X = np.zeros(batch + (n,)) if x_init is None else np.broadcast_to(np.asarray(x_init, float), batch + (n,)).copy()
    if X.shape[-1] != n:
        raise ConfigError("x_init has the wrong dimension")
    states = np.empty(batch + (z.shape[-2], n))
    AT, CT, zeta = e.A.T, e.C.T, e.zeta
    for t in range(z.shape[-2]):
        X = np.maximum(X @ AT + z[..., t, :] @ CT + zeta, 0.0)
        states[..., t, :] = X
    outputs = states @ e.W[0]
    return states, outputs


def stacked_linear_states(e: EsnSystem, z, x_lin_init=None) -> np.ndarray:
    """(relu(Xb_t), relu(-Xb_t)) with Xb_t = (x_t, a x_t + b) from the linear reservoir."""
    x = run_linear(e.shift, z, x_lin_init)
    Xb = np.concatenate([x, x @ e.a.T + e.b], axis=-1)
    return np.concatenate([np.maximum(Xb, 0.0), np.maximum(-Xb, 0.0)], axis=-1)


# ---------------------------------------------------------------- Gaussian functional rate


def check_rate_hypothesis(lam: float, alpha: float, beta: float) -> None:
    if not 0 < lam < 1:
        raise ConfigError("lam must lie in (0, 1)")
    if not beta > alpha > 0:
        raise ConfigError("rate hypothesis violated: need beta > alpha > 0")
    if not 1 > 0.5 * alpha * (1 - np.log(2) + np.log(beta / alpha)):
        raise ConfigError("rate hypothesis violated: need 1 > (alpha/2)(1 - log 2 + log(beta/alpha))")


def rate_gamma(lam: float, alpha: float, beta: float) -> float:
    """Decay exponent: half the minimum of the memory, tail and variance exponents."""
    lr = np.log(beta / alpha)
    return 0.5 * min(alpha * np.log(1 / lam), beta / 2 - alpha / 2 * (1 + lr), 1 - alpha / 2 * (1 - np.log(2) + lr))


def rate_p(N: float, alpha: float, beta: float, lam: float, M: float, L: float | None = None) -> float:
    """Polylogarithmic prefactor of the Gaussian-functional rate bound."""
    L = M if L is None else L
    ls = np.log(np.sqrt(N))
    return 2**8 / np.pi * M**7 * alpha**3 * beta**4 * ls**7 + 1 + L * M / (1 - lam)


def chi_square_tail_bound(R: float, dof: int) -> float:
    """Chernoff bound (R^2/k e^{1 - R^2/k})^{k/2} on P(chi^2_k > R^2), valid for R^2 > k."""
    x = R * R / dof
    return float((x * np.exp(1 - x)) ** (dof / 2))


def rate_schedule(N: int, alpha: float, beta: float) -> tuple[int, float]:
    """T with T+1 = ceil(alpha log sqrt(N)) and R = beta log sqrt(N)."""
    ls = np.log(np.sqrt(N))
    return max(int(np.ceil(alpha * ls)) - 1, 0), float(beta * ls)


def gaussian_esn_experiment(lam: float, alpha: float, beta: float, N_grid: Sequence[int], n_test: int = 500,
                            n_seeds: int = 30, seed: int = 0, M: float = 1.0, n_lags: int = 64) -> list[dict]:
    """Root-MSE of the shift-reservoir ESN for the Gaussian functional.

    For each N the reservoir gain is sqrt(lam), so the readout target is the
    standard Gaussian bump on R^{T+1} with input radius sqrt(T+1) M. The readout
    density is built from that bump's Fourier density truncated to B_R. The
    network is evaluated through its linear-reservoir form, which
    :func:`run_esn` reproduces exactly, so that the 2(q+N) square matrix is never
    formed. Labels use ``n_lags`` lags of the infinite-memory functional.
    """
    check_rate_hypothesis(lam, alpha, beta)
    gamma = rate_gamma(lam, alpha, beta)
    fn = GaussianFunctionalTarget(lam, M)
    rows = []
    for N in N_grid:
        if N < 2:
            raise ConfigError("N must be at least 2")
        T, R = rate_schedule(N, alpha, beta)
        if T + 1 > n_lags:
            raise ConfigError("n_lags must exceed T")
        shift = build_shift(1, T, np.sqrt(lam))
        q = shift.q
        M_T = np.sqrt(q) * M
        G = truncate_target(fn.readout_target(T, shift.rho), R)
        rep = build_repr(G, R, M_T)
        sampler = UniformBallSampler(R, q, M_T)
        rmse = []
        for s in range(n_seeds):
            rng = stats.make_rng(seed, stats.stream_id(2, N, s))
            a, b = sampler.sample(rng, N)
            net = RandomFeatureNet(a, b, oracle_readout(rep, a, b, sampler))
            z = rng.uniform(-M, M, (n_test, n_lags, 1))
            y = linres_functional(shift, net, z)
            h = fn.evaluate(z[:, ::-1, 0])
            rmse.append(np.sqrt(np.mean((y - h) ** 2)))
        est = stats.summarize(rmse)
        med, mlo, mhi = stats.median_ci(rmse)
        rows.append(dict(N=int(N), T=T, R=R, rmse_mean=est.mean, rmse_lo=est.lo, rmse_hi=est.hi,
                         bound_pN_over_Ngamma=rate_p(N, alpha, beta, lam, M) / N**gamma, gamma=gamma,
                         rmse_median=med, rmse_median_lo=mlo, rmse_median_hi=mhi))
    return rows
