"""Static random ReLU feature networks ``H(z) = W relu(A z + zeta)``.

Hidden weights are sampled, never trained. The readout is either the
importance-sampling oracle built from a :class:`ReprDensity` (unbiased for the
target) or a ridge regression fit on data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import linalg

from . import stats
from .errors import ConfigError, NonConvergenceError, SingularSystemError, SupportMismatchError
from .geometry import sample_ball, vol_ball
from .representation import ReprDensity, build_repr
from .targets import FourierTarget

# ---------------------------------------------------------------- samplers


@dataclass(frozen=True)
class UniformBallSampler:
    """Rows uniform on B_R in R^q, biases uniform on [-max(MR,1), max(MR,1)]."""

    R: float
    q: int
    M: float

    def __post_init__(self):
        if not (self.R > 0 and self.q >= 1 and self.M > 0):
            raise ConfigError("UniformBallSampler needs R > 0, q >= 1, M > 0")

    @property
    def u_bound(self) -> float:
        return max(self.M * self.R, 1.0)

    def sample(self, rng: np.random.Generator, N: int):
        A = sample_ball(rng, N, self.q, self.R)
        zeta = rng.uniform(-self.u_bound, self.u_bound, N)
        return A, zeta


@dataclass(frozen=True)
class SparseSampler:
    """Rows with K ~ level_probs nonzero coordinates at uniformly chosen positions.

    The nonzero block of a row with K = k is uniform on B_R in R^k.
    """

    R: float
    q: int
    M: float
    level_probs: tuple[float, ...]

    def __post_init__(self):
        p = np.asarray(self.level_probs, dtype=float)
        if p.size != self.q or np.any(p < 0) or not np.isclose(p.sum(), 1.0):
            raise ConfigError("level_probs must be a probability vector of length q")
        if not (self.R > 0 and self.M > 0):
            raise ConfigError("SparseSampler needs R > 0 and M > 0")

    @property
    def u_bound(self) -> float:
        return max(self.M * self.R, 1.0)

    def sample(self, rng: np.random.Generator, N: int):
        p = np.asarray(self.level_probs, dtype=float)
        K = rng.choice(np.arange(1, self.q + 1), size=N, p=p / p.sum())
        # a random permutation per row; its first K entries are the active coordinates
        order = np.argsort(rng.random((N, self.q)), axis=1)
        A = np.zeros((N, self.q))
        for k in range(1, self.q + 1):
            rows = np.flatnonzero(K == k)
            if rows.size == 0:
                continue
            block = sample_ball(rng, rows.size, k, self.R)
            A[rows[:, None], order[rows, :k]] = block
        zeta = rng.uniform(-self.u_bound, self.u_bound, N)
        return A, zeta


@dataclass(frozen=True, eq=False)
class GeneralProductSampler:
    """Product law pi_X (x) pi_R given by samplers and densities.

    ``u_required`` is the half-width on which pi_R must be positive so that
    ``F_pi(x) = 2 int_{-x}^0 du / pi_R(u)`` is finite for ``|x| <= u_required``.
    """

    q: int
    sample_x: Callable[[np.random.Generator, int], np.ndarray]
    density_x: Callable[[np.ndarray], np.ndarray]
    sample_u: Callable[[np.random.Generator, int], np.ndarray]
    density_u: Callable[[np.ndarray], np.ndarray]
    u_required: float = 1.0

    def __post_init__(self):
        grid = np.linspace(-self.u_required, self.u_required, 2001)
        if np.any(~(np.asarray(self.density_u(grid)) > 0)):
            raise ConfigError("pi_R must be positive on the required range")

    def F_pi(self, x: float) -> float:
        if abs(x) > self.u_required * (1 + 1e-12):
            raise NonConvergenceError("F_pi requested outside the range where pi_R is positive")
        val = stats.quad_1d(lambda u: 1.0 / float(self.density_u(np.array([u]))[0]), -abs(x), 0.0)
        return float(2.0 * val * np.sign(x))

    def sample(self, rng: np.random.Generator, N: int):
        return np.asarray(self.sample_x(rng, N), dtype=float).reshape(N, self.q), np.asarray(self.sample_u(rng, N), dtype=float)


def uniform_product_sampler(R: float, q: int, M: float) -> GeneralProductSampler:
    """The uniform ball/box law written as a GeneralProductSampler."""
    c = max(M * R, 1.0)
    vol = vol_ball(q, R)
    return GeneralProductSampler(
        q,
        lambda rng, n: sample_ball(rng, n, q, R),
        lambda w: np.where(np.linalg.norm(np.atleast_2d(w), axis=1) <= R, 1.0 / vol, 0.0),
        lambda rng, n: rng.uniform(-c, c, n),
        lambda u: np.where(np.abs(u) <= c, 0.5 / c, 0.0),
        u_required=c,
    )


def sample_hidden(sampler, N: int, seed: int | np.random.Generator, stream: int = 0):
    """Draw N i.i.d. hidden rows and biases; reproducible from (seed, stream)."""
    if N < 1:
        raise ConfigError("N must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else stats.make_rng(seed, stream)
    return sampler.sample(rng, int(N))


# ---------------------------------------------------------------- network


@dataclass(frozen=True)
class RandomFeatureNet:
    A: np.ndarray
    zeta: np.ndarray
    W: np.ndarray

    def features(self, z) -> np.ndarray:
        """relu(A z + zeta) for inputs of shape (n, q); returns (n, N)."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return np.maximum(z @ self.A.T + self.zeta, 0.0)

    def forward(self, z) -> np.ndarray:
        """W relu(A z + zeta); shape (n, m) for batched input, (m,) for one point."""
        zz = np.asarray(z, dtype=float)
        out = self.features(zz) @ np.atleast_2d(self.W).T
        return out[0] if zz.ndim == 1 else out


def oracle_readout(r: ReprDensity, A, zeta, sampler=None) -> np.ndarray:
    """Importance-sampling readout, shape (1, N).

    For the uniform law, ``W_i = 2 max(MR,1) Vol_q(B_R) pi(A_i, zeta_i) / N``. For a
    GeneralProductSampler the density ratio ``pi / (p_X p_R)`` is used.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    zeta = np.asarray(zeta, dtype=float).reshape(-1)
    N = A.shape[0]
    if isinstance(sampler, SparseSampler):
        raise ConfigError("no oracle readout is defined for the sparse sampler")
    if isinstance(sampler, GeneralProductSampler):
        dens = np.asarray(sampler.density_x(A)) * np.asarray(sampler.density_u(zeta))
        pi = r.eval_pi(A, zeta)
        ratio = np.divide(pi, dens, out=np.zeros(N), where=dens > 0)
        if np.any((dens <= 0) & (pi != 0)):
            raise SupportMismatchError("pi has mass where the sampling law has none")
        return (ratio / N)[None, :]
    if sampler is not None and (not np.isclose(sampler.R, r.R) or not np.isclose(sampler.u_bound, r.u_bound)):
        raise SupportMismatchError("sampler support does not match the density's box")
    tol = 1 + 1e-12
    if np.any(np.linalg.norm(A, axis=1) > r.R * tol) or np.any(np.abs(zeta) > r.u_bound * tol):
        raise SupportMismatchError("hidden weights outside B_R x [-max(MR,1), max(MR,1)]")
    V = r.box_volume * r.eval_pi(A, zeta)
    return (V / N)[None, :]


def ridge_readout(features, labels, ridge_lambda: float, fallback_floor: float | None = None,
                  rtol: float = 1e-10) -> np.ndarray:
    """Minimise ``sum_j |W phi_j - y_j|^2 + lambda |W|_F^2`` via Cholesky.

    ``features`` is (N, n), ``labels`` is (m, n); returns W of shape (m, N).
    Raises SingularSystemError when the normal equations cannot be solved to
    relative residual ``rtol`` (a retry with ``fallback_floor`` is attempted if given).
    """
    Phi = np.atleast_2d(np.asarray(features, dtype=float))
    Y = np.atleast_2d(np.asarray(labels, dtype=float))
    if Phi.shape[1] != Y.shape[1] or Phi.shape[1] < 1:
        raise ConfigError("features and labels need the same positive number of samples")
    if ridge_lambda < 0:
        raise ConfigError("ridge_lambda must be nonnegative")
    G = Phi @ Phi.T
    B = Phi @ Y.T
    bnorm = np.linalg.norm(B)
    if bnorm == 0:
        return np.zeros((Y.shape[0], Phi.shape[0]))
    try:
        return _solve_normal(G, B, ridge_lambda, bnorm, rtol).T
    except SingularSystemError:
        if fallback_floor is None or ridge_lambda >= fallback_floor:
            raise
        return _solve_normal(G, B, fallback_floor, bnorm, rtol).T


def _solve_normal(G, B, lam, bnorm, rtol):
    Gl = G + lam * np.eye(G.shape[0])
    try:
        cf = linalg.cho_factor(Gl, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise SingularSystemError("Gram matrix is not positive definite") from exc
    X = linalg.cho_solve(cf, B, check_finite=False)
    for _ in range(3):
        res = B - Gl @ X
        if np.linalg.norm(res) <= rtol * bnorm:
            return X
        X = X + linalg.cho_solve(cf, res, check_finite=False)
    if np.linalg.norm(B - Gl @ X) > rtol * bnorm:
        raise SingularSystemError("normal equations solved only to relative residual "
                                  f"{np.linalg.norm(B - Gl @ X) / bnorm:.2e}")
    return X


# ---------------------------------------------------------------- constants


def _prefactor(M: float, R: float, q: int) -> float:
    return 16.0 * max(M * R, 1.0) * vol_ball(q, R) * (M + 1) ** 2 * (M**3 + M + 2)


def cstar_uniform(t: FourierTarget, M: float, R: float, q: int | None = None) -> float:
    """Variance constant for the uniform-ball sampler and the folded density."""
    q = t.dim_q if q is None else q
    if t.is_zero:
        return 0.0
    mo = t.moments
    inside = mo.weighted_l2(3, R, "inside")
    outside = mo.weighted_l2(2 * q + 5, R, "outside") / R ** (2 * q + 2)
    return _prefactor(M, R, q) * (inside + outside)


def cstar_R(t: FourierTarget, M: float, R: float) -> float:
    """Variance constant when the density is truncated to B_R (inside integral only)."""
    if t.is_zero:
        return 0.0
    return _prefactor(M, R, t.dim_q) * t.moments.weighted_l2(3, R, "inside")


def truncated_bound(t: FourierTarget, M: float, R: float, N: int) -> float:
    """sqrt(C_R / N) + int_{|w| > R} |g|: the root-MSE bound for truncated densities."""
    return float(np.sqrt(cstar_R(t, M, R) / N) + t.moments.tail_mass(R))


def uniform_F_pi(c: float) -> Callable[[float], float]:
    """F_pi for pi_R uniform on [-c, c]: 2 int_{-x}^0 2c du = 4 c x."""
    return lambda x: 4.0 * c * x


def cstar_general(F_pi: Callable[[float], float], g_ratio: Callable[[np.ndarray], np.ndarray], M: float,
                  sample_x: Callable[[np.random.Generator, int], np.ndarray], n_samples: int = 1 << 18,
                  seed: int = 0) -> float:
    """``M^2 E[F_pi(M|X|) |X|^2 g(X)^2] + 8 M^2 (F_pi(1) - F_pi(-1)) E[max(|X|^2, 1) g(X)^2]``, X ~ pi_X.

    Expectations are Monte Carlo averages over ``n_samples`` draws of pi_X.
    """
    span = F_pi(1.0) - F_pi(-1.0)
    if not np.isfinite(span):
        raise NonConvergenceError("F_pi diverges on [-1, 1]")
    rng = stats.make_rng(seed, 7)
    X = np.atleast_2d(np.asarray(sample_x(rng, n_samples), dtype=float))
    r = np.linalg.norm(X, axis=1)
    g2 = np.abs(np.asarray(g_ratio(X))) ** 2
    if not np.any(g2):
        return 0.0
    Fv = np.array([F_pi(M * ri) for ri in r]) if n_samples <= 4096 else F_pi(M * r)
    if not np.all(np.isfinite(Fv)):
        raise NonConvergenceError("F_pi diverges on the support of pi_X")
    t1 = np.mean(Fv * r * r * g2)
    t2 = np.mean(np.maximum(r * r, 1.0) * g2)
    return float(M**2 * t1 + 8.0 * M**2 * span * t2)


# ---------------------------------------------------------------- schedules


def schedule_R(N: int, mode: str, q: int, k: float = 1.0, C: float = 1.0) -> float:
    """Truncation radius: ``N^{1/(2k+q+1)}`` (poly) or ``(log sqrt(N) / C)^{1/k}`` (exp)."""
    if N < 2 or k < 1 or C <= 0:
        raise ConfigError("need N >= 2, k >= 1, C > 0")
    if mode == "poly":
        return float(N ** (1.0 / (2 * k + q + 1)))
    if mode == "exp":
        return float((np.log(np.sqrt(N)) / C) ** (1.0 / k))
    raise ConfigError(f"unknown schedule mode {mode!r}")


def predicted_exponent(q: int, k: float) -> float:
    """Root-MSE decay exponent 1 / (2 + (q+1)/k) of the polynomial schedule."""
    return 1.0 / (2.0 + (q + 1) / k)


# ---------------------------------------------------------------- experiments


def default_input_sampler(q: int, M: float):
    """i.i.d. uniform coordinates on [-M/sqrt(q), M/sqrt(q)], so |z| <= M."""
    h = M / np.sqrt(q)
    return lambda rng, n: rng.uniform(-h, h, (n, q))


def mse_vs_N(t: FourierTarget, R: float, N_grid: Sequence[int], n_test: int = 1000, n_seeds: int = 40,
             seed: int = 0, M: float | None = None, readouts: Sequence[str] = ("oracle",),
             n_train: int = 4096, ridge_lambda: float = 1e-6, input_sampler=None) -> list[dict]:
    """Empirical MSE of oracle and/or ridge readouts as a function of N.

    Each (N, seed index) pair uses its own RNG stream for hidden weights, test
    and training inputs. Returns one row per (N, readout kind).
    """
    M = t.bound_M if M is None else M
    q = t.dim_q
    rep = build_repr(t, R, M)
    sampler = UniformBallSampler(R, q, M)
    draw_z = input_sampler or default_input_sampler(q, M)
    cstar = cstar_uniform(t, M, R)
    tail = t.moments.tail_mass(R) if not t.is_zero else 0.0
    rows = []
    for N in N_grid:
        if N < 1:
            raise ConfigError("N must be positive")
        errs = {k: [] for k in readouts}
        for s in range(n_seeds):
            rng = stats.make_rng(seed, stats.stream_id(1, N, s))
            A, zeta = sampler.sample(rng, N)
            z = draw_z(rng, n_test)
            y = t.eval_f(z)
            net = RandomFeatureNet(A, zeta, oracle_readout(rep, A, zeta, sampler))
            if "oracle" in errs:
                errs["oracle"].append(np.mean((net.forward(z)[:, 0] - y) ** 2))
            if "ridge" in errs:
                ztr = draw_z(rng, n_train)
                Phi = net.features(ztr).T
                W = ridge_readout(Phi, t.eval_f(ztr)[None, :], ridge_lambda, fallback_floor=1e-12)
                errs["ridge"].append(np.mean((net.features(z) @ W[0] - y) ** 2))
        for kind in readouts:
            e = np.asarray(errs[kind])
            est = stats.summarize(e) if e.size > 1 else stats.EstimateCI(float(e[0]), 0.0, 1, float(e[0]), float(e[0]))
            rows.append(dict(N=int(N), readout_kind=kind, mse_mean=est.mean, mse_lo=est.lo, mse_hi=est.hi,
                             cstar_over_N=cstar / N, truncation_bound=tail, seed_count=int(n_seeds)))
    return rows


@dataclass(frozen=True)
class WorkflowResult:
    R: float
    N: int
    rho: float
    tail_mass: float
    cstar_R: float
    threshold: float


def universal_workflow(t: FourierTarget, eps: float, delta: float, M: float | None = None) -> WorkflowResult:
    """Pick R with tail mass below eps sqrt(delta)/4, then N with sqrt(C_R/N) below it."""
    if not eps > 0 or not 0 < delta < 1:
        raise ConfigError("need eps > 0 and delta in (0, 1)")
    M = t.bound_M if M is None else M
    thr = eps * np.sqrt(delta) / 4.0
    mo = t.moments

    def tail(R):
        return 0.0 if t.is_zero else mo.tail_mass(R)

    R = 1.0
    if tail(R) >= thr:
        hi = R
        while tail(hi) >= thr:
            hi *= 2.0
            if hi > 1e8:
                raise NonConvergenceError("tail mass does not fall below the threshold")
        lo = hi / 2.0
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if tail(mid) < thr:
                hi = mid
            else:
                lo = mid
        R = hi
    c = cstar_R(t, M, R)
    N = 1 if c == 0 else int(np.floor(c / thr**2)) + 1
    return WorkflowResult(float(R), max(N, 1), max(M * R, 1.0), tail(R), c, thr)
