import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randres import stats
from randres.errors import ConfigError, InsufficientWarmupError
from randres.reservoir import (
    build_esn,
    build_shift,
    check_rate_hypothesis,
    chi_square_tail_bound,
    gaussian_esn_experiment,
    linres_functional,
    rate_gamma,
    rate_p,
    rate_schedule,
    run_esn,
    run_linear,
    stacked_linear_states,
)
from randres.targets import GaussianFunctionalTarget

# half the minimum of (0.34657, 0.40343, 0.57671), mpmath
GAMMA_DEFAULT = 0.17328679513998633


def test_shift_structure():
    r = build_shift(1, 2, 1.0)
    np.testing.assert_array_equal(r.K, np.eye(3))
    for rho in (0.3, 1.0):
        S = build_shift(1, 2, rho).S
        np.testing.assert_array_equal(np.linalg.matrix_power(S, 3), 0.0)
    r = build_shift(2, 1, 0.5)
    np.testing.assert_array_equal(r.S @ r.c, 0.5 * np.vstack([np.zeros((2, 2)), np.eye(2)]))


def test_shift_validation():
    with pytest.raises(ConfigError):
        build_shift(1, 2, 0.0)
    with pytest.raises(ConfigError):
        build_shift(1, 2, 1.5)


def test_linear_run_semantics():
    r = build_shift(1, 2, 1.0)
    np.testing.assert_array_equal(run_linear(r, np.zeros((5, 1))), 0.0)
    np.testing.assert_array_equal(run_linear(r, [0.0, 1.0, 2.0, 3.0])[-1], [3.0, 2.0, 1.0])


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(0, 4), st.floats(0.1, 1.0), st.integers(0, 2**32 - 1))
def test_linear_flush_matches_unrolled(d, T, rho, seed):
    r = build_shift(d, T, rho)
    rng = stats.make_rng(seed)
    z = rng.uniform(-1, 1, (T + 1, d))
    x_rand = run_linear(r, z, rng.normal(size=r.q))[-1]
    x_zero = run_linear(r, z)[-1]
    np.testing.assert_array_equal(x_rand, x_zero)
    unrolled = sum(np.linalg.matrix_power(r.S, i) @ r.c @ z[T - i] for i in range(T + 1))
    np.testing.assert_allclose(x_zero, unrolled, rtol=1e-14, atol=1e-15)
    np.testing.assert_allclose(x_zero, r.lag_vector(z), rtol=1e-14, atol=1e-15)


def test_warmup_required():
    e = build_esn(1, 3, 4, 2.0)
    with pytest.raises(InsufficientWarmupError):
        linres_functional(e.shift, e.readout_net, np.zeros((3, 1)))


def test_esn_shapes_and_blocks():
    e = build_esn(1, 2, 4, 2.0)
    assert e.A.shape == (14, 14)
    h = e.state_dim // 2
    np.testing.assert_array_equal(e.A[:h, h:], -e.A_bar)
    np.testing.assert_array_equal(e.A[h:, :h], -e.A_bar)


def test_hidden_rows_in_ball():
    norms = [np.linalg.norm(build_esn(1, 1, 8, 1.5, seed=0, stream=k).a, axis=1).max() for k in range(1000)]
    assert max(norms) <= 1.5


def test_esn_zero_input_zero_state():
    e = build_esn(1, 2, 4, 2.0)
    e0 = type(e)(e.shift, e.a, np.zeros_like(e.b), e.w)
    states, out = run_esn(e0, np.zeros((6, 1)))
    np.testing.assert_array_equal(states, 0.0)
    np.testing.assert_array_equal(out, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 4), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_esn_equivalence_and_flush(T, N, seed):
    e = build_esn(1, T, N, 2.0, seed=seed)
    rng = stats.make_rng(seed, 1)
    z = rng.uniform(-1, 1, (T + 6, 1))
    X0, X1 = rng.normal(size=(2, e.state_dim))
    s0, o0 = run_esn(e, z, X0)
    s1, _ = run_esn(e, z, X1)
    stacked = stacked_linear_states(e, z, e.linear_init(X0))
    np.testing.assert_allclose(s0, stacked, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(s0[T + 1:], s1[T + 1:])
    y_lin = [linres_functional(e.shift, e.readout_net, z[: t + 1], e.linear_init(X0)) for t in range(T, len(z))]
    np.testing.assert_allclose(o0[T:], y_lin, rtol=0, atol=1e-12)


def test_lag_norm_bound():
    r = build_shift(1, 4, 1.0)
    z = stats.make_rng(3).uniform(-1, 1, (1000, 5, 1))
    assert np.linalg.norm(run_linear(r, z)[:, -1], axis=1).max() <= np.sqrt(5)


def test_unbiased_functional_readout():
    lam, T, R = 0.5, 1, 4.0
    fn = GaussianFunctionalTarget(lam)
    rho = np.sqrt(lam)
    target = fn.readout_target(T, rho)
    z = np.array([[0.7], [-0.4]])
    ys = []
    for k in range(400):
        e = build_esn(1, T, 64, R, seed=1, rho=rho, target=target, stream=k)
        ys.append(linres_functional(e.shift, e.readout_net, z))
    est = stats.summarize(ys)
    assert abs(est.mean - fn.evaluate(z[::-1, 0])) <= 4 * est.stderr


def test_rate_constants():
    np.testing.assert_allclose(rate_gamma(0.5, 0.5, 2.0), GAMMA_DEFAULT, rtol=1e-13)
    np.testing.assert_allclose(chi_square_tail_bound(2.0 * np.sqrt(2.0), 2), 4 * np.exp(-3), rtol=1e-14)
    T, R = rate_schedule(np.exp(8), 0.5, 2.0)
    assert T == 1 and R == pytest.approx(8.0)
    assert rate_p(1024, 0.5, 2.0, 0.5, 1.0) > 1


def test_rate_hypothesis():
    with pytest.raises(ConfigError, match="beta > alpha"):
        check_rate_hypothesis(0.5, 2.0, 0.5)
    check_rate_hypothesis(0.5, 0.5, 2.0)


def test_experiment_rows():
    rows = gaussian_esn_experiment(0.5, 0.5, 2.0, [64], n_test=50, n_seeds=3)
    r = rows[0]
    assert r["T"] == 1 and r["R"] == pytest.approx(2 * np.log(8))
    assert r["rmse_mean"] <= r["bound_pN_over_Ngamma"]
    assert r["gamma"] == pytest.approx(GAMMA_DEFAULT)
