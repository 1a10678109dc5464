import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randres import stats
from randres.errors import ConfigError, SingularSystemError, SupportMismatchError
from randres.geometry import vol_ball
from randres.ranfeat import (
    RandomFeatureNet,
    SparseSampler,
    UniformBallSampler,
    cstar_general,
    cstar_R,
    cstar_uniform,
    mse_vs_N,
    oracle_readout,
    predicted_exponent,
    ridge_readout,
    sample_hidden,
    schedule_R,
    uniform_F_pi,
    uniform_product_sampler,
    universal_workflow,
)
from randres.representation import build_repr
from randres.targets import make_gaussian_bump, make_zero_target

# mpmath quadrature of 16*5*Vol(B_5)*4*4 * (inside [+ outside]) integrals
CSTAR_UNIFORM_Q1_R5 = 4541.710947436064
CSTAR_R_Q1_R5 = 4541.710946636818


@pytest.fixture(scope="module")
def bump1():
    return make_gaussian_bump(1, 1.0)


def test_uniform_sampler_support():
    A, zeta = sample_hidden(UniformBallSampler(1.0, 3, 1.0), 100, seed=0)
    assert A.shape == (100, 3) and zeta.shape == (100,)
    assert np.linalg.norm(A, axis=1).max() <= 1.0
    assert np.abs(zeta).max() <= 1.0


def test_sample_hidden_reproducible():
    s = UniformBallSampler(2.0, 2, 1.0)
    a1, z1 = sample_hidden(s, 10, seed=4, stream=9)
    a2, z2 = sample_hidden(s, 10, seed=4, stream=9)
    np.testing.assert_array_equal(a1, a2)
    np.testing.assert_array_equal(z1, z2)


def test_sparse_level_fractions():
    s = SparseSampler(1.0, 4, 1.0, (0.25, 0.25, 0.25, 0.25))
    A, _ = sample_hidden(s, 10**4, seed=1)
    k = np.count_nonzero(A, axis=1)
    for level in range(1, 5):
        frac = np.mean(k == level)
        assert abs(frac - 0.25) <= 4 * np.sqrt(0.25 * 0.75 / 10**4)
    assert np.linalg.norm(A, axis=1).max() <= 1.0


def test_sparse_has_no_oracle(bump1):
    s = SparseSampler(5.0, 1, 1.0, (1.0,))
    A, zeta = sample_hidden(s, 8, seed=0)
    with pytest.raises(ConfigError):
        oracle_readout(build_repr(bump1, 5.0), A, zeta, s)


def test_zero_target_readout():
    t = make_zero_target(2, 1.0)
    A, zeta = sample_hidden(UniformBallSampler(3.0, 2, 1.0), 50, seed=0)
    W = oracle_readout(build_repr(t, 3.0), A, zeta)
    np.testing.assert_array_equal(W, 0.0)
    net = RandomFeatureNet(A, zeta, W)
    np.testing.assert_array_equal(net.forward(np.ones((4, 2))), 0.0)


def test_oracle_unbiased_at_origin():
    t = make_gaussian_bump(2, 1.0)
    r = build_repr(t, 4.0)
    s = UniformBallSampler(4.0, 2, 1.0)
    outs = []
    for k in range(400):
        A, zeta = sample_hidden(s, 64, seed=5, stream=k)
        outs.append(RandomFeatureNet(A, zeta, oracle_readout(r, A, zeta, s)).forward(np.zeros(2))[0])
    est = stats.summarize(outs)
    assert abs(est.mean - 1.0) <= 4 * est.stderr


def test_general_product_matches_uniform(bump1):
    r = build_repr(bump1, 5.0)
    gp = uniform_product_sampler(5.0, 1, 1.0)
    A, zeta = sample_hidden(gp, 200, seed=2)
    np.testing.assert_allclose(oracle_readout(r, A, zeta, gp), oracle_readout(r, A, zeta), rtol=1e-12, atol=1e-15)


def test_support_mismatch(bump1):
    r = build_repr(bump1, 5.0)
    with pytest.raises(SupportMismatchError):
        oracle_readout(r, np.array([[6.0]]), np.array([0.0]))
    with pytest.raises(SupportMismatchError):
        oracle_readout(r, np.array([[1.0]]), np.array([0.0]), UniformBallSampler(4.0, 1, 1.0))


def test_F_pi():
    assert uniform_F_pi(5.0)(1.0) == 20.0
    gp = uniform_product_sampler(5.0, 1, 1.0)
    np.testing.assert_allclose(gp.F_pi(1.0), 20.0, rtol=1e-12)


def test_cstar_values(bump1):
    np.testing.assert_allclose(cstar_uniform(bump1, 1.0, 5.0), CSTAR_UNIFORM_Q1_R5, rtol=1e-9)
    np.testing.assert_allclose(cstar_R(bump1, 1.0, 5.0), CSTAR_R_Q1_R5, rtol=1e-9)
    assert cstar_uniform(make_zero_target(1, 1.0), 1.0, 5.0) == 0.0


def test_cstar_M_scaling(bump1):
    # (M+1)^2 (M^3+M+2) grows by 6.75 and max(MR, 1) doubles
    ratio = cstar_uniform(bump1, 2.0, 5.0) / cstar_uniform(bump1, 1.0, 5.0)
    np.testing.assert_allclose(ratio, 6.75 * 2, rtol=1e-12)


def test_cstar_sanity_product(bump1):
    crude = 16 * 5 * vol_ball(1, 5.0) * 4 * 4 * (2.0731730074937412 + bump1.moments.tail_mass(5.0))
    assert 0 < cstar_uniform(bump1, 1.0, 5.0) <= crude


def test_cstar_general_scale(bump1):
    R = 5.0
    vol = vol_ball(1, R)

    def g_ratio(x):
        # g / pi_X for pi_X uniform on B_R
        return np.real(bump1.eval_g(x)) * vol

    val = cstar_general(uniform_F_pi(5.0), g_ratio, 1.0, lambda rng, n: rng.uniform(-R, R, (n, 1)))
    ref = cstar_uniform(bump1, 1.0, R)
    assert ref / 8 <= val <= ref * 8
    assert cstar_general(uniform_F_pi(5.0), lambda x: np.zeros(len(x)), 1.0,
                         lambda rng, n: rng.uniform(-R, R, (n, 1))) == 0.0


def test_schedules():
    np.testing.assert_allclose(schedule_R(1024, "poly", 1, 1.0), 1024**0.25, rtol=1e-14)
    np.testing.assert_allclose(schedule_R(int(round(np.exp(4))), "exp", 1, 2.0, 1.0),
                               np.sqrt(np.log(np.sqrt(round(np.exp(4))))), rtol=1e-14)
    np.testing.assert_allclose(predicted_exponent(1, 1.0), 0.25)
    np.testing.assert_allclose(predicted_exponent(3, 1e9), 0.5, atol=1e-8)
    with pytest.raises(ConfigError):
        schedule_R(1024, "cubic", 1)


def test_ridge_zero_labels():
    Phi = stats.make_rng(0).random((5, 20))
    np.testing.assert_array_equal(ridge_readout(Phi, np.zeros((1, 20)), 1e-3), 0.0)


def test_ridge_interpolates():
    rng = stats.make_rng(1)
    Phi = rng.standard_normal((30, 30))
    y = rng.standard_normal((1, 30))
    W = ridge_readout(Phi, y, 0.0)
    assert np.linalg.norm(W @ Phi - y) <= 1e-8 * np.linalg.norm(y)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 12), st.floats(1e-3, 10.0))
def test_ridge_normal_equations(N, lam):
    rng = stats.make_rng(N)
    Phi = rng.standard_normal((N, 3 * N))
    y = rng.standard_normal((2, 3 * N))
    W = ridge_readout(Phi, y, lam)
    np.testing.assert_allclose(W @ (Phi @ Phi.T + lam * np.eye(N)), y @ Phi.T, atol=1e-9)


def test_ridge_singular():
    Phi = np.zeros((4, 10))
    Phi[0] = 1.0
    with pytest.raises(SingularSystemError):
        ridge_readout(Phi, np.ones((1, 10)), 0.0)
    W = ridge_readout(Phi, np.ones((1, 10)), 0.0, fallback_floor=1e-8)
    assert np.all(np.isfinite(W))


def test_ridge_beats_oracle(bump1):
    rows = mse_vs_N(bump1, 5.0, [256], n_test=1000, n_seeds=3, seed=0, readouts=("oracle", "ridge"), n_train=4096)
    by = {r["readout_kind"]: r for r in rows}
    assert by["ridge"]["mse_mean"] <= by["oracle"]["mse_mean"]


def test_mse_zero_target():
    rows = mse_vs_N(make_zero_target(1, 1.0), 2.0, [16, 32], n_test=50, n_seeds=3)
    assert [r["mse_mean"] for r in rows] == [0.0, 0.0]
    assert set(rows[0]) == {"N", "readout_kind", "mse_mean", "mse_lo", "mse_hi", "cstar_over_N",
                            "truncation_bound", "seed_count"}


def test_workflow_zero():
    w = universal_workflow(make_zero_target(1, 1.0), 0.5, 0.5)
    assert (w.R, w.N) == (1.0, 1)


def test_workflow_post_hoc(bump1):
    w = universal_workflow(bump1, 0.5, 0.5)
    thr = 0.5 * np.sqrt(0.5) / 4
    assert bump1.moments.tail_mass(w.R) < thr
    assert np.sqrt(cstar_R(bump1, 1.0, w.R) / w.N) < thr
    w4 = universal_workflow(bump1, 0.125, 0.5)
    assert w4.N >= 16 * w.N * (cstar_R(bump1, 1.0, w4.R) / cstar_R(bump1, 1.0, w.R)) * 0.999
    assert w4.N >= 16 * w.N * 0.999
