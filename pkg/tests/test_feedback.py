import numpy as np
import pytest

from randres import stats
from randres.errors import ConfigError
from randres.feedback import (
    JordanEsn,
    RiskSpec,
    ball_grid,
    build_jordan,
    cstar_feedback,
    esp_event_probability,
    horizon_for,
    risk_bound,
    run_jordan,
    s_n_estimate,
)
from randres.targets import make_contraction_target

# mpmath: 16 sqrt(3 (8 + 4) 2) * 2 * sqrt(Vol(B_1^3) int max(1, |w|^12) |g_j|^2)
CSTAR_DEFAULT = 1352.8187286179961
BOUND_DEFAULT = {64: 1941.6555397079970, 256: 970.82777227465489, 1024: 485.41388855798387}


@pytest.fixture(scope="module")
def target():
    return make_contraction_target()


def test_constants(target):
    np.testing.assert_allclose(cstar_feedback(target), CSTAR_DEFAULT, rtol=1e-9)
    assert horizon_for(target) == 11
    for N, b in BOUND_DEFAULT.items():
        np.testing.assert_allclose(risk_bound(target, N, 11, 0.5), b, rtol=1e-9)


def test_zero_amplitude():
    t = make_contraction_target(2, 1, 1.0, [0.0, 0.0])
    j = build_jordan(t, 8, seed=0)
    np.testing.assert_array_equal(j.V, 0.0)
    z = stats.make_rng(0).uniform(-1, 1, (5, 1))
    np.testing.assert_array_equal(run_jordan(j, z, np.array([0.3, 0.1])), 0.0)
    assert esp_event_probability(t, 8, 2, n_trials=30, grid_size=20).probability == 1.0


def test_readout_layout():
    t = make_contraction_target(3, 1, 1.0)
    j = build_jordan(t, 2, seed=1)
    assert j.W.shape == (3, 6)
    for k in range(6):
        col = j.W[:, k]
        assert np.count_nonzero(col[np.arange(3) != k % 3]) == 0
    y = stats.make_rng(2).uniform(-0.5, 0.5, (4, 3))
    z = stats.make_rng(3).uniform(-1, 1, (4, 1))
    x = np.maximum(y @ j.A.T + z @ j.C.T + j.zeta, 0.0)
    np.testing.assert_allclose(j.step(y, z), x @ j.W.T, rtol=1e-13, atol=1e-15)


def test_single_unit_formula():
    j = JordanEsn(1, 1, 1, np.array([[0.5]]), np.array([[-0.3]]), np.array([0.2]), np.array([[2.0]]), 1.0)
    out = run_jordan(j, np.array([[0.4]]), np.array([0.6]))
    np.testing.assert_allclose(out, [[2.0 * max(0.5 * 0.6 - 0.3 * 0.4 + 0.2, 0.0)]])


def test_unbiased_step(target):
    x = np.array([[0.4, -0.7]])
    z = np.array([[0.5]])
    outs = np.array([build_jordan(target, 32, seed=2, stream=k).step(x, z)[0] for k in range(400)])
    est = [stats.summarize(outs[:, c]) for c in range(2)]
    ref = target.F(x, z)[0]
    for c in range(2):
        assert abs(est[c].mean - ref[c]) <= 4 * est[c].stderr


def test_trajectory_error_decreases(target):
    rng = stats.make_rng(5)
    z = rng.uniform(-1, 1, (200, 12, 1))
    xi = np.zeros(2)
    ref = target.run(z, xi)

    def err(N):
        return np.mean([np.linalg.norm(run_jordan(build_jordan(target, N, 3, k), z, xi)[:, -1] - ref, axis=1).mean()
                        for k in range(10)])

    assert err(1024) < err(16)


def test_initial_output_checked(target):
    j = build_jordan(target, 4)
    with pytest.raises(ConfigError):
        run_jordan(j, np.zeros((3, 1)), np.array([1.0, 1.0]))


def test_ball_grid():
    g = ball_grid(2, 2.0, 100)
    assert g.shape == (100, 2)
    assert np.linalg.norm(g, axis=1).max() <= 2.0
    np.testing.assert_array_equal(g, ball_grid(2, 2.0, 100))
    np.testing.assert_array_equal(g[0], 0.0)


def test_s_n(target):
    exact = s_n_estimate(target, 0, 3, n_grid=20)
    assert exact <= 1e-6
    s1 = s_n_estimate(target, 0, 3, n_grid=20, truncation_radius=1.0)
    s05 = s_n_estimate(target, 0, 3, n_grid=20, truncation_radius=0.5)
    assert 0 < s1 < s05


def test_risk_spec():
    x = np.array([[3.0, 4.0]])
    y = np.zeros((1, 2))
    np.testing.assert_allclose(RiskSpec("absolute")(x, y), [5.0])
    s = RiskSpec("squared_clipped", clip=2.0)
    np.testing.assert_allclose(s(x, y), [4.0])
    assert s.lipschitz == 4.0
    with pytest.raises(ConfigError):
        RiskSpec("hinge")
