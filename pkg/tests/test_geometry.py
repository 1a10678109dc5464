import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randres import stats
from randres.geometry import sample_ball, sphere_area, vol_ball, vol_ball_bound


def test_small_volumes():
    assert vol_ball(1, 1.0) == pytest.approx(2.0, rel=1e-14)
    assert vol_ball(2, 1.0) == pytest.approx(np.pi, rel=1e-14)
    assert vol_ball(3, 2.0) == pytest.approx(4 / 3 * np.pi * 8, rel=1e-14)
    assert vol_ball(5, 1.0) == pytest.approx(5.263789013914325, rel=1e-13)


@given(st.integers(1, 20), st.floats(0.1, 10))
def test_volume_bound_dominates(q, R):
    assert vol_ball(q, R) <= vol_ball_bound(q, R) * (1 + 1e-12)


def test_sphere_area():
    assert sphere_area(2) == pytest.approx(2 * np.pi)
    assert sphere_area(3) == pytest.approx(4 * np.pi)


def test_ball_samples_inside():
    x = sample_ball(stats.make_rng(0), 100, 3, 1.0)
    assert x.shape == (100, 3)
    assert np.linalg.norm(x, axis=1).max() <= 1.0


def test_ball_second_moment():
    x = sample_ball(stats.make_rng(1), 10**5, 2, 1.0)
    est = stats.summarize(np.sum(x * x, axis=1))
    assert abs(est.mean - 0.5) <= 4 * est.stderr
