import math

import numpy as np
import pytest

from network import DimensionError
from target import (
    THEOREM,
    BallDomain,
    ball_volume,
    best_constant,
    const_mse_expected,
    const_supnorm,
    constant_loss_table,
    cube_acceptance_rate,
    f_eval,
    f_eval_batch,
    in_ball,
    in_ball_batch,
    sphere_points,
)


def test_f_at_center_and_boundary():
    assert f_eval([0.5, 0.5]) == 0.0
    assert f_eval([0.0, 0.5]) == pytest.approx(THEOREM.boundary_value)
    r = THEOREM.inner_radius
    assert f_eval([0.5 + r, 0.5]) == pytest.approx(THEOREM.inner_value)


def test_f_batch_matches_pointwise():
    X = np.random.default_rng(0).random((30, 4))
    np.testing.assert_allclose(f_eval_batch(X), [f_eval(x) for x in X], rtol=0, atol=1e-15)


def test_ball_membership():
    domain = BallDomain(2)
    assert in_ball([0.5, 0.5], domain)
    assert in_ball([0.0, 0.5], domain)
    assert not in_ball([0.0, 0.0], domain)
    np.testing.assert_array_equal(in_ball_batch([[0.5, 0.5], [1.0, 1.0]], domain), [True, False])


def test_ball_membership_dimension_mismatch():
    with pytest.raises(DimensionError):
        in_ball([0.5, 0.5, 0.5], BallDomain(2))


@pytest.mark.parametrize(
    "c,expected",
    [(0.0, 0.25), (1 / 16, 0.1875), (1 / 8, 0.125), (3 / 16, 0.1875), (1 / 4, 0.25)],
)
def test_const_supnorm(c, expected):
    assert const_supnorm(c) == pytest.approx(expected)


def test_const_mse_table_n5():
    rows = constant_loss_table(5)
    got = [round(r["mse_expected"], 4) for r in rows]
    assert got == [0.0163, 0.0057, 0.0029, 0.0079]


def test_best_constant_minimizes_expected_mse():
    for n in (2, 5):
        c = best_constant(n)
        assert c == pytest.approx(n / (4 * (n + 2)))
        assert const_mse_expected(c, n) < const_mse_expected(c + 1e-3, n)
        assert const_mse_expected(c, n) < const_mse_expected(c - 1e-3, n)
    assert best_constant(5) == pytest.approx(0.1786, abs=1e-4)


def test_n0_expected_mse_n2():
    assert const_mse_expected(0.125, 2) == pytest.approx(1 / 48 - 1 / 32 + 1 / 64)


def test_ball_volume_and_acceptance():
    assert ball_volume(2) == pytest.approx(math.pi / 4)
    assert cube_acceptance_rate(5) == pytest.approx(0.1645, abs=1e-4)


def test_sphere_points_lie_on_sphere():
    points = sphere_points(5, THEOREM.inner_radius, 500, seed=3)
    radii = np.linalg.norm(points - 0.5, axis=1)
    np.testing.assert_allclose(radii, THEOREM.inner_radius, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(points, sphere_points(5, THEOREM.inner_radius, 500, seed=3))


def test_const_supnorm_minimized_at_one_eighth():
    cs = np.arange(4001) / 16000
    values = np.array([const_supnorm(c) for c in cs])
    assert cs[np.argmin(values)] == 0.125
    assert values.min() == 0.125


@pytest.mark.parametrize("n", [2, 5])
def test_f_is_one_eighth_on_inner_sphere(n):
    points = sphere_points(n, THEOREM.inner_radius, 1000, seed=n)
    np.testing.assert_allclose(f_eval_batch(points), THEOREM.inner_value, rtol=0, atol=1e-12)
