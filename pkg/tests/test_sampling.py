import numpy as np
import pandas as pd
import pytest
from scipy import stats

from sampling import (
    SampleFileError,
    SamplingError,
    build_sample,
    grid_sample,
    radial_ball_sample,
    sample_from_file,
    sample_to_file,
    uniform_rejection_sample,
)
from target import BallDomain, const_mse_expected, cube_acceptance_rate, f_eval_batch, in_ball_batch


def test_grid_100_has_7668_points(grid2):
    assert grid2.m == 7668
    assert np.all(in_ball_batch(grid2.points, BallDomain(2)))
    assert grid2.targets.min() >= 0.0
    assert grid2.targets.max() <= 0.25


def test_grid_small_cases():
    assert grid_sample(1, 3).m == 3
    assert grid_sample(2, 2).m == 0
    assert grid_sample(2, 10).m == 60


def test_grid_k1_is_the_origin_when_inside():
    assert grid_sample(1, 1).m == 1
    assert grid_sample(2, 1).m == 0


def test_grid_is_row_major_and_on_lattice(small_grid):
    scaled = small_grid.points * 9
    np.testing.assert_allclose(scaled, np.round(scaled), atol=1e-12)
    keys = [tuple(p) for p in small_grid.points]
    assert keys == sorted(keys)


def test_grid_cap_guard(monkeypatch):
    monkeypatch.setattr("sampling.GRID_POINT_CAP", 1000)
    with pytest.raises(SamplingError, match="exceeds the cap"):
        grid_sample(3, 11)


def test_uniform_acceptance_rate_n2():
    sample = uniform_rejection_sample(2, 20_000, seed=4)
    assert sample.m == 20_000
    assert sample.m / sample.params["proposals"] == pytest.approx(np.pi / 4, abs=0.01)


def test_uniform_acceptance_rate_n5():
    sample = uniform_rejection_sample(5, 20_000, seed=5)
    rate = sample.m / sample.params["proposals"]
    assert rate == pytest.approx(cube_acceptance_rate(5), abs=0.01)


def test_uniform_is_deterministic():
    a = uniform_rejection_sample(2, 500, seed=8)
    b = uniform_rejection_sample(2, 500, seed=8)
    np.testing.assert_array_equal(a.points, b.points)
    assert a.params["proposals"] == b.params["proposals"]


def test_radial_moments_n5():
    sample = radial_ball_sample(5, 100_000, seed=6)
    assert np.all(in_ball_batch(sample.points, BallDomain(5)))
    assert sample.targets.mean() == pytest.approx(5 / 28, abs=0.002)
    rho = np.sqrt(sample.targets)
    assert np.mean(rho <= 0.25) == pytest.approx(0.5 ** 5, abs=0.003)
    directions = (sample.points - 0.5) / rho[:, None]
    assert np.linalg.norm(directions.mean(axis=0)) < 0.02


@pytest.mark.parametrize("n", [2, 5])
def test_radial_radius_law_ks(n):
    sample = radial_ball_sample(n, 100_000, seed=17 - n)
    rho = np.sqrt(sample.targets)
    result = stats.kstest(rho, lambda r: np.clip(2.0 * r, 0.0, 1.0) ** n)
    assert result.statistic < 0.01


def test_radial_is_deterministic():
    a = radial_ball_sample(3, 100, seed=1)
    b = radial_ball_sample(3, 100, seed=1)
    np.testing.assert_array_equal(a.points, b.points)
    assert not np.array_equal(a.points, radial_ball_sample(3, 100, seed=2).points)


def test_build_sample_dispatch_and_errors():
    assert build_sample({"method": "grid", "n": 2, "k": 10}).m == 60
    assert build_sample({"method": "radial", "n": 2, "count": 7, "seed": 1}).m == 7
    with pytest.raises(SamplingError, match="unknown sampling method"):
        build_sample({"method": "sobol", "n": 2, "count": 7})
    with pytest.raises(SamplingError, match="missing"):
        build_sample({"method": "uniform", "n": 2})


def test_sampler_parameter_validation():
    with pytest.raises(SamplingError):
        grid_sample(0, 5)
    with pytest.raises(SamplingError):
        radial_ball_sample(2, 0, seed=1)


def test_csv_round_trip_is_exact(tmp_path, radial5):
    path = sample_to_file(radial5, str(tmp_path / "radial.csv"))
    loaded = sample_from_file(path)
    np.testing.assert_array_equal(loaded.points, radial5.points)
    np.testing.assert_array_equal(loaded.targets, radial5.targets)
    header = open(path).readline().strip()
    assert header == "x_1,x_2,x_3,x_4,x_5,f"


def _write(tmp_path, frame):
    path = tmp_path / "sample.csv"
    frame.to_csv(path, index=False, float_format="%.17g")
    return str(path)


def test_sample_file_point_outside_ball(tmp_path):
    points = np.array([[0.5, 0.5], [0.0, 0.0]])
    frame = pd.DataFrame(points, columns=["x_1", "x_2"])
    frame["f"] = f_eval_batch(points)
    with pytest.raises(SampleFileError, match="row 2 lies outside K"):
        sample_from_file(_write(tmp_path, frame))


def test_sample_file_target_mismatch(tmp_path):
    frame = pd.DataFrame({"x_1": [0.5, 0.4], "x_2": [0.5, 0.5], "f": [0.0, 0.5]})
    with pytest.raises(SampleFileError, match="row 2 has f"):
        sample_from_file(_write(tmp_path, frame))


def test_sample_file_bad_header(tmp_path):
    frame = pd.DataFrame({"a": [0.5], "b": [0.5], "f": [0.0]})
    with pytest.raises(SampleFileError, match="point columns"):
        sample_from_file(_write(tmp_path, frame))


def test_sample_file_missing_value(tmp_path):
    path = tmp_path / "sample.csv"
    path.write_text("x_1,x_2,f\n0.5,0.5,0\n0.5,,0\n")
    with pytest.raises(SampleFileError, match="row 2"):
        sample_from_file(str(path))


@pytest.mark.parametrize("n", [2, 5])
def test_radial_constant_loss_matches_expected(n):
    sample = radial_ball_sample(n, 100_000, seed=40 + n)
    for k in (1, 2, 3, 4):
        c = k / 16
        squared = (sample.targets - c) ** 2
        stderr = squared.std(ddof=1) / np.sqrt(sample.m)
        assert abs(squared.mean() - const_mse_expected(c, n)) < 3 * stderr
