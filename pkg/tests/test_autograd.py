import numpy as np
import pytest

from autograd import (
    EmptySampleError,
    grad_check,
    grad_check_report,
    grad_mse,
    grad_mse_arrays,
    grad_mse_into,
    mse_loss,
    mse_loss_arrays,
    residuals,
)
from network import AffineMap, ArchSpec, constant_network, forward, init_network, network_from_layers
from sampling import radial_ball_sample
from tests.helpers import bias_network, make_sample, with_hidden_biases


def test_n0_mse_on_grid(grid2, n0_net):
    assert mse_loss(n0_net, grid2) == pytest.approx(0.0051, abs=2e-4)


def test_zero_network_mse_on_grid(grid2):
    zero = constant_network(ArchSpec(2, 2, 1), 0.0)
    assert mse_loss(zero, grid2) == pytest.approx(1 / 48, abs=4e-4)


def test_loss_is_weighted_mean_of_batches(radial5):
    net = init_network(ArchSpec(5, 5, 2), seed=3)
    a, b = radial5.subset(np.arange(0, 700)), radial5.subset(np.arange(700, radial5.m))
    combined = (a.m * mse_loss(net, a) + b.m * mse_loss(net, b)) / radial5.m
    assert mse_loss(net, radial5) == pytest.approx(combined, rel=1e-12)


def test_empty_batch_rejected():
    net = constant_network(ArchSpec(2, 2, 1), 0.1)
    with pytest.raises(EmptySampleError):
        mse_loss_arrays(net, np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(EmptySampleError):
        grad_mse_arrays(net, np.zeros((0, 2)), np.zeros(0))


def test_depth_zero_gradient_is_closed_form():
    net = network_from_layers([AffineMap([[0.3, -0.2]], [0.05])])
    batch = make_sample([[0.2, 0.4], [0.7, 0.5], [0.5, 0.9]])
    r = residuals(net, batch.points, batch.targets)
    grads = grad_mse(net, batch)
    np.testing.assert_allclose(grads.weights[0][0], 2.0 / 3 * r @ batch.points, rtol=1e-12)
    assert grads.biases[0][0] == pytest.approx(2.0 / 3 * r.sum(), rel=1e-12)


def test_dead_layer_passes_gradient_only_to_final_bias():
    net = bias_network(ArchSpec(2, 2, 3), hidden_bias=-1.0, final_bias=0.2)
    batch = make_sample([[0.5, 0.5], [0.2, 0.5], [0.6, 0.3]])
    grads = grad_mse(net, batch)
    for g in grads.to_list()[:-1]:
        assert np.all(g == 0.0)
    assert grads.biases[-1][0] == pytest.approx(2.0 * np.mean(0.2 - batch.targets))


def test_gradient_layout_matches_parameters():
    net = init_network(ArchSpec(5, 6, 10), seed=0)
    grads = grad_mse(net, radial_ball_sample(5, 4, seed=0))
    assert grads.matches(net)
    assert grads.is_finite()


def test_backward_writes_into_flat_buffer(radial5):
    net = init_network(ArchSpec(5, 5, 3), seed=2)
    batch = radial5.subset(np.arange(1))
    flat = np.full(sum(p.size for p in net.parameters()), np.nan)
    grad_w, grad_b, offset = [], [], 0
    for layer in net.layers:
        rows, cols = layer.weights.shape
        grad_w.append(flat[offset:offset + rows * cols].reshape(rows, cols))
        offset += rows * cols
        grad_b.append(flat[offset:offset + rows])
        offset += rows
    grad_mse_into(net, batch.points, batch.targets, grad_w, grad_b)
    expected = np.concatenate([g.ravel() for g in grad_mse(net, batch).to_list()])
    np.testing.assert_array_equal(flat, expected)


def test_zero_network_grad_check_is_exact():
    net = constant_network(ArchSpec(2, 2, 2), 0.0)
    report = grad_check_report(net, [[0.3, 0.4]], [0.05])
    # every pre-activation is exactly 0, so the point is dropped as a kink
    assert report.compared == 0
    assert report.max_rel_error == 0.0


@pytest.mark.parametrize("n,w,d", [(2, 2, 1), (2, 3, 2), (2, 2, 8), (5, 5, 10), (5, 6, 20)])
def test_grad_check_random_networks(n, w, d):
    rng = np.random.default_rng(100 + d)
    worst, compared = 0.0, 0
    for t in range(5):
        net = with_hidden_biases(init_network(ArchSpec(n, w, d), seed=t), rng, -0.5, 0.5)
        point = radial_ball_sample(n, 1, seed=t)
        report = grad_check_report(net, point.points, point.targets)
        worst = max(worst, report.max_rel_error)
        compared += report.compared
    assert compared > 0
    assert worst < 1e-6


@pytest.mark.slow
@pytest.mark.parametrize("n", [2, 5])
@pytest.mark.parametrize("d", [1, 2, 8, 10, 20])
def test_grad_check_full_grid(n, d):
    rng = np.random.default_rng(d)
    compared = excluded = 0
    for w in (n, n + 1):
        for t in range(100):
            net = with_hidden_biases(init_network(ArchSpec(n, w, d), seed=t), rng, -0.5, 0.5)
            point = radial_ball_sample(n, 1, seed=1000 + t)
            report = grad_check_report(net, point.points, point.targets)
            assert report.max_rel_error < 1e-6
            compared += report.compared
            excluded += report.excluded
    assert excluded / (compared + excluded) < 0.05


def test_grad_check_catches_corrupted_bias():
    net = with_hidden_biases(init_network(ArchSpec(2, 2, 2), seed=4), np.random.default_rng(0), 0.5, 1.0)
    batch = make_sample([[0.4, 0.6]])
    # pin the output near f so the true gradient stays small
    net.layers[-1].bias[0] += batch.targets[0] + 0.1 - forward(net, batch.points[0])
    grads = grad_mse(net, batch)
    grads.biases[-1][0] += 1.0
    assert grad_check(net, batch, grads=grads) > 0.1


def test_grad_check_batch_of_points(radial5):
    net = with_hidden_biases(init_network(ArchSpec(5, 5, 2), seed=1), np.random.default_rng(1), 0.2, 0.6)
    batch = radial5.subset(np.arange(16))
    report = grad_check_report(net, batch.points, batch.targets)
    assert report.compared > 0
    assert report.max_rel_error < 1e-6
