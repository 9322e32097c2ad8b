"""
MSE loss and exact reverse-mode gradients for ReluNetwork.

The loss over points x_1..x_m is L = (1/m) sum_j (N(x_j) - f(x_j))^2. Gradients use the
subgradient ReLU'(0) = 0, so a neuron that is inactive on the whole batch passes no
gradient to anything upstream of it.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from network import ReluNetwork, forward_batch, forward_trace_batch
from sampling import Sample

logger = logging.getLogger(__name__)

# points with any |pre-activation| below KINK_FACTOR * h are left out of grad_check
KINK_FACTOR = 10.0


class EmptySampleError(ValueError):
    """Raised when a loss or gradient is requested over zero points."""


@dataclass
class GradientSet:
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def to_list(self) -> List[np.ndarray]:
        """Same order as ReluNetwork.parameters(): [dW1, db1, dW2, db2, ...]."""
        out = []
        for gw, gb in zip(self.weights, self.biases):
            out.extend([gw, gb])
        return out

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(g)) for g in self.to_list())

    def matches(self, net: ReluNetwork) -> bool:
        return [g.shape for g in self.to_list()] == [p.shape for p in net.parameters()]


@dataclass
class GradCheckReport:
    max_rel_error: float
    compared: int
    excluded: int
    excluded_points: int

    @property
    def excluded_share(self) -> float:
        total = self.compared + self.excluded
        return self.excluded / total if total else 0.0


def _check_batch(X: np.ndarray, y: np.ndarray):
    if X.shape[0] == 0:
        raise EmptySampleError("loss and gradient need at least one point")
    if y.shape != (X.shape[0],):
        raise ValueError(f"targets have shape {y.shape}, expected ({X.shape[0]},)")


def residuals(net: ReluNetwork, X, y) -> np.ndarray:
    """N(x_j) - f(x_j) over the batch."""
    return forward_batch(net, X) - np.asarray(y, dtype=np.float64)


def mse_loss_arrays(net: ReluNetwork, X, y) -> float:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_batch(X, y)
    r = residuals(net, X, y)
    squared = r * r
    if not np.all(np.isfinite(squared)):
        return float("nan") if np.any(np.isnan(squared)) else float("inf")
    # fsum keeps 1e5-point means free of accumulation error
    try:
        return math.fsum(squared) / X.shape[0]
    except OverflowError:
        return float("inf")


def mse_loss(net: ReluNetwork, sample: Sample) -> float:
    return mse_loss_arrays(net, sample.points, sample.targets)


def grad_mse_into(
    net: ReluNetwork,
    X: np.ndarray,
    y: np.ndarray,
    grad_w: List[np.ndarray],
    grad_b: List[np.ndarray],
) -> None:
    """
    Backward pass writing dL/dW_i and dL/db_i into the given arrays.

    Inputs are not validated. In training `grad_w` and `grad_b` are views into one flat
    gradient buffer, so a step allocates no gradient arrays.
    """
    inputs = [X]
    pre = []
    h = X
    for layer in net.layers[:-1]:
        z = h @ layer.weights.T
        z += layer.bias
        pre.append(z)
        h = np.maximum(z, 0.0)
        inputs.append(h)
    out = h @ net.layers[-1].weights[0] + net.layers[-1].bias[0]
    delta = (2.0 / X.shape[0] * (out - y))[:, None]

    for i in range(len(net.layers) - 1, -1, -1):
        np.matmul(delta.T, inputs[i], out=grad_w[i])
        np.sum(delta, axis=0, out=grad_b[i])
        if i > 0:
            delta = delta @ net.layers[i].weights
            delta *= pre[i - 1] > 0


def grad_mse_arrays(net: ReluNetwork, X, y) -> GradientSet:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_batch(X, y)
    grads = GradientSet(
        [np.empty_like(layer.weights) for layer in net.layers],
        [np.empty_like(layer.bias) for layer in net.layers],
    )
    grad_mse_into(net, X, y, grads.weights, grads.biases)
    return grads


def grad_mse(net: ReluNetwork, batch: Sample) -> GradientSet:
    return grad_mse_arrays(net, batch.points, batch.targets)


def _patterns(net: ReluNetwork, X: np.ndarray) -> List[np.ndarray]:
    return forward_trace_batch(net, X).pattern


def grad_check_report(
    net: ReluNetwork,
    X,
    y,
    h: float = 1e-6,
    grads: Optional[GradientSet] = None,
) -> GradCheckReport:
    """
    Central differences against the analytic gradient.

    Points within KINK_FACTOR*h of a kink are dropped from the batch first. Entries whose
    +-h perturbation flips any activation pattern are not compared either. When `grads` is
    given it must belong to the batch that remains after dropping kink points.
    """
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    _check_batch(X, y)

    base = forward_trace_batch(net, X)
    near_kink = np.zeros(X.shape[0], dtype=bool)
    for z in base.pre:
        near_kink |= np.any(np.abs(z) < KINK_FACTOR * h, axis=1)
    n_params = sum(p.size for p in net.parameters())
    if np.all(near_kink):
        return GradCheckReport(0.0, 0, n_params, int(near_kink.sum()))

    X_c, y_c = X[~near_kink], y[~near_kink]
    if grads is None:
        grads = grad_mse_arrays(net, X_c, y_c)

    perturbed = net.copy()
    base_patterns = _patterns(perturbed, X_c)
    max_err = 0.0
    compared = excluded = 0
    for param, grad in zip(perturbed.parameters(), grads.to_list()):
        for idx in np.ndindex(param.shape):
            original = param[idx]
            param[idx] = original + h
            loss_plus = mse_loss_arrays(perturbed, X_c, y_c)
            flipped = any(np.any(a != b) for a, b in zip(_patterns(perturbed, X_c), base_patterns))
            param[idx] = original - h
            loss_minus = mse_loss_arrays(perturbed, X_c, y_c)
            flipped = flipped or any(
                np.any(a != b) for a, b in zip(_patterns(perturbed, X_c), base_patterns)
            )
            param[idx] = original
            if flipped:
                excluded += 1
                continue
            numeric = (loss_plus - loss_minus) / (2.0 * h)
            analytic = float(grad[idx])
            err = abs(numeric - analytic) / max(1.0, abs(numeric), abs(analytic))
            max_err = max(max_err, err)
            compared += 1

    report = GradCheckReport(max_err, compared, excluded, int(near_kink.sum()))
    if report.excluded_share >= 0.05:
        logger.warning(
            f"grad_check excluded {report.excluded} of {compared + excluded} entries near kinks"
        )
    return report


def grad_check(net: ReluNetwork, batch: Sample, h: float = 1e-6, grads: Optional[GradientSet] = None) -> float:
    """Max relative error max(|a-b| / max(1,|a|,|b|)) over the compared entries."""
    return grad_check_report(net, batch.points, batch.targets, h, grads).max_rel_error
