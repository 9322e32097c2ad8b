"""
Adam / SGD and the batch-size-1 training loop.

Protocol: each epoch shuffles the sample with seed shuffle_seed + epoch (epochs are
1-based), takes batch_size-sized steps, then evaluates EpochMetrics on the full sample
and calls the hook. A run is strictly sequential; independent runs own their state.
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from autograd import grad_mse_into, mse_loss
from diagnostics import dead_neuron_events, supnorm_estimate, zero_fractions
from network import AffineMap, ReluNetwork
from sampling import Sample

logger = logging.getLogger(__name__)

OPTIMIZERS = ("adam", "sgd")


class NonFiniteLossError(RuntimeError):
    """Training produced a non-finite loss; carries the last finite snapshot."""

    def __init__(self, message: str, epoch: int, snapshot: ReluNetwork, metrics: List["EpochMetrics"]):
        super().__init__(message)
        self.epoch = epoch
        self.snapshot = snapshot
        self.metrics = metrics


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    epochs: int = 50
    batch_size: int = 1
    shuffle_seed: int = 0
    init_seed: int = 0

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.lr > 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AdamState:
    m: List[np.ndarray]
    v: List[np.ndarray]
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7

    @classmethod
    def for_params(cls, params: List[np.ndarray], config: Optional[TrainConfig] = None) -> "AdamState":
        config = config or TrainConfig()
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            lr=config.lr,
            beta1=config.beta1,
            beta2=config.beta2,
            epsilon=config.epsilon,
        )


@dataclass
class EpochMetrics:
    epoch: int
    mse: float
    sup_estimate: float
    zero_fractions: List[np.ndarray] = field(default_factory=list)
    seconds: float = 0.0


EpochHook = Callable[[EpochMetrics, ReluNetwork], None]


def _check_shapes(params: List[np.ndarray], grads: List[np.ndarray]):
    if len(params) != len(grads) or any(p.shape != g.shape for p, g in zip(params, grads)):
        raise ValueError(
            f"parameter shapes {[p.shape for p in params]} != gradient shapes {[g.shape for g in grads]}"
        )


def adam_step(state: AdamState, params: List[np.ndarray], grads: List[np.ndarray]) -> Tuple[AdamState, List[np.ndarray]]:
    """One bias-corrected Adam update, in place on `state` and `params`."""
    _check_shapes(params, grads)
    _check_shapes(state.m, grads)
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
    return state, params


def sgd_step(params: List[np.ndarray], grads: List[np.ndarray], lr: float) -> List[np.ndarray]:
    _check_shapes(params, grads)
    for p, g in zip(params, grads):
        p -= lr * g
    return params


def _layer_views(net: ReluNetwork, flat: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Per-layer (weights, bias) views into `flat`, laid out like net.parameters()."""
    weights, biases, offset = [], [], 0
    for layer in net.layers:
        rows, cols = layer.weights.shape
        weights.append(flat[offset:offset + rows * cols].reshape(rows, cols))
        offset += rows * cols
        biases.append(flat[offset:offset + rows])
        offset += rows
    return weights, biases


def _flat_network(net: ReluNetwork) -> Tuple[ReluNetwork, np.ndarray]:
    """Copy of `net` whose layers are views into one flat parameter buffer."""
    flat = np.concatenate([p.ravel() for p in net.parameters()])
    weights, biases = _layer_views(net, flat)
    layers = [AffineMap(w, b) for w, b in zip(weights, biases)]
    return ReluNetwork(net.arch, layers), flat


def evaluate_epoch(net: ReluNetwork, sample: Sample, epoch: int, seconds: float = 0.0) -> EpochMetrics:
    return EpochMetrics(
        epoch=epoch,
        mse=mse_loss(net, sample),
        sup_estimate=supnorm_estimate(net, sample),
        zero_fractions=zero_fractions(net, sample),
        seconds=seconds,
    )


def train(
    net: ReluNetwork,
    sample: Sample,
    config: TrainConfig,
    hook: Optional[EpochHook] = None,
) -> Tuple[ReluNetwork, List[EpochMetrics]]:
    """
    Train a copy of `net` on `sample`.

    Returns the trained network and one EpochMetrics per epoch. Raises
    NonFiniteLossError with the last finite epoch-boundary snapshot if the loss diverges.
    """
    if sample.m == 0:
        raise ValueError("cannot train on an empty sample")
    if sample.n != net.arch.n:
        raise ValueError(f"sample dimension {sample.n} != network input dimension {net.arch.n}")

    current, flat = _flat_network(net)
    params = [flat]
    gflat = np.zeros_like(flat)
    grad_w, grad_b = _layer_views(current, gflat)
    state = AdamState.for_params(params, config) if config.optimizer == "adam" else None
    snapshot = current.copy()
    history: List[EpochMetrics] = []
    X, y = sample.points, sample.targets
    bs = config.batch_size

    logger.info(
        f"Training {net.arch.label()} on {sample.m} {sample.method} points: "
        f"{config.optimizer}, lr={config.lr}, {config.epochs} epochs, batch {bs}"
    )
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        order = np.random.default_rng(config.shuffle_seed + epoch).permutation(sample.m)
        X_epoch, y_epoch = X[order], y[order]
        for start in range(0, sample.m, bs):
            grad_mse_into(current, X_epoch[start:start + bs], y_epoch[start:start + bs], grad_w, grad_b)
            if state is not None:
                adam_step(state, params, [gflat])
            else:
                sgd_step(params, [gflat], config.lr)

        metrics = evaluate_epoch(current, sample, epoch, time.perf_counter() - started)
        if not (np.isfinite(metrics.mse) and np.all(np.isfinite(flat))):
            raise NonFiniteLossError(
                f"non-finite loss in epoch {epoch} ({net.arch.label()}, lr={config.lr})",
                epoch,
                snapshot,
                history,
            )
        history.append(metrics)
        snapshot = current.copy()
        logger.debug(f"epoch {epoch}: mse={metrics.mse:.6f} sup={metrics.sup_estimate:.4f}")
        if hook is not None:
            hook(metrics, snapshot)

    events = dead_neuron_events([m.zero_fractions for m in history])
    if events and config.optimizer == "sgd":
        for e in events:
            logger.warning(
                f"Neuron ({e.layer},{e.neuron}) dead at epoch {e.died_at} revived at epoch {e.revived_at} under SGD"
            )
    elif events:
        logger.debug(f"{len(events)} dead neurons moved again under adam")

    return snapshot, history
