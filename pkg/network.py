"""
Narrow ReLU network class.

A network of input dimension n, hidden width w and depth d is the composition

    A_{d+1} o ReLU o A_d o ... o ReLU o A_1

with d hidden ReLU layers, i.e. d + 1 affine maps. Depth 0 is a single affine map.

Networks are plain values: training works on a copy and hands back a new one.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

logger = logging.getLogger(__name__)


class DimensionError(ValueError):
    """Raised when a point or layer does not match the network's dimensions."""


class ModelFileError(ValueError):
    """Raised when a model file is malformed or violates the layer invariants."""


@dataclass(frozen=True)
class ArchSpec:
    n: int
    w: int
    d: int

    def __post_init__(self):
        for name, value, low in (("n", self.n, 1), ("w", self.w, 1), ("d", self.d, 0)):
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ValueError(f"ArchSpec.{name} must be an integer, got {value!r}")
            if value < low:
                raise ValueError(f"ArchSpec.{name} must be >= {low}, got {value}")

    @property
    def n_affine(self) -> int:
        return self.d + 1

    def layer_dims(self) -> List[int]:
        """Widths along the network: [n, w, ..., w, 1]."""
        return [self.n] + [self.w] * self.d + [1]

    def to_dict(self) -> dict:
        return {"n": int(self.n), "w": int(self.w), "d": int(self.d)}

    def label(self) -> str:
        return f"n={self.n},w={self.w},d={self.d}"


@dataclass
class AffineMap:
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=np.float64))
        self.bias = np.atleast_1d(np.asarray(self.bias, dtype=np.float64))
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise DimensionError("weights must be a matrix and bias a vector")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise DimensionError(
                f"weight rows ({self.weights.shape[0]}) != bias length ({self.bias.shape[0]})"
            )

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return x @ self.weights.T + self.bias

    def copy(self) -> "AffineMap":
        return AffineMap(self.weights.copy(), self.bias.copy())

    def __eq__(self, other) -> bool:
        if not isinstance(other, AffineMap):
            return NotImplemented
        return np.array_equal(self.weights, other.weights) and np.array_equal(
            self.bias, other.bias
        )


@dataclass
class ReluNetwork:
    arch: ArchSpec
    layers: List[AffineMap]

    def __post_init__(self):
        dims = self.arch.layer_dims()
        if len(self.layers) != self.arch.n_affine:
            raise DimensionError(
                f"arch {self.arch.label()} needs {self.arch.n_affine} layers, got {len(self.layers)}"
            )
        for i, layer in enumerate(self.layers):
            expected = (dims[i + 1], dims[i])
            if layer.weights.shape != expected:
                raise DimensionError(
                    f"layer {i + 1}: weights have shape {layer.weights.shape}, expected {expected}"
                )

    def copy(self) -> "ReluNetwork":
        return ReluNetwork(self.arch, [layer.copy() for layer in self.layers])

    def parameters(self) -> List[np.ndarray]:
        """Flat parameter list [W1, b1, W2, b2, ...]; arrays are shared, not copied."""
        params = []
        for layer in self.layers:
            params.extend([layer.weights, layer.bias])
        return params

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters())

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReluNetwork):
            return NotImplemented
        return self.arch == other.arch and all(
            a == b for a, b in zip(self.layers, other.layers)
        )


@dataclass
class ActivationTrace:
    pre: List[np.ndarray] = field(default_factory=list)
    post: List[np.ndarray] = field(default_factory=list)
    output: float = 0.0
    pattern: List[np.ndarray] = field(default_factory=list)

    @property
    def all_active(self) -> bool:
        return all(bool(np.all(p)) for p in self.pattern)


@dataclass
class BatchTrace:
    """Per-layer (m, w) pre/post activations of a batch plus the (m,) outputs."""

    pre: List[np.ndarray]
    post: List[np.ndarray]
    output: np.ndarray

    @property
    def pattern(self) -> List[np.ndarray]:
        return [z > 0 for z in self.pre]


def parameter_count(arch: ArchSpec) -> int:
    dims = arch.layer_dims()
    return sum(dims[i + 1] * (dims[i] + 1) for i in range(arch.n_affine))


def init_network(arch: ArchSpec, seed: int) -> ReluNetwork:
    """
    Glorot-uniform weights, zero biases.

    Each layer draws from U[-L, L] with L = sqrt(6 / (fan_in + fan_out)).
    Deterministic for fixed (arch, seed).
    """
    rng = np.random.default_rng(seed)
    dims = arch.layer_dims()
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        layers.append(AffineMap(weights, np.zeros(fan_out)))
    return ReluNetwork(arch, layers)


def constant_network(arch: ArchSpec, c: float) -> ReluNetwork:
    """Network realizing N == c in the given architecture."""
    dims = arch.layer_dims()
    layers = [
        AffineMap(np.zeros((fan_out, fan_in)), np.zeros(fan_out))
        for fan_in, fan_out in zip(dims[:-1], dims[1:])
    ]
    layers[-1].bias[0] = c
    return ReluNetwork(arch, layers)


def network_from_layers(layers: List[AffineMap]) -> ReluNetwork:
    """Build a network from explicit layers, inferring n, w and d."""
    if not layers:
        raise DimensionError("a network needs at least one layer")
    n = layers[0].in_dim
    d = len(layers) - 1
    w = layers[0].out_dim if d > 0 else 1
    return ReluNetwork(ArchSpec(n, w, d), list(layers))


def _as_point(net: ReluNetwork, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.arch.n,):
        raise DimensionError(f"expected a point of dimension {net.arch.n}, got shape {x.shape}")
    return x


def _as_batch(net: ReluNetwork, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.arch.n:
        raise DimensionError(f"expected an (m, {net.arch.n}) array, got shape {X.shape}")
    return X


def forward(net: ReluNetwork, x) -> float:
    x = _as_point(net, x)
    h = x
    for layer in net.layers[:-1]:
        h = np.maximum(layer(h), 0.0)
    return float(net.layers[-1](h)[0])


def forward_batch(net: ReluNetwork, X) -> np.ndarray:
    """Row-wise forward over an (m, n) array; returns shape (m,)."""
    h = _as_batch(net, X)
    for layer in net.layers[:-1]:
        h = np.maximum(layer(h), 0.0)
    return net.layers[-1](h)[:, 0]


def forward_trace(net: ReluNetwork, x) -> ActivationTrace:
    x = _as_point(net, x)
    trace = ActivationTrace()
    h = x
    for layer in net.layers[:-1]:
        z = layer(h)
        h = np.maximum(z, 0.0)
        trace.pre.append(z)
        trace.post.append(h)
        trace.pattern.append(z > 0)
    trace.output = float(net.layers[-1](h)[0])
    return trace


def forward_trace_batch(net: ReluNetwork, X) -> BatchTrace:
    h = _as_batch(net, X)
    pre, post = [], []
    for layer in net.layers[:-1]:
        z = layer(h)
        h = np.maximum(z, 0.0)
        pre.append(z)
        post.append(h)
    return BatchTrace(pre, post, net.layers[-1](h)[:, 0])


def collapse_affine(net: ReluNetwork) -> AffineMap:
    """Compose every affine layer with the ReLUs skipped: the map N agrees with on S_N."""
    weights = net.layers[0].weights.copy()
    bias = net.layers[0].bias.copy()
    for layer in net.layers[1:]:
        bias = layer.weights @ bias + layer.bias
        weights = layer.weights @ weights
    return AffineMap(weights, bias)


# ============ Serialization ============


def network_to_dict(net: ReluNetwork) -> dict:
    return {
        "arch": net.arch.to_dict(),
        "layers": [
            {"weights": layer.weights.tolist(), "bias": layer.bias.tolist()}
            for layer in net.layers
        ],
    }


def network_from_dict(data: dict, source: Optional[str] = None) -> ReluNetwork:
    where = f" in {source}" if source else ""
    try:
        arch = ArchSpec(**{k: data["arch"][k] for k in ("n", "w", "d")})
        raw_layers = data["layers"]
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFileError(f"malformed model{where}: {e}") from e

    if not isinstance(raw_layers, list) or len(raw_layers) != arch.n_affine:
        count = len(raw_layers) if isinstance(raw_layers, list) else "no"
        raise ModelFileError(
            f"arch {arch.label()}{where} needs {arch.n_affine} layers, file has {count}"
        )

    dims = arch.layer_dims()
    layers = []
    for i, raw in enumerate(raw_layers):
        try:
            weights = np.array(raw["weights"], dtype=np.float64)
            bias = np.array(raw["bias"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as e:
            raise ModelFileError(f"layer {i + 1}{where}: {e}") from e
        expected = (dims[i + 1], dims[i])
        if weights.ndim != 2 or weights.shape != expected:
            raise ModelFileError(
                f"layer {i + 1}{where}: weights shape {weights.shape}, expected {expected}"
            )
        if bias.shape != (weights.shape[0],):
            raise ModelFileError(
                f"layer {i + 1}{where}: bias length {bias.size} != weight rows {weights.shape[0]}"
            )
        layers.append(AffineMap(weights, bias))
    return ReluNetwork(arch, layers)


def save_model(net: ReluNetwork, path: str) -> str:
    """Write the JSON model file. Floats use the shortest round-trip repr."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(network_to_dict(net), f, indent=1)
    logger.debug(f"Saved model {net.arch.label()} to {path}")
    return path


def load_model(path: str) -> ReluNetwork:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ModelFileError(f"{path} is not valid JSON: {e}") from e
    return network_from_dict(data, source=path)
