import numpy as np

from network import ArchSpec, ReluNetwork, constant_network
from sampling import Sample
from target import f_eval_batch


def make_sample(points) -> Sample:
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    return Sample(points, f_eval_batch(points), "fixture")


def bias_network(arch: ArchSpec, hidden_bias: float, final_bias: float = 0.0) -> ReluNetwork:
    """Zero weights, every hidden bias equal to `hidden_bias`."""
    net = constant_network(arch, final_bias)
    for layer in net.layers[:-1]:
        layer.bias[:] = hidden_bias
    return net


def with_hidden_biases(net: ReluNetwork, rng, low: float, high: float) -> ReluNetwork:
    for layer in net.layers[:-1]:
        layer.bias[:] = rng.uniform(low, high, size=layer.bias.shape)
    return net
