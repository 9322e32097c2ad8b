"""
Diagnostics read off trained networks.

- zero fractions, dead / fully alive neurons and layer death
- S_N = {x : every hidden pre-activation > 0}, on which N equals its affine collapse
- the dC dichotomy: either dC lies in S_N (case 1) or a witness on dC leaves it (case 2)
- sup-norm estimates, argmax sets and the eta = 1/16 floor for width <= n
- DOT diagrams of the layered network
"""

import logging
import os
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from autograd import mse_loss
from network import (
    ArchSpec,
    DimensionError,
    ReluNetwork,
    collapse_affine,
    constant_network,
    forward_batch,
    forward_trace,
    forward_trace_batch,
)
from sampling import Sample
from target import THEOREM, const_supnorm, f_eval_batch, sphere_points

logger = logging.getLogger(__name__)

SOFT_DEAD_THRESHOLD = 0.999
DEFAULT_DIRECTIONS = 10_000
DEFAULT_ARGMAX_TOL = 1e-6
BOUND_TOL = 1e-6
CONSTANT_TOL = 1e-12


class DiagnosticsError(RuntimeError):
    """Raised when a structural consequence fails to hold; indicates a bug."""


class Case(str, Enum):
    CASE1 = "case1"
    CASE2 = "case2"


@dataclass
class DeadReport:
    zero_fractions: List[np.ndarray]
    dead: List[Tuple[int, int]]
    fully_alive: List[Tuple[int, int]]
    partial: List[Tuple[int, int]]
    near_dead: List[Tuple[int, int]]
    layer_dead: List[bool]
    first_dead_layer: Optional[int]

    @property
    def dichotomy(self) -> bool:
        """Every neuron is either dead or fully alive."""
        return not self.partial

    @property
    def has_dead(self) -> bool:
        return bool(self.dead)

    def to_dict(self) -> dict:
        return {
            "zero_fractions": [zf.tolist() for zf in self.zero_fractions],
            "dead": [list(p) for p in self.dead],
            "fully_alive": [list(p) for p in self.fully_alive],
            "partial": [list(p) for p in self.partial],
            "near_dead": [list(p) for p in self.near_dead],
            "layer_dead": self.layer_dead,
            "first_dead_layer": self.first_dead_layer,
            "dichotomy": self.dichotomy,
        }


@dataclass
class Witness:
    point: np.ndarray
    direction_index: int
    layer: int
    neuron: int
    pre_activation: float


@dataclass
class CaseReport:
    case: Case
    directions: int
    witness: Optional[Witness] = None

    def to_dict(self) -> dict:
        out = {"case": self.case.value, "directions": self.directions, "witness": None}
        if self.witness is not None:
            out["witness"] = {
                "point": self.witness.point.tolist(),
                "direction_index": self.witness.direction_index,
                "layer": self.witness.layer,
                "neuron": self.witness.neuron,
                "pre_activation": self.witness.pre_activation,
            }
        return out


@dataclass
class BoundVerdict:
    sup_estimate: float
    passed: bool
    width_applicable: bool
    eta: float = THEOREM.eta

    def to_dict(self) -> dict:
        return {
            "sup_estimate": self.sup_estimate,
            "eta": self.eta,
            "passed": self.passed,
            "width_applicable": self.width_applicable,
        }


@dataclass
class ConstantCheck:
    constant: bool
    value: Optional[float] = None
    dead_layer: Optional[int] = None

    def __bool__(self) -> bool:
        return self.constant


@dataclass
class AliveBlock:
    layers: int
    neurons: int
    start_layer: Optional[int]

    @property
    def size(self) -> int:
        return self.layers * self.neurons

    def to_dict(self) -> dict:
        return {
            "layers": self.layers,
            "neurons": self.neurons,
            "start_layer": self.start_layer,
            "size": self.size,
        }


@dataclass
class DeadNeuronEvent:
    layer: int
    neuron: int
    died_at: int
    revived_at: int


# ============ Dead neurons ============


def zero_fractions(net: ReluNetwork, sample: Sample) -> List[np.ndarray]:
    """Per hidden layer, the share of sample points each neuron maps to zero."""
    trace = forward_trace_batch(net, sample.points)
    return [np.mean(z <= 0, axis=0) for z in trace.pre]


def classify_dead(net: ReluNetwork, sample: Sample, soft_threshold: float = SOFT_DEAD_THRESHOLD) -> DeadReport:
    """Layers and neurons are 1-based in the report."""
    fractions = zero_fractions(net, sample)
    dead, alive, partial, near_dead, layer_dead = [], [], [], [], []
    for li, zf in enumerate(fractions, start=1):
        for ni, value in enumerate(zf, start=1):
            if value == 1.0:
                dead.append((li, ni))
            elif value == 0.0:
                alive.append((li, ni))
            else:
                partial.append((li, ni))
            if value >= soft_threshold:
                near_dead.append((li, ni))
        layer_dead.append(bool(np.all(zf == 1.0)))
    first = next((i for i, flag in enumerate(layer_dead, start=1) if flag), None)
    return DeadReport(fractions, dead, alive, partial, near_dead, layer_dead, first)


def downstream_value(net: ReluNetwork, layer: int) -> float:
    """Output when hidden layer `layer` (1-based) emits the zero vector."""
    h = np.zeros(net.layers[layer - 1].out_dim)
    for affine in net.layers[layer:-1]:
        h = np.maximum(affine(h), 0.0)
    return float(net.layers[-1](h)[0])


def constant_downstream_check(net: ReluNetwork, sample: Sample, report: DeadReport) -> ConstantCheck:
    if report.first_dead_layer is None:
        return ConstantCheck(False)
    outputs = forward_batch(net, sample.points)
    spread = float(outputs.max() - outputs.min())
    value = downstream_value(net, report.first_dead_layer)
    if spread >= CONSTANT_TOL or abs(outputs[0] - value) >= CONSTANT_TOL:
        raise DiagnosticsError(
            f"layer {report.first_dead_layer} is dead but outputs vary by {spread:.3e} "
            f"(downstream constant {value!r}, first output {outputs[0]!r})"
        )
    return ConstantCheck(True, value, report.first_dead_layer)


def alive_blocks(report: DeadReport) -> List[AliveBlock]:
    """
    For every width k = 1..w, the longest run of consecutive hidden layers that each keep
    at least k non-dead neurons (earliest run on ties).
    """
    counts = [int(np.sum(zf < 1.0)) for zf in report.zero_fractions]
    width = max((zf.size for zf in report.zero_fractions), default=0)
    blocks = []
    for k in range(1, width + 1):
        best_len, best_start, run = 0, None, 0
        for li, count in enumerate(counts, start=1):
            run = run + 1 if count >= k else 0
            if run > best_len:
                best_len, best_start = run, li - run + 1
        blocks.append(AliveBlock(best_len, k if best_len else 0, best_start))
    return blocks


def largest_alive_block(report: DeadReport, min_neurons: int = 2) -> AliveBlock:
    """
    Largest layers x neurons block of non-dead neurons at least `min_neurons` wide.

    Narrower blocks only count when no block of that width exists. Ties go to the wider
    block; a network with every neuron dead gives a 0 x 0 block.
    """
    blocks = [b for b in alive_blocks(report) if b.layers]
    if not blocks:
        return AliveBlock(0, 0, None)
    candidates = [b for b in blocks if b.neurons >= min_neurons] or blocks
    return max(candidates, key=lambda b: (b.size, b.neurons))


def dead_neuron_events(fraction_stream: Sequence[Sequence[np.ndarray]]) -> List[DeadNeuronEvent]:
    """
    Neurons whose zero fraction hit 1.0 at some epoch boundary and later dropped below.

    `fraction_stream[e]` holds the per-layer fractions after epoch e + 1.
    """
    events = []
    died_at: Dict[Tuple[int, int], int] = {}
    for epoch, layers in enumerate(fraction_stream, start=1):
        for li, zf in enumerate(layers, start=1):
            for ni, value in enumerate(np.asarray(zf), start=1):
                key = (li, ni)
                if value == 1.0:
                    died_at.setdefault(key, epoch)
                elif key in died_at:
                    events.append(DeadNeuronEvent(li, ni, died_at.pop(key), epoch))
    return events


# ============ S_N ============


def s_n_membership(net: ReluNetwork, x) -> bool:
    return forward_trace(net, x).all_active


def s_n_membership_batch(net: ReluNetwork, X) -> np.ndarray:
    trace = forward_trace_batch(net, X)
    member = np.ones(np.asarray(X).shape[0], dtype=bool)
    for z in trace.pre:
        member &= np.all(z > 0, axis=1)
    return member


def case_classify(net: ReluNetwork, n: int, directions: int = DEFAULT_DIRECTIONS, seed: int = 0) -> CaseReport:
    """Test seeded points on dC (radius 1/sqrt(8) about the center) for S_N membership."""
    if directions < 1:
        raise ValueError(f"directions must be >= 1, got {directions}")
    if n != net.arch.n:
        raise DimensionError(f"network input dimension {net.arch.n} != {n}")
    points = sphere_points(n, THEOREM.inner_radius, directions, seed)
    member = s_n_membership_batch(net, points)
    if np.all(member):
        return CaseReport(Case.CASE1, directions)

    first = int(np.flatnonzero(~member)[0])
    trace = forward_trace(net, points[first])
    for li, z in enumerate(trace.pre, start=1):
        failing = np.flatnonzero(z <= 0)
        if failing.size:
            ni = int(failing[0])
            witness = Witness(points[first], first, li, ni + 1, float(z[ni]))
            return CaseReport(Case.CASE2, directions, witness)
    raise DiagnosticsError("batch and pointwise S_N membership disagree")


def collapse_check(net: ReluNetwork, points) -> Tuple[int, float]:
    """(members tested, max |N(x) - collapsed(x)|) over the S_N members among `points`."""
    points = np.asarray(points, dtype=np.float64)
    member = s_n_membership_batch(net, points)
    if not np.any(member):
        return 0, 0.0
    inside = points[member]
    collapsed = collapse_affine(net)(inside)[:, 0]
    return int(member.sum()), float(np.max(np.abs(forward_batch(net, inside) - collapsed)))


def convexity_check(net: ReluNetwork, n: int, pairs: int = 10_000, seed: int = 0) -> Tuple[int, int]:
    """
    Midpoints of member pairs on dC must be members.

    Returns (pairs tested, violations).
    """
    points = sphere_points(n, THEOREM.inner_radius, 2 * pairs, seed)
    rng = np.random.default_rng(seed + 1)
    members = points[s_n_membership_batch(net, points)]
    if members.shape[0] < 2:
        return 0, 0
    i = rng.integers(0, members.shape[0], size=pairs)
    j = rng.integers(0, members.shape[0], size=pairs)
    midpoints = 0.5 * (members[i] + members[j])
    violations = int(np.sum(~s_n_membership_batch(net, midpoints)))
    if violations:
        logger.error(f"S_N convexity violated by {violations} of {pairs} midpoints")
    return pairs, violations


# ============ Sup-norm ============


def abs_errors(net: ReluNetwork, sample: Sample) -> np.ndarray:
    return np.abs(sample.targets - forward_batch(net, sample.points))


def supnorm_estimate(net: ReluNetwork, sample: Sample) -> float:
    """max over the sample of |f - N|; a lower bound for the sup over K."""
    if sample.m == 0:
        raise ValueError("sup-norm estimate needs a nonempty sample")
    return float(np.max(abs_errors(net, sample)))


def argmax_set(net: ReluNetwork, sample: Sample, tol: float = DEFAULT_ARGMAX_TOL) -> np.ndarray:
    """Sample points with |f - N| >= estimate - tol, in sample order."""
    if tol < 0:
        raise ValueError(f"tolerance must be >= 0, got {tol}")
    errors = abs_errors(net, sample)
    return sample.points[errors >= errors.max() - tol]


def bound_check(net: ReluNetwork, arch: ArchSpec, sample: Sample) -> BoundVerdict:
    estimate = supnorm_estimate(net, sample)
    return BoundVerdict(
        sup_estimate=estimate,
        passed=estimate >= THEOREM.eta - BOUND_TOL,
        width_applicable=arch.w <= arch.n,
    )


def constant_argmax_consistent(check: ConstantCheck, sample: Sample, points: np.ndarray, tol: float = 1e-9) -> bool:
    """For a constant network every maximizer attains max |f - c| over the sample."""
    if not check:
        return True
    errors = np.abs(f_eval_batch(points) - check.value)
    best = float(np.max(np.abs(sample.targets - check.value)))
    return bool(np.all(errors >= best - tol)) and best <= const_supnorm(check.value) + tol


# ============ Summary and export ============


def diagnostics_summary(
    net: ReluNetwork,
    sample: Sample,
    directions: int = DEFAULT_DIRECTIONS,
    convexity_pairs: int = 10_000,
    seed: int = 0,
    argmax_tol: float = DEFAULT_ARGMAX_TOL,
) -> dict:
    report = classify_dead(net, sample)
    blocks = alive_blocks(report)
    constant = constant_downstream_check(net, sample, report)
    case = case_classify(net, net.arch.n, directions, seed)
    verdict = bound_check(net, net.arch, sample)
    members, collapse_err = collapse_check(net, sample.points)
    pairs, violations = convexity_check(net, net.arch.n, convexity_pairs, seed)
    maximizers = argmax_set(net, sample, argmax_tol)
    n0 = constant_network(net.arch, THEOREM.inner_value)

    dead_case_ok = not report.has_dead or case.case == Case.CASE2
    if not dead_case_ok:
        logger.error("Network with a dead neuron classified as case 1")

    return {
        "arch": net.arch.to_dict(),
        "mse": mse_loss(net, sample),
        "mse_n0": mse_loss(n0, sample),
        "dead": report.to_dict(),
        "alive_layer_run": blocks[0].layers if blocks else 0,
        "largest_alive_block": largest_alive_block(report).to_dict(),
        "alive_blocks": [b.to_dict() for b in blocks],
        "constant": {
            "constant": constant.constant,
            "value": constant.value,
            "dead_layer": constant.dead_layer,
            "argmax_consistent": constant_argmax_consistent(
                constant, sample, argmax_set(net, sample, 1e-9)
            ),
        },
        "case": case.to_dict(),
        "dead_implies_case2": dead_case_ok,
        "bound": verdict.to_dict(),
        "collapse": {"members": members, "max_error": collapse_err},
        "convexity": {"pairs": pairs, "violations": violations},
        "argmax": {"tol": argmax_tol, "count": int(maximizers.shape[0])},
    }


def _tag(value: float) -> str:
    if value == 1.0:
        return "dead"
    if value == 0.0:
        return "alive"
    return "partial"


_FILL = {"dead": "gray70", "alive": "white", "partial": "gray92"}


def diagram_dot(net: ReluNetwork, report: DeadReport, detail_limit: int = 64) -> str:
    """
    DOT graph, one node per neuron with rank = layer, labelled with its zero-fraction percent.

    Weights and biases are written on nodes and edges when the network has at most
    `detail_limit` parameters.
    """
    detailed = sum(p.size for p in net.parameters()) <= detail_limit
    lines = [
        "digraph relu_network {",
        "  rankdir=LR;",
        '  node [shape=circle, style=filled, fontname="Helvetica", fontsize=10];',
    ]

    lines.append("  { rank=same;")
    for i in range(net.arch.n):
        lines.append(f'    x{i + 1} [label="x{i + 1}", shape=plaintext, style=""];')
    lines.append("  }")

    for li, zf in enumerate(report.zero_fractions, start=1):
        lines.append("  { rank=same;")
        for ni, value in enumerate(zf, start=1):
            tag = _tag(value)
            label = f"{100 * value:.1f}%"
            if detailed:
                label += f"\\nb={net.layers[li - 1].bias[ni - 1]:.4g}"
            lines.append(
                f'    h{li}_{ni} [label="{label}", fillcolor="{_FILL[tag]}", '
                f'tag="{tag}", zero_fraction="{value!r}"];'
            )
        lines.append("  }")

    out_label = "out"
    if detailed:
        out_label += f"\\nb={net.layers[-1].bias[0]:.4g}"
    lines.append(f'  out [label="{out_label}", shape=box, style=""];')

    names = [f"x{i + 1}" for i in range(net.arch.n)]
    for li, layer in enumerate(net.layers, start=1):
        targets = [f"h{li}_{j + 1}" for j in range(layer.out_dim)] if li <= net.arch.d else ["out"]
        for j, dst in enumerate(targets):
            for k, src in enumerate(names):
                attrs = f' [label="{layer.weights[j, k]:.4g}"]' if detailed else ""
                lines.append(f"  {src} -> {dst}{attrs};")
        names = targets

    lines.append("}")
    return "\n".join(lines) + "\n"


def export_diagram(net: ReluNetwork, report: DeadReport, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(diagram_dot(net, report))
    logger.info(f"Wrote network diagram to {path}")
    return path
