"""
Training-set generators on the ball K.

Three methods:
- grid:    k evenly spaced points per axis (endpoints 0 and 1 included), kept if in K
- uniform: uniform draws from [0,1]^n, kept if in K, until `count` are kept
- radial:  normal direction on the sphere, radius (1/2) U^(1/n), shifted to the center

Every sample is deterministic for fixed (method, params, seed).
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from target import BallDomain, f_eval_batch, in_ball_batch

logger = logging.getLogger(__name__)

GRID_POINT_CAP = int(os.getenv("NARROWNET_GRID_CAP", "10000000"))
NORMAL_METHOD = "numpy.PCG64.standard_normal"
METHODS = ("grid", "uniform", "radial")

# target column must agree with f(point) within this on reload
TARGET_TOL = 1e-12
BALL_TOL = 1e-12


class SamplingError(ValueError):
    """Raised for invalid sampler parameters or resource-guard violations."""


class SampleFileError(ValueError):
    """Raised when a sample CSV is malformed or violates the sample invariants."""


@dataclass
class Sample:
    points: np.ndarray
    targets: np.ndarray
    method: str
    params: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.m

    def subset(self, index) -> "Sample":
        index = np.asarray(index)
        return Sample(self.points[index], self.targets[index], self.method, dict(self.params), self.seed)

    def metadata(self) -> dict:
        return {
            "method": self.method,
            "params": self.params,
            "seed": self.seed,
            "m": self.m,
            "n": self.n,
        }


def _make_sample(points: np.ndarray, method: str, params: dict, seed: Optional[int]) -> Sample:
    points = np.ascontiguousarray(points, dtype=np.float64)
    return Sample(points, f_eval_batch(points), method, params, seed)


def grid_sample(n: int, k: int) -> Sample:
    """
    Lattice {i/(k-1)} per axis intersected with K, in row-major order.

    Membership is decided exactly in index space: sum (2i - (k-1))^2 <= (k-1)^2.
    For n=2, k=100 this yields the 7668 points of the 100x100 grid.
    """
    if n < 1:
        raise SamplingError(f"dimension must be >= 1, got {n}")
    if k < 1:
        raise SamplingError(f"points per axis must be >= 1, got {k}")
    if k ** n > GRID_POINT_CAP:
        raise SamplingError(
            f"grid of {k}^{n} = {k ** n} points exceeds the cap of {GRID_POINT_CAP} "
            "(raise NARROWNET_GRID_CAP to allow it)"
        )

    params = {"n": n, "k": k}
    if k == 1:
        points = np.zeros((1, n))
        keep = in_ball_batch(points, BallDomain(n))
        return _make_sample(points[keep], "grid", params, None)

    index = np.indices((k,) * n).reshape(n, -1).T
    twice_offset = 2 * index - (k - 1)
    keep = np.sum(twice_offset * twice_offset, axis=1) <= (k - 1) ** 2
    points = index[keep] / (k - 1)
    logger.debug(f"Grid sample n={n} k={k}: kept {points.shape[0]} of {index.shape[0]}")
    return _make_sample(points, "grid", params, None)


def uniform_rejection_sample(n: int, count: int, seed: int) -> Sample:
    """Uniform draws from [0,1]^n kept when in K, until `count` points are kept."""
    if n < 1:
        raise SamplingError(f"dimension must be >= 1, got {n}")
    if count < 1:
        raise SamplingError(f"count must be >= 1, got {count}")

    rng = np.random.default_rng(seed)
    domain = BallDomain(n)
    kept = []
    n_kept = 0
    proposals = 0
    batch = max(1024, 2 * count)
    while n_kept < count:
        draws = rng.random((batch, n))
        inside = in_ball_batch(draws, domain)
        need = count - n_kept
        hits = np.flatnonzero(inside)
        if hits.size >= need:
            last = hits[need - 1]
            kept.append(draws[hits[:need]])
            proposals += int(last) + 1
            n_kept = count
        else:
            kept.append(draws[hits])
            proposals += batch
            n_kept += hits.size

    points = np.concatenate(kept, axis=0)
    params = {"n": n, "count": count, "proposals": proposals}
    logger.debug(f"Uniform sample n={n}: {count} kept from {proposals} proposals")
    return _make_sample(points, "uniform", params, seed)


def radial_ball_sample(n: int, count: int, seed: int) -> Sample:
    """
    Uniform points in K: direction from a normalized standard-normal draw, radius
    (1/2) U^(1/n), which has density proportional to r^(n-1) on [0, 1/2].
    """
    if n < 1:
        raise SamplingError(f"dimension must be >= 1, got {n}")
    if count < 1:
        raise SamplingError(f"count must be >= 1, got {count}")

    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((count, n))
    norms = np.linalg.norm(directions, axis=1)
    redraws = 0
    while np.any(norms == 0.0):
        bad = np.flatnonzero(norms == 0.0)
        directions[bad] = rng.standard_normal((bad.size, n))
        norms[bad] = np.linalg.norm(directions[bad], axis=1)
        redraws += bad.size
    radii = 0.5 * rng.random(count) ** (1.0 / n)
    points = 0.5 + directions / norms[:, None] * radii[:, None]

    params = {"n": n, "count": count, "normal_method": NORMAL_METHOD, "redraws": redraws}
    return _make_sample(points, "radial", params, seed)


def build_sample(spec: Dict[str, Any]) -> Sample:
    """Build a sample from {"method", "n", "k" | "count", "seed"}."""
    method = spec.get("method")
    if method not in METHODS:
        raise SamplingError(f"unknown sampling method {method!r}; expected one of {METHODS}")
    try:
        n = int(spec["n"])
        if method == "grid":
            return grid_sample(n, int(spec["k"]))
        seed = int(spec.get("seed", 0))
        count = int(spec["count"])
    except KeyError as e:
        raise SamplingError(f"{method} sample spec is missing {e}") from e
    if method == "uniform":
        return uniform_rejection_sample(n, count, seed)
    return radial_ball_sample(n, count, seed)


# ============ CSV round trip ============


def sample_to_frame(sample: Sample) -> pd.DataFrame:
    columns = [f"x_{i + 1}" for i in range(sample.n)]
    frame = pd.DataFrame(sample.points, columns=columns)
    frame["f"] = sample.targets
    return frame


def sample_to_file(sample: Sample, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    sample_to_frame(sample).to_csv(path, index=False, float_format="%.17g")
    logger.debug(f"Wrote {sample.m} points to {path}")
    return path


def sample_from_file(path: str, method: str = "file", seed: Optional[int] = None) -> Sample:
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise SampleFileError(f"{path}: {e}") from e

    columns = list(frame.columns)
    if not columns or columns[-1] != "f":
        raise SampleFileError(f"{path}: last column must be 'f', got {columns[-1:]}")
    expected = [f"x_{i + 1}" for i in range(len(columns) - 1)]
    if columns[:-1] != expected or not expected:
        raise SampleFileError(f"{path}: point columns must be {expected or ['x_1', '...']}")

    try:
        values = frame.to_numpy(dtype=np.float64)
    except ValueError as e:
        raise SampleFileError(f"{path}: non-numeric entry ({e})") from e
    if not np.all(np.isfinite(values)):
        row = int(np.flatnonzero(~np.all(np.isfinite(values), axis=1))[0])
        raise SampleFileError(f"{path}: row {row + 1} has a missing or non-finite value")

    points, targets = values[:, :-1], values[:, -1]
    n = points.shape[1]
    outside = ~in_ball_batch(points, BallDomain(n), tol=BALL_TOL)
    if np.any(outside):
        row = int(np.flatnonzero(outside)[0])
        raise SampleFileError(f"{path}: row {row + 1} lies outside K")
    mismatch = np.abs(targets - f_eval_batch(points)) > TARGET_TOL
    if np.any(mismatch):
        row = int(np.flatnonzero(mismatch)[0])
        raise SampleFileError(f"{path}: row {row + 1} has f != f(point)")

    return Sample(np.ascontiguousarray(points), targets.copy(), method, {"n": n, "path": path}, seed)
