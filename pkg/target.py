"""
Counterexample target f(x) = sum_i (x_i - 1/2)^2 on the ball K = B(1/2,...,1/2; 1/2).

f ranges over [0, 1/4] on K: 1/4 on the boundary sphere dK, 1/8 on the inner sphere dC of
radius 1/sqrt(8). The constant-network oracles below are closed-form moments of the
uniform law on K, so they can validate the samplers without depending on them.
"""

import math
from dataclasses import dataclass
from typing import Iterable, List

import numpy as np
from scipy.special import gamma

from network import DimensionError


@dataclass(frozen=True)
class TheoremConstants:
    eta: float = 1.0 / 16.0
    inner_radius: float = 1.0 / math.sqrt(8.0)
    boundary_value: float = 0.25
    inner_value: float = 0.125


THEOREM = TheoremConstants()


@dataclass(frozen=True)
class BallDomain:
    n: int
    radius: float = 0.5

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be >= 1, got {self.n}")

    @property
    def center(self) -> np.ndarray:
        return np.full(self.n, 0.5)


def f_eval(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(np.sum((x - 0.5) ** 2))


def f_eval_batch(X) -> np.ndarray:
    """f over the rows of an (m, n) array."""
    X = np.asarray(X, dtype=np.float64)
    return np.sum((X - 0.5) ** 2, axis=-1)


def in_ball(x, domain: BallDomain) -> bool:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (domain.n,):
        raise DimensionError(f"expected a point of dimension {domain.n}, got shape {x.shape}")
    return bool(np.sum((x - domain.center) ** 2) <= domain.radius ** 2)


def in_ball_batch(X, domain: BallDomain, tol: float = 0.0) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != domain.n:
        raise DimensionError(f"expected an (m, {domain.n}) array, got shape {X.shape}")
    return np.sum((X - domain.center) ** 2, axis=1) <= domain.radius ** 2 + tol


# ============ Constant-network oracles ============


def const_supnorm(c: float) -> float:
    """Exact sup over K of |f - c|; f takes every value in [0, 1/4] on K."""
    return max(abs(c), abs(THEOREM.boundary_value - c))


def radial_moment(n: int, power: int) -> float:
    """E[r^power] for the uniform law on K (radial density ~ r^(n-1) on [0, 1/2])."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    return n / (n + power) * 0.5 ** power


def const_mse_expected(c: float, n: int) -> float:
    """Expected squared error of the constant c under the uniform law on K."""
    return radial_moment(n, 4) - 2.0 * c * radial_moment(n, 2) + c * c


def best_constant(n: int) -> float:
    """MSE-minimizing constant E[r^2] = n / (4(n + 2))."""
    return radial_moment(n, 2)


def constant_loss_table(n: int, constants: Iterable[float] = (1 / 16, 2 / 16, 3 / 16, 4 / 16)) -> List[dict]:
    return [
        {"c": c, "mse_expected": const_mse_expected(c, n), "supnorm": const_supnorm(c)}
        for c in constants
    ]


def ball_volume(n: int, radius: float = 0.5) -> float:
    return math.pi ** (n / 2) / gamma(n / 2 + 1) * radius ** n


def cube_acceptance_rate(n: int) -> float:
    """Share of uniform [0,1]^n draws that land in K."""
    return ball_volume(n, 0.5)


def sphere_points(n: int, radius: float, count: int, seed: int) -> np.ndarray:
    """Seeded uniform points on the sphere of the given radius about the center."""
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((count, n))
    norms = np.linalg.norm(directions, axis=1)
    # zero-norm draws have probability zero; redraw to stay well defined
    while np.any(norms == 0.0):
        bad = norms == 0.0
        directions[bad] = rng.standard_normal((int(bad.sum()), n))
        norms = np.linalg.norm(directions, axis=1)
    return 0.5 + radius * directions / norms[:, None]
