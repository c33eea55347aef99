"""Seeded instance generators: two-cluster sphere/ball models, the five-point
configuration, and the five-ball family around it.

All randomness flows through numpy's Philox counter-based bit generator keyed
by the 64-bit ``seed`` field, so identical specs reproduce identical point
sets across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from lpkmeans.core import Partition, PointSet

__all__ = [
    "GenSpec",
    "FIVE_POINT_COORDS",
    "FIVE_POINT_ASSIGN",
    "generate",
    "reference_nontight_matrix",
    "recovery_threshold",
]

_SQ3 = math.sqrt(3.0)

# Equilateral triangle in the z=0 plane plus a vertical pair through its
# centroid; the two-cluster optimum groups points {0,3} and {1,2,4}.
FIVE_POINT_COORDS = np.array(
    [
        [0.0, _SQ3 / 3.0, 0.0],
        [0.5, -_SQ3 / 6.0, 0.0],
        [-0.5, -_SQ3 / 6.0, 0.0],
        [0.0, 0.0, 0.5],
        [0.0, 0.0, -0.5],
    ]
)
FIVE_POINT_ASSIGN = np.array([0, 1, 1, 0, 1])

# Block pattern (numerators over 14 n') of the reference fractional solution
# that undercuts every partition matrix on the five-ball family.
_NONTIGHT_BLOCKS = np.array(
    [
        [6, 1, 1, 3, 3],
        [1, 6, 1, 3, 3],
        [1, 1, 6, 3, 3],
        [3, 3, 3, 5, 0],
        [3, 3, 3, 0, 5],
    ],
    dtype=np.float64,
)

_MODELS = ("ssm", "sbm", "five_point", "five_ball")


@dataclass(frozen=True)
class GenSpec:
    """Parameters of a synthetic instance.

    model: one of "ssm", "sbm" (two clusters on/in unit spheres separated by
    ``delta``), "five_point", or "five_ball" (``n_prime`` points per ball of
    radius ``radius`` around each five-point center, padded to R^m).
    ``r1`` is the small-cluster size ratio 2|C1|/n, so |C1| = r1*n/2 and
    |C2| = (2-r1)*n/2 must both be integers.
    """

    model: str
    n: int = 0
    m: int = 3
    delta: float = 0.0
    r1: float = 1.0
    radius: float = 0.0
    n_prime: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.model not in _MODELS:
            raise ValueError(f"unknown model {self.model!r}, expected one of {_MODELS}")
        if self.model in ("ssm", "sbm"):
            if self.m < 1:
                raise ValueError("m must be >= 1")
            if self.delta < 0:
                raise ValueError("delta must be >= 0")
            if not (0.0 < self.r1 <= 1.0):
                raise ValueError("r1 must lie in (0, 1]")
            s1 = self.r1 * self.n / 2.0
            if self.n < 2 or abs(s1 - round(s1)) > 1e-9 or round(s1) < 1:
                raise ValueError(
                    f"cluster sizes r1*n/2 = {s1} and (2-r1)*n/2 must be positive integers"
                )
        else:
            if self.m < 3:
                raise ValueError("five_point/five_ball require m >= 3")
            if self.model == "five_ball":
                if self.n_prime < 1:
                    raise ValueError("n_prime must be >= 1")
                if self.radius < 0:
                    raise ValueError("radius must be >= 0")
            if self.n not in (0, self.total_points()):
                raise ValueError(f"n={self.n} inconsistent with model (expected {self.total_points()})")

    def total_points(self) -> int:
        if self.model == "five_point":
            return 5
        if self.model == "five_ball":
            return 5 * self.n_prime
        return self.n


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _unit_sphere(rng: np.random.Generator, count: int, m: int) -> np.ndarray:
    g = rng.standard_normal((count, m))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    # a zero Gaussian vector has probability zero; guard against it anyway
    norms[norms == 0.0] = 1.0
    return g / norms


def _unit_ball(rng: np.random.Generator, count: int, m: int) -> np.ndarray:
    directions = _unit_sphere(rng, count, m)
    radii = rng.random(count) ** (1.0 / m)
    return directions * radii[:, None]


def generate(spec: GenSpec) -> tuple[PointSet, Partition]:
    """Sample points and return them with the planted two-cluster partition."""
    rng = _rng(spec.seed)
    if spec.model in ("ssm", "sbm"):
        n1 = round(spec.r1 * spec.n / 2.0)
        n2 = spec.n - n1
        sampler = _unit_sphere if spec.model == "ssm" else _unit_ball
        first = sampler(rng, n1, spec.m)
        second = sampler(rng, n2, spec.m)
        second[:, 0] += spec.delta
        coords = np.vstack([first, second])
        assign = np.concatenate([np.zeros(n1, dtype=np.int64), np.ones(n2, dtype=np.int64)])
        return PointSet(coords), Partition(2, assign)

    centers = np.zeros((5, spec.m))
    centers[:, :3] = FIVE_POINT_COORDS
    if spec.model == "five_point":
        return PointSet(centers), Partition(2, FIVE_POINT_ASSIGN.copy())

    blocks = []
    for p in range(5):
        offsets = _unit_ball(rng, spec.n_prime, spec.m) * spec.radius
        blocks.append(centers[p] + offsets)
    coords = np.vstack(blocks)
    assign = np.repeat(FIVE_POINT_ASSIGN, spec.n_prime)
    return PointSet(coords), Partition(2, assign)


def reference_nontight_matrix(n_prime: int) -> np.ndarray:
    """Feasible non-partition matrix for the five-ball family (trace 2, unit
    row sums), with constant blocks over the five groups of n' points."""
    if n_prime < 1:
        raise ValueError("n_prime must be >= 1")
    ones = np.ones((n_prime, n_prime))
    return np.kron(_NONTIGHT_BLOCKS, ones) / (14.0 * n_prime)


def recovery_threshold(r1: float) -> float:
    """Center separation above which the relaxation provably recovers planted
    sphere-model clusters with high probability: 1 + sqrt(1 + 2/r1)."""
    if not (0.0 < r1 <= 1.0):
        raise ValueError("r1 must lie in (0, 1]")
    return 1.0 + math.sqrt(1.0 + 2.0 / r1)
