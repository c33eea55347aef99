import numpy as np
import pytest

from lpkmeans.core import Partition, PointSet, squared_distances
from lpkmeans.generators import GenSpec, generate


@pytest.fixture(scope="session")
def five_point():
    points, planted = generate(GenSpec("five_point"))
    return points, planted, squared_distances(points)


def random_partition(rng: np.random.Generator, n: int, k: int) -> Partition:
    """Uniform random surjective assignment of n points to k clusters."""
    while True:
        assign = rng.integers(0, k, size=n)
        if np.unique(assign).size == k:
            return Partition(k, assign)


def random_points(rng: np.random.Generator, n: int, m: int, scale: float = 1.0) -> PointSet:
    return PointSet(rng.normal(scale=scale, size=(n, m)))
