import numpy as np
import pytest

from ergmsearch.network import AttributeColumn, Network


def random_network(seed: int, n: int = 8, directed: bool = False,
                   p: float = 0.35, with_attrs: bool = True) -> Network:
    """Seeded random attributed network for property-style tests."""
    rng = np.random.Generator(np.random.PCG64(seed))
    edges = []
    for i in range(n):
        for j in range(n):
            if i == j or (not directed and j <= i):
                continue
            if rng.random() < p:
                edges.append((i, j))
    attrs = {}
    if with_attrs:
        labels = ("red", "blue", "green")
        attrs["club"] = AttributeColumn(
            "categorical",
            tuple(labels[int(rng.integers(0, len(labels)))] for _ in range(n)))
        attrs["score"] = AttributeColumn(
            "numeric", tuple(float(np.round(rng.uniform(0, 5), 2))
                             for _ in range(n)))
    return Network(n, directed, edges, attrs)


@pytest.fixture
def net_factory():
    return random_network
