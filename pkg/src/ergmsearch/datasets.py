"""Bundled fixtures: one small classic network plus seeded generators.

Generators draw all randomness from PCG64 with fixed seeds so fixtures are
identical across runs and platforms.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .ingest import ingest_text
from .network import AttributeColumn, CATEGORICAL, NUMERIC, Network


def _data_text(name: str) -> str:
    return (resources.files(__package__) / "data" / name).read_text()


def load_florentine() -> Network:
    """Marriage ties among 16 Renaissance Florentine families (undirected,
    one numeric wealth attribute, one isolate)."""
    return ingest_text(_data_text("florentine_edges.csv"), directed=False,
                       attr_text=_data_text("florentine_attrs.csv"))


def erdos_renyi(n: int, p: float, directed: bool = False,
                seed: int = 0) -> Network:
    rng = np.random.Generator(np.random.PCG64(seed))
    edges = []
    for i in range(n):
        for j in range(n):
            if i == j or (not directed and j <= i):
                continue
            if rng.random() < p:
                edges.append((i, j))
    return Network(n, directed, edges)


def planted_homophily(n: int = 40, p_within: float = 0.25,
                      p_between: float = 0.02, seed: int = 11) -> Network:
    """Two equal groups with strong within-group tie probability."""
    rng = np.random.Generator(np.random.PCG64(seed))
    group = ["a" if i < n // 2 else "b" for i in range(n)]
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            p = p_within if group[i] == group[j] else p_between
            if rng.random() < p:
                edges.append((i, j))
    return Network(n, False, edges,
                   {"group": AttributeColumn(CATEGORICAL, tuple(group))})


def planted_triangles(n: int = 30, base_p: float = 0.02,
                      planted: int = 30, seed: int = 7) -> Network:
    """Sparse background plus explicitly closed triples: high clustering."""
    rng = np.random.Generator(np.random.PCG64(seed))
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < base_p:
                edges.add((i, j))
    for _ in range(planted):
        i, j, k = sorted(rng.choice(n, size=3, replace=False).tolist())
        edges.update([(i, j), (i, k), (j, k)])
    return Network(n, False, edges)


def directed_advice(n: int = 18, seed: int = 3) -> Network:
    """Synthetic directed advice-seeking fixture with reciprocation, role
    levels, and tenure."""
    rng = np.random.Generator(np.random.PCG64(seed))
    arcs = set()
    for i in range(n):
        for j in range(n):
            if i != j and rng.random() < 0.12:
                arcs.add((i, j))
    for i, j in sorted(arcs):
        if (j, i) not in arcs and rng.random() < 0.5:
            arcs.add((j, i))
    levels = ["junior", "mid", "senior"]
    role = [levels[i % 3] for i in range(n)]
    tenure = np.round(rng.uniform(1.0, 20.0, size=n), 1).tolist()
    return Network(n, True, arcs, {
        "role": AttributeColumn(CATEGORICAL, tuple(role)),
        "tenure": AttributeColumn(NUMERIC, tuple(tenure)),
    })


BUNDLED = {
    "florentine": load_florentine,
    "planted_homophily": planted_homophily,
    "planted_triangles": planted_triangles,
    "er_small": lambda: erdos_renyi(20, 0.15, directed=False, seed=5),
    "advice_directed": directed_advice,
}


def load_bundled(name: str) -> Network:
    try:
        return BUNDLED[name]()
    except KeyError:
        raise KeyError(f"unknown bundled dataset {name!r}; "
                       f"available: {sorted(BUNDLED)}") from None
