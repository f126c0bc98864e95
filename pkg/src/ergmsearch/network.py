"""Binary network representation, structural diagnostics, and metadata.

Networks are immutable after construction: ``toggle`` returns a new value and
never mutates, so instances are safe to share across concurrent readers.
Nodes are dense integer indices ``0..n-1``; external string labels are mapped
at ingestion time (see :mod:`ergmsearch.ingest`).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional


class NetworkError(ValueError):
    """Raised for structurally invalid networks or node references."""


CATEGORICAL = "categorical"
NUMERIC = "numeric"


@dataclass(frozen=True)
class AttributeColumn:
    """One per-node attribute column.

    ``values`` has exactly one entry per node; ``None`` marks a missing
    entry.  Categorical values are label strings, numeric values are finite
    floats.  Columns with missing entries are stored but are not admissible
    for model terms (the term universe skips them).
    """

    kind: str
    values: tuple

    def __post_init__(self):
        if self.kind not in (CATEGORICAL, NUMERIC):
            raise NetworkError(f"unknown attribute kind {self.kind!r}")
        present = [v for v in self.values if v is not None]
        if not present:
            raise NetworkError("attribute column has no observed values")
        if self.kind == NUMERIC:
            for v in present:
                if not isinstance(v, (int, float)) or not math.isfinite(v):
                    raise NetworkError(f"non-finite numeric attribute value {v!r}")
        else:
            for v in present:
                if not isinstance(v, str):
                    raise NetworkError(f"categorical value {v!r} is not a string")

    @property
    def complete(self) -> bool:
        return all(v is not None for v in self.values)

    def levels(self) -> list[str]:
        """Distinct categorical labels, lexicographically sorted."""
        if self.kind != CATEGORICAL:
            raise NetworkError("levels() is only defined for categorical columns")
        return sorted({v for v in self.values if v is not None})

    def distinct_count(self) -> int:
        return len({v for v in self.values if v is not None})


class Network:
    """Immutable binary graph with typed node attributes.

    Undirected edges are stored once under the canonical ordering ``i < j``;
    directed edges are ordered pairs.  Self-loops are rejected.
    """

    __slots__ = ("node_count", "directed", "edges", "attributes",
                 "_out", "_in", "_und")

    def __init__(self, node_count: int, directed: bool,
                 edges: Iterable[tuple[int, int]],
                 attributes: Optional[Mapping[str, AttributeColumn]] = None):
        if node_count < 0:
            raise NetworkError("node_count must be nonnegative")
        canon = set()
        for i, j in edges:
            if i == j:
                raise NetworkError(f"self-loop ({i},{i}) is not allowed")
            if not (0 <= i < node_count and 0 <= j < node_count):
                raise NetworkError(f"edge ({i},{j}) out of range for n={node_count}")
            canon.add((i, j) if directed or i < j else (j, i))
        attrs = dict(attributes or {})
        for name, col in attrs.items():
            if len(col.values) != node_count:
                raise NetworkError(
                    f"attribute {name!r} has {len(col.values)} entries, expected {node_count}")

        object.__setattr__(self, "node_count", node_count)
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "edges", frozenset(canon))
        object.__setattr__(self, "attributes", attrs)

        out = [set() for _ in range(node_count)]
        inn = [set() for _ in range(node_count)]
        und = [set() for _ in range(node_count)]
        for i, j in canon:
            out[i].add(j)
            inn[j].add(i)
            und[i].add(j)
            und[j].add(i)
            if not directed:
                out[j].add(i)
                inn[i].add(j)
        object.__setattr__(self, "_out", tuple(frozenset(s) for s in out))
        object.__setattr__(self, "_in", tuple(frozenset(s) for s in inn))
        object.__setattr__(self, "_und", tuple(frozenset(s) for s in und))

    def __setattr__(self, *a):
        raise AttributeError("Network is immutable")

    def __eq__(self, other):
        return (isinstance(other, Network)
                and self.node_count == other.node_count
                and self.directed == other.directed
                and self.edges == other.edges
                and self.attributes == other.attributes)

    def __hash__(self):
        return hash((self.node_count, self.directed, self.edges))

    def __repr__(self):
        kind = "directed" if self.directed else "undirected"
        return f"Network(n={self.node_count}, {kind}, |E|={self.edge_count})"

    # -- structure accessors ------------------------------------------------

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def dyad_count(self) -> int:
        n = self.node_count
        return n * (n - 1) if self.directed else n * (n - 1) // 2

    def has_edge(self, i: int, j: int) -> bool:
        if self.directed:
            return (i, j) in self.edges
        return (min(i, j), max(i, j)) in self.edges

    def out_neighbors(self, i: int) -> frozenset:
        return self._out[i]

    def in_neighbors(self, i: int) -> frozenset:
        return self._in[i]

    def neighbors(self, i: int) -> frozenset:
        """Neighbors in the undirected skeleton (either tie direction)."""
        return self._und[i]

    def degrees(self) -> list[int]:
        return [len(s) for s in self._und] if not self.directed else [
            len(self._out[i]) + len(self._in[i]) for i in range(self.node_count)]

    def in_degrees(self) -> list[int]:
        return [len(s) for s in self._in]

    def out_degrees(self) -> list[int]:
        return [len(s) for s in self._out]

    def dyads(self) -> list[tuple[int, int]]:
        """All dyads in deterministic order (ordered pairs when directed)."""
        n = self.node_count
        if self.directed:
            return [(i, j) for i in range(n) for j in range(n) if i != j]
        return [(i, j) for i in range(n) for j in range(i + 1, n)]

    def toggle(self, i: int, j: int) -> "Network":
        """Return a copy with edge (i, j) flipped; the original is unchanged."""
        if i == j:
            raise NetworkError("cannot toggle a self-loop")
        if not (0 <= i < self.node_count and 0 <= j < self.node_count):
            raise NetworkError(f"node out of range: ({i},{j})")
        key = (i, j) if self.directed else (min(i, j), max(i, j))
        edges = set(self.edges)
        if key in edges:
            edges.remove(key)
        else:
            edges.add(key)
        return Network(self.node_count, self.directed, edges, self.attributes)


@dataclass(frozen=True)
class DegreeStats:
    min: int
    mean: float
    max: int


@dataclass(frozen=True)
class Diagnostics:
    """Structural summary of a network (the pipeline's ``diagnose`` output)."""

    node_count: int
    dyad_count: int
    edge_count: int
    density: float
    clustering: float
    degree: Optional[DegreeStats] = None          # undirected only
    in_degree: Optional[DegreeStats] = None       # directed only
    out_degree: Optional[DegreeStats] = None      # directed only
    reciprocity: Optional[float] = None           # directed only
    reciprocity_zero_edges: bool = False          # marker: reciprocity forced to 0

    def to_dict(self) -> dict:
        d = {
            "node_count": self.node_count,
            "dyad_count": self.dyad_count,
            "edge_count": self.edge_count,
            "density": self.density,
            "clustering": self.clustering,
        }
        if self.degree is not None:
            d["degree"] = {"min": self.degree.min, "mean": self.degree.mean,
                           "max": self.degree.max}
        if self.in_degree is not None:
            d["in_degree"] = {"min": self.in_degree.min, "mean": self.in_degree.mean,
                              "max": self.in_degree.max}
        if self.out_degree is not None:
            d["out_degree"] = {"min": self.out_degree.min, "mean": self.out_degree.mean,
                               "max": self.out_degree.max}
        if self.reciprocity is not None:
            d["reciprocity"] = self.reciprocity
            d["reciprocity_zero_edges"] = self.reciprocity_zero_edges
        return d


@dataclass(frozen=True)
class AttributeInfo:
    name: str
    kind: str
    complete: bool
    level_count: Optional[int] = None  # distinct observed values

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind, "complete": self.complete}
        if self.level_count is not None:
            d["level_count"] = self.level_count
        return d


@dataclass(frozen=True)
class Metadata:
    """Graph type and available node attributes."""

    directed: bool
    attributes: tuple[AttributeInfo, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {"directed": self.directed,
                "attributes": [a.to_dict() for a in self.attributes]}


def _degree_stats(values: list[int]) -> DegreeStats:
    if not values:
        return DegreeStats(0, 0.0, 0)
    return DegreeStats(min(values), sum(values) / len(values), max(values))


def diagnostics(net: Network) -> Diagnostics:
    """Compute structural diagnostics: density, degrees, clustering, reciprocity.

    Clustering is global transitivity (3 * triangles / connected triples),
    computed on the undirected skeleton for directed networks.  Reciprocity is
    the fraction of directed edges whose reverse edge exists, reported as 0
    with a zero-edge marker when the network has no edges.
    """
    n = net.node_count
    nd = net.dyad_count
    m = net.edge_count
    density = m / nd if nd > 0 else 0.0

    # transitivity on the skeleton
    triples = 0
    closed = 0
    for v in range(n):
        nbrs = net.neighbors(v)
        k = len(nbrs)
        triples += k * (k - 1) // 2
        nbrs_list = sorted(nbrs)
        for a_idx in range(len(nbrs_list)):
            for b_idx in range(a_idx + 1, len(nbrs_list)):
                if nbrs_list[b_idx] in net.neighbors(nbrs_list[a_idx]):
                    closed += 1
    clustering = closed / triples if triples > 0 else 0.0

    if net.directed:
        recip_zero = m == 0
        recip = 0.0 if recip_zero else sum(
            1 for (i, j) in net.edges if (j, i) in net.edges) / m
        return Diagnostics(
            node_count=n, dyad_count=nd, edge_count=m, density=density,
            clustering=clustering,
            in_degree=_degree_stats(net.in_degrees()),
            out_degree=_degree_stats(net.out_degrees()),
            reciprocity=recip, reciprocity_zero_edges=recip_zero)
    return Diagnostics(
        node_count=n, dyad_count=nd, edge_count=m, density=density,
        clustering=clustering, degree=_degree_stats(net.degrees()))


def metadata(net: Network) -> Metadata:
    infos = []
    for name in sorted(net.attributes):
        col = net.attributes[name]
        infos.append(AttributeInfo(
            name=name, kind=col.kind, complete=col.complete,
            level_count=col.distinct_count()))
    return Metadata(directed=net.directed, attributes=tuple(infos))


@dataclass(frozen=True)
class GeodesicDistribution:
    """Histogram of shortest-path lengths over all dyads."""

    by_distance: dict
    unreachable: int

    def total(self) -> int:
        return sum(self.by_distance.values()) + self.unreachable


def geodesic_distribution(net: Network) -> GeodesicDistribution:
    """Shortest-path-length counts over all dyads (BFS from every source).

    Directed networks use directed paths over ordered dyads; undirected use
    unordered dyads.  The histogram totals ``dyad_count``.
    """
    n = net.node_count
    counts: dict[int, int] = {}
    reached_pairs = 0
    step = net.out_neighbors if net.directed else net.neighbors
    for src in range(n):
        dist = {src: 0}
        q = deque([src])
        while q:
            u = q.popleft()
            for w in step(u):
                if w not in dist:
                    dist[w] = dist[u] + 1
                    q.append(w)
        for node, d in dist.items():
            if node == src:
                continue
            if net.directed or node > src:
                counts[d] = counts.get(d, 0) + 1
                reached_pairs += 1
    return GeodesicDistribution(by_distance=dict(sorted(counts.items())),
                                unreachable=net.dyad_count - reached_pairs)
