"""ERGM statistic catalog: global statistics, change scores, term universe.

Change-score convention: ``delta(i, j) = s(y with edge present) - s(y with
edge absent)``, independent of the edge's current state.  Shared-partner
statistics on directed networks use outgoing two-paths (partners k with
i->k and k->j); ``triangle`` on directed networks counts triangles of the
undirected skeleton.  Both choices are exercised against brute-force
recomputation in the test suite.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from math import exp
from typing import Iterable, Optional, Sequence

import numpy as np

from .network import CATEGORICAL, NUMERIC, Network

DECAY_GRID = (0.25, 0.5, 0.75)

MAX_SPEC_TERMS = 8


class TermError(ValueError):
    """Raised for malformed or inadmissible terms."""


@dataclass(frozen=True)
class _Family:
    name: str
    order: int
    needs_attr: Optional[str] = None    # required attribute kind, or None
    needs_decay: bool = False
    directed_only: bool = False
    undirected_only: bool = False
    is_count: bool = True               # integer-valued statistic


_FAMILY_LIST = [
    _Family("edges", 0),
    _Family("mutual", 1, directed_only=True),
    _Family("triangle", 2),
    _Family("twopath", 3),
    _Family("gwesp", 4, needs_decay=True, is_count=False),
    _Family("gwdsp", 5, needs_decay=True, is_count=False),
    _Family("gwdegree", 6, needs_decay=True, undirected_only=True, is_count=False),
    _Family("gwidegree", 7, needs_decay=True, directed_only=True, is_count=False),
    _Family("gwodegree", 8, needs_decay=True, directed_only=True, is_count=False),
    _Family("nodematch", 9, needs_attr=CATEGORICAL),
    _Family("nodefactor", 10, needs_attr=CATEGORICAL),
    _Family("nodecov", 11, needs_attr=NUMERIC, is_count=False),
    _Family("absdiff", 12, needs_attr=NUMERIC, is_count=False),
]

FAMILIES = {f.name: f for f in _FAMILY_LIST}


@dataclass(frozen=True)
class TermSpec:
    """One ERGM statistic with bound parameters."""

    family: str
    attribute: Optional[str] = None
    decay: Optional[float] = None

    def __post_init__(self):
        fam = FAMILIES.get(self.family)
        if fam is None:
            raise TermError(f"unknown term family {self.family!r}")
        if fam.needs_attr and self.attribute is None:
            raise TermError(f"{self.family} requires an attribute")
        if not fam.needs_attr and self.attribute is not None:
            raise TermError(f"{self.family} takes no attribute")
        if fam.needs_decay:
            if self.decay is None:
                raise TermError(f"{self.family} requires a decay")
            if not self.decay >= 0:
                raise TermError(f"decay must be nonnegative, got {self.decay}")
        elif self.decay is not None:
            raise TermError(f"{self.family} takes no decay")

    @property
    def canonical_name(self) -> str:
        if self.attribute is not None:
            return f"{self.family}(attr={self.attribute})"
        if self.decay is not None:
            return f"{self.family}(decay={self.decay!r})"
        return self.family

    def sort_key(self) -> tuple:
        return (FAMILIES[self.family].order, self.attribute or "", self.decay or 0.0)

    def __str__(self):
        return self.canonical_name


_TERM_RE = re.compile(
    r"^\s*([a-z]+)\s*(?:\(\s*(attr|decay)\s*=\s*([^)\s]+)\s*\))?\s*$")


def parse_term(text: str) -> TermSpec:
    """Parse the canonical grammar: ``family``, ``family(attr=NAME)``,
    ``family(decay=X)``.  Round-trips bit-exactly with ``canonical_name``."""
    m = _TERM_RE.match(text)
    if not m:
        raise TermError(f"cannot parse term {text!r}")
    family, key, value = m.group(1), m.group(2), m.group(3)
    if key == "attr":
        return TermSpec(family, attribute=value)
    if key == "decay":
        try:
            decay = float(value)
        except ValueError:
            raise TermError(f"bad decay in {text!r}") from None
        return TermSpec(family, decay=decay)
    return TermSpec(family)


@dataclass(frozen=True)
class ModelSpec:
    """Ordered list of terms.  Structural validity is checked separately by
    :func:`validate_spec` so that raw candidate proposals can be carried
    through the pipeline and rejected with a reason."""

    terms: tuple[TermSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def canonical_name(self) -> str:
        return ",".join(t.canonical_name for t in self.terms)

    def term_names(self) -> list[str]:
        return [t.canonical_name for t in self.terms]

    def __len__(self):
        return len(self.terms)

    def has_family(self, family: str) -> bool:
        return any(t.family == family for t in self.terms)

    def canonicalized(self) -> "ModelSpec":
        """Deterministic term order (catalog order); duplicates dropped."""
        seen = set()
        out = []
        for t in sorted(self.terms, key=TermSpec.sort_key):
            if t.canonical_name not in seen:
                seen.add(t.canonical_name)
                out.append(t)
        return ModelSpec(tuple(out))


def parse_model(terms: Iterable[str]) -> ModelSpec:
    return ModelSpec(tuple(parse_term(t) for t in terms))


# ---------------------------------------------------------------------------
# admissibility and the term universe
# ---------------------------------------------------------------------------


def term_admissible(term: TermSpec, net: Network) -> tuple[bool, Optional[str]]:
    """Feasibility of one term for one network: directionality compatibility,
    attribute availability/kind, and data validity (no missing entries,
    at least two distinct values so the statistic is not collinear/constant).
    """
    fam = FAMILIES[term.family]
    if fam.directed_only and not net.directed:
        return False, f"{term.family} requires a directed network"
    if fam.undirected_only and net.directed:
        return False, f"{term.family} requires an undirected network"
    if fam.needs_attr:
        col = net.attributes.get(term.attribute)
        if col is None:
            return False, f"attribute {term.attribute!r} not present"
        if col.kind != fam.needs_attr:
            return False, (f"attribute {term.attribute!r} is {col.kind}, "
                           f"{term.family} needs {fam.needs_attr}")
        if not col.complete:
            return False, f"attribute {term.attribute!r} has missing entries"
        if col.distinct_count() < 2:
            return False, f"attribute {term.attribute!r} is constant"
    return True, None


@dataclass(frozen=True)
class TermUniverse:
    """Admissible term set for a network, in deterministic catalog order."""

    terms: tuple[TermSpec, ...]

    def __contains__(self, term: TermSpec) -> bool:
        return term.canonical_name in self._names

    def __iter__(self):
        return iter(self.terms)

    def __len__(self):
        return len(self.terms)

    @property
    def _names(self) -> frozenset:
        return frozenset(t.canonical_name for t in self.terms)

    def names(self) -> list[str]:
        return [t.canonical_name for t in self.terms]

    def by_name(self, name: str) -> Optional[TermSpec]:
        for t in self.terms:
            if t.canonical_name == name:
                return t
        return None


def enumerate_universe(net: Network) -> TermUniverse:
    """Rule-based admissible universe: structural families gated on
    directedness, geometrically weighted families instantiated at the fixed
    decay grid, attribute families instantiated per compatible attribute."""
    out: list[TermSpec] = []
    for fam in _FAMILY_LIST:
        if fam.needs_attr:
            for name in sorted(net.attributes):
                cand = TermSpec(fam.name, attribute=name)
                if term_admissible(cand, net)[0]:
                    out.append(cand)
        elif fam.needs_decay:
            for decay in DECAY_GRID:
                cand = TermSpec(fam.name, decay=decay)
                if term_admissible(cand, net)[0]:
                    out.append(cand)
        else:
            cand = TermSpec(fam.name)
            if term_admissible(cand, net)[0]:
                out.append(cand)
    return TermUniverse(tuple(out))


# family pairs that are redundant together regardless of parameters
CONFLICT_PAIRS = (
    ("triangle", "gwesp"),
    ("gwdegree", "gwidegree"),
    ("gwdegree", "gwodegree"),
)


@dataclass(frozen=True)
class SpecValidation:
    ok: bool
    reason: Optional[str] = None


def validate_spec(spec: ModelSpec, universe: TermUniverse) -> SpecValidation:
    """Specification-level filter: terms drawn from the universe, baseline
    edges present, no duplicates, no conflicting pairs, 1..8 terms."""
    if not 1 <= len(spec.terms) <= MAX_SPEC_TERMS:
        return SpecValidation(False, f"term count {len(spec.terms)} outside [1, {MAX_SPEC_TERMS}]")
    names = [t.canonical_name for t in spec.terms]
    seen = set()
    for n in names:
        if n in seen:
            return SpecValidation(False, f"duplicate term {n}")
        seen.add(n)
    for t in spec.terms:
        if t not in universe:
            return SpecValidation(False, f"term {t.canonical_name} not in universe")
    if not spec.has_family("edges"):
        return SpecValidation(False, "missing baseline edges term")
    fams = {t.family for t in spec.terms}
    for a, b in CONFLICT_PAIRS:
        if a in fams and b in fams:
            return SpecValidation(False, f"conflicting terms {a} and {b}")
    return SpecValidation(True)


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------


def gw_weight(count: int, decay: float) -> float:
    """Geometric down-weighting e^d * (1 - (1 - e^-d)^k); zero at k = 0."""
    return exp(decay) * (1.0 - (1.0 - exp(-decay)) ** count)


def _require_admissible(term: TermSpec, net: Network):
    ok, reason = term_admissible(term, net)
    if not ok:
        raise TermError(f"inadmissible term {term.canonical_name}: {reason}")


def _skeleton_edges(net: Network):
    if not net.directed:
        return net.edges
    return {(min(i, j), max(i, j)) for (i, j) in net.edges}


def statistic(term: TermSpec, net: Network) -> float:
    """Evaluate one global statistic s(y)."""
    _require_admissible(term, net)
    fam = term.family
    if fam == "edges":
        return float(net.edge_count)
    if fam == "mutual":
        return sum(1 for (i, j) in net.edges if (j, i) in net.edges) / 2.0
    if fam == "triangle":
        total = sum(len(net.neighbors(i) & net.neighbors(j))
                    for (i, j) in _skeleton_edges(net))
        return total / 3.0
    if fam == "twopath":
        if net.directed:
            return float(sum(
                len(net.in_neighbors(v)) * len(net.out_neighbors(v))
                - len(net.in_neighbors(v) & net.out_neighbors(v))
                for v in range(net.node_count)))
        return float(sum(d * (d - 1) // 2 for d in net.degrees()))
    if fam == "gwesp":
        if net.directed:
            return sum(gw_weight(len(net.out_neighbors(i) & net.in_neighbors(j)),
                                 term.decay) for (i, j) in net.edges)
        return sum(gw_weight(len(net.neighbors(i) & net.neighbors(j)),
                             term.decay) for (i, j) in net.edges)
    if fam == "gwdsp":
        total = 0.0
        for i, j in net.dyads():
            if net.directed:
                sp = len(net.out_neighbors(i) & net.in_neighbors(j))
            else:
                sp = len(net.neighbors(i) & net.neighbors(j))
            total += gw_weight(sp, term.decay)
        return total
    if fam == "gwdegree":
        return sum(gw_weight(d, term.decay) for d in net.degrees())
    if fam == "gwidegree":
        return sum(gw_weight(d, term.decay) for d in net.in_degrees())
    if fam == "gwodegree":
        return sum(gw_weight(d, term.decay) for d in net.out_degrees())

    col = net.attributes[term.attribute]
    x = col.values
    if fam == "nodematch":
        return float(sum(1 for (i, j) in net.edges if x[i] == x[j]))
    if fam == "nodefactor":
        base = col.levels()[0]
        return float(sum((x[i] != base) + (x[j] != base) for (i, j) in net.edges))
    if fam == "nodecov":
        return float(sum(x[i] + x[j] for (i, j) in net.edges))
    if fam == "absdiff":
        return float(sum(abs(x[i] - x[j]) for (i, j) in net.edges))
    raise TermError(f"unhandled family {fam}")  # pragma: no cover


def model_statistics(spec: ModelSpec, net: Network) -> np.ndarray:
    """Statistic vector in spec order."""
    return np.array([statistic(t, net) for t in spec.terms], dtype=float)


# ---------------------------------------------------------------------------
# change scores
#
# Computed against a minimal adjacency protocol (has_edge / out_neighbors /
# in_neighbors / neighbors / directed / attributes) so both the immutable
# Network and the sampler's mutable graph state share one implementation.
# ---------------------------------------------------------------------------


def change_score(term: TermSpec, adj, i: int, j: int) -> float:
    """Change in the statistic when edge (i, j) is toggled on, evaluated
    regardless of the edge's current state."""
    if i == j:
        raise TermError("change score undefined for self-loops")
    fam = term.family
    if fam == "edges":
        return 1.0
    if fam == "mutual":
        return 1.0 if adj.has_edge(j, i) else 0.0

    if fam in ("nodematch", "nodefactor", "nodecov", "absdiff"):
        x = adj.attributes[term.attribute].values
        if fam == "nodematch":
            return 1.0 if x[i] == x[j] else 0.0
        if fam == "nodefactor":
            base = adj.attributes[term.attribute].levels()[0]
            return float((x[i] != base) + (x[j] != base))
        if fam == "nodecov":
            return float(x[i] + x[j])
        return float(abs(x[i] - x[j]))

    directed = adj.directed
    if fam == "triangle":
        if directed and adj.has_edge(j, i):
            return 0.0  # skeleton edge exists either way
        ni = adj.neighbors(i) - {j}
        nj = adj.neighbors(j) - {i}
        return float(len(ni & nj))
    if fam == "twopath":
        if directed:
            rev = 1 if adj.has_edge(j, i) else 0
            return float(len(adj.out_neighbors(j)) - rev
                         + len(adj.in_neighbors(i)) - rev)
        return float(len(adj.neighbors(i) - {j}) + len(adj.neighbors(j) - {i}))
    if fam == "gwdegree":
        d = term.decay
        di = len(adj.neighbors(i) - {j})
        dj = len(adj.neighbors(j) - {i})
        return (gw_weight(di + 1, d) - gw_weight(di, d)
                + gw_weight(dj + 1, d) - gw_weight(dj, d))
    if fam == "gwidegree":
        d = len(adj.in_neighbors(j) - {i})
        return gw_weight(d + 1, term.decay) - gw_weight(d, term.decay)
    if fam == "gwodegree":
        d = len(adj.out_neighbors(i) - {j})
        return gw_weight(d + 1, term.decay) - gw_weight(d, term.decay)
    if fam == "gwesp":
        return _gwesp_delta(adj, i, j, term.decay, directed)
    if fam == "gwdsp":
        return _gwdsp_delta(adj, i, j, term.decay, directed)
    raise TermError(f"unhandled family {fam}")  # pragma: no cover


def _gwesp_delta(adj, i, j, decay, directed) -> float:
    if directed:
        # own contribution: partners k with i->k->j are unaffected by (i,j)
        delta = gw_weight(len(adj.out_neighbors(i) & adj.in_neighbors(j)), decay)
        out_i = adj.out_neighbors(i) - {j}
        in_j = adj.in_neighbors(j) - {i}
        # (i,j) becomes the first leg of i->j->b for existing arcs (i,b)
        for b in adj.out_neighbors(j):
            if b != i and b in out_i:
                sp = len(out_i & adj.in_neighbors(b))
                delta += gw_weight(sp + 1, decay) - gw_weight(sp, decay)
        # (i,j) becomes the second leg of a->i->j for existing arcs (a,j)
        for a in adj.in_neighbors(i):
            if a != j and a in in_j:
                sp = len(adj.out_neighbors(a) & in_j)
                delta += gw_weight(sp + 1, decay) - gw_weight(sp, decay)
        return delta
    ni = adj.neighbors(i) - {j}
    nj = adj.neighbors(j) - {i}
    common = ni & nj
    delta = gw_weight(len(common), decay)
    for k in common:
        nk = adj.neighbors(k)
        sp_ik = len(ni & nk)
        sp_jk = len(nj & nk)
        delta += gw_weight(sp_ik + 1, decay) - gw_weight(sp_ik, decay)
        delta += gw_weight(sp_jk + 1, decay) - gw_weight(sp_jk, decay)
    return delta


def _gwdsp_delta(adj, i, j, decay, directed) -> float:
    delta = 0.0
    if directed:
        out_i = adj.out_neighbors(i) - {j}
        in_j = adj.in_neighbors(j) - {i}
        for b in adj.out_neighbors(j):
            if b == i:
                continue
            sp = len(out_i & adj.in_neighbors(b))
            delta += gw_weight(sp + 1, decay) - gw_weight(sp, decay)
        for a in adj.in_neighbors(i):
            if a == j:
                continue
            sp = len(adj.out_neighbors(a) & in_j)
            delta += gw_weight(sp + 1, decay) - gw_weight(sp, decay)
        return delta
    ni = adj.neighbors(i) - {j}
    nj = adj.neighbors(j) - {i}
    for k in nj:
        if k == i:
            continue
        sp = len(ni & adj.neighbors(k))
        delta += gw_weight(sp + 1, decay) - gw_weight(sp, decay)
    for k in ni:
        if k == j:
            continue
        sp = len(nj & adj.neighbors(k))
        delta += gw_weight(sp + 1, decay) - gw_weight(sp, decay)
    return delta


def change_vector(spec: ModelSpec, adj, i: int, j: int) -> np.ndarray:
    return np.array([change_score(t, adj, i, j) for t in spec.terms], dtype=float)
