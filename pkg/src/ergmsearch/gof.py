"""Simulation-based goodness of fit.

Simulates from the fitted model and standardizes observed auxiliary
statistics against the simulated distribution: degree counts (in/out for
directed networks), edgewise shared partners, and geodesic distances.
Adequacy is ``max |z| <= tau``; the degeneracy guard compares the mean
simulated edge count against the observed one with tolerance
``max(5, 0.25 |E|)``.

Bin layout is fixed so the adequacy decision is deterministic: degrees
0..max seen, shared partners 0..10 plus an overflow bin, geodesics 1..7, an
"8+" bin, and unreachable.  Simulation bins whose expected count falls below
5 are pooled into their neighbor before z-scoring.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .network import Network
from .sampler import MutableGraph, SimControls, simulate
from .terms import ModelSpec

DEFAULT_TAU = 2.5
GOF_DRAWS = 200
ESP_MAX = 10          # exact bins 0..10, then overflow
GEO_MAX = 7           # exact bins 1..7, then "8+", then unreachable
MIN_EXPECTED = 5.0


def epsilon_edges(edge_count: int) -> float:
    """Degeneracy tolerance band for the simulated mean edge count."""
    return max(5.0, 0.25 * edge_count)


def gof_controls(net: Network, seed: int, draws: int = GOF_DRAWS) -> SimControls:
    nd = max(net.dyad_count, 1)
    return SimControls(burn_in=20 * nd, thin=nd, draws=draws, seed=seed)


# ---------------------------------------------------------------------------
# auxiliary distributions for one network state
# ---------------------------------------------------------------------------


def _degree_counts(values: Sequence[int], n: int) -> np.ndarray:
    return np.bincount(values, minlength=n).astype(float)


def _esp_counts(g) -> np.ndarray:
    """Edgewise shared-partner counts, clipped into 0..ESP_MAX plus overflow."""
    out = np.zeros(ESP_MAX + 2)
    if g.directed:
        for i, j in g.edge_set:
            sp = len(g.out_neighbors(i) & g.in_neighbors(j))
            out[min(sp, ESP_MAX + 1)] += 1
    else:
        for i, j in g.edge_set:
            sp = len(g.neighbors(i) & g.neighbors(j))
            out[min(sp, ESP_MAX + 1)] += 1
    return out


def _geodesic_counts(g, n_dyads: int) -> np.ndarray:
    """Distances over dyads: exact 1..GEO_MAX, then "8+", then unreachable."""
    out = np.zeros(GEO_MAX + 2)
    n = g.node_count
    step = g.out_neighbors if g.directed else g.neighbors
    reached = 0
    for src in range(n):
        dist = {src: 0}
        q = deque([src])
        while q:
            u = q.popleft()
            du = dist[u]
            for w in step(u):
                if w not in dist:
                    dist[w] = du + 1
                    q.append(w)
        for node, d in dist.items():
            if node == src or (not g.directed and node < src):
                continue
            out[min(d - 1, GEO_MAX)] += 1
            reached += 1
    out[GEO_MAX + 1] = n_dyads - reached
    return out


def aux_statistics(g, n_dyads: int) -> dict:
    """All auxiliary count vectors for one graph state (Network or
    MutableGraph)."""
    n = g.node_count
    groups = {}
    if g.directed:
        groups["in_degree"] = _degree_counts(g.in_degrees(), n)
        groups["out_degree"] = _degree_counts(g.out_degrees(), n)
    else:
        groups["degree"] = _degree_counts(g.degrees(), n)
    groups["esp"] = _esp_counts(g)
    groups["geodesic"] = _geodesic_counts(g, n_dyads)
    return groups


class _NetworkView:
    """Adapter so aux_statistics can run on an immutable Network."""

    def __init__(self, net: Network):
        self._net = net
        self.directed = net.directed
        self.node_count = net.node_count
        self.edge_set = net.edges

    def __getattr__(self, name):
        return getattr(self._net, name)


# ---------------------------------------------------------------------------
# binning and pooling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BinStat:
    label: str
    observed: float
    sim_mean: float
    sim_sd: float
    z: float

    def to_dict(self) -> dict:
        return {"label": self.label, "observed": self.observed,
                "sim_mean": self.sim_mean, "sim_sd": self.sim_sd,
                "z": self.z if math.isfinite(self.z) else repr(self.z)}


def _pool_indices(sim_means: np.ndarray) -> list[list[int]]:
    """Greedy left-to-right pooling: adjacent bins accumulate until the
    pooled expected count reaches MIN_EXPECTED; an undersized tail merges
    into the previous pool."""
    pools: list[list[int]] = []
    current: list[int] = []
    total = 0.0
    for idx, mu in enumerate(sim_means):
        current.append(idx)
        total += mu
        if total >= MIN_EXPECTED:
            pools.append(current)
            current = []
            total = 0.0
    if current:
        if pools:
            pools[-1].extend(current)
        else:
            pools.append(current)
    return pools


def _bin_label(group: str, indices: list[int]) -> str:
    def name(ix: int) -> str:
        if group == "geodesic":
            if ix == GEO_MAX + 1:
                return "unreachable"
            if ix == GEO_MAX:
                return f"{GEO_MAX + 1}+"
            return str(ix + 1)
        if group == "esp" and ix == ESP_MAX + 1:
            return f"{ESP_MAX + 1}+"
        return str(ix)

    if len(indices) == 1:
        return name(indices[0])
    return f"{name(indices[0])}..{name(indices[-1])}"


def _group_bins(group: str, observed: np.ndarray, sims: np.ndarray
                ) -> list[BinStat]:
    """Pool, then z-score each pooled bin.  Zero-variance bins score 0 when
    the observation matches the simulated mean and +/-inf otherwise."""
    if group in ("degree", "in_degree", "out_degree"):
        nz = np.flatnonzero((observed > 0) | (sims.sum(axis=0) > 0))
        hi = int(nz.max()) if nz.size else 0
        observed = observed[:hi + 1]
        sims = sims[:, :hi + 1]
    bins = []
    for indices in _pool_indices(sims.mean(axis=0)):
        o = float(observed[indices].sum())
        vals = sims[:, indices].sum(axis=1)
        mu = float(vals.mean())
        sd = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        if sd > 0:
            z = (o - mu) / sd
        elif o == mu:
            z = 0.0
        else:
            z = math.inf if o > mu else -math.inf
        bins.append(BinStat(_bin_label(group, indices), o, mu, sd, z))
    return bins


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GofReport:
    stat_groups: dict
    max_abs_z: float
    tau: float
    adequate: bool
    sim_edge_mean: float
    observed_edges: int
    epsilon_e: float
    degenerate: bool
    draws_used: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "stat_groups": {g: [b.to_dict() for b in bins]
                            for g, bins in self.stat_groups.items()},
            "max_abs_z": self.max_abs_z if math.isfinite(self.max_abs_z)
            else repr(self.max_abs_z),
            "tau": self.tau,
            "adequate": self.adequate,
            "sim_edge_mean": self.sim_edge_mean,
            "observed_edges": self.observed_edges,
            "epsilon_e": self.epsilon_e,
            "degenerate": self.degenerate,
            "draws_used": self.draws_used,
            "seed": int(self.seed),
        }


def build_report(stat_groups: dict, tau: float, sim_edge_mean: float,
                 observed_edges: int, draws_used: int, seed: int) -> GofReport:
    """Assemble flags from the stored numbers (both are recomputable)."""
    all_z = [abs(b.z) for bins in stat_groups.values() for b in bins]
    max_abs_z = max(all_z) if all_z else 0.0
    eps = epsilon_edges(observed_edges)
    return GofReport(
        stat_groups=stat_groups,
        max_abs_z=max_abs_z,
        tau=tau,
        adequate=max_abs_z <= tau,
        sim_edge_mean=sim_edge_mean,
        observed_edges=observed_edges,
        epsilon_e=eps,
        degenerate=abs(sim_edge_mean - observed_edges) > eps,
        draws_used=draws_used,
        seed=seed)


def gof(spec: ModelSpec, theta_hat: Sequence[float], net: Network,
        seed: int = 0, controls: Optional[SimControls] = None,
        tau: float = DEFAULT_TAU) -> GofReport:
    """Simulate at the fitted coefficients and standardize the observed
    auxiliary distributions against the draws."""
    controls = controls or gof_controls(net, seed)
    n_dyads = net.dyad_count
    batch = simulate(spec, theta_hat, net, controls,
                     collector=lambda g: aux_statistics(g, n_dyads))
    observed = aux_statistics(_NetworkView(net), n_dyads)

    stat_groups = {}
    for group, obs_vec in observed.items():
        sims = np.vstack([draw[group] for draw in batch.collected])
        stat_groups[group] = _group_bins(group, obs_vec, sims)

    return build_report(stat_groups, tau=tau,
                        sim_edge_mean=float(batch.edge_counts.mean()),
                        observed_edges=net.edge_count,
                        draws_used=batch.draws, seed=controls.seed)


def non_degenerate(report: GofReport) -> bool:
    """True when simulations stay inside the edge-count band around |E|."""
    return abs(report.sim_edge_mean - report.observed_edges) <= report.epsilon_e


def gof_table(report: GofReport) -> str:
    """Per-bin table as tab-separated text (group, label, observed, mean,
    sd, z)."""
    lines = ["group\tlabel\tobserved\tsim_mean\tsim_sd\tz"]
    for group, bins in report.stat_groups.items():
        for b in bins:
            z = f"{b.z:.6g}" if math.isfinite(b.z) else repr(b.z)
            lines.append(f"{group}\t{b.label}\t{b.observed:.6g}"
                         f"\t{b.sim_mean:.6g}\t{b.sim_sd:.6g}\t{z}")
    return "\n".join(lines) + "\n"
