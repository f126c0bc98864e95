"""Deterministic rule-based proposal engine.

A pure function of its inputs: no randomness, no network access.  Every
nomination it emits satisfies the same admissibility conditions the term
universe enforces, so its nominations are never filtered out.

Nomination rules:

* ``edges`` always (baseline).
* ``mutual`` when the network is directed and reciprocity exceeds 0.1.
* ``gwesp``/``gwdsp`` across the decay grid when clustering exceeds 0.05.
* degree-heterogeneity terms when the maximum degree is at least twice the
  mean (per direction for directed networks).
* ``nodematch`` per complete categorical attribute with two or more levels;
  ``absdiff`` and ``nodecov`` per complete numeric attribute with two or
  more distinct values.
"""

from __future__ import annotations

from typing import Optional, Sequence

from ..network import CATEGORICAL, NUMERIC, Diagnostics, Metadata
from ..terms import DECAY_GRID, FAMILIES, ModelSpec, TermSpec
from .base import (BASELINE, CLOSURE, DECREASES, DEGREE_HETEROGENEITY,
                   HOMOPHILY, INCREASES, MECHANISMS, MIXED, RECIPROCITY,
                   EditProposal, MechanismClaim, MechanismSummary, Nomination,
                   ProposerError, SpecProposal, TERM_MECHANISM, post_filter,
                   strength_band)

RECIPROCITY_MIN = 0.1
CLUSTERING_MIN = 0.05
DEGREE_SKEW_RATIO = 2.0
PREFERRED_DECAY = 0.5

_STRUCTURAL_LADDER = ("mutual", "gwesp", "gwdsp", "gwdegree", "gwidegree",
                      "gwodegree")
_GROUP_REMEDY = {
    "esp": "gwesp",
    "geodesic": "gwdsp",
    "degree": "gwdegree",
    "in_degree": "gwidegree",
    "out_degree": "gwodegree",
}


def _grid_nominations(family: str, mechanism: str, why: str) -> list[Nomination]:
    return [Nomination(TermSpec(family, decay=d).canonical_name, mechanism, why)
            for d in DECAY_GRID]


class HeuristicEngine:
    """Rule-table engine usable wherever a chat-model backend would be."""

    name = "heuristic"

    def propose_terms(self, diag: Diagnostics, meta: Metadata,
                      query_text: str) -> list[Nomination]:
        noms = [Nomination("edges", BASELINE, "baseline tie propensity")]
        if meta.directed and (diag.reciprocity or 0.0) > RECIPROCITY_MIN:
            noms.append(Nomination(
                "mutual", RECIPROCITY,
                f"reciprocity {diag.reciprocity:.2f} suggests returned ties"))
        if diag.clustering > CLUSTERING_MIN:
            why = f"clustering {diag.clustering:.2f} suggests shared-partner structure"
            noms += _grid_nominations("gwesp", CLOSURE, why)
            noms += _grid_nominations("gwdsp", CLOSURE, why)
        if meta.directed:
            if self._skewed(diag.in_degree):
                noms += _grid_nominations(
                    "gwidegree", DEGREE_HETEROGENEITY,
                    "right-skewed in-degrees suggest popularity spread")
            if self._skewed(diag.out_degree):
                noms += _grid_nominations(
                    "gwodegree", DEGREE_HETEROGENEITY,
                    "right-skewed out-degrees suggest activity spread")
        elif self._skewed(diag.degree):
            noms += _grid_nominations(
                "gwdegree", DEGREE_HETEROGENEITY,
                "right-skewed degrees suggest hub structure")
        for attr in meta.attributes:
            if not attr.complete or (attr.level_count or 0) < 2:
                continue
            if attr.kind == CATEGORICAL:
                noms.append(Nomination(
                    TermSpec("nodematch", attribute=attr.name).canonical_name,
                    HOMOPHILY, f"within-{attr.name} tie preference"))
            elif attr.kind == NUMERIC:
                noms.append(Nomination(
                    TermSpec("absdiff", attribute=attr.name).canonical_name,
                    HOMOPHILY, f"similarity on {attr.name}"))
                noms.append(Nomination(
                    TermSpec("nodecov", attribute=attr.name).canonical_name,
                    HOMOPHILY, f"tie propensity scaling with {attr.name}"))
        return noms

    @staticmethod
    def _skewed(stats) -> bool:
        return (stats is not None and stats.mean > 0
                and stats.max >= DEGREE_SKEW_RATIO * stats.mean)

    # ------------------------------------------------------------------

    def propose_specs(self, admissible: Sequence[TermSpec], diag: Diagnostics,
                      query_text: str) -> list[SpecProposal]:
        """Deterministic ladder over the admissible set: the structural pack,
        a closure-minimal variant, the attribute pack, a similarity-minimal
        variant, the combination, and a parsimonious cut (duplicates folded,
        so 3-6 distinct specs in practice)."""
        edges = next((t for t in admissible if t.family == "edges"), None)
        if edges is None:
            raise ProposerError("admissible set lacks the edges term")
        structural = self._structural_reps(admissible)
        attrs = sorted((t for t in admissible if FAMILIES[t.family].needs_attr),
                       key=TermSpec.sort_key)
        # one similarity-style term per attribute: nodematch or absdiff
        similarity = [t for t in attrs if t.family in ("nodematch", "absdiff")]
        closure = next((t for t in structural if t.family == "gwesp"), None)
        if closure is None:
            closure = next((t for t in structural if t.family == "triangle"),
                           None)
        dyadwise = next((t for t in structural if t.family == "gwdsp"), None)

        ladder: list[tuple[str, list[TermSpec], str]] = []
        if structural:
            ladder.append(("structure", [edges] + structural,
                           "endogenous structure only"))
        if closure is not None:
            ladder.append(("closure", [edges, closure],
                           "baseline plus closure"))
        if dyadwise is not None and not attrs:
            ladder.append(("connectivity", [edges, dyadwise],
                           "baseline plus indirect connectivity"))
        if attrs:
            ladder.append(("attributes", [edges] + attrs[:7],
                           "attribute effects only"))
        if similarity:
            ladder.append(("similarity", [edges] + similarity[:7],
                           "attribute similarity only"))
        if structural and attrs:
            combined = ([edges] + structural + attrs)[:8]
            ladder.append(("combined", combined,
                           "structure plus attribute effects"))
            if len(combined) > 3:
                first_attr = (similarity + attrs)[0]
                ladder.append(("parsimonious",
                               [edges, structural[0], first_attr],
                               "one structural and one attribute effect"))
        if not ladder:
            ladder.append(("baseline", [edges], "density only"))

        out = []
        seen = set()
        for spec_id, terms, why in ladder:
            key = ",".join(t.canonical_name for t in terms)
            if key not in seen:
                seen.add(key)
                out.append(SpecProposal(
                    spec_id, tuple(t.canonical_name for t in terms), why))
        return out

    def _structural_reps(self, admissible: Sequence[TermSpec]) -> list[TermSpec]:
        reps = []
        families_present = {t.family for t in admissible}
        for family in _STRUCTURAL_LADDER:
            rep = self._preferred_member(admissible, family)
            if rep is not None:
                reps.append(rep)
        # plain closure counts only when no geometrically weighted variant
        if "triangle" in families_present and "gwesp" not in families_present:
            reps.append(next(t for t in admissible if t.family == "triangle"))
        if "twopath" in families_present and "gwdsp" not in families_present:
            reps.append(next(t for t in admissible if t.family == "twopath"))
        return reps

    @staticmethod
    def _preferred_member(admissible: Sequence[TermSpec], family: str
                          ) -> Optional[TermSpec]:
        members = sorted((t for t in admissible if t.family == family),
                         key=TermSpec.sort_key)
        if not members:
            return None
        for t in members:
            if t.decay == PREFERRED_DECAY:
                return t
        return members[0]

    # ------------------------------------------------------------------

    def propose_edit(self, spec: ModelSpec, gof_report,
                     admissible: Sequence[TermSpec],
                     theta: Optional[Sequence[float]] = None) -> EditProposal:
        """Remedy table keyed on the worst-fitting statistic group; adequate
        fits get the smallest-coefficient term pruned instead."""
        if gof_report.adequate:
            return self._prune_or_extend(spec, admissible, theta,
                                         "fit is adequate; simplifying")
        group, bin_stat = self._worst_bin(gof_report)
        family = _GROUP_REMEDY.get(group)
        if family is not None:
            edit = self._remedy(spec, admissible, family, group, bin_stat)
            if edit is not None:
                return edit
        return self._prune_or_extend(spec, admissible, theta,
                                     f"no targeted remedy for {group} misfit")

    @staticmethod
    def _worst_bin(gof_report):
        worst = None
        worst_group = None
        for group, bins in gof_report.stat_groups.items():
            for b in bins:
                if worst is None or abs(b.z) > abs(worst.z):
                    worst, worst_group = b, group
        return worst_group, worst

    def _remedy(self, spec: ModelSpec, admissible, family: str, group: str,
                bin_stat) -> Optional[EditProposal]:
        current = [t for t in spec.terms if t.family == family]
        rationale = (f"worst misfit in {group} bins (|z|={abs(bin_stat.z):.2f} "
                     f"at {bin_stat.label})")
        if not current:
            member = self._preferred_member(
                [t for t in admissible
                 if t.canonical_name not in set(spec.term_names())], family)
            if member is None:
                return None
            return EditProposal("add", term_added=member.canonical_name,
                                rationale=rationale + f"; adding {family}")
        decays = sorted(t.decay for t in admissible if t.family == family)
        cur = current[0]
        higher = [d for d in decays if d > cur.decay]
        lower = [d for d in decays if d < cur.decay]
        new_decay = higher[0] if higher else (lower[-1] if lower else None)
        if new_decay is None:
            return None
        return EditProposal(
            "replace", term_removed=cur.canonical_name,
            term_added=TermSpec(family, decay=new_decay).canonical_name,
            rationale=rationale + "; retuning decay")

    def _prune_or_extend(self, spec: ModelSpec, admissible, theta,
                         rationale: str) -> EditProposal:
        removable = [(idx, t) for idx, t in enumerate(spec.terms)
                     if t.family != "edges"]
        if removable:
            if theta is not None:
                idx, victim = min(removable,
                                  key=lambda p: (abs(float(theta[p[0]])),
                                                 p[1].canonical_name))
            else:
                idx, victim = removable[-1]
            return EditProposal("remove", term_removed=victim.canonical_name,
                                rationale=rationale + "; dropping weakest term")
        in_spec = set(spec.term_names())
        for t in sorted(admissible, key=TermSpec.sort_key):
            if t.canonical_name not in in_spec and t.family != "edges":
                return EditProposal("add", term_added=t.canonical_name,
                                    rationale=rationale + "; nothing to remove")
        raise ProposerError("no admissible edit exists")

    # ------------------------------------------------------------------

    def synthesize(self, spec: ModelSpec, theta: Sequence[float],
                   meta: Metadata) -> MechanismSummary:
        """Fixed term-to-mechanism map rendered with directions from the
        coefficient signs and strength bands from their magnitudes."""
        by_mech: dict[str, list[tuple[TermSpec, float]]] = {}
        for t, v in zip(spec.terms, theta):
            by_mech.setdefault(TERM_MECHANISM[t.family], []).append((t, float(v)))

        claims = []
        sentences = []
        for mech in MECHANISMS:
            if mech not in by_mech:
                continue
            pairs = by_mech[mech]
            dirs = tuple((t.canonical_name, INCREASES if v >= 0 else DECREASES)
                         for t, v in pairs)
            directions = {d for _, d in dirs}
            direction = dirs[0][1] if len(directions) == 1 else MIXED
            strength = strength_band(max(abs(v) for _, v in pairs))
            claims.append(MechanismClaim(
                mechanism=mech, direction=direction, strength_note=strength,
                supporting_terms=tuple(t.canonical_name for t, _ in pairs),
                term_directions=dirs))
            detail = "; ".join(f"{t.canonical_name}: {v:+.3g}" for t, v in pairs)
            if direction == MIXED:
                sentences.append(
                    f"{_label(mech)} effects are mixed ({detail}).")
            else:
                sentences.append(
                    f"{_label(mech)} {direction} the log-odds of a tie,"
                    f" {strength} per unit change statistic ({detail}).")
        summary = MechanismSummary(tuple(claims), " ".join(sentences))
        return post_filter(summary, spec)


def _label(mechanism: str) -> str:
    return mechanism.replace("_", " ").capitalize()
