"""Shared proposal-engine types and the fixed term-to-mechanism map."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

from ..network import Diagnostics, Metadata
from ..terms import FAMILIES, ModelSpec, TermSpec

BASELINE = "baseline"
RECIPROCITY = "reciprocity"
CLOSURE = "closure"
DEGREE_HETEROGENEITY = "degree_heterogeneity"
HOMOPHILY = "homophily"
EXPOSURE = "exposure"  # accepted in nominations; no catalog term maps to it

MECHANISMS = (BASELINE, RECIPROCITY, CLOSURE, DEGREE_HETEROGENEITY, HOMOPHILY)
NOMINATION_MECHANISMS = MECHANISMS + (EXPOSURE,)

# Total over the term catalog; nodefactor/nodecov are scored with the
# attribute family alongside nodematch/absdiff.
TERM_MECHANISM = {
    "edges": BASELINE,
    "mutual": RECIPROCITY,
    "triangle": CLOSURE,
    "twopath": CLOSURE,
    "gwesp": CLOSURE,
    "gwdsp": CLOSURE,
    "gwdegree": DEGREE_HETEROGENEITY,
    "gwidegree": DEGREE_HETEROGENEITY,
    "gwodegree": DEGREE_HETEROGENEITY,
    "nodematch": HOMOPHILY,
    "nodefactor": HOMOPHILY,
    "nodecov": HOMOPHILY,
    "absdiff": HOMOPHILY,
}

assert set(TERM_MECHANISM) == set(FAMILIES)

INCREASES = "increases"
DECREASES = "decreases"
MIXED = "mixed"

# strength bands over coefficient magnitude (change-statistic log-odds scale)
WEAK_BOUND = 0.2
MODERATE_BOUND = 1.0


def strength_band(magnitude: float) -> str:
    if magnitude < WEAK_BOUND:
        return "weak"
    if magnitude < MODERATE_BOUND:
        return "moderate"
    return "strong"


class ProposerError(RuntimeError):
    """Transport or schema failure that survived the engine's retries."""


@dataclass(frozen=True)
class Nomination:
    """One raw term nomination: the string is matched against the universe
    later, so off-menu entries survive to be counted."""

    term: str
    mechanism: str
    justification: str = ""

    def to_dict(self) -> dict:
        return {"term": self.term, "mechanism": self.mechanism,
                "justification": self.justification}


@dataclass(frozen=True)
class SpecProposal:
    spec_id: str
    terms: tuple[str, ...]
    interpretation: str = ""

    def to_dict(self) -> dict:
        return {"spec_id": self.spec_id, "terms": list(self.terms),
                "interpretation": self.interpretation}


EDIT_TYPES = ("add", "remove", "replace")


@dataclass(frozen=True)
class EditProposal:
    edit_type: str
    term_removed: Optional[str] = None
    term_added: Optional[str] = None
    rationale: str = ""

    def __post_init__(self):
        if self.edit_type not in EDIT_TYPES:
            raise ValueError(f"unknown edit type {self.edit_type!r}")
        if self.edit_type == "add" and (self.term_added is None
                                        or self.term_removed is not None):
            raise ValueError("add edits carry exactly term_added")
        if self.edit_type == "remove" and (self.term_removed is None
                                           or self.term_added is not None):
            raise ValueError("remove edits carry exactly term_removed")
        if self.edit_type == "replace" and (self.term_removed is None
                                            or self.term_added is None):
            raise ValueError("replace edits carry both terms")

    def describe(self) -> str:
        if self.edit_type == "add":
            return f"add {self.term_added}"
        if self.edit_type == "remove":
            return f"remove {self.term_removed}"
        return f"replace {self.term_removed} -> {self.term_added}"

    def to_dict(self) -> dict:
        return {"edit_type": self.edit_type, "term_removed": self.term_removed,
                "term_added": self.term_added, "rationale": self.rationale}


@dataclass(frozen=True)
class MechanismClaim:
    mechanism: str
    direction: str                      # increases | decreases | mixed
    strength_note: str
    supporting_terms: tuple[str, ...]
    term_directions: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {"mechanism": self.mechanism, "direction": self.direction,
                "strength_note": self.strength_note,
                "supporting_terms": list(self.supporting_terms),
                "term_directions": [list(td) for td in self.term_directions]}


@dataclass(frozen=True)
class MechanismSummary:
    claims: tuple[MechanismClaim, ...]
    paragraph: str

    def claimed_mechanisms(self) -> list[str]:
        return [c.mechanism for c in self.claims]

    def to_dict(self) -> dict:
        return {"claims": [c.to_dict() for c in self.claims],
                "paragraph": self.paragraph}


@dataclass(frozen=True)
class InterpretationScore:
    structural_precision: float
    structural_recall: float
    f1: float
    directional_accuracy: float
    overreach_rate: float
    omission_rate: float
    empty_claims: bool = False

    def to_dict(self) -> dict:
        return {
            "structural_precision": self.structural_precision,
            "structural_recall": self.structural_recall,
            "f1": self.f1,
            "directional_accuracy": self.directional_accuracy,
            "overreach_rate": self.overreach_rate,
            "omission_rate": self.omission_rate,
            "empty_claims": self.empty_claims,
        }


class ProposalEngine(Protocol):
    """Interface the pipeline drives; both engines implement it."""

    name: str

    def propose_terms(self, diag: Diagnostics, meta: Metadata,
                      query_text: str) -> list[Nomination]: ...

    def propose_specs(self, admissible: Sequence[TermSpec], diag: Diagnostics,
                      query_text: str) -> list[SpecProposal]: ...

    def propose_edit(self, spec: ModelSpec, gof_report,
                     admissible: Sequence[TermSpec],
                     theta: Optional[Sequence[float]] = None) -> EditProposal: ...

    def synthesize(self, spec: ModelSpec, theta: Sequence[float],
                   meta: Metadata) -> MechanismSummary: ...


def spec_mechanisms(spec: ModelSpec) -> set[str]:
    return {TERM_MECHANISM[t.family] for t in spec.terms}


def reference_directions(spec: ModelSpec, theta: Sequence[float]) -> dict:
    """Mechanism -> direction implied by the fitted terms (mixed when the
    supporting coefficients disagree in sign)."""
    by_mech: dict[str, list[float]] = {}
    for t, v in zip(spec.terms, theta):
        by_mech.setdefault(TERM_MECHANISM[t.family], []).append(float(v))
    out = {}
    for mech, vals in by_mech.items():
        pos = any(v >= 0 for v in vals)
        neg = any(v < 0 for v in vals)
        out[mech] = MIXED if (pos and neg) else (INCREASES if pos else DECREASES)
    return out


def post_filter(summary: MechanismSummary, spec: ModelSpec) -> MechanismSummary:
    """Guardrail: drop any mechanism claim with no supporting fitted term,
    whatever engine produced the summary."""
    present = spec_mechanisms(spec)
    fitted_names = set(spec.term_names())
    kept = []
    for claim in summary.claims:
        if claim.mechanism not in present:
            continue
        support = tuple(t for t in claim.supporting_terms if t in fitted_names)
        if claim.supporting_terms and not support:
            continue
        kept.append(claim if support == claim.supporting_terms
                    else MechanismClaim(claim.mechanism, claim.direction,
                                        claim.strength_note, support,
                                        claim.term_directions))
    return MechanismSummary(tuple(kept), summary.paragraph)
