"""Validity metrics for nominations and faithfulness metrics for summaries."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence, Union

from ..terms import FAMILIES, ModelSpec, TermError, TermSpec, TermUniverse, parse_term
from .base import (InterpretationScore, MechanismSummary, Nomination,
                   reference_directions, spec_mechanisms)

_LOOSE_RE = re.compile(r"^\s*([a-z]+)\s*\(\s*([^)=\s]+)\s*\)\s*$")


def lenient_parse(raw: str) -> list[TermSpec]:
    """Tolerant reading of a nominated term string.

    Accepts the canonical grammar, positional shorthand (``gwesp(0.5)``,
    ``nodematch(club)``), and bare geometrically weighted family names, which
    expand to every grid decay.  Returns an empty list when nothing in the
    catalog matches.
    """
    raw = raw.strip()
    try:
        return [parse_term(raw)]
    except TermError:
        pass
    fam = FAMILIES.get(raw)
    if fam is not None and fam.needs_decay:
        from ..terms import DECAY_GRID
        return [TermSpec(raw, decay=d) for d in DECAY_GRID]
    m = _LOOSE_RE.match(raw)
    if m and m.group(1) in FAMILIES:
        fam = FAMILIES[m.group(1)]
        arg = m.group(2)
        try:
            if fam.needs_decay:
                return [TermSpec(fam.name, decay=float(arg))]
            if fam.needs_attr:
                return [TermSpec(fam.name, attribute=arg)]
        except (TermError, ValueError):
            return []
    return []


def match_universe(raw: str, universe: TermUniverse) -> list[TermSpec]:
    """Universe members a nomination resolves to (empty = off-menu)."""
    return [t for t in lenient_parse(raw) if t in universe]


@dataclass(frozen=True)
class NominationScore:
    precision: float
    recall: float
    offmenu: float
    nominated: int
    admissible: int
    matched_universe: int
    empty: bool = False

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall,
                "offmenu": self.offmenu, "nominated": self.nominated,
                "admissible": self.admissible,
                "matched_universe": self.matched_universe, "empty": self.empty}


def score_nominations(nominations: Sequence[Union[Nomination, str]],
                      universe: TermUniverse) -> NominationScore:
    """Precision/recall of nominations against the admissible universe plus
    the off-menu rate (fraction rejected by the admissibility filter).

    A nomination counts as admissible when the filter keeps it, i.e. it
    resolves to at least one universe member.  Empty nomination sets score 0
    with an explicit flag rather than dividing by zero.
    """
    raw = [n.term if isinstance(n, Nomination) else n for n in nominations]
    distinct = list(dict.fromkeys(s.strip() for s in raw))
    if not distinct:
        return NominationScore(0.0, 0.0, 0.0, 0, 0, 0, empty=True)
    admissible = 0
    matched: set[str] = set()
    for s in distinct:
        hits = match_universe(s, universe)
        if hits:
            admissible += 1
            matched.update(t.canonical_name for t in hits)
    total = len(distinct)
    precision = admissible / total
    recall = len(matched) / len(universe) if len(universe) else 0.0
    return NominationScore(precision=precision, recall=recall,
                           offmenu=1.0 - precision, nominated=total,
                           admissible=admissible,
                           matched_universe=len(matched))


def score_interpretation(summary: MechanismSummary, spec: ModelSpec,
                         theta: Sequence[float]) -> InterpretationScore:
    """Multi-label faithfulness of a mechanism summary to its fitted model.

    The reference label set is the mechanisms implied by the fitted terms
    under the fixed map; directions come from coefficient signs.  Overreach
    counts claimed mechanisms with no supporting term, omission counts
    fitted mechanism families the summary never mentions.
    """
    reference = spec_mechanisms(spec)
    ref_dir = reference_directions(spec, theta)

    claimed_order = list(dict.fromkeys(summary.claimed_mechanisms()))
    claimed = set(claimed_order)
    if not claimed:
        return InterpretationScore(0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
                                   empty_claims=True)
    hit = claimed & reference
    precision = len(hit) / len(claimed)
    recall = len(hit) / len(reference)
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall > 0 else 0.0)

    directions = {}
    for claim in summary.claims:
        directions.setdefault(claim.mechanism, claim.direction)
    if hit:
        correct = sum(1 for m in hit if directions[m] == ref_dir[m])
        directional = correct / len(hit)
    else:
        directional = 0.0

    return InterpretationScore(
        structural_precision=precision,
        structural_recall=recall,
        f1=f1,
        directional_accuracy=directional,
        overreach_rate=len(claimed - reference) / len(claimed),
        omission_rate=len(reference - claimed) / len(reference))
