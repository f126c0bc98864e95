from .base import (BASELINE, CLOSURE, DEGREE_HETEROGENEITY, EXPOSURE,
                   HOMOPHILY, MECHANISMS, RECIPROCITY, TERM_MECHANISM,
                   EditProposal, InterpretationScore, MechanismClaim,
                   MechanismSummary, Nomination, ProposalEngine,
                   ProposerError, SpecProposal, post_filter,
                   reference_directions, spec_mechanisms, strength_band)
from .heuristic import HeuristicEngine
from .remote import RemoteEngine
from .scoring import (NominationScore, lenient_parse, match_universe,
                      score_interpretation, score_nominations)

__all__ = [
    "BASELINE", "CLOSURE", "DEGREE_HETEROGENEITY", "EXPOSURE", "HOMOPHILY",
    "MECHANISMS", "RECIPROCITY", "TERM_MECHANISM",
    "EditProposal", "InterpretationScore", "MechanismClaim",
    "MechanismSummary", "Nomination", "NominationScore", "ProposalEngine",
    "ProposerError", "SpecProposal",
    "HeuristicEngine", "RemoteEngine",
    "lenient_parse", "match_universe", "post_filter",
    "reference_directions", "score_interpretation", "score_nominations",
    "spec_mechanisms", "strength_band",
]
