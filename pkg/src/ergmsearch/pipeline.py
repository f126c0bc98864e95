"""Four-stage specification search.

Stage I generates candidate specifications from proposer nominations
intersected with the rule-based term universe.  Stage II screens them with
pseudolikelihood BIC against the edges-only baseline plus a short stability
simulation, and selects the best survivor.  Stage III refits with MCMLE
(falling back over the top screened candidates), then applies
diagnostic-guided single-term edits under the two-branch acceptance rule
until the round cap or two consecutive rejections.  Stage IV renders and
scores a mechanism summary of the final fit.

Every simulation seed derives from the run seed through a recorded schedule,
so a fixed configuration with a deterministic engine reproduces the run
record byte for byte (timestamps aside).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Optional, Sequence

from .estimation import FitResult, fit_mcmle, fit_mple
from .gof import GofReport, gof, gof_controls, non_degenerate
from .network import Diagnostics, Metadata, Network, diagnostics, metadata
from .proposer import (HeuristicEngine, ProposerError, RemoteEngine,
                       match_universe, post_filter, score_interpretation,
                       score_nominations)
from .proposer.base import EditProposal, MechanismSummary, Nomination
from .sampler import SimControls, default_controls, derive_seed, stability_probe
from .terms import (ModelSpec, TermError, TermSpec, TermUniverse,
                    enumerate_universe, validate_spec)

DEFAULT_SEED = 1729
DEFAULT_TAU = 2.5
DEFAULT_ROUNDS = 4
DEFAULT_FALLBACK = 3
BIC_TOL = 1e-6

_EDGES_ONLY = ModelSpec((TermSpec("edges"),))


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name and reason."""

    def __init__(self, stage: str, reason: str, details: Optional[dict] = None):
        super().__init__(f"{stage}: {reason}")
        self.stage = stage
        self.reason = reason
        self.details = details or {}


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs beyond the network itself."""

    query_text: str = ""
    proposer: str = "heuristic"              # heuristic | remote
    endpoint: Optional[str] = None           # remote proposer only
    model: Optional[str] = None
    seed: int = DEFAULT_SEED
    tau: float = DEFAULT_TAU
    rounds: int = DEFAULT_ROUNDS             # refinement cap T
    fallback: int = DEFAULT_FALLBACK         # MCMLE fallback limit J
    mcmle_draws: int = 500
    gof_draws: int = 200
    bridge_points: int = 10
    dataset: Optional[str] = None            # audit trail only
    edge_file: Optional[str] = None
    attr_file: Optional[str] = None
    directed: Optional[bool] = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.fallback < 1:
            raise ValueError("fallback must be >= 1")
        if self.proposer not in ("heuristic", "remote"):
            raise ValueError(f"unknown proposer {self.proposer!r}")
        if self.proposer == "remote" and not self.endpoint:
            raise ValueError("remote proposer needs an endpoint")

    def to_dict(self) -> dict:
        return {
            "query_text": self.query_text, "proposer": self.proposer,
            "endpoint": self.endpoint, "model": self.model,
            "seed": self.seed, "tau": self.tau, "rounds": self.rounds,
            "fallback": self.fallback, "mcmle_draws": self.mcmle_draws,
            "gof_draws": self.gof_draws, "bridge_points": self.bridge_points,
            "dataset": self.dataset, "edge_file": self.edge_file,
            "attr_file": self.attr_file, "directed": self.directed,
        }


def make_engine(config: RunConfig):
    if config.proposer == "remote":
        return RemoteEngine(endpoint=config.endpoint,
                            model=config.model or "default")
    return HeuristicEngine()


# ---------------------------------------------------------------------------
# Stage I
# ---------------------------------------------------------------------------


@dataclass
class Candidate:
    index: int
    raw_terms: tuple[str, ...]
    provenance: str
    interpretation: str = ""
    spec: Optional[ModelSpec] = None
    parse_error: Optional[str] = None
    screen_status: Optional[str] = None      # survived | rejected
    screen_reason: Optional[str] = None
    bic_s: Optional[float] = None
    stability: Optional[dict] = None

    def name(self) -> str:
        return self.spec.canonical_name if self.spec else ",".join(self.raw_terms)

    def to_dict(self) -> dict:
        return {
            "index": self.index, "raw_terms": list(self.raw_terms),
            "provenance": self.provenance,
            "interpretation": self.interpretation,
            "terms": self.spec.term_names() if self.spec else None,
            "parse_error": self.parse_error,
            "screen_status": self.screen_status,
            "screen_reason": self.screen_reason,
            "bic_s": self.bic_s,
            "stability": self.stability,
        }


@dataclass
class Stage1Result:
    diagnostics: Diagnostics
    metadata: Metadata
    universe: TermUniverse
    nominations: list[Nomination]
    nomination_admissible: list[bool]
    offmenu: list[str]
    admissible_terms: list[TermSpec]
    candidates: list[Candidate]
    validity: dict


def _resolve_term(raw: str, universe: TermUniverse) -> Optional[TermSpec]:
    """One universe member for a proposed term string; bare geometrically
    weighted names resolve to the 0.5-decay grid point when available."""
    hits = match_universe(raw, universe)
    if not hits:
        return None
    if len(hits) == 1:
        return hits[0]
    for t in hits:
        if t.decay == 0.5:
            return t
    return hits[0]


def stage1_generate(net: Network, query_text: str, engine,
                    universe: Optional[TermUniverse] = None) -> Stage1Result:
    """Diagnostics, metadata, universe, nominations, and the candidate pool."""
    diag = diagnostics(net)
    meta = metadata(net)
    universe = universe or enumerate_universe(net)

    try:
        nominations = engine.propose_terms(diag, meta, query_text)
    except ProposerError as exc:
        raise StageError("stage1", f"term nomination failed: {exc}") from exc

    admissible: list[TermSpec] = []
    matched_names = set()
    flags = []
    offmenu = []
    for nom in nominations:
        hits = match_universe(nom.term, universe)
        flags.append(bool(hits))
        if hits:
            matched_names.update(t.canonical_name for t in hits)
        else:
            offmenu.append(nom.term)
    for t in universe:   # deterministic order: universe order
        if t.canonical_name in matched_names:
            admissible.append(t)
    if not admissible:
        raise StageError("stage1", "no admissible terms after intersection")

    try:
        proposals = engine.propose_specs(admissible, diag, query_text)
    except ProposerError as exc:
        raise StageError("stage1", f"specification proposal failed: {exc}") from exc
    if not proposals:
        raise StageError("stage1", "no candidate specifications proposed")

    candidates = []
    for idx, prop in enumerate(proposals):
        cand = Candidate(index=idx, raw_terms=tuple(prop.terms),
                         provenance=f"{engine.name}:{prop.spec_id}",
                         interpretation=prop.interpretation)
        try:
            resolved = [_resolve_term(t, universe) for t in prop.terms]
            if any(r is None for r in resolved):
                bad = [t for t, r in zip(prop.terms, resolved) if r is None]
                cand.parse_error = f"unresolvable terms: {', '.join(bad)}"
            else:
                cand.spec = ModelSpec(tuple(resolved)).canonicalized()
        except TermError as exc:
            cand.parse_error = str(exc)
        candidates.append(cand)

    validity = score_nominations(nominations, universe).to_dict()
    return Stage1Result(diag, meta, universe, nominations, flags, offmenu,
                        admissible, candidates, validity)


# ---------------------------------------------------------------------------
# Stage II
# ---------------------------------------------------------------------------


@dataclass
class Stage2Result:
    baseline_bic_s: float
    survivors: list[Candidate]
    selected: Candidate


def _selection_key(cand: Candidate):
    return (cand.bic_s, len(cand.spec.terms), cand.spec.canonical_name)


def stage2_screen(candidates: Sequence[Candidate], net: Network,
                  universe: TermUniverse, seed: int) -> Stage2Result:
    """Validate, MPLE-screen against the edges-only baseline, stability-probe
    survivors, and select the best BIC_s (ties to fewer terms, then name)."""
    baseline = fit_mple(_EDGES_ONLY, net)
    if not baseline.converged:
        raise StageError("stage2", f"baseline MPLE failed: {baseline.failure}")
    bic0 = baseline.bic

    seen: dict[str, int] = {}
    survivors = []
    for cand in candidates:
        if cand.spec is None:
            cand.screen_status = "rejected"
            cand.screen_reason = cand.parse_error or "unparseable"
            continue
        name = cand.spec.canonical_name
        if name in seen:
            cand.screen_status = "rejected"
            cand.screen_reason = f"duplicate of candidate {seen[name]}"
            continue
        seen[name] = cand.index
        check = validate_spec(cand.spec, universe)
        if not check.ok:
            cand.screen_status = "rejected"
            cand.screen_reason = check.reason
            continue
        fit = fit_mple(cand.spec, net)
        if not fit.converged:
            cand.screen_status = "rejected"
            cand.screen_reason = f"mple failed: {fit.failure}"
            continue
        cand.bic_s = fit.bic
        if fit.bic >= bic0:
            cand.screen_status = "rejected"
            cand.screen_reason = "BIC_s does not improve on baseline"
            continue
        probe = stability_probe(cand.spec, fit.theta, net,
                                seed=derive_seed(seed, 10, cand.index))
        cand.stability = probe.to_dict()
        if not probe.stable:
            cand.screen_status = "rejected"
            cand.screen_reason = f"unstable: {probe.reason}"
            continue
        cand.screen_status = "survived"
        survivors.append(cand)

    if not survivors:
        raise StageError("stage2", "screening emptied pool")
    selected = min(survivors, key=_selection_key)
    return Stage2Result(baseline_bic_s=bic0, survivors=survivors,
                        selected=selected)


# ---------------------------------------------------------------------------
# Stage III
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Decision:
    accepted: bool
    reason: str


def acceptance_decision(current_adequate: bool, current_max_z: float,
                        current_bic: float, candidate_degenerate: bool,
                        candidate_adequate: bool, candidate_max_z: float,
                        candidate_bic: float, tol: float = BIC_TOL) -> Decision:
    """Two-branch rule on (adequacy, BIC_f) with the degeneracy override.

    Adequate incumbents demand preserved adequacy and a strict BIC_f
    decrease; inadequate incumbents demand a strictly smaller max |z| and a
    non-increasing BIC_f.  Equality is judged within ``tol``.
    """
    if candidate_degenerate:
        return Decision(False, "candidate degenerate")
    if current_adequate:
        if not candidate_adequate:
            return Decision(False, "candidate loses adequacy")
        if candidate_bic < current_bic - tol:
            return Decision(True, "adequacy kept and BIC_f decreased")
        return Decision(False, "BIC_f did not strictly decrease")
    if not candidate_max_z < current_max_z:
        return Decision(False, "max |z| did not improve")
    if candidate_bic <= current_bic + tol:
        return Decision(True, "max |z| improved without BIC_f increase")
    return Decision(False, "BIC_f increased")


def apply_edit(spec: ModelSpec, edit: EditProposal, universe: TermUniverse
               ) -> tuple[Optional[ModelSpec], Optional[str]]:
    """Materialize a single-term edit; returns (spec, None) or (None, reason)."""
    def resolve(raw: Optional[str]) -> Optional[TermSpec]:
        return _resolve_term(raw, universe) if raw else None

    added = resolve(edit.term_added)
    if edit.term_added and added is None:
        return None, f"added term not admissible: {edit.term_added}"
    removed_name = None
    if edit.term_removed:
        present = {t.canonical_name: t for t in spec.terms}
        target = edit.term_removed.strip()
        if target not in present:
            hits = [t.canonical_name for t in spec.terms
                    if t.family == target or t.canonical_name == target]
            if len(hits) != 1:
                return None, f"removed term not in specification: {edit.term_removed}"
            target = hits[0]
        removed_name = target

    terms = list(spec.terms)
    if removed_name is not None:
        terms = [t for t in terms if t.canonical_name != removed_name]
    if added is not None:
        if added.canonical_name in {t.canonical_name for t in terms}:
            return None, f"added term already present: {added.canonical_name}"
        terms.append(added)
    new_spec = ModelSpec(tuple(terms)).canonicalized()
    if new_spec.canonical_name == spec.canonical_name:
        return None, "edit is a no-op"
    check = validate_spec(new_spec, universe)
    if not check.ok:
        return None, check.reason
    return new_spec, None


@dataclass
class EditLogEntry:
    round: int
    edit: dict
    candidate: Optional[str]
    fit: Optional[dict]
    gof: Optional[dict]
    decision: str                  # accepted | rejected
    reason: str
    rej_after: int

    def to_dict(self) -> dict:
        return {"round": self.round, "edit": self.edit,
                "candidate": self.candidate, "fit": self.fit,
                "gof": _gof_brief(self.gof),
                "decision": self.decision, "reason": self.reason,
                "rej_after": self.rej_after}


def _gof_brief(gof_dict: Optional[dict]) -> Optional[dict]:
    if gof_dict is None:
        return None
    return {k: gof_dict[k] for k in
            ("max_abs_z", "adequate", "sim_edge_mean", "degenerate")
            if k in gof_dict}


@dataclass
class Stage3Result:
    fallback_attempts: list[dict]
    edit_log: list[EditLogEntry]
    final_spec: ModelSpec
    final_fit: FitResult
    final_gof: GofReport


def stage3_refine(survivors: Sequence[Candidate], net: Network, engine,
                  universe: TermUniverse, admissible: Sequence[TermSpec],
                  config: RunConfig,
                  fit_fn: Optional[Callable] = None,
                  gof_fn: Optional[Callable] = None) -> Stage3Result:
    """MCMLE fallback over the top screened candidates, then single-edit
    refinement with the acceptance rule, two-rejection stop, and round cap."""
    seed = config.seed
    if fit_fn is None:
        def fit_fn(spec: ModelSpec, fit_seed: int) -> FitResult:
            controls = default_controls(net, seed=fit_seed,
                                        draws=config.mcmle_draws)
            return fit_mcmle(spec, net, controls=controls,
                             bridge_points=config.bridge_points)
    if gof_fn is None:
        def gof_fn(spec: ModelSpec, theta, gof_seed: int) -> GofReport:
            controls = gof_controls(net, gof_seed, draws=config.gof_draws)
            return gof(spec, theta, net, controls=controls, tau=config.tau)

    order = sorted(survivors, key=_selection_key)
    attempts = []
    current = None
    for j, cand in enumerate(order[:min(config.fallback, len(order))]):
        fit = fit_fn(cand.spec, derive_seed(seed, 20, j))
        attempt = {"candidate": cand.spec.canonical_name,
                   "converged": fit.converged, "failure": fit.failure,
                   "degenerate": None}
        if fit.converged:
            report = gof_fn(cand.spec, fit.theta, derive_seed(seed, 21, j))
            attempt["degenerate"] = report.degenerate
            if non_degenerate(report):
                attempts.append(attempt)
                current = (cand.spec, fit, report)
                break
        attempts.append(attempt)
    if current is None:
        raise StageError("stage3", "Stage III initialization failed: "
                                   "no fallback candidate is estimable",
                         details={"fallback_attempts": attempts})

    cur_spec, cur_fit, cur_gof = current
    edit_log: list[EditLogEntry] = []
    t = 0
    rej = 0
    while t < config.rounds and rej < 2:
        try:
            edit = engine.propose_edit(cur_spec, cur_gof, admissible,
                                       theta=cur_fit.theta)
        except ProposerError as exc:
            raise StageError("stage3", f"edit proposal failed: {exc}") from exc

        new_spec, err = apply_edit(cur_spec, edit, universe)
        if new_spec is None:
            rej += 1
            edit_log.append(EditLogEntry(t, edit.to_dict(), None, None, None,
                                         "rejected", f"validation: {err}", rej))
            t += 1
            continue
        fit2 = fit_fn(new_spec, derive_seed(seed, 30, t))
        if not fit2.converged:
            rej += 1
            edit_log.append(EditLogEntry(
                t, edit.to_dict(), new_spec.canonical_name, fit2.to_dict(),
                None, "rejected", f"mcmle failed: {fit2.failure}", rej))
            t += 1
            continue
        gof2 = gof_fn(new_spec, fit2.theta, derive_seed(seed, 31, t))
        decision = acceptance_decision(
            current_adequate=cur_gof.adequate, current_max_z=cur_gof.max_abs_z,
            current_bic=cur_fit.bic, candidate_degenerate=gof2.degenerate,
            candidate_adequate=gof2.adequate, candidate_max_z=gof2.max_abs_z,
            candidate_bic=fit2.bic)
        if decision.accepted:
            rej = 0
            cur_spec, cur_fit, cur_gof = new_spec, fit2, gof2
        else:
            rej += 1
        edit_log.append(EditLogEntry(
            t, edit.to_dict(), new_spec.canonical_name, fit2.to_dict(),
            gof2.to_dict(), "accepted" if decision.accepted else "rejected",
            decision.reason, rej))
        t += 1

    _assert_monotone(edit_log)
    return Stage3Result(attempts, edit_log, cur_spec, cur_fit, cur_gof)


def _assert_monotone(edit_log: Sequence[EditLogEntry]):
    """Accepted edits never worsen (adequacy, BIC_f) under the acceptance
    ordering; guards the loop against bookkeeping bugs."""
    prev = None
    for entry in edit_log:
        if entry.decision != "accepted":
            continue
        gof_brief = _gof_brief(entry.gof)
        bic = entry.fit["bic"]
        state = (gof_brief["adequate"], _as_float(gof_brief["max_abs_z"]),
                 _as_float(bic))
        if prev is not None:
            was_adequate, was_z, was_bic = prev
            if was_adequate:
                ok = state[0] and state[2] < was_bic - BIC_TOL / 2
            else:
                ok = state[1] < was_z and state[2] <= was_bic + BIC_TOL
            if not ok:
                raise RuntimeError("acceptance monotonicity violated in edit log")
        prev = state


def _as_float(x) -> float:
    return float(x)  # repr-encoded inf round-trips through float()


# ---------------------------------------------------------------------------
# the full run
# ---------------------------------------------------------------------------


@dataclass
class PipelineRun:
    status: str                                   # ok | failed
    config: dict
    created_at: str
    failed_stage: Optional[str] = None
    failure_reason: Optional[str] = None
    diagnostics: Optional[dict] = None
    metadata: Optional[dict] = None
    universe: Optional[list] = None
    nominations: Optional[list] = None
    offmenu: Optional[list] = None
    validity: Optional[dict] = None
    admissible_terms: Optional[list] = None
    pool: Optional[list] = None
    baseline_bic_s: Optional[float] = None
    selected: Optional[str] = None
    fallback_attempts: Optional[list] = None
    edit_log: Optional[list] = None
    final: Optional[dict] = None
    interpretation: Optional[dict] = None
    engine_transcript: Optional[list] = None
    events: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    version: str = "0.1.0"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "config": self.config,
            "created_at": self.created_at,
            "failed_stage": self.failed_stage,
            "failure_reason": self.failure_reason,
            "diagnostics": self.diagnostics,
            "metadata": self.metadata,
            "universe": self.universe,
            "nominations": self.nominations,
            "offmenu": self.offmenu,
            "validity": self.validity,
            "admissible_terms": self.admissible_terms,
            "pool": self.pool,
            "baseline_bic_s": self.baseline_bic_s,
            "selected": self.selected,
            "fallback_attempts": self.fallback_attempts,
            "edit_log": self.edit_log,
            "final": self.final,
            "interpretation": self.interpretation,
            "engine_transcript": self.engine_transcript,
            "events": self.events,
            "timing": self.timing,
            "version": self.version,
        }


def run_pipeline(net: Network, config: RunConfig, engine=None) -> PipelineRun:
    """Execute Stages I-IV and return the full audit record; stage failures
    yield a failed record rather than an exception."""
    engine = engine or make_engine(config)
    run = PipelineRun(status="ok", config=config.to_dict(),
                      created_at=datetime.now(timezone.utc).isoformat())

    def event(name: str, **extra):
        run.events.append({"event": name,
                           "ts": datetime.now(timezone.utc).isoformat(),
                           **extra})

    stage = "stage1"
    try:
        event("stage_start", stage="stage1")
        t0 = time.perf_counter()
        s1 = stage1_generate(net, config.query_text, engine)
        run.timing["stage1"] = time.perf_counter() - t0
        run.diagnostics = s1.diagnostics.to_dict()
        run.metadata = s1.metadata.to_dict()
        run.universe = s1.universe.names()
        run.nominations = [
            {**nom.to_dict(), "admissible": adm}
            for nom, adm in zip(s1.nominations, s1.nomination_admissible)]
        run.offmenu = s1.offmenu
        run.validity = s1.validity
        run.admissible_terms = [t.canonical_name for t in s1.admissible_terms]
        event("stage_end", stage="stage1")

        stage = "stage2"
        event("stage_start", stage="stage2")
        t0 = time.perf_counter()
        s2 = stage2_screen(s1.candidates, net, s1.universe, config.seed)
        run.timing["stage2"] = time.perf_counter() - t0
        run.pool = [c.to_dict() for c in s1.candidates]
        run.baseline_bic_s = s2.baseline_bic_s
        run.selected = s2.selected.spec.canonical_name
        event("stage_end", stage="stage2")

        stage = "stage3"
        event("stage_start", stage="stage3")
        t0 = time.perf_counter()
        s3 = stage3_refine(s2.survivors, net, engine, s1.universe,
                           s1.admissible_terms, config)
        run.timing["stage3"] = time.perf_counter() - t0
        run.fallback_attempts = s3.fallback_attempts
        run.edit_log = [e.to_dict() for e in s3.edit_log]
        run.final = {
            "terms": s3.final_spec.term_names(),
            "fit": s3.final_fit.to_dict(),
            "gof": s3.final_gof.to_dict(),
        }
        event("stage_end", stage="stage3")

        stage = "stage4"
        event("stage_start", stage="stage4")
        t0 = time.perf_counter()
        summary = engine.synthesize(s3.final_spec, s3.final_fit.theta,
                                    s1.metadata)
        summary = post_filter(summary, s3.final_spec)
        score = score_interpretation(summary, s3.final_spec, s3.final_fit.theta)
        run.interpretation = {**summary.to_dict(), "score": score.to_dict()}
        run.timing["stage4"] = time.perf_counter() - t0
        event("stage_end", stage="stage4")
    except StageError as exc:
        run.status = "failed"
        run.failed_stage = exc.stage
        run.failure_reason = exc.reason
        event("stage_failed", stage=exc.stage, reason=exc.reason)
        if run.pool is None and stage in ("stage2", "stage3"):
            run.pool = [c.to_dict() for c in s1.candidates]
        if "fallback_attempts" in exc.details:
            run.fallback_attempts = exc.details["fallback_attempts"]
    except ProposerError as exc:
        run.status = "failed"
        run.failed_stage = stage
        run.failure_reason = f"proposer: {exc}"
        event("stage_failed", stage=stage, reason=str(exc))

    transcript = getattr(engine, "transcript", None)
    if transcript:
        run.engine_transcript = transcript
    return run
