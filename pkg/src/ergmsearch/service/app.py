"""FastAPI service wrapping the specification-search core.

Stateless: every request carries its network (raw file text or a bundled
dataset name), so stages can be invoked in isolation and runs replayed
anywhere.  The ``run`` endpoint also returns the rendered artifact file
contents so a thin client can persist byte-identical outputs locally.
"""

from __future__ import annotations

import json

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..datasets import load_bundled
from ..estimation import exact_fit, fit_mcmle, fit_mple
from ..gof import gof, gof_controls
from ..ingest import IngestError, ingest_text
from ..network import Network, diagnostics, metadata
from ..persist import (canonical_json, render_gof_tsv, render_summary_md,
                       write_run_dir)
from ..pipeline import (Candidate, RunConfig, StageError, run_pipeline,
                        stage1_generate, stage3_refine)
from ..proposer import HeuristicEngine, ProposerError, RemoteEngine
from ..proposer.scoring import score_interpretation
from ..sampler import SamplerError, SimControls, default_controls
from ..terms import (ModelSpec, TermError, enumerate_universe, parse_model,
                     validate_spec)
from . import schemas

app = FastAPI(title="ergmsearch", version=__version__)


def _network(payload: schemas.NetworkIn) -> Network:
    try:
        if payload.dataset:
            return load_bundled(payload.dataset)
        return ingest_text(payload.edge_csv, payload.directed,
                           payload.attr_csv)
    except (IngestError, KeyError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def _engine(payload: schemas.ProposerIn):
    if payload.kind == "remote":
        return RemoteEngine(endpoint=payload.endpoint,
                            model=payload.model or "default")
    return HeuristicEngine()


def _spec(terms: list[str]) -> ModelSpec:
    try:
        return parse_model(terms)
    except TermError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.get("/datasets")
def datasets() -> dict:
    from ..datasets import BUNDLED
    return {"datasets": sorted(BUNDLED)}


@app.post("/diagnose", response_model=schemas.DiagnoseResponse)
def diagnose(req: schemas.DiagnoseRequest) -> schemas.DiagnoseResponse:
    net = _network(req.network)
    return schemas.DiagnoseResponse(diagnostics=diagnostics(net).to_dict(),
                                    metadata=metadata(net).to_dict())


@app.post("/universe", response_model=schemas.UniverseResponse)
def universe(req: schemas.UniverseRequest) -> schemas.UniverseResponse:
    net = _network(req.network)
    return schemas.UniverseResponse(terms=enumerate_universe(net).names())


@app.post("/screen", response_model=schemas.ScreenResponse)
def screen(req: schemas.ScreenRequest) -> schemas.ScreenResponse:
    from ..pipeline import stage2_screen
    net = _network(req.network)
    engine = _engine(req.proposer)
    try:
        s1 = stage1_generate(net, req.query_text, engine)
        s2 = stage2_screen(s1.candidates, net, s1.universe, req.seed)
    except StageError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    survivors = [{"terms": c.spec.term_names(), "bic_s": c.bic_s}
                 for c in s2.survivors]
    return schemas.ScreenResponse(
        diagnostics=s1.diagnostics.to_dict(),
        universe=s1.universe.names(),
        nominations=[{**n.to_dict(), "admissible": adm} for n, adm
                     in zip(s1.nominations, s1.nomination_admissible)],
        offmenu=s1.offmenu,
        validity=s1.validity,
        admissible_terms=[t.canonical_name for t in s1.admissible_terms],
        baseline_bic_s=s2.baseline_bic_s,
        pool=[c.to_dict() for c in s1.candidates],
        selected=s2.selected.spec.canonical_name,
        survivors=survivors)


@app.post("/fit", response_model=schemas.FitResponse)
def fit(req: schemas.FitRequest) -> schemas.FitResponse:
    net = _network(req.network)
    spec = _spec(req.terms)
    universe_ = enumerate_universe(net)
    check = validate_spec(spec, universe_)
    if not check.ok:
        raise HTTPException(status_code=422, detail=check.reason)
    try:
        if req.method == "mple":
            result = fit_mple(spec, net)
        elif req.method == "exact":
            result = exact_fit(spec, net)
        else:
            controls = default_controls(net, seed=req.seed)
            if req.controls:
                controls = SimControls(
                    burn_in=req.controls.burn_in or controls.burn_in,
                    thin=req.controls.thin or controls.thin,
                    draws=req.controls.draws or controls.draws,
                    seed=req.seed)
            result = fit_mcmle(spec, net, controls=controls,
                               bridge_points=req.bridge_points)
    except (SamplerError, TermError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return schemas.FitResponse(fit=result.to_dict())


@app.post("/gof", response_model=schemas.GofResponse)
def gof_endpoint(req: schemas.GofRequest) -> schemas.GofResponse:
    net = _network(req.network)
    spec = _spec(req.terms)
    if len(req.theta) != len(spec.terms):
        raise HTTPException(status_code=422,
                            detail="theta length does not match terms")
    try:
        report = gof(spec, req.theta, net, tau=req.tau,
                     controls=gof_controls(net, req.seed, draws=req.draws))
    except (SamplerError, TermError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    report_dict = report.to_dict()
    return schemas.GofResponse(gof=report_dict,
                               tsv=render_gof_tsv(report_dict))


@app.post("/refine", response_model=schemas.RefineResponse)
def refine(req: schemas.RefineRequest) -> schemas.RefineResponse:
    net = _network(req.network)
    engine = _engine(req.proposer)
    universe_ = enumerate_universe(net)
    survivors = []
    for idx, s in enumerate(req.survivors):
        spec = _spec(s.terms)
        check = validate_spec(spec, universe_)
        if not check.ok:
            raise HTTPException(status_code=422,
                                detail=f"survivor {idx}: {check.reason}")
        cand = Candidate(index=idx, raw_terms=tuple(s.terms),
                         provenance="client", spec=spec)
        cand.bic_s = s.bic_s
        survivors.append(cand)
    config = RunConfig(query_text=req.query_text, seed=req.seed, tau=req.tau,
                       rounds=req.rounds, fallback=req.fallback,
                       mcmle_draws=req.mcmle_draws, gof_draws=req.gof_draws,
                       bridge_points=req.bridge_points)
    admissible = list(universe_)
    try:
        s3 = stage3_refine(survivors, net, engine, universe_, admissible,
                           config)
    except (StageError, ProposerError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return schemas.RefineResponse(
        fallback_attempts=s3.fallback_attempts,
        edit_log=[e.to_dict() for e in s3.edit_log],
        final_terms=s3.final_spec.term_names(),
        fit=s3.final_fit.to_dict(),
        gof=s3.final_gof.to_dict())


@app.post("/explain", response_model=schemas.ExplainResponse)
def explain(req: schemas.ExplainRequest) -> schemas.ExplainResponse:
    net = _network(req.network)
    spec = _spec(req.terms)
    if len(req.theta) != len(spec.terms):
        raise HTTPException(status_code=422,
                            detail="theta length does not match terms")
    engine = _engine(req.proposer)
    try:
        summary = engine.synthesize(spec, req.theta, metadata(net))
    except ProposerError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    score = score_interpretation(summary, spec, req.theta)
    return schemas.ExplainResponse(summary=summary.to_dict(),
                                   score=score.to_dict())


@app.post("/run", response_model=schemas.RunResponse)
def run(req: schemas.RunRequest) -> schemas.RunResponse:
    net = _network(req.network)
    config = RunConfig(
        query_text=req.query_text, proposer=req.proposer.kind,
        endpoint=req.proposer.endpoint, model=req.proposer.model,
        seed=req.seed, tau=req.tau, rounds=req.rounds, fallback=req.fallback,
        mcmle_draws=req.mcmle_draws, gof_draws=req.gof_draws,
        bridge_points=req.bridge_points, dataset=req.network.dataset,
        directed=req.network.directed)
    result = run_pipeline(net, config)
    run_dict = result.to_dict()
    artifacts = {
        "run.json": canonical_json(run_dict),
        "events.ndjson": "".join(
            json.dumps(ev, sort_keys=True) + "\n" for ev in run_dict["events"]),
        "summary.md": render_summary_md(run_dict),
    }
    if run_dict.get("status") == "ok" and run_dict.get("final"):
        artifacts["gof_final.tsv"] = render_gof_tsv(run_dict["final"]["gof"])
    persisted = write_run_dir(run_dict, req.out_dir) if req.out_dir else None
    return schemas.RunResponse(status=run_dict["status"],
                               failed_stage=run_dict.get("failed_stage"),
                               failure_reason=run_dict.get("failure_reason"),
                               run=run_dict, artifacts=artifacts,
                               persisted_to=persisted)
