"""Pydantic request/response models for the HTTP service.

Networks travel as raw delimited text (exactly the on-disk file formats) or
as a bundled dataset name, so the CLI stays a thin pass-through client.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator


class NetworkIn(BaseModel):
    edge_csv: Optional[str] = None
    attr_csv: Optional[str] = None
    directed: bool = False
    dataset: Optional[str] = None     # bundled fixture name, overrides csv

    @model_validator(mode="after")
    def _has_source(self):
        if self.dataset is None and self.edge_csv is None:
            raise ValueError("provide either dataset or edge_csv")
        return self


class ProposerIn(BaseModel):
    kind: Literal["heuristic", "remote"] = "heuristic"
    endpoint: Optional[str] = None
    model: Optional[str] = None

    @model_validator(mode="after")
    def _remote_needs_endpoint(self):
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote proposer needs an endpoint")
        return self


class ControlsIn(BaseModel):
    burn_in: Optional[int] = None
    thin: Optional[int] = None
    draws: Optional[int] = None


class DiagnoseRequest(BaseModel):
    network: NetworkIn


class DiagnoseResponse(BaseModel):
    diagnostics: dict
    metadata: dict


class UniverseRequest(BaseModel):
    network: NetworkIn


class UniverseResponse(BaseModel):
    terms: list[str]


class ScreenRequest(BaseModel):
    network: NetworkIn
    query_text: str = ""
    proposer: ProposerIn = ProposerIn()
    seed: int = 1729


class ScreenResponse(BaseModel):
    diagnostics: dict
    universe: list[str]
    nominations: list[dict]
    offmenu: list[str]
    validity: dict
    admissible_terms: list[str]
    baseline_bic_s: float
    pool: list[dict]
    selected: str
    survivors: list[dict]           # canonical name + bic_s, screening order


class FitRequest(BaseModel):
    network: NetworkIn
    terms: list[str] = Field(min_length=1)
    method: Literal["mple", "mcmle", "exact"] = "mple"
    seed: int = 1729
    controls: Optional[ControlsIn] = None
    bridge_points: int = 10


class FitResponse(BaseModel):
    fit: dict


class GofRequest(BaseModel):
    network: NetworkIn
    terms: list[str] = Field(min_length=1)
    theta: list[float]
    seed: int = 1729
    tau: float = 2.5
    draws: int = 200


class GofResponse(BaseModel):
    gof: dict
    tsv: str


class SurvivorIn(BaseModel):
    terms: list[str]
    bic_s: float


class RefineRequest(BaseModel):
    network: NetworkIn
    survivors: list[SurvivorIn] = Field(min_length=1)
    query_text: str = ""
    proposer: ProposerIn = ProposerIn()
    seed: int = 1729
    tau: float = 2.5
    rounds: int = 4
    fallback: int = 3
    mcmle_draws: int = 500
    gof_draws: int = 200
    bridge_points: int = 10


class RefineResponse(BaseModel):
    fallback_attempts: list[dict]
    edit_log: list[dict]
    final_terms: list[str]
    fit: dict
    gof: dict


class ExplainRequest(BaseModel):
    network: NetworkIn
    terms: list[str] = Field(min_length=1)
    theta: list[float]
    proposer: ProposerIn = ProposerIn()


class ExplainResponse(BaseModel):
    summary: dict
    score: dict


class RunRequest(BaseModel):
    network: NetworkIn
    query_text: str = ""
    proposer: ProposerIn = ProposerIn()
    seed: int = 1729
    tau: float = 2.5
    rounds: int = 4
    fallback: int = 3
    mcmle_draws: int = 500
    gof_draws: int = 200
    bridge_points: int = 10
    out_dir: Optional[str] = None   # server-side persistence when set


class RunResponse(BaseModel):
    status: str
    failed_stage: Optional[str] = None
    failure_reason: Optional[str] = None
    run: dict
    artifacts: dict                 # rendered file contents keyed by filename
    persisted_to: Optional[dict] = None


class ErrorResponse(BaseModel):
    detail: str
