"""Chat-completion client for remote proposal engines.

Speaks a generic JSON chat protocol: POST to a configurable endpoint with
``{model, messages, temperature: 0}``, expecting
``{choices: [{message: {content}}]}`` whose content is strict JSON matching
the stage schema.  Malformed or failing responses are retried with
exponential backoff; the auth token is read from an environment variable and
never logged.  Every exchange is recorded verbatim (minus auth headers) in
``transcript`` for the run log.
"""

from __future__ import annotations

import json
import os
import time
from typing import Literal, Optional, Sequence

import httpx
from pydantic import BaseModel, ValidationError

from ..network import Diagnostics, Metadata
from ..terms import ModelSpec, TermSpec
from . import prompts
from .base import (EditProposal, MechanismClaim, MechanismSummary, Nomination,
                   ProposerError, SpecProposal, post_filter)

DEFAULT_TOKEN_ENV = "ERGMSEARCH_API_TOKEN"

_MECH = Literal["baseline", "reciprocity", "closure", "degree_heterogeneity",
                "homophily", "exposure"]


class _NominationItem(BaseModel):
    term_name: str
    mechanism: _MECH
    justification: str = ""


class _NominationsPayload(BaseModel):
    nominations: list[_NominationItem]


class _SpecItem(BaseModel):
    spec_id: str
    included_terms: list[str]
    formation_interpretation: str = ""


class _SpecsPayload(BaseModel):
    specifications: list[_SpecItem]


class _EditPayload(BaseModel):
    edit_type: Literal["add", "remove", "replace"]
    term_removed: Optional[str] = None
    term_added: Optional[str] = None
    rationale: str = ""


class _ClaimItem(BaseModel):
    mechanism: Literal["baseline", "reciprocity", "closure",
                       "degree_heterogeneity", "homophily"]
    direction: Literal["increases", "decreases", "mixed"]
    strength: str = ""
    supporting_terms: list[str] = []


class _SynthesisPayload(BaseModel):
    paragraph: str
    claims: list[_ClaimItem]


def _strip_fences(text: str) -> str:
    text = text.strip()
    if text.startswith("```"):
        lines = text.splitlines()
        if lines and lines[0].startswith("```"):
            lines = lines[1:]
        if lines and lines[-1].strip().startswith("```"):
            lines = lines[:-1]
        text = "\n".join(lines).strip()
    return text


class RemoteEngine:
    """Proposal engine backed by a chat-completion endpoint."""

    name = "remote"

    def __init__(self, endpoint: str, model: str,
                 token_env: str = DEFAULT_TOKEN_ENV,
                 timeout: float = 60.0, max_retries: int = 3,
                 backoff: float = 0.5,
                 transport: Optional[httpx.BaseTransport] = None):
        self.endpoint = endpoint
        self.model = model
        self.token_env = token_env
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.transcript: list[dict] = []
        self._client = httpx.Client(transport=transport, timeout=timeout)

    def close(self):
        self._client.close()

    # ------------------------------------------------------------------

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _chat(self, prompt_name: str, rendered: str, schema: type[BaseModel]):
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": rendered}],
            "temperature": 0,
        }
        last_error = "no attempts made"
        for attempt in range(self.max_retries):
            if attempt and self.backoff > 0:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            record = {"prompt": prompt_name, "request": payload,
                      "attempt": attempt}
            try:
                resp = self._client.post(self.endpoint, json=payload,
                                         headers=self._headers())
                record["status"] = resp.status_code
                record["response_text"] = resp.text
            except httpx.HTTPError as exc:
                last_error = f"transport: {exc}"
                record["error"] = last_error
                self.transcript.append(record)
                continue
            self.transcript.append(record)
            if resp.status_code != 200:
                last_error = f"status {resp.status_code}"
                continue
            try:
                content = resp.json()["choices"][0]["message"]["content"]
                parsed = schema.model_validate_json(_strip_fences(content))
                return parsed
            except (KeyError, IndexError, TypeError, ValueError,
                    ValidationError) as exc:
                last_error = f"schema: {exc}"
                continue
        raise ProposerError(
            f"{prompt_name} failed after {self.max_retries} attempts: {last_error}")

    # ------------------------------------------------------------------

    def propose_terms(self, diag: Diagnostics, meta: Metadata,
                      query_text: str) -> list[Nomination]:
        rendered = prompts.render("term_nomination", {
            "Q": query_text,
            "d_G": json.dumps(diag.to_dict(), sort_keys=True),
            "m_G": json.dumps(meta.to_dict(), sort_keys=True),
        })
        payload = self._chat("term_nomination", rendered, _NominationsPayload)
        return [Nomination(n.term_name, n.mechanism, n.justification)
                for n in payload.nominations]

    def propose_specs(self, admissible: Sequence[TermSpec], diag: Diagnostics,
                      query_text: str) -> list[SpecProposal]:
        rendered = prompts.render("spec_proposal", {
            "Q": query_text,
            "d_G": json.dumps(diag.to_dict(), sort_keys=True),
            "admissible": "\n".join(t.canonical_name for t in admissible),
        })
        payload = self._chat("spec_proposal", rendered, _SpecsPayload)
        return [SpecProposal(s.spec_id, tuple(s.included_terms),
                             s.formation_interpretation)
                for s in payload.specifications]

    def propose_edit(self, spec: ModelSpec, gof_report,
                     admissible: Sequence[TermSpec],
                     theta: Optional[Sequence[float]] = None) -> EditProposal:
        from ..gof import gof_table
        coef = ({t: round(float(v), 4) for t, v
                 in zip(spec.term_names(), theta)} if theta is not None else {})
        rendered = prompts.render("refinement_edit", {
            "spec": ", ".join(spec.term_names()),
            "theta": json.dumps(coef, sort_keys=True),
            "gof_table": gof_table(gof_report),
            "admissible": "\n".join(t.canonical_name for t in admissible),
        })
        payload = self._chat("refinement_edit", rendered, _EditPayload)
        try:
            return EditProposal(payload.edit_type, payload.term_removed,
                                payload.term_added, payload.rationale)
        except ValueError as exc:
            raise ProposerError(f"edit fields inconsistent: {exc}") from exc

    def synthesize(self, spec: ModelSpec, theta: Sequence[float],
                   meta: Metadata) -> MechanismSummary:
        coef = {t: round(float(v), 4)
                for t, v in zip(spec.term_names(), theta)}
        rendered = prompts.render("synthesis", {
            "m_G": json.dumps(meta.to_dict(), sort_keys=True),
            "theta": json.dumps(coef, sort_keys=True),
        })
        payload = self._chat("synthesis", rendered, _SynthesisPayload)
        claims = tuple(MechanismClaim(
            mechanism=c.mechanism, direction=c.direction,
            strength_note=c.strength,
            supporting_terms=tuple(c.supporting_terms)) for c in payload.claims)
        return post_filter(MechanismSummary(claims, payload.paragraph), spec)
