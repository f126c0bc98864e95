"""Run-artifact rendering and persistence.

A completed run produces four files in its output directory:

* ``run.json`` — the full audit record, canonically serialized (sorted keys,
  two-space indent) so identical runs are byte-identical apart from the
  timing/timestamp fields.
* ``events.ndjson`` — append-style stage-transition stream, one JSON object
  per line.
* ``gof_final.tsv`` — per-bin table of the final goodness-of-fit report.
* ``summary.md`` — the mechanism summary with the fitted coefficients.
"""

from __future__ import annotations

import json
from pathlib import Path

VOLATILE_KEYS = ("timing", "created_at")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def strip_volatile(run_dict: dict) -> dict:
    """Copy without wall-clock fields; the determinism contract compares
    this."""
    out = {k: v for k, v in run_dict.items() if k not in VOLATILE_KEYS}
    if isinstance(out.get("events"), list):
        out["events"] = [{k: v for k, v in ev.items() if k != "ts"}
                         for ev in out["events"]]
    return out


def render_gof_tsv(gof_dict: dict) -> str:
    lines = ["group\tlabel\tobserved\tsim_mean\tsim_sd\tz"]
    for group in sorted(gof_dict.get("stat_groups", {})):
        for b in gof_dict["stat_groups"][group]:
            z = b["z"] if isinstance(b["z"], str) else f"{b['z']:.6g}"
            lines.append(f"{group}\t{b['label']}\t{b['observed']:.6g}"
                         f"\t{b['sim_mean']:.6g}\t{b['sim_sd']:.6g}\t{z}")
    return "\n".join(lines) + "\n"


def render_summary_md(run_dict: dict) -> str:
    lines = ["# Specification search summary", ""]
    if run_dict.get("status") != "ok":
        lines += [f"**Run failed** at {run_dict.get('failed_stage')}: "
                  f"{run_dict.get('failure_reason')}", ""]
        return "\n".join(lines)
    final = run_dict["final"]
    fit = final["fit"]
    lines += [f"Final specification: `{', '.join(final['terms'])}`", ""]
    lines += ["| term | coefficient |", "| --- | --- |"]
    for term in final["terms"]:
        coef = fit["coefficients"][term]
        coef_txt = coef if isinstance(coef, str) else f"{coef:+.4f}"
        lines.append(f"| `{term}` | {coef_txt} |")
    bic = fit["bic"]
    bic_txt = bic if isinstance(bic, str) else f"{bic:.2f}"
    gof = final["gof"]
    maxz = gof["max_abs_z"]
    maxz_txt = maxz if isinstance(maxz, str) else f"{maxz:.3f}"
    lines += ["",
              f"BIC_f: {bic_txt}; max |z|: {maxz_txt}; "
              f"adequate: {gof['adequate']}; degenerate: {gof['degenerate']}",
              ""]
    interp = run_dict.get("interpretation") or {}
    if interp.get("paragraph"):
        lines += ["## Mechanisms", "", interp["paragraph"], ""]
    return "\n".join(lines)


def write_run_dir(run_dict: dict, out_dir) -> dict:
    """Write all four artifacts; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}

    run_path = out / "run.json"
    run_path.write_text(canonical_json(run_dict))
    paths["run_json"] = str(run_path)

    events_path = out / "events.ndjson"
    events = run_dict.get("events") or []
    events_path.write_text(
        "".join(json.dumps(ev, sort_keys=True) + "\n" for ev in events))
    paths["events"] = str(events_path)

    if run_dict.get("status") == "ok" and run_dict.get("final"):
        gof_path = out / "gof_final.tsv"
        gof_path.write_text(render_gof_tsv(run_dict["final"]["gof"]))
        paths["gof_tsv"] = str(gof_path)

    summary_path = out / "summary.md"
    summary_path.write_text(render_summary_md(run_dict))
    paths["summary"] = str(summary_path)
    return paths
