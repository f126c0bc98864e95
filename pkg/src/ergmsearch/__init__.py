"""Guarded ERGM specification search.

Core value types and operations re-exported for direct use; the FastAPI
service lives in :mod:`ergmsearch.service` and the thin CLI client in
:mod:`ergmsearch.cli`.
"""

from .estimation import (FitResult, bic_value, exact_fit, exact_log_lik,
                         exact_psi, fit_mcmle, fit_mple, log_lik_mc)
from .gof import GofReport, epsilon_edges, gof, gof_table, non_degenerate
from .ingest import IngestError, ingest, ingest_text
from .network import (AttributeColumn, Diagnostics, GeodesicDistribution,
                      Metadata, Network, NetworkError, diagnostics,
                      geodesic_distribution, metadata)
from .pipeline import (PipelineRun, RunConfig, StageError, run_pipeline,
                       stage1_generate, stage2_screen, stage3_refine)
from .proposer import HeuristicEngine, RemoteEngine
from .sampler import (SampleBatch, SimControls, default_controls, derive_seed,
                      merge_batches, simulate, stability_probe)
from .terms import (DECAY_GRID, ModelSpec, TermSpec, TermUniverse, change_score,
                    change_vector, enumerate_universe, model_statistics,
                    parse_model, parse_term, statistic, validate_spec)

__version__ = "0.1.0"

__all__ = [
    "AttributeColumn", "DECAY_GRID", "Diagnostics", "FitResult",
    "GeodesicDistribution", "GofReport", "HeuristicEngine", "IngestError",
    "Metadata", "ModelSpec", "Network", "NetworkError", "PipelineRun",
    "RemoteEngine", "RunConfig", "SampleBatch", "SimControls", "StageError",
    "TermSpec", "TermUniverse",
    "bic_value", "change_score", "change_vector", "default_controls",
    "derive_seed", "diagnostics", "enumerate_universe", "epsilon_edges",
    "exact_fit", "exact_log_lik", "exact_psi", "fit_mcmle", "fit_mple",
    "geodesic_distribution", "gof", "gof_table", "ingest", "ingest_text",
    "log_lik_mc", "merge_batches", "metadata", "model_statistics",
    "non_degenerate", "parse_model", "parse_term", "run_pipeline", "simulate",
    "stability_probe", "stage1_generate", "stage2_screen", "stage3_refine",
    "statistic", "validate_spec",
]
