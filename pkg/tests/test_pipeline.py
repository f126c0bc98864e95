import math

import numpy as np
import pytest

from ergmsearch.estimation import FitResult
from ergmsearch.gof import BinStat, build_report
from ergmsearch.pipeline import (BIC_TOL, Candidate, RunConfig, StageError,
                                 acceptance_decision, apply_edit,
                                 run_pipeline, stage1_generate, stage2_screen,
                                 stage3_refine, _selection_key)
from ergmsearch.persist import strip_volatile
from ergmsearch.proposer import HeuristicEngine, Nomination, SpecProposal
from ergmsearch.proposer.base import EditProposal
from ergmsearch.terms import (ModelSpec, TermSpec, enumerate_universe,
                              parse_model)

from conftest import random_network


class ScriptedEngine:
    """Proposal engine driven by canned responses."""

    name = "scripted"

    def __init__(self, nominations=None, specs=None, edits=None):
        self.nominations = nominations or []
        self.specs = specs or []
        self.edits = list(edits or [])
        self.edit_calls = 0

    def propose_terms(self, diag, meta, query_text):
        return [Nomination(t, "closure", "scripted") for t in self.nominations]

    def propose_specs(self, admissible, diag, query_text):
        return [SpecProposal(f"s{i}", tuple(terms), "scripted")
                for i, terms in enumerate(self.specs)]

    def propose_edit(self, spec, gof_report, admissible, theta=None):
        edit = self.edits[min(self.edit_calls, len(self.edits) - 1)]
        self.edit_calls += 1
        return edit

    def synthesize(self, spec, theta, meta):
        return HeuristicEngine().synthesize(spec, theta, meta)


def report_with(max_z: float, degenerate: bool = False, tau: float = 2.5):
    sim_edge_mean = 1000.0 if degenerate else 10.0
    return build_report(
        {"esp": [BinStat("0", 1.0, 1.0, 1.0, max_z)]}, tau=tau,
        sim_edge_mean=sim_edge_mean, observed_edges=10, draws_used=10, seed=0)


def fake_fit(spec: ModelSpec, bic: float, converged: bool = True,
             theta=None) -> FitResult:
    k = len(spec.terms)
    return FitResult(spec=spec, theta=np.asarray(theta if theta is not None
                                                 else [0.1] * k),
                     method="mcmle", converged=converged,
                     log_lik=-bic / 2, bic=bic,
                     failure=None if converged else "scripted")


class TestAcceptanceDecision:
    TAU = 2.5

    def decide(self, cur_z, cur_bic, cand_z, cand_bic, degenerate=False):
        return acceptance_decision(
            current_adequate=cur_z <= self.TAU, current_max_z=cur_z,
            current_bic=cur_bic, candidate_degenerate=degenerate,
            candidate_adequate=cand_z <= self.TAU, candidate_max_z=cand_z,
            candidate_bic=cand_bic)

    def test_adequate_accepts_strict_bic_decrease(self):
        assert self.decide(1.8, 500.0, 2.0, 490.0).accepted

    def test_adequate_rejects_equal_bic(self):
        assert not self.decide(1.8, 500.0, 1.5, 500.0).accepted

    def test_adequate_rejects_adequacy_loss(self):
        assert not self.decide(1.8, 500.0, 3.0, 400.0).accepted

    def test_adequate_rejects_bic_increase(self):
        assert not self.decide(1.8, 500.0, 1.5, 510.0).accepted

    def test_inadequate_accepts_z_improvement_with_equal_bic(self):
        assert self.decide(4.0, 500.0, 3.1, 500.0).accepted

    def test_inadequate_rejects_z_stagnation(self):
        assert not self.decide(4.0, 500.0, 4.0, 450.0).accepted

    def test_inadequate_rejects_bic_increase(self):
        assert not self.decide(4.0, 500.0, 3.0, 520.0).accepted

    def test_degenerate_always_rejected(self):
        assert not self.decide(4.0, 500.0, 1.0, 100.0, degenerate=True).accepted

    def test_bic_equality_tolerance(self):
        # within 1e-6 counts as equal: not a strict decrease
        assert not self.decide(1.8, 500.0, 1.5, 500.0 - BIC_TOL / 2).accepted
        # just outside the tolerance counts as a decrease
        assert self.decide(1.8, 500.0, 1.5, 500.0 - 1e-3).accepted


class TestApplyEdit:
    def setup_method(self):
        self.net = random_network(1, n=8)
        self.universe = enumerate_universe(self.net)

    def test_add(self):
        spec = parse_model(["edges"])
        new, err = apply_edit(spec, EditProposal("add",
                                                 term_added="gwesp(decay=0.5)"),
                              self.universe)
        assert err is None
        assert new.term_names() == ["edges", "gwesp(decay=0.5)"]

    def test_add_duplicate_rejected(self):
        spec = parse_model(["edges", "gwesp(decay=0.5)"])
        new, err = apply_edit(spec, EditProposal("add",
                                                 term_added="gwesp(decay=0.5)"),
                              self.universe)
        assert new is None and "already present" in err

    def test_remove_missing_rejected(self):
        spec = parse_model(["edges"])
        new, err = apply_edit(spec, EditProposal("remove",
                                                 term_removed="triangle"),
                              self.universe)
        assert new is None and "not in specification" in err

    def test_remove_edges_fails_validation(self):
        spec = parse_model(["edges", "gwesp(decay=0.5)"])
        new, err = apply_edit(spec, EditProposal("remove",
                                                 term_removed="edges"),
                              self.universe)
        assert new is None and "edges" in err

    def test_replace_decay(self):
        spec = parse_model(["edges", "gwesp(decay=0.5)"])
        new, err = apply_edit(
            spec, EditProposal("replace", term_removed="gwesp(decay=0.5)",
                               term_added="gwesp(decay=0.75)"), self.universe)
        assert err is None
        assert "gwesp(decay=0.75)" in new.term_names()

    def test_noop_rejected(self):
        spec = parse_model(["edges", "gwesp(decay=0.5)"])
        new, err = apply_edit(
            spec, EditProposal("replace", term_removed="gwesp(decay=0.5)",
                               term_added="gwesp(decay=0.5)"), self.universe)
        assert new is None and "no-op" in err

    def test_off_universe_term_rejected(self):
        spec = parse_model(["edges"])
        new, err = apply_edit(spec, EditProposal("add", term_added="mutual"),
                              self.universe)  # undirected universe
        assert new is None and "not admissible" in err


class TestStage1:
    def test_heuristic_on_fixtures_yields_valid_candidates(self):
        from ergmsearch.datasets import BUNDLED
        engine = HeuristicEngine()
        for name, loader in BUNDLED.items():
            net = loader()
            result = stage1_generate(net, "", engine)
            assert len(result.candidates) >= 3, name
            from ergmsearch.terms import validate_spec
            for cand in result.candidates:
                assert cand.spec is not None
                assert "edges" in [t.family for t in cand.spec.terms]
                assert validate_spec(cand.spec, result.universe).ok

    def test_intersection_drops_directed_terms(self):
        net = random_network(2, n=8, with_attrs=False)  # undirected
        engine = ScriptedEngine(
            nominations=["edges", "mutual", "gwesp(decay=0.5)"],
            specs=[["edges", "gwesp(decay=0.5)"]])
        result = stage1_generate(net, "", engine)
        names = [t.canonical_name for t in result.admissible_terms]
        assert names == ["edges", "gwesp(decay=0.5)"]
        assert result.offmenu == ["mutual"]

    def test_empty_nominations_fail(self):
        net = random_network(2, n=8)
        with pytest.raises(StageError) as err:
            stage1_generate(net, "", ScriptedEngine(nominations=[]))
        assert "no admissible terms" in str(err.value)

    def test_unresolvable_spec_terms_kept_for_audit(self):
        net = random_network(2, n=8)
        engine = ScriptedEngine(
            nominations=["edges"],
            specs=[["edges"], ["edges", "wormholes"]])
        result = stage1_generate(net, "", engine)
        assert result.candidates[1].spec is None
        assert "wormholes" in result.candidates[1].parse_error


class TestStage2:
    def test_baseline_equal_bic_discarded(self):
        # the edges-only candidate ties the baseline exactly: >= means discard
        net = random_network(3, n=10, p=0.3, with_attrs=False)
        engine = ScriptedEngine(nominations=["edges"], specs=[["edges"]])
        s1 = stage1_generate(net, "", engine)
        with pytest.raises(StageError) as err:
            stage2_screen(s1.candidates, net, s1.universe, seed=5)
        assert "emptied" in str(err.value)
        assert s1.candidates[0].screen_reason == \
            "BIC_s does not improve on baseline"

    def test_duplicate_candidates_rejected(self):
        from ergmsearch.datasets import planted_homophily
        net = planted_homophily(n=20, seed=3)
        engine = ScriptedEngine(
            nominations=["edges", "nodematch(attr=group)"],
            specs=[["edges", "nodematch(attr=group)"],
                   ["edges", "nodematch(attr=group)"]])
        s1 = stage1_generate(net, "", engine)
        s2 = stage2_screen(s1.candidates, net, s1.universe, seed=5)
        assert s1.candidates[0].screen_status == "survived"
        assert s1.candidates[1].screen_status == "rejected"
        assert "duplicate" in s1.candidates[1].screen_reason
        assert s2.selected is s1.candidates[0]

    def test_unstable_survivor_discarded(self, monkeypatch):
        from ergmsearch import pipeline as pl
        from ergmsearch.sampler import StabilityResult
        from ergmsearch.datasets import planted_homophily
        net = planted_homophily(n=20, seed=3)
        engine = ScriptedEngine(
            nominations=["edges", "nodematch(attr=group)"],
            specs=[["edges", "nodematch(attr=group)"]])
        s1 = stage1_generate(net, "", engine)
        monkeypatch.setattr(
            pl, "stability_probe",
            lambda *a, **k: StabilityResult(False, "edge-density mismatch",
                                            999.0, net.edge_count))
        with pytest.raises(StageError):
            stage2_screen(s1.candidates, net, s1.universe, seed=5)
        assert "unstable" in s1.candidates[0].screen_reason

    def test_selection_prefers_fewer_terms_then_name(self):
        def cand(terms, bic):
            c = Candidate(index=0, raw_terms=tuple(terms), provenance="t",
                          spec=parse_model(terms))
            c.bic_s = bic
            return c

        three = cand(["edges", "gwesp(decay=0.5)", "triangle"], 500.0)
        four = cand(["edges", "gwesp(decay=0.5)", "gwdsp(decay=0.5)",
                     "twopath"], 500.0)
        assert min([four, three], key=_selection_key) is three

        a = cand(["edges", "gwdsp(decay=0.5)"], 500.0)
        b = cand(["edges", "gwesp(decay=0.5)"], 500.0)
        assert min([b, a], key=_selection_key) is a  # lexicographic name


def scripted_stage3(net, survivors, engine, fits, gofs, config=None):
    """stage3_refine with canned fit/gof lookups keyed by canonical name."""
    universe = enumerate_universe(net)
    fit_calls = []

    def fit_fn(spec, seed):
        fit_calls.append(spec.canonical_name)
        return fits[spec.canonical_name]

    def gof_fn(spec, theta, seed):
        return gofs[spec.canonical_name]

    config = config or RunConfig(seed=1)
    result = stage3_refine(survivors, net, engine, universe, list(universe),
                           config, fit_fn=fit_fn, gof_fn=gof_fn)
    return result, fit_calls


def make_survivor(terms, bic_s, index=0):
    c = Candidate(index=index, raw_terms=tuple(terms), provenance="t",
                  spec=parse_model(terms))
    c.bic_s = bic_s
    return c


class TestStage3:
    def setup_method(self):
        self.net = random_network(4, n=8, with_attrs=False)

    def test_fallback_skips_nonconverged(self):
        s_bad = make_survivor(["edges", "twopath"], 100.0, 0)
        s_good = make_survivor(["edges", "gwesp(decay=0.5)"], 110.0, 1)
        fits = {
            "edges,twopath": fake_fit(s_bad.spec, math.inf, converged=False),
            "edges,gwesp(decay=0.5)": fake_fit(s_good.spec, 120.0),
        }
        gofs = {"edges,gwesp(decay=0.5)": report_with(1.0)}
        engine = ScriptedEngine(edits=[EditProposal("remove",
                                                    term_removed="edges")])
        result, calls = scripted_stage3(self.net, [s_bad, s_good], engine,
                                        fits, gofs)
        assert calls[:2] == ["edges,twopath", "edges,gwesp(decay=0.5)"]
        assert result.final_spec.canonical_name == "edges,gwesp(decay=0.5)"
        assert result.fallback_attempts[0]["converged"] is False

    def test_fallback_exhaustion_fails(self):
        survivors = [make_survivor(["edges", "twopath"], 100.0, 0),
                     make_survivor(["edges", "triangle"], 110.0, 1)]
        fits = {s.spec.canonical_name: fake_fit(s.spec, math.inf, False)
                for s in survivors}
        engine = ScriptedEngine(edits=[])
        with pytest.raises(StageError) as err:
            scripted_stage3(self.net, survivors, engine, fits, {})
        assert "initialization failed" in str(err.value)

    def test_degenerate_initial_gof_triggers_fallback(self):
        s_first = make_survivor(["edges", "triangle"], 100.0, 0)
        s_second = make_survivor(["edges", "gwesp(decay=0.5)"], 110.0, 1)
        fits = {
            "edges,triangle": fake_fit(s_first.spec, 90.0),
            "edges,gwesp(decay=0.5)": fake_fit(s_second.spec, 120.0),
        }
        gofs = {
            "edges,triangle": report_with(1.0, degenerate=True),
            "edges,gwesp(decay=0.5)": report_with(1.0),
        }
        engine = ScriptedEngine(edits=[EditProposal("remove",
                                                    term_removed="edges")])
        result, _ = scripted_stage3(self.net, [s_first, s_second], engine,
                                    fits, gofs)
        assert result.final_spec.canonical_name == "edges,gwesp(decay=0.5)"
        assert result.fallback_attempts[0]["degenerate"] is True

    def test_two_consecutive_rejections_stop(self):
        s0 = make_survivor(["edges", "gwesp(decay=0.5)"], 100.0)
        grown = parse_model(["edges", "twopath",
                             "gwesp(decay=0.5)"]).canonicalized()
        fits = {
            "edges,gwesp(decay=0.5)": fake_fit(s0.spec, 100.0),
            grown.canonical_name: fake_fit(grown, 100.0),
        }
        gofs = {
            "edges,gwesp(decay=0.5)": report_with(1.0),
            grown.canonical_name: report_with(1.0),  # equal BIC: rejected
        }
        engine = ScriptedEngine(edits=[
            EditProposal("add", term_added="twopath")])
        config = RunConfig(seed=1, rounds=4)
        result, _ = scripted_stage3(self.net, [s0], engine, fits, gofs,
                                    config)
        # same rejected edit twice -> loop exits after two rounds of T=4
        assert len(result.edit_log) == 2
        assert [e.decision for e in result.edit_log] == ["rejected"] * 2
        assert result.final_spec.canonical_name == "edges,gwesp(decay=0.5)"

    def test_round_cap_reached_with_alternating_accepts(self):
        base = make_survivor(["edges", "gwesp(decay=0.5)"], 100.0)
        sp = {
            "a": "edges,gwesp(decay=0.5)",
            "b": "edges,gwesp(decay=0.5),twopath",
        }
        spec_b = parse_model(["edges", "gwesp(decay=0.5)", "twopath"])
        fits = {
            sp["a"]: fake_fit(base.spec, 100.0),
            sp["b"]: fake_fit(spec_b, 90.0),
        }
        gofs = {sp["a"]: report_with(1.0), sp["b"]: report_with(0.9)}
        # add then remove then add... each accepted (BIC drops each round)
        engine = ScriptedEngine(edits=[
            EditProposal("add", term_added="twopath"),
            EditProposal("remove", term_removed="twopath"),
            EditProposal("add", term_added="twopath"),
            EditProposal("remove", term_removed="twopath"),
        ])

        calls = {"n": 0}

        def fit_fn(spec, seed):
            calls["n"] += 1
            # strictly decreasing BIC so every edit is accepted
            return fake_fit(spec, 100.0 - 10 * calls["n"])

        def gof_fn(spec, theta, seed):
            return report_with(1.0)

        universe = enumerate_universe(self.net)
        result = stage3_refine([base], self.net, engine, universe,
                               list(universe), RunConfig(seed=1, rounds=4),
                               fit_fn=fit_fn, gof_fn=gof_fn)
        assert len(result.edit_log) == 4          # T = 4 cap
        assert all(e.decision == "accepted" for e in result.edit_log)

    def test_rejection_counter_resets_after_accept(self):
        base = make_survivor(["edges", "gwesp(decay=0.5)"], 100.0)
        spec_b = parse_model(["edges", "gwesp(decay=0.5)",
                              "twopath"]).canonicalized()
        state = {"n": 0}
        # round 0: invalid edit (rejected); round 1: accepted; rounds 2,3: rejected
        engine = ScriptedEngine(edits=[
            EditProposal("remove", term_removed="nonexistent"),
            EditProposal("add", term_added="twopath"),
            EditProposal("remove", term_removed="edges"),
            EditProposal("remove", term_removed="edges"),
        ])

        def fit_fn(spec, seed):
            state["n"] += 1
            bics = {1: 100.0, 2: 80.0}
            return fake_fit(spec, bics.get(state["n"], 200.0))

        def gof_fn(spec, theta, seed):
            return report_with(1.0)

        universe = enumerate_universe(self.net)
        result = stage3_refine([base], self.net, engine, universe,
                               list(universe), RunConfig(seed=1, rounds=4),
                               fit_fn=fit_fn, gof_fn=gof_fn)
        decisions = [e.decision for e in result.edit_log]
        assert decisions == ["rejected", "accepted", "rejected", "rejected"]
        assert [e.rej_after for e in result.edit_log] == [1, 0, 1, 2]
        assert result.final_spec.canonical_name == spec_b.canonical_name

    def test_nonconverged_candidate_counts_as_rejection(self):
        base = make_survivor(["edges", "gwesp(decay=0.5)"], 100.0)
        engine = ScriptedEngine(edits=[
            EditProposal("add", term_added="twopath")])
        state = {"n": 0}

        def fit_fn(spec, seed):
            state["n"] += 1
            if state["n"] == 1:
                return fake_fit(spec, 100.0)
            return fake_fit(spec, math.inf, converged=False)

        def gof_fn(spec, theta, seed):
            return report_with(1.0)

        universe = enumerate_universe(self.net)
        result = stage3_refine([base], self.net, engine, universe,
                               list(universe), RunConfig(seed=1, rounds=4),
                               fit_fn=fit_fn, gof_fn=gof_fn)
        assert [e.decision for e in result.edit_log] == ["rejected"] * 2
        assert all("mcmle failed" in e.reason for e in result.edit_log)


class TestRunPipeline:
    def test_florentine_deterministic(self):
        from ergmsearch.datasets import load_florentine
        net = load_florentine()
        cfg = RunConfig(query_text="marriage ties", seed=7)
        a = run_pipeline(net, cfg).to_dict()
        b = run_pipeline(net, cfg).to_dict()
        assert strip_volatile(a) == strip_volatile(b)
        assert a["status"] == "ok"

    def test_failure_is_structured(self):
        net = random_network(3, n=10, p=0.3, with_attrs=False)
        engine = ScriptedEngine(nominations=["edges"], specs=[["edges"]])
        run = run_pipeline(net, RunConfig(seed=3), engine=engine)
        assert run.status == "failed"
        assert run.failed_stage == "stage2"
        assert run.pool is not None          # audit trail survives failure
        assert any(ev["event"] == "stage_failed" for ev in run.events)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            RunConfig(tau=0.0)
        with pytest.raises(ValueError):
            RunConfig(rounds=0)
        with pytest.raises(ValueError):
            RunConfig(proposer="remote")     # endpoint missing
        with pytest.raises(ValueError):
            RunConfig(proposer="oracle")
