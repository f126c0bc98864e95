import json
import math

import pytest

from ergmsearch.cli import main

EDGE_CSV = "a,b\nb,c\na,c\nc,d\nd,e\na,e\n"
ATTR_CSV = "node,team\na,red\nb,red\nc,blue\nd,blue\ne,red\n"


@pytest.fixture
def edge_file(tmp_path):
    p = tmp_path / "edges.csv"
    p.write_text(EDGE_CSV)
    return str(p)


@pytest.fixture
def attr_file(tmp_path):
    p = tmp_path / "attrs.csv"
    p.write_text(ATTR_CSV)
    return str(p)


class TestDiagnoseUniverse:
    def test_diagnose_prints_json(self, edge_file, capsys):
        assert main(["diagnose", "--edges", edge_file]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["diagnostics"]["node_count"] == 5

    def test_universe_directed_includes_mutual(self, tmp_path, capsys):
        p = tmp_path / "arcs.csv"
        p.write_text("a,b\nb,a\nb,c\n")
        assert main(["universe", "--edges", str(p), "--directed"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert "mutual" in lines
        assert "edges" in lines

    def test_dataset_shortcut(self, capsys):
        assert main(["diagnose", "--dataset", "florentine"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["diagnostics"]["edge_count"] == 20

    def test_bad_input_exits_2(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("a,a\n")
        with pytest.raises(SystemExit) as err:
            main(["diagnose", "--edges", str(p)])
        assert err.value.code == 2


class TestFitGof:
    def test_fit_mple_prints_logit_density(self, edge_file, capsys):
        assert main(["fit", "--edges", edge_file, "--terms", "edges",
                     "--method", "mple"]) == 0
        out = capsys.readouterr().out
        dens = 6 / 10
        expected = math.log(dens / (1 - dens))
        value = float(out.splitlines()[0].split("\t")[1])
        assert value == pytest.approx(expected, abs=1e-6)

    def test_fit_writes_artifact(self, edge_file, tmp_path, capsys):
        out_dir = tmp_path / "art"
        assert main(["fit", "--edges", edge_file, "--terms", "edges",
                     "--out", str(out_dir)]) == 0
        saved = json.loads((out_dir / "fit.json").read_text())
        assert saved["fit"]["terms"] == ["edges"]

    def test_gof_from_persisted_fit(self, edge_file, tmp_path, capsys):
        out_dir = tmp_path / "art"
        main(["fit", "--edges", edge_file, "--terms", "edges",
              "--out", str(out_dir)])
        assert main(["gof", "--edges", edge_file, "--fit",
                     str(out_dir / "fit.json"), "--out", str(out_dir),
                     "--draws", "40", "--seed", "3"]) == 0
        tsv = (out_dir / "gof_final.tsv").read_text()
        lines = [ln.split("\t") for ln in tsv.strip().splitlines()[1:]]
        observed = {}
        for group, label, obs, *_ in lines:
            observed[group] = observed.get(group, 0.0) + float(obs)
        assert observed["degree"] == 5
        assert observed["esp"] == 6
        assert observed["geodesic"] == 10

    def test_gof_requires_fit_or_theta(self, edge_file):
        with pytest.raises(SystemExit):
            main(["gof", "--edges", edge_file])


class TestScreenRefineRun:
    def test_screen_writes_survivors(self, tmp_path, capsys):
        out_dir = tmp_path / "art"
        assert main(["screen", "--dataset", "florentine", "--seed", "7",
                     "--out", str(out_dir)]) == 0
        data = json.loads((out_dir / "screen.json").read_text())
        assert data["selected"] == "edges,absdiff(attr=wealth)"
        assert data["survivors"]

    def test_refine_consumes_screen_artifact(self, tmp_path, capsys):
        out_dir = tmp_path / "art"
        main(["screen", "--dataset", "florentine", "--seed", "7",
              "--out", str(out_dir)])
        assert main(["refine", "--dataset", "florentine", "--seed", "7",
                     "--screen", str(out_dir / "screen.json"),
                     "--rounds", "1", "--fallback", "1",
                     "--out", str(out_dir)]) == 0
        data = json.loads((out_dir / "refine.json").read_text())
        assert data["fit"]["converged"]
        assert data["final_terms"][0] == "edges"

    def test_run_writes_all_artifacts(self, tmp_path, capsys):
        out_dir = tmp_path / "run_out"
        assert main(["run", "--dataset", "florentine", "--seed", "7",
                     "--query", "marriage ties", "--out", str(out_dir)]) == 0
        for name in ("run.json", "events.ndjson", "gof_final.tsv",
                     "summary.md"):
            assert (out_dir / name).exists(), name
        run = json.loads((out_dir / "run.json").read_text())
        assert run["status"] == "ok"
        assert run["config"]["seed"] == 7
        summary = (out_dir / "summary.md").read_text()
        assert "edges" in summary

    def test_run_stage_failure_exit_code(self, capsys):
        # pure noise network: screening rejects everything -> stage2 code 4
        code = main(["run", "--dataset", "er_small", "--seed", "3"])
        assert code == 4
        assert "stage2" in capsys.readouterr().err

    def test_explain_uses_fit_artifact(self, tmp_path, capsys):
        out_dir = tmp_path / "art"
        main(["fit", "--dataset", "florentine", "--terms",
              "edges,absdiff(attr=wealth)", "--out", str(out_dir)])
        assert main(["explain", "--dataset", "florentine",
                     "--fit", str(out_dir / "fit.json")]) == 0
        out = capsys.readouterr().out
        assert "log-odds" in out
