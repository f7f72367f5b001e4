import json

import pytest
import yaml

from conftest import replicated_rows
from emaxcli.cli import EXIT_ESTIMATION, EXIT_INPUT, EXIT_OK, main
from emaxcli.core.model import d_optimal_x2, eta
from emaxcli.utils.manifest import load_manifest
from emaxcli.utils.rng import SEED_ENV


@pytest.fixture(autouse=True)
def _workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(SEED_ENV, raising=False)


@pytest.fixture
def concave_csv(write_csv, design, truth):
    ybar = eta(list(design.doses), truth)
    return write_csv(replicated_rows(design.doses, ybar), name="concave.csv")


@pytest.fixture
def case1_csv(write_csv, design):
    return write_csv(replicated_rows(design.doses, (2.0, 2.3, 2.2)), name="case1.csv")


def _json(path):
    return json.loads(path.read_text())


def test_classify(concave_csv, tmp_path):
    out = tmp_path / "shape.json"
    assert main(["classify", "--data", str(concave_csv), "--out", str(out)]) == EXIT_OK
    doc = _json(out)
    assert doc["shape"]["case"] == "increasing_concave"
    assert doc["limit"] is None
    manifest = load_manifest(tmp_path / "shape.json.manifest.json")
    assert manifest.command == "classify"
    assert manifest.argv[0] == "classify"


def test_classify_text(case1_csv, capsys):
    assert main(["classify", "--data", str(case1_csv), "--format", "text"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "case1a" in out
    assert "step at" in out


def test_classify_json_with_summary_on_stderr(case1_csv, capsys):
    assert main(["classify", "--data", str(case1_csv)]) == EXIT_OK
    captured = capsys.readouterr()
    assert json.loads(captured.out)["shape"]["case"] == "case1a"
    assert "case1a" in captured.err
    assert "limiting fit" in captured.err


def test_collinear_means_have_no_mle(write_csv, capsys):
    path = write_csv([(0, 0.0), (1, 1.0000000000000002), (2, 2.0)], name="line.csv")
    assert main(["fit", "--data", str(path), "--method", "mle"]) == EXIT_ESTIMATION
    doc = json.loads(capsys.readouterr().out)
    assert doc["kind"] == "no_mle"
    assert doc["shape"]["case"] == "increasing_concave"
    assert doc["limit"]["kind"] == "line"


def test_malformed_csv_reports_line(write_csv, capsys):
    path = write_csv(["0,1.0", "1,abc", "2,3.0"])
    assert main(["classify", "--data", str(path)]) == EXIT_INPUT
    assert "line 3" in capsys.readouterr().err


def test_fit_mle(concave_csv, tmp_path, truth):
    out = tmp_path / "fit.json"
    assert main(["fit", "--data", str(concave_csv), "--method", "mle", "--out", str(out)]) == EXIT_OK
    doc = _json(out)
    assert doc["kind"] == "exact_mle"
    assert doc["params"]["theta2"] == pytest.approx(truth.theta2, rel=1e-6)


def test_fit_mle_without_estimate_exits_3(case1_csv, tmp_path):
    out = tmp_path / "fit.json"
    assert main(["fit", "--data", str(case1_csv), "--method", "mle", "--out", str(out)]) == EXIT_ESTIMATION
    doc = _json(out)
    assert doc["kind"] == "no_mle"
    assert doc["limit"]["kind"] == "step_at_a"


def test_firth_needs_sigma_without_replicates(write_csv, design):
    path = write_csv([(x, y) for x, y in zip(design.doses, (2.0, 2.05, 2.467))])
    assert main(["fit", "--data", str(path), "--method", "firth"]) == EXIT_INPUT


def test_fit_auto_recommends_extra_dose(case1_csv, tmp_path, domain):
    out = tmp_path / "guide.json"
    assert main(["fit", "--data", str(case1_csv), "--out", str(out)]) == EXIT_ESTIMATION
    doc = _json(out)
    assert doc["rationale"] == "augment_case1"
    rec = doc["recommendation"]
    assert rec["dopt_point"] == pytest.approx(d_optimal_x2(domain, rec["theta2_1"]))


def test_design_dopt(tmp_path, domain):
    out = tmp_path / "design.json"
    assert main(["design", "--theta2", "25", "--out", str(out)]) == EXIT_OK
    assert _json(out)["design"]["x2"] == pytest.approx(d_optimal_x2(domain, 25.0))


def test_design_alpha(tmp_path):
    out = tmp_path / "design.json"
    assert main(["design", "--mode", "alpha", "--alpha", "0.05", "--theta2", "50", "--out", str(out)]) == EXIT_OK
    doc = _json(out)
    assert doc["power"] == pytest.approx(0.05, abs=1e-6)


def test_design_alpha_needs_alpha():
    assert main(["design", "--mode", "alpha"]) == EXIT_INPUT


def test_prob_quad(tmp_path):
    out = tmp_path / "p.json"
    assert main(["prob", "--method", "quad", "--theta2-g", "12.5", "--out", str(out)]) == EXIT_OK
    doc = _json(out)
    assert 100 * doc["p_case2"] == pytest.approx(15.18, abs=0.15)


def test_prob_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(SEED_ENV, "5")
    out = tmp_path / "p.json"
    assert main(["prob", "--draws", "1000", "--out", str(out)]) == EXIT_OK
    assert load_manifest(tmp_path / "p.json.manifest.json").seed == 5


def test_bad_seed_environment(monkeypatch):
    monkeypatch.setenv(SEED_ENV, "not-a-number")
    assert main(["prob", "--draws", "10"]) == EXIT_INPUT


def test_replay_reproduces_output(tmp_path, monkeypatch):
    monkeypatch.setenv(SEED_ENV, "31")
    out = tmp_path / "p.json"
    assert main(["prob", "--draws", "70000", "--threads", "2", "--out", str(out)]) == EXIT_OK
    first = out.read_text()
    monkeypatch.setenv(SEED_ENV, "99")
    out.unlink()
    assert main(["replay", str(tmp_path / "p.json.manifest.json")]) == EXIT_OK
    assert out.read_text() == first


def test_simulate_writes_table(tmp_path):
    out = tmp_path / "t1.csv"
    args = ["simulate", "--theta2-g-list", "12.5", "--replicates", "40", "--seed", "3", "--out", str(out)]
    assert main(args) == EXIT_OK
    assert out.exists()
    assert (tmp_path / "t1.txt").exists()
    assert load_manifest(tmp_path / "t1.csv.manifest.json").seed == 3


def test_sweep_writes_curves(tmp_path):
    out = tmp_path / "sw.csv"
    args = ["sweep", "--theta2-list", "50", "--x2-grid", "10", "30", "--alpha-list", "0.05", "--out", str(out)]
    assert main(args) == EXIT_OK
    assert len(out.read_text().splitlines()) == 3
    assert (tmp_path / "sw_alpha.csv").exists()


def test_run_yaml_pipeline(tmp_path, scenario, concave_csv):
    cfg = {
        "parsers": [{"type": "emaxcli.parsers.DoseResponseCsvParser", "params": {"path": str(concave_csv)}}],
        "processors": [
            {"name": "guideline", "type": "emaxcli.processors.GuidelineProcessor", "params": {}},
            {
                "name": "table1",
                "type": "emaxcli.processors.Table1Processor",
                "params": {
                    "scenario": scenario.model_dump(mode="json"),
                    "theta2_g_list": [50.0],
                    "replicates": 20,
                    "seed": 1,
                },
            },
        ],
        "output": [{"type": "emaxcli.output.JsonOutput", "params": {"out_file": str(tmp_path / "run.json")}}],
    }
    path = tmp_path / "pipeline.yaml"
    path.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    assert main(["run", "--config", str(path)]) == EXIT_OK
    doc = _json(tmp_path / "run.json")
    assert doc[0]["rationale"] == "exact_mle"
    assert doc[1]["rows"][0]["replicates"] == 20
    assert "pipeline" in load_manifest(tmp_path / "run_manifest.json").config


def test_run_missing_config(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.yaml")]) == EXIT_INPUT


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as err:
        main(["bogus"])
    assert err.value.code == 2
