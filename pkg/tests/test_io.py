import json

import pandas as pd
import pytest

from emaxcli.core.mle import mle_fit
from emaxcli.core.prob import shape_probabilities
from emaxcli.errors import InputError
from emaxcli.models import (
    DoseResponseCsvConfig, EmaxParams, FailureReason, FirthEstimate, FirthFailure,
    ScenarioSamplerConfig, SimConfig, SimRow, SufficientStats, SweepOut, SweepRow,
    AlphaRow, Table1Out,
)
from emaxcli.output import CsvTableOutput, HtmlReportOutput, JsonOutput
from emaxcli.output.csv_table import table1_frame, table1_text
from emaxcli.output.json_output import dumps
from emaxcli.parsers import DoseResponseCsvParser, ScenarioSampler
from emaxcli.processors import guideline_run


def _parser(path):
    return DoseResponseCsvParser(DoseResponseCsvConfig(path=str(path)))


# ──────────────────────────────────────────────────────────────────────────────
# CSV observations
# ──────────────────────────────────────────────────────────────────────────────
def test_reads_observations(write_csv):
    path = write_csv([(0, 1.0), (0, 1.2), (5, 2.0), (10, 2.5)])
    df = _parser(path).load()
    assert list(df.columns) == ["dose", "response"]
    assert df["dose"].tolist() == [0.0, 0.0, 5.0, 10.0]
    s = _parser(path).stats()
    assert s.n == (2, 1, 1)
    assert s.ybar[0] == pytest.approx(1.1)


def test_header_is_case_insensitive_and_extra_columns_ignored(write_csv):
    path = write_csv(["0,1.0,a", "1,2.0,b", "2,3.0,c"], header="Dose,Response,subject")
    assert len(_parser(path).load()) == 3


@pytest.mark.parametrize("rows, line", [
    (["0,1.0", "1,abc", "2,3.0"], 3),
    (["0,1.0", "1,2.0", "-2,3.0"], 4),
    (["0,1.0", "", "1,nan", "2,3.0"], 4),
    (["0,1.0", "1,inf"], 3),
])
def test_bad_rows_name_their_line(write_csv, rows, line):
    path = write_csv(rows)
    with pytest.raises(InputError) as err:
        _parser(path).load()
    assert err.value.line == line
    assert f"line {line}" in str(err.value)


def test_missing_header_column(write_csv):
    path = write_csv(["0,1.0"], header="dose,value")
    with pytest.raises(InputError) as err:
        _parser(path).load()
    assert err.value.line == 1


def test_missing_file_and_empty_data(tmp_path, write_csv):
    with pytest.raises(InputError):
        _parser(tmp_path / "nope.csv").load()
    empty = tmp_path / "empty.csv"
    empty.write_text("dose,response\n", encoding="utf-8")
    with pytest.raises(InputError):
        _parser(empty).load()


def test_scenario_sampler_is_replayable(scenario):
    cfg = ScenarioSamplerConfig(scenario=scenario, seed=9, stream=(1, 2))
    a = ScenarioSampler(cfg).load()
    b = ScenarioSampler(cfg).load()
    c = ScenarioSampler(cfg.model_copy(update={"stream": (1, 3)})).load()
    assert len(a) == 18
    pd.testing.assert_frame_equal(a, b)
    assert not a["response"].equals(c["response"])
    assert sorted(a["dose"].unique()) == list(scenario.design.doses)


# ──────────────────────────────────────────────────────────────────────────────
# Outputs
# ──────────────────────────────────────────────────────────────────────────────
def _table(scenario):
    row = SimRow(
        theta2_g=12.5, x2=12.0, replicates=10, n_exists=8, n_case1=0, n_case2=2,
        n_firth_success_case1=0, n_firth_success_case2=1, failure_counts={"divergence": 1},
        pct_mle_exists=80.0, pct_case1=0.0, pct_case2=20.0,
        pct_firth_success_case1=None, pct_firth_success_case2=50.0,
        theory_exists=84.82, theory_case1=0.0, theory_case2=15.18,
    )
    return Table1Out(config=SimConfig(scenario=scenario, seed=1), rows=[row])


def test_sim_row_counts_must_partition():
    with pytest.raises(ValueError):
        SimRow(
            theta2_g=1.0, x2=1.0, replicates=10, n_exists=1, n_case1=1, n_case2=1,
            n_firth_success_case1=0, n_firth_success_case2=0,
            pct_mle_exists=10.0, pct_case1=10.0, pct_case2=10.0,
            pct_firth_success_case1=None, pct_firth_success_case2=None,
            theory_exists=0.0, theory_case1=0.0, theory_case2=0.0,
        )


def test_table_frame_and_text(scenario):
    t = _table(scenario)
    df = table1_frame(t)
    assert df.loc[0, "firth_divergence"] == 1
    assert df.loc[0, "firth_iteration_cap"] == 0
    text = table1_text(t)
    assert "80.00 (84.82)" in text
    assert "NA" in text


def test_csv_output_writes_table_and_text(scenario, tmp_path):
    out = tmp_path / "t1.csv"
    dst = CsvTableOutput(str(out)).render(_table(scenario))
    assert dst == str(out.resolve())
    df = pd.read_csv(out, keep_default_na=False)
    assert df.loc[0, "pct_firth_success_case1"] == "NA"
    assert (tmp_path / "t1.txt").read_text().startswith("theta2_g")


def test_csv_output_writes_sweep_and_alpha(tmp_path):
    row = SweepRow(x2=1.0, theta2_true=2.0, p_exists=0.5, p_case1a=0.1, p_case1b=0.1, p_case2=0.3,
                   se_exists=0.0, se_case1a=0.0, se_case1b=0.0, se_case2=0.0)
    sw = SweepOut(rows=[row], alpha_rows=[AlphaRow(theta2_g=2.0, alpha=0.05, x2=None, dopt_x2=1.5)])
    CsvTableOutput(str(tmp_path / "sw.csv"), text=False).render(sw)
    assert len(pd.read_csv(tmp_path / "sw.csv")) == 1
    alpha = pd.read_csv(tmp_path / "sw_alpha.csv", keep_default_na=False)
    assert alpha.loc[0, "x2"] == "NA"


def test_json_output(scenario, tmp_path, capsys):
    t = _table(scenario)
    doc = json.loads(dumps(t))
    assert doc["rows"][0]["pct_firth_success_case1"] is None
    assert isinstance(json.loads(dumps(t, t)), list)
    assert JsonOutput().render(t) == "-"
    assert json.loads(capsys.readouterr().out)["config"]["seed"] == 1
    path = tmp_path / "r.json"
    JsonOutput(str(path)).render(t)
    assert json.loads(path.read_text())["rows"][0]["theta2_g"] == 12.5


def test_html_report(scenario, tmp_path):
    path = tmp_path / "report.html"
    HtmlReportOutput(str(path)).render(_table(scenario))
    html = path.read_text()
    assert "Emax estimation report" in html
    assert "divergence: 1" in html


# ──────────────────────────────────────────────────────────────────────────────
# JSON field layout
# ──────────────────────────────────────────────────────────────────────────────
PARAMS = ["theta0", "theta1", "theta2"]
SHAPE = ["boundary", "case", "ties"]
STATS = ["n", "x", "ybar"]
SHAPE_STATS = ["m0", "m1", "m2", "q0", "ybar", "ybar23"]


def _keys(result):
    return sorted(json.loads(dumps(result)))


def test_exact_mle_layout(exact_stats):
    doc = json.loads(dumps(mle_fit(exact_stats)))
    assert sorted(doc) == ["admissible", "kind", "params", "tilde"]
    assert doc["kind"] == "exact_mle"
    assert sorted(doc["params"]) == PARAMS
    assert sorted(doc["tilde"]) == ["t0", "t1", "t2"]


def test_no_mle_layout(design):
    doc = json.loads(dumps(mle_fit(SufficientStats(x=design.doses, n=(6, 6, 6), ybar=(2.0, 2.3, 2.2)))))
    assert sorted(doc) == ["kind", "limit", "shape"]
    assert doc["kind"] == "no_mle"
    assert sorted(doc["shape"]) == SHAPE
    assert doc["shape"]["case"] == "case1a"
    assert sorted(doc["limit"]) == ["at", "high", "kind", "low"]


def test_firth_layouts():
    est = FirthEstimate(params=EmaxParams(theta0=2.0, theta1=0.5, theta2=40.0), score_norm=1e-10, iterations=4)
    assert _keys(est) == ["iterations", "kind", "params", "score_norm", "start"]
    assert _keys(FirthFailure(reason=FailureReason.DIVERGENCE)) == ["detail", "kind", "reason"]
    assert json.loads(dumps(FirthFailure(reason=FailureReason.DIVERGENCE)))["reason"] == "divergence"


def test_shape_probabilities_layout(scenario):
    assert _keys(shape_probabilities(scenario, method="quad")) == [
        "draws", "method",
        "p_case1a", "p_case1b", "p_case2", "p_exists",
        "se_case1a", "se_case1b", "se_case2", "se_exists",
    ]


def test_guideline_report_layout(exact_stats):
    doc = json.loads(dumps(guideline_run(exact_stats)))
    assert sorted(doc) == ["fit", "limit", "rationale", "recommendation", "shape", "shape_stats", "stats"]
    assert sorted(doc["stats"]) == STATS
    assert sorted(doc["shape"]) == SHAPE
    assert sorted(doc["shape_stats"]) == SHAPE_STATS
    assert doc["fit"]["kind"] == "exact_mle"
    assert doc["limit"] is None and doc["recommendation"] is None
