import json
import subprocess
import sys

import pytest

from metric_forge.cli import main, run_experiment, table1
from metric_forge.population import make_population
from metric_forge.ranking import AgentProfile

from conftest import write_horse_colic, write_ist


@pytest.fixture
def hc(tmp_path):
    return str(write_horse_colic(tmp_path / "hc.data", n=200, seed=4))


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_evaluate_rows(hc, capsys):
    code, out, _ = run(["evaluate", "--dataset", "horse-colic", "--data", hc], capsys)
    assert code == 0
    rep = json.loads(out)
    assert [r["reward"] for r in rep["rows"]] == ["ATO", "ATT", "TO", "TT", "TT (no info)", "TT (demographic)"]
    tt = rep["rows"][3]
    assert tt["regret"] == 0.0
    assert set(rep["diagnostics"]) == {"auc", "accuracy"}


def test_evaluate_is_deterministic_and_file_equivalent(hc, tmp_path, capsys):
    argv = ["evaluate", "--dataset", "horse-colic", "--data", hc, "--ridge", "1e-4"]
    _, first, _ = run(argv, capsys)
    _, second, _ = run(argv, capsys)
    assert first == second
    model = tmp_path / "hc.json"
    assert run(["fit", "--dataset", "horse-colic", "--data", hc, "--ridge", "1e-4", "--out", str(model)], capsys)[0] == 0
    _, from_file, _ = run(["evaluate", "--dataset", str(model)], capsys)
    assert from_file == first


def test_csv_precision(hc, capsys):
    _, out, _ = run(["evaluate", "--dataset", "horse-colic", "--data", hc, "--format", "csv"], capsys)
    lines = out.strip().splitlines()
    assert lines[0] == "reward,utility,regret,treat_rate"
    for line in lines[1:]:
        for cell in line.split(",")[1:]:
            digits = cell.lstrip("-").replace(".", "").split("e")[0].lstrip("0")
            assert len(digits) <= 6


def test_curve_csv(hc, capsys):
    _, out, _ = run(["curve", "--dataset", "horse-colic", "--data", hc, "--format", "csv"], capsys)
    lines = out.strip().splitlines()
    assert lines[0].startswith("prefix_size,feature_name,gamma_marg,regret")
    assert len(lines) == 1 + 21
    assert float(lines[-1].split(",")[3]) == 0.0


def test_asym_json(hc, capsys):
    code, out, _ = run(["asym", "--dataset", "horse-colic", "--data", hc, "--visible", "age"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["regret"] <= rep["bound_marg"] + 1e-9


def test_asym_joint_file(tmp_path, capsys):
    m = make_population([(0, 0), (0, 1)], [0.5, 0.5], [2.0, -2.0], [1.0, 0.0], 10)
    p = tmp_path / "joint.json"
    p.write_text(json.dumps(m.to_dict()))
    _, out, _ = run(["asym", "--dataset", str(p)], capsys)
    assert json.loads(out)["regret"] == 1.5


def test_rank_outputs(tmp_path, capsys):
    def agent(name, n):
        return AgentProfile(name, make_population([0, 1], [0.5, 0.5], [0.0, 0.0], [1.0, 1.0], n)).to_dict()

    p = tmp_path / "agents.json"
    p.write_text(json.dumps({"agents": [agent("j", 10), agent("k", 20)], "reference": [0.5, 0.5], "reweight": False}))
    _, out, _ = run(["rank", "--dataset", str(p)], capsys)
    assert json.loads(out)["violations"][0]["kind"] == "uniform"
    _, out, _ = run(["rank", "--dataset", str(p), "--format", "csv"], capsys)
    assert out.splitlines()[0] == "id,score,rank,uniform_violation,relative_violation"
    assert out.splitlines()[1].startswith("k,20,1,true")


def test_check_exit_and_determinism(capsys):
    code, a, err = run(["check", "--models", "50", "--seed", "7"], capsys)
    assert code == 0 and "FAIL" not in err
    _, b, _ = run(["check", "--models", "50", "--seed", "7"], capsys)
    assert a == b


def test_input_errors(tmp_path, capsys):
    assert run(["evaluate", "--dataset", "horse-colic", "--data", str(tmp_path / "none")], capsys)[0] == 2
    assert run(["evaluate", "--impute", "mean"], capsys)[0] == 2
    ist = write_ist(tmp_path / "ist.csv", n=300)
    code, _, err = run(["evaluate", "--dataset", "ist", "--data", str(ist)], capsys)
    assert code == 2 and "CountMismatch" in err
    assert run(["evaluate", "--dataset", "ist", "--data", str(ist), "--no-count-check"], capsys)[0] == 0


def test_console_script(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "metric_forge.cli", "check", "--models", "20", "--format", "csv"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("property,passed,worst,detail")


def test_tt_regret_zero_via_library(hc):
    rep = table1(run_experiment("horse-colic", hc))
    assert rep.row("TT").regret == 0.0
    assert rep.row("ATO").regret > rep.row("TT").regret
