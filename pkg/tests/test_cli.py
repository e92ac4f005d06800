"""Command dispatch, exit codes, JSON/CSV emission, config validation."""

import json
import math
import re

from cycleshift.cli import run_command

REAL_RE = re.compile(r"-?\d\.\d{16}e[+-]\d{2,3}$")


def _run(tmp_path, *argv):
    return run_command([str(a) for a in argv])


def test_floquet_command(tmp_path):
    out = tmp_path / "floq.json"
    assert run_command(["floquet", "--problem", "paper-example", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["schema"] == "cycleshift/v1"
    assert doc["kind"] == "floquet"
    vals = sorted(m["value_re"] for m in doc["payload"]["multipliers"])
    assert abs(vals[0] - math.exp(-4.0 * math.pi)) <= 1e-6 * math.exp(-4.0 * math.pi)
    assert abs(vals[1] - 1.0) <= 1e-8
    adj = sorted(doc["payload"]["adjoint_multipliers"])
    assert abs(adj[-1] - math.exp(4.0 * math.pi)) <= 1e-4 * math.exp(4.0 * math.pi)
    assert doc["payload"]["nondegenerate"] is True
    assert doc["metadata"]["problem"] == "paper-example"


def test_analyze_eps_zero_exits_2(tmp_path, capsys):
    code = run_command(["analyze", "--problem", "paper-example", "--eps", "0"])
    assert code == 2
    assert "eps" in capsys.readouterr().err


def test_unknown_problem_exits_2(capsys):
    code = run_command(["floquet", "--problem", "does-not-exist"])
    assert code == 2
    assert "does-not-exist" in capsys.readouterr().err


def test_missing_problem_exits_2(capsys):
    assert run_command(["floquet"]) == 2
    assert "problem" in capsys.readouterr().err


def test_conflicting_flags_exit_2(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text("{}")
    code = run_command(["floquet", "--problem", "paper-example", "--config", str(cfg)])
    assert code == 2
    assert "problem" in capsys.readouterr().err


def test_bad_eps_list_exits_2(capsys):
    code = run_command(["sweep", "--problem", "paper-example", "--eps", "1e-3,1e-2"])
    assert code == 2
    assert "eps" in capsys.readouterr().err


def test_unknown_command_exits_2():
    assert run_command(["frobnicate"]) == 2


def test_sweep_command_json_and_csv(tmp_path):
    out = tmp_path / "sweep.json"
    code = run_command([
        "sweep", "--problem", "paper-example",
        "--eps", "1e-2,1e-3,1e-4,1e-5", "--mode", "section",
        "--use-oracle", "--out", str(out),
    ])
    assert code == 0
    doc = json.loads(out.read_text())
    assert abs(doc["payload"]["order_shifted"]["p"] - 1.0) <= 0.02
    assert abs(doc["payload"]["order_unshifted"]["p"] - 0.5) <= 0.05

    csv_path = tmp_path / "sweep.csv"
    lines = csv_path.read_text().strip().splitlines()
    comments = [l for l in lines if l.startswith("#")]
    data = [l for l in lines if not l.startswith("#")]
    assert any("eps,delta,v_norm,sup_shifted,sup_unshifted,residual_solution,"
               "residual_shift,mode" in c for c in comments)
    assert len(data) == 4
    for line in data:
        cells = line.split(",")
        assert len(cells) == 8
        assert cells[-1] == "section"
        for cell in cells[:-1]:
            assert REAL_RE.match(cell), cell


def test_json_reals_have_17_significant_digits(tmp_path):
    out = tmp_path / "floq.json"
    run_command(["floquet", "--problem", "paper-example", "--out", str(out)])
    text = out.read_text()
    floats = re.findall(r"-?\d\.\d+e[+-]\d+", text)
    assert floats
    assert all(len(tok.split(".")[1].split("e")[0]) == 16 for tok in floats)


def test_report_round_trip(tmp_path):
    sweep_out = tmp_path / "s.json"
    floq_out = tmp_path / "f.json"
    run_command(["sweep", "--problem", "paper-example", "--eps", "1e-2,1e-3",
                 "--use-oracle", "--out", str(sweep_out)])
    run_command(["floquet", "--problem", "paper-example", "--out", str(floq_out)])
    merged_out = tmp_path / "report.json"
    assert run_command(["report", str(sweep_out), str(floq_out),
                        "--out", str(merged_out)]) == 0
    merged = json.loads(merged_out.read_text())
    assert merged["kind"] == "report"
    assert merged["payload"]["documents"][0] == json.loads(sweep_out.read_text())
    assert merged["payload"]["documents"][1] == json.loads(floq_out.read_text())
    # emission is byte-stable: the embedded documents reproduce the original
    # files exactly (no recomputation, no reformatting)
    assert sweep_out.read_text().strip() in merged_out.read_text()
    assert [m["kind"] for m in merged["metadata"]["manifest"]] == ["sweep", "floquet"]


def test_report_rejects_non_documents(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert run_command(["report", str(bad)]) == 2
    assert "inputs" in capsys.readouterr().err


def test_threads_metadata(tmp_path, monkeypatch):
    monkeypatch.setenv("CYCLESHIFT_THREADS", "4")
    out = tmp_path / "floq.json"
    run_command(["floquet", "--problem", "paper-example", "--out", str(out)])
    assert json.loads(out.read_text())["metadata"]["threads"] == 4
    monkeypatch.setenv("CYCLESHIFT_THREADS", "zebra")
    assert run_command(["floquet", "--problem", "paper-example",
                        "--out", str(out)]) == 2


def test_computational_failure_exits_1(tmp_path, capsys):
    # flowed mode on the strongly contracting example cannot cross inside the box
    out = tmp_path / "an.json"
    code = run_command(["analyze", "--problem", "paper-example", "--eps", "1e-3",
                        "--mode", "flowed", "--use-oracle", "--out", str(out)])
    assert code == 1
    assert "ShiftNotFound" in capsys.readouterr().err
    doc = json.loads(out.read_text())
    assert doc["kind"] == "failure"
    assert doc["payload"]["error"] == "ShiftNotFoundError"


def test_analyze_document(tmp_path):
    out = tmp_path / "an.json"
    code = run_command(["analyze", "--problem", "paper-example", "--eps", "1e-3",
                        "--use-oracle", "--out", str(out)])
    assert code == 0
    # trajectory samples land in a plot-ready CSV next to the JSON
    csv_lines = (tmp_path / "an.csv").read_text().strip().splitlines()
    header = [l for l in csv_lines if l.startswith("# columns:")][0]
    assert header.endswith("t,x0_1,x0_2,xeps_1,xeps_2,dev_shifted,dev_unshifted")
    data = [l for l in csv_lines if not l.startswith("#")]
    assert len(data) == 64
    assert all(len(l.split(",")) == 7 for l in data)
    doc = json.loads(out.read_text())
    p = doc["payload"]
    assert abs(p["shift"]["delta"] - math.sqrt(1e-3)) <= 1e-9
    assert abs(p["deviation"]["sup_shifted_over_eps"] - 1.0) <= 1e-6
    assert p["theorem2"]["z1"]["max_relative_defect"] <= 1e-6
    checks = {c["check"]: c["status"] for c in p["corollaries"]}
    assert checks["cor3"] == "pass"
    mk = p["malkin"]["values"]
    assert abs(mk[0]) <= 1e-8


def test_config_file_problem(tmp_path):
    # the circular field written out as explicit polynomial components
    config = {
        "name": "poly-circle",
        "f": {"polynomial": {
            "dimension": 2,
            "components": [
                [{"coeff": 1.0, "powers": [0, 1]},
                 {"coeff": -1.0, "powers": [3, 0]},
                 {"coeff": -1.0, "powers": [1, 2]},
                 {"coeff": 1.0, "powers": [1, 0]}],
                [{"coeff": -1.0, "powers": [1, 0]},
                 {"coeff": -1.0, "powers": [0, 3]},
                 {"coeff": -1.0, "powers": [2, 1]},
                 {"coeff": 1.0, "powers": [0, 1]}],
            ],
        }},
        "g": "cosine",
        "T": 2.0 * math.pi,
        "params": {"x_guess": [0.0, 1.0], "axis": 0},
    }
    cfg = tmp_path / "problem.json"
    cfg.write_text(json.dumps(config))
    out = tmp_path / "floq.json"
    assert run_command(["floquet", "--config", str(cfg), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    vals = sorted(m["value_re"] for m in doc["payload"]["multipliers"])
    assert abs(vals[0] - math.exp(-4.0 * math.pi)) <= 1e-5
    assert doc["metadata"]["problem"] == "poly-circle"


def test_config_validation_names_field(tmp_path, capsys):
    cfg = tmp_path / "broken.json"
    cfg.write_text(json.dumps({"f": "circle", "g": "cosine"}))
    assert run_command(["floquet", "--config", str(cfg)]) == 2
    assert "'T'" in capsys.readouterr().err

    cfg.write_text(json.dumps({"f": "circle", "g": "cosine", "T": 6.28,
                               "params": {"x_guess": [1.0]}}))
    assert run_command(["floquet", "--config", str(cfg)]) == 2
    assert "x_guess" in capsys.readouterr().err

    cfg.write_text(json.dumps({"f": {"polynomial": {"dimension": 2, "components": [
        [{"coeff": 1.0, "powers": [0]}], []]}}, "g": "none", "T": 6.28,
        "params": {"x_guess": [0.0, 1.0]}}))
    assert run_command(["floquet", "--config", str(cfg)]) == 2
    assert "powers" in capsys.readouterr().err
