import json
import time

import pytest
from hypothesis import given, strategies as st

from cauchylab import cli
from cauchylab.experiments import (CATALOG, EXIT_OK, EXIT_VALIDATION, ExperimentConfig, ValidationError,
                                   expand_grid, list_experiments, run_experiment, sweep)


def test_catalog_ids():
    ids = {e["id"] for e in list_experiments()}
    assert {"nw-d3-p5-typeII", "wm-d3-typeI-corotational", "calib-freewave-d3"} <= ids
    assert all(e["expectation"] for e in list_experiments())


def test_unknown_keys_rejected():
    with pytest.raises(ValidationError, match="unknown config keys"):
        ExperimentConfig.from_dict({"experiment": "calib-freewave-d3", "colour": "red"})
    with pytest.raises(ValidationError):
        ExperimentConfig.from_dict({"experiment": "nope"})
    with pytest.raises(ValidationError):
        ExperimentConfig.from_dict({"experiment": "calib-freewave-d3", "Nu": "many"})


@given(st.sampled_from(sorted(CATALOG)), st.integers(17, 600), st.floats(0.05, 0.4))
def test_config_round_trip(eid, n, vmax):
    cfg = ExperimentConfig.from_dict({"experiment": eid, "Nu": n, "v_max": vmax})
    assert ExperimentConfig.from_dict(json.loads(cfg.dumps())) == cfg


def test_inadmissible_a_zero():
    cfg = ExperimentConfig.from_dict({"experiment": "nw-d3-p5-typeII", "a_zero": -0.6})
    with pytest.raises(ValidationError, match=r"5a_0\+2>a_0"):
        cfg.validate()


def test_expand_grid_order():
    assert expand_grid({"a": [1, 2], "b": [3]}) == [{"a": 1, "b": 3}, {"a": 2, "b": 3}]
    with pytest.raises(ValidationError):
        expand_grid({"a": []})


def test_freewave_256_passes_quickly(tmp_path):
    cfg = ExperimentConfig.from_dict({"experiment": "calib-freewave-d3", "Nu": 257, "Nv": 257})
    t = time.perf_counter()
    rep = run_experiment(cfg, tmp_path)
    assert time.perf_counter() - t < 5.0
    assert rep.passed, [c for c in rep.checks if not c.passed]
    for name in ("report.json", "timing.json", "config.json", "field.npz", "ch_trace.dat"):
        assert (tmp_path / name).exists()
    rep_json = json.loads((tmp_path / "report.json").read_text())
    assert all(c["source"].startswith("calib-freewave-d3:") for c in rep_json["checks"])


def test_report_deterministic(tmp_path):
    cfg = ExperimentConfig.from_dict({"experiment": "nw-d3-p5-typeII", "Nu": 65, "Nv": 65,
                                      "diagnostics": ["trace", "norms"]})
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    assert (tmp_path / "a/report.json").read_bytes() == (tmp_path / "b/report.json").read_bytes()


def test_sweep_error_column_decreases(tmp_path):
    rows = sweep({"experiment": "calib-freewave-d3"}, {"Nu": [65, 129, 257], "Nv": [257]}, tmp_path, workers=2)
    assert [r["Nu"] for r in rows] == [65, 129, 257]
    errs = [r["error"] for r in rows]
    assert errs[0] > errs[1] > errs[2]
    assert (tmp_path / "sweep.csv").read_text().count("\n") == 4


def test_sweep_records_partial_failures(tmp_path):
    rows = sweep({"experiment": "nw-d3-p5-typeII", "Nu": 33, "Nv": 33, "diagnostics": ["trace"]},
                 {"a_zero": [-0.6, 0.25]}, tmp_path, workers=1)
    assert rows[0]["status"] == "invalid" and rows[0]["exit_code"] == EXIT_VALIDATION
    assert rows[1]["status"] == "ok"


# -- command line --------------------------------------------------------

def test_cli_list(capsys):
    assert cli.main(["list"]) == EXIT_OK
    assert "nw-d3-p5-typeII" in capsys.readouterr().out
    assert cli.main(["list", "--json"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)[0]["id"]


def test_cli_validation_exit(outroot, capsys):
    assert cli.main(["run", "nw-d3-p5-typeII", "--a-zero", "-0.6"]) == EXIT_VALIDATION
    assert "5a_0+2>a_0" in capsys.readouterr().err


def test_cli_bad_config_file(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    assert cli.main(["run", str(p)]) == EXIT_VALIDATION


def test_cli_run_audit_report(outroot, tmp_path, capsys):
    cfg = tmp_path / "free.json"
    cfg.write_text(json.dumps({"experiment": "calib-freewave-d3", "Nu": 129, "Nv": 129}))
    assert cli.main(["run", str(cfg)]) == EXIT_OK
    run = outroot / "calib-freewave-d3"
    assert (run / "report.json").exists()
    assert cli.main(["audit-currents", str(run / "field.npz")]) == EXIT_OK
    audit = json.loads((run / "currents_audit.json").read_text())
    assert audit["killing"]["flux"]["relative"] < 1e-6
    assert cli.main(["report", str(run)]) == EXIT_OK
    assert (run / "ch_trace.png").exists()
    assert cli.main(["report", str(tmp_path)]) == EXIT_VALIDATION


def test_cli_sweep(tmp_path, capsys):
    out = tmp_path / "sw"
    code = cli.main(["sweep", "calib-freewave-d3", '{"Nu": [129], "Nv": [129]}', "--out", str(out), "--workers", "1"])
    assert code == EXIT_OK
    assert (out / "sweep.csv").exists()
    assert cli.main(["sweep", "calib-freewave-d3", "{bad"]) == EXIT_VALIDATION
