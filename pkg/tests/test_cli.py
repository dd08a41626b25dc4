"""CLI and scenario-ingestion tests: exit codes, file outputs, fail-closed."""

import json

import numpy as np
import pytest

from branchflow import ValidationError, parse_scenario
from branchflow.cli import main

TWO_SOURCE = {
    "grid": {"extent": [1.0, 1.0], "cells": [64, 64]},
    "sources": {"points": [[0.25, 0.5], [0.75, 0.5]],
                "weights": [1.0, -1.0]},
    "functional": {"eps": 0.05, "a": 1.0, "p": 2.0},
    "optimizer": {"max_outer": 10},
    "measure": {"segments": [{"start": [0.25, 0.5], "end": [0.75, 0.5],
                              "multiplicity": 1.0}]},
}


def write_scenario(tmp_path, obj, name="scn.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def test_parse_scenario_roundtrip():
    scn = parse_scenario(json.loads(json.dumps(TWO_SOURCE)))
    assert scn.grid.cells == (64, 64)
    assert scn.eps == 0.05
    assert scn.sources.n_sources == 2
    assert len(scn.measure.segments) == 1


def test_parse_rejects_unknown_keys():
    bad = dict(TWO_SOURCE)
    bad["extra"] = 1
    with pytest.raises(ValidationError):
        parse_scenario(bad)
    bad2 = json.loads(json.dumps(TWO_SOURCE))
    bad2["functional"]["typo"] = 2
    with pytest.raises(ValidationError):
        parse_scenario(bad2)


def test_parse_rejects_missing_keys():
    bad = json.loads(json.dumps(TWO_SOURCE))
    del bad["functional"]["eps"]
    with pytest.raises(ValidationError):
        parse_scenario(bad)


def test_parse_rejects_unbalanced_sources():
    bad = json.loads(json.dumps(TWO_SOURCE))
    bad["sources"]["weights"] = [1.0, -0.5]
    with pytest.raises(ValidationError):
        parse_scenario(bad)


def test_parse_rejects_under_resolved_eps():
    bad = json.loads(json.dumps(TWO_SOURCE))
    bad["grid"]["cells"] = [16, 16]
    with pytest.raises(ValidationError):
        parse_scenario(bad)


def test_cost_table_subcommand(tmp_path):
    rc = main(["--out", str(tmp_path), "cost-table", "--d", "1", "--p", "2",
               "--a", "1", "--masses", "0.5,1,2"])
    assert rc == 0
    lines = (tmp_path / "cost_table.csv").read_text().strip().splitlines()
    assert lines[0] == "m,f,r_star,q_inf"
    rows = [l.split(",") for l in lines[1:]]
    assert [float(r[0]) for r in rows] == [0.5, 1.0, 2.0]
    assert float(rows[1][1]) == pytest.approx(4.0, rel=1e-2)


def test_profile_subcommand(tmp_path):
    rc = main(["--out", str(tmp_path), "profile", "--xi", "0", "--r1", "0.5",
               "--r2", "4", "--d", "1", "--p", "2"])
    assert rc == 0
    lines = (tmp_path / "profile.csv").read_text().strip().splitlines()
    assert lines[0] == "t,v"
    last = lines[-1].split(",")
    assert float(last[1]) == pytest.approx(1.0, abs=1e-6)


def test_minimize_subcommand(tmp_path):
    scn = write_scenario(tmp_path, TWO_SOURCE)
    out = tmp_path / "run"
    rc = main(["--out", str(out), "minimize", scn])
    assert rc == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["energy"]["total"] > 0.0
    assert summary["residual"] < 1e-8
    assert (out / "fields.vtk").exists()
    assert (out / "trace.jsonl").exists()
    # vtk sanity: legacy structured-points header
    head = (out / "fields.vtk").read_text().splitlines()[:5]
    assert head[0].startswith("# vtk DataFile")
    assert "STRUCTURED_POINTS" in "\n".join(head)


def test_recovery_check_subcommand(tmp_path):
    scn = write_scenario(tmp_path, TWO_SOURCE)
    out = tmp_path / "rc"
    rc = main(["--out", str(out), "recovery-check", scn])
    assert rc == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["recovery_energy"] > summary["limit_energy"] > 0.0


def test_recovery_check_kirchhoff_failure(tmp_path):
    bad = json.loads(json.dumps(TWO_SOURCE))
    bad["measure"]["segments"][0]["end"] = [0.6, 0.6]
    scn = write_scenario(tmp_path, bad)
    out = tmp_path / "rc"
    rc = main(["--out", str(out), "recovery-check", scn])
    assert rc == 2
    report = json.loads((out / "kirchhoff.json").read_text())
    assert len(report["violations"]) >= 1


def test_compare_subcommand(tmp_path):
    scn = write_scenario(tmp_path, TWO_SOURCE)
    out = tmp_path / "cmp"
    rc = main(["--out", str(out), "compare", scn])
    assert rc == 0
    summary = json.loads((out / "compare.json").read_text())
    assert summary["limit_energy"] > 0.0
    assert summary["gaps"]["recovery"] > 0.0


def test_exit_code_io_error(tmp_path):
    assert main(["--out", str(tmp_path), "minimize",
                 str(tmp_path / "nope.json")]) == 4


def test_exit_code_validation(tmp_path):
    scn = write_scenario(tmp_path, {"grid": {}})
    assert main(["--out", str(tmp_path), "minimize", scn]) == 2


def test_measure_required_for_recovery(tmp_path):
    plain = json.loads(json.dumps(TWO_SOURCE))
    del plain["measure"]
    scn = write_scenario(tmp_path, plain)
    assert main(["--out", str(tmp_path), "recovery-check", scn]) == 2
