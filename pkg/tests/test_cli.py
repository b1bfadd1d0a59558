import json

import pytest

from anonspread.cli import main
from anonspread.graphs import load_edge_list
from anonspread.protocols import InfectionSnapshot


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_simulate_writes_snapshot(tmp_path, capsys):
    out = tmp_path / "snap.json"
    code, _, err = run_cli(
        capsys, "simulate", "--net", "regular:3", "--protocol", "adaptive",
        "--d0", "3", "--T", "4", "--seed", "11", "--out", str(out),
    )
    assert code == 0
    snap = InfectionSnapshot.from_json(out.read_text())
    assert snap.T == 4 and snap.protocol == "adaptive"
    assert snap.size == 10
    assert snap.d0 == 3


def test_simulate_seed_reported_when_omitted(tmp_path, capsys):
    out = tmp_path / "snap.json"
    code, _, err = run_cli(
        capsys, "simulate", "--net", "line", "--protocol", "line",
        "--T", "5", "--out", str(out),
    )
    assert code == 0
    assert "seed:" in err


def test_simulate_estimate_round_trip(tmp_path, capsys):
    snap_path = tmp_path / "snap.json"
    run_cli(
        capsys, "simulate", "--net", "regular:3", "--protocol", "adaptive",
        "--d0", "3", "--T", "4", "--seed", "3", "--out", str(snap_path),
    )
    code, out, _ = run_cli(
        capsys, "estimate", "--snapshot", str(snap_path), "--net", "regular:3",
        "--estimator", "ml-irregular", "--d0", "3", "--seed", "3",
    )
    assert code == 0
    est = json.loads(out)
    assert est["estimator"] == "ml-irregular"
    assert est["feasible_count"] == 9
    assert int(est["chosen"]) in map(int, est["scores"])


def test_estimate_usage_error_exit_2(tmp_path, capsys):
    snap_path = tmp_path / "snap.json"
    run_cli(
        capsys, "simulate", "--net", "regular:3", "--protocol", "adaptive",
        "--d0", "3", "--T", "4", "--seed", "3", "--out", str(snap_path),
    )
    code, _, err = run_cli(
        capsys, "estimate", "--snapshot", str(snap_path), "--net", "regular:3",
        "--estimator", "ml-irregular", "--d0", "inf", "--seed", "3",
    )
    assert code == 2
    assert "error:" in err


def test_simulate_missing_d0_exit_2(capsys):
    code, _, err = run_cli(
        capsys, "simulate", "--net", "regular:3", "--protocol", "adaptive",
        "--T", "4", "--seed", "1",
    )
    assert code == 2


def test_simulate_bad_d0_exit_2(capsys):
    code, _, _ = run_cli(
        capsys, "simulate", "--net", "regular:3", "--protocol", "adaptive",
        "--d0", "one", "--T", "4", "--seed", "1",
    )
    assert code == 2


def test_experiment_csv(tmp_path, capsys):
    out = tmp_path / "rows.csv"
    code, _, err = run_cli(
        capsys, "experiment", "--net", "line", "--protocol", "line",
        "--estimator", "ml-line", "--T", "4", "6", "--trials", "200",
        "--seed", "9", "--out", str(out),
    )
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0].startswith("protocol,network,d0,T,trials,pd")
    assert len(lines) == 3


def test_experiment_rejects_bad_combo(capsys):
    code, _, err = run_cli(
        capsys, "experiment", "--net", "regular:3", "--protocol", "line",
        "--T", "4", "--trials", "10", "--seed", "0",
    )
    assert code == 2


def test_posterior_csv(capsys):
    code, out, _ = run_cli(capsys, "posterior", "--m", "11")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "k,posterior"
    assert len(lines) == 12
    total = sum(float(line.split(",")[1]) for line in lines[1:])
    assert abs(total - 1) < 1e-9


def test_posterior_infeasible_exit_2(capsys):
    code, _, _ = run_cli(capsys, "posterior", "--m", "11", "--T", "3")
    assert code == 2


def test_oracle_check(capsys):
    code, out, _ = run_cli(capsys, "oracle-check")
    assert code == 0
    report = json.loads(out)
    assert report["pass"] is True
    assert all(report["checks"].values())


def test_gen_graph_round_trip(tmp_path, capsys):
    out = tmp_path / "g.txt"
    code, _, _ = run_cli(
        capsys, "gen-graph", "--net", "regular:3", "--depth", "3",
        "--seed", "0", "--out", str(out),
    )
    assert code == 0
    g = load_edge_list(out.read_text())
    assert g.n_nodes == 22

    snap_path = tmp_path / "snap.json"
    code, _, _ = run_cli(
        capsys, "simulate", "--net", f"edgelist:{out}", "--protocol", "adaptive",
        "--d0", "inf", "--cap", "2", "--T", "4", "--seed", "2",
        "--out", str(snap_path),
    )
    assert code == 0
    snap = InfectionSnapshot.from_json(snap_path.read_text())
    assert snap.subtree_edges is not None


def test_missing_edgelist_exit_1(capsys):
    code, _, err = run_cli(
        capsys, "simulate", "--net", "edgelist:/no/such/file", "--protocol",
        "flood", "--T", "2", "--seed", "0",
    )
    assert code == 1
