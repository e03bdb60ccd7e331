"""Command-line interface: verify/invert/complexity/pde subcommands, their
output files, exit codes, and byte-level determinism."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from requnet import load_network, realize, inversion_network, vec
from requnet.cli import main

CLI = [sys.executable, "-m", "requnet.cli"]


def run_cli(*args):
    return subprocess.run(CLI + list(args), capture_output=True, text=True)


# ------------------------------------------------------------------- verify


def test_verify_calculus_quick_passes():
    proc = run_cli("verify", "--suite", "calculus", "--seed", "7", "--quick")
    assert proc.returncode == 0, proc.stderr
    doc = json.loads(proc.stdout)
    assert doc["suite"] == "calculus"
    assert len(doc["checks"]) >= 8
    for check in doc["checks"]:
        assert set(check) == {"name", "pass", "measured", "bound"}
        assert check["pass"] is True


def test_verify_matrix_quick_passes():
    proc = run_cli("verify", "--suite", "matrix", "--seed", "7", "--quick")
    assert proc.returncode == 0, proc.stderr
    names = {c["name"] for c in json.loads(proc.stdout)["checks"]}
    assert {"mult-exactness", "square-exactness", "power-depth"} <= names


def test_verify_inversion_quick_reports_bounds():
    proc = run_cli(
        "verify", "--suite", "inversion", "--seed", "7", "--quick", "--dim", "4", "--eps", "1e-2"
    )
    assert proc.returncode == 0, proc.stderr
    checks = {c["name"]: c for c in json.loads(proc.stdout)["checks"]}
    assert checks["inversion-spectral-error"]["bound"] == 1e-2
    assert checks["inversion-spectral-error"]["measured"] <= 1e-2
    assert "neumann-tail-bound" in checks


def test_verify_all_writes_file(tmp_path):
    out = tmp_path / "report.json"
    proc = run_cli("verify", "--suite", "all", "--seed", "7", "--quick", "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    doc = json.loads(out.read_text())
    assert doc["suite"] == "all"
    assert all(c["pass"] for c in doc["checks"])


def test_verify_rejects_unknown_suite():
    proc = run_cli("verify", "--suite", "bogus", "--seed", "7")
    assert proc.returncode == 2


# ------------------------------------------------------------------- invert


def test_invert_documented_example(tmp_path):
    out = tmp_path / "invert.json"
    proc = run_cli(
        "invert", "--dim", "2", "--eps", "1e-3", "--delta", "0.5", "--out", str(out)
    )
    assert proc.returncode == 0, proc.stderr
    doc = json.loads(out.read_text())
    assert doc["l"] == 4
    assert doc["depth"] == 9
    assert doc["measured_error"] <= 1e-3
    assert doc["nnz"] <= doc["nnz_bound"]


def test_invert_reads_matrix_file(tmp_path):
    mat = tmp_path / "zero.json"
    mat.write_text(json.dumps([[0.0, 0.0], [0.0, 0.0]]))
    out = tmp_path / "invert.json"
    proc = run_cli(
        "invert", "--dim", "2", "--eps", "1e-2", "--delta", "0.5",
        "--matrix", str(mat), "--out", str(out),
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads(out.read_text())["measured_error"] == 0.0


def test_invert_missing_matrix_file(tmp_path):
    proc = run_cli(
        "invert", "--dim", "2", "--eps", "1e-2", "--delta", "0.5",
        "--matrix", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o.json"),
    )
    assert proc.returncode == 3


def test_invert_rejects_non_square_matrix(tmp_path):
    mat = tmp_path / "row.json"
    mat.write_text(json.dumps([[0.0, 0.0]]))
    proc = run_cli(
        "invert", "--dim", "2", "--eps", "1e-2", "--delta", "0.5",
        "--matrix", str(mat), "--out", str(tmp_path / "o.json"),
    )
    assert proc.returncode == 2


def test_invert_save_round_trip(tmp_path):
    saved = tmp_path / "net.json"
    proc = run_cli(
        "invert", "--dim", "2", "--eps", "1e-2", "--delta", "0.5",
        "--save", str(saved), "--out", str(tmp_path / "o.json"),
    )
    assert proc.returncode == 0, proc.stderr
    net = load_network(saved)
    fresh = inversion_network(2, 1e-2, 0.5)
    x = vec(np.array([[0.1, 0.02], [0.0, -0.3]]))
    assert (realize(net, x) == realize(fresh, x)).all()


# --------------------------------------------------------------- complexity


def test_complexity_table(tmp_path):
    out = tmp_path / "table.csv"
    proc = run_cli(
        "complexity", "--dims", "2,4", "--eps", "1e-2,1e-3", "--delta", "0.5",
        "--out", str(out),
    )
    assert proc.returncode == 0, proc.stderr
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["d", "eps", "l", "depth", "nnz", "bound"]
    assert len(rows) == 5
    by_key = {(int(r[0]), float(r[1])): r for r in rows[1:]}
    for (d, eps), row in by_key.items():
        l, depth, nnz, bound = int(row[2]), int(row[3]), int(row[4]), int(row[5])
        assert depth == 2 * l + 1
        assert nnz <= bound
    # tightening eps cannot shorten the partial sum; growing d adds weights
    assert int(by_key[(2, 1e-3)][2]) >= int(by_key[(2, 1e-2)][2])
    assert int(by_key[(4, 1e-2)][4]) > int(by_key[(2, 1e-2)][4])


def test_complexity_rejects_bad_dims(tmp_path):
    proc = run_cli(
        "complexity", "--dims", "0,2", "--eps", "1e-2", "--delta", "0.5",
        "--out", str(tmp_path / "t.csv"),
    )
    assert proc.returncode == 2


# ---------------------------------------------------------------------- pde


PDE_SMALL = [
    "pde", "--grid", "5", "--chessboard", "1", "--mu", "0.5",
    "--snapshots", "3", "--drop-tol", "1e-8", "--eps", "1e-2",
    "--test", "4", "--seed", "99",
]


def test_pde_small_end_to_end(tmp_path):
    out = tmp_path / "pde.json"
    proc = run_cli(*PDE_SMALL, "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    doc = json.loads(out.read_text())
    assert doc["D"] == 25
    assert doc["d"] == 1  # one subdomain: all snapshots are parallel
    assert doc["alpha"] == 1.5 and doc["beta"] == 0.5
    assert doc["worst_euclid"] <= 1e-2 and doc["worst_g"] <= 1e-2
    assert doc["depth"] >= 3

    with open(tmp_path / "pde.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["y_1", "err_euclid_rb", "err_g_h", "err_rel_g"]
    assert len(rows) == 6
    assert rows[-1][0] == "MAX"


def test_pde_rejects_bad_eps(tmp_path):
    proc = run_cli(
        "pde", "--grid", "5", "--chessboard", "1", "--mu", "0.5",
        "--snapshots", "3", "--drop-tol", "1e-8", "--eps", "2.0",
        "--test", "4", "--seed", "99", "--out", str(tmp_path / "o.json"),
    )
    assert proc.returncode == 2


# ------------------------------------------------------------- determinism


def test_repeated_runs_are_byte_identical(tmp_path):
    pairs = []
    for tag in ("a", "b"):
        inv = tmp_path / f"inv_{tag}.json"
        tab = tmp_path / f"tab_{tag}.csv"
        ver = tmp_path / f"ver_{tag}.json"
        pde = tmp_path / f"pde_{tag}.json"
        assert run_cli(
            "invert", "--dim", "3", "--eps", "1e-2", "--delta", "0.2",
            "--out", str(inv),
        ).returncode == 0
        assert run_cli(
            "complexity", "--dims", "2,3", "--eps", "1e-2", "--delta", "0.5",
            "--out", str(tab),
        ).returncode == 0
        assert run_cli(
            "verify", "--suite", "matrix", "--seed", "7", "--quick", "--out", str(ver)
        ).returncode == 0
        assert run_cli(*PDE_SMALL, "--out", str(pde)).returncode == 0
        pairs.append((inv, tab, ver, pde, pde.with_suffix(".csv")))
    for first, second in zip(*pairs):
        assert first.read_bytes() == second.read_bytes()


# -------------------------------------------------------------- entry point


def test_main_callable_in_process(tmp_path):
    out = tmp_path / "r.json"
    assert main(["verify", "--suite", "calculus", "--seed", "7", "--quick", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["suite"] == "calculus"
