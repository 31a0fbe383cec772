import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from mprk_lab import cli, fileio
from mprk_lab.mprk import SchemeConfig, integrate
from mprk_lab.problems import STIFF_PROBLEMS

PROBLEM_FILE = """\
label = "three-box"
dimension = 3
matrix = [-200, 100, 100, 100, -400, 100, 100, 300, -200]
y0 = [1, 9, 5]
"""


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


# -- run --------------------------------------------------------------------------

def test_run_reaches_steady_state(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    code, _, _ = run(["run", "--problem", "real-eigs", "--alpha", "1", "--dt", "5",
                      "--t-end", "40", "--output", str(out)], capsys)
    assert code == 0
    text = out.read_text()
    assert text.splitlines()[0] == "t,y1,y2,y3,inv1,err_to_steady"
    assert float(read_rows(out)[-1]["err_to_steady"]) < 3e-2


def test_run_exact_matches_closed_form(capsys):
    code, out, _ = run(["run", "--scheme", "exact", "--dt", "0.001", "--t-end", "0.03"], capsys)
    assert code == 0
    traj, err = fileio.read_trajectory_csv(out)
    prob = STIFF_PROBLEMS["real-eigs"]()
    want = np.array([prob.exact(t) for t in traj.times])
    assert len(traj) == 31
    assert np.max(np.abs(traj.states - want)) <= 1e-9 * np.abs(want).max()
    assert np.allclose(err, np.max(np.abs(want - prob.steady_state), axis=1), atol=1e-9)


def test_csv_round_trip_is_bit_identical(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    assert cli.main(["run", "--problem", "double-zero", "--alpha", "0.75", "--dt", "0.37",
                     "--t-end", "3", "--output", str(out)]) == 0
    prob = STIFF_PROBLEMS["double-zero"]()
    ref = integrate(prob.system, prob.y0, SchemeConfig(0.75, 0.37), 3.0)
    back, _ = fileio.read_trajectory_csv(out.read_text())
    assert np.array_equal(back.times, ref.times)
    assert np.array_equal(back.states, ref.states)
    assert np.array_equal(back.invariants_trace, ref.invariants_trace)


def test_run_json(capsys):
    code, out, _ = run(["run", "--problem", "two-species(1,2)", "--dt", "0.5", "--t-end", "2",
                        "--format", "json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["metadata"]["scheme"] == "mprk22"
    assert len(doc["times"]) == len(doc["states"]) == 5


@pytest.mark.parametrize("argv", [
    ["run", "--dt", "0"],
    ["run", "--dt", "-1"],
    ["run", "--t-end", "0"],
    ["run", "--alpha", "0.4"],
    ["run", "--problem", "lorenz"],
    ["run", "--problem", "dahlquist(1)"],
    ["run", "--problem", "missing-file.toml"],
])
def test_run_config_errors(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2
    assert "configuration error" in err


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        cli.main(["run", "--scheme", "rk4"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["reproduce", "--figure", "7"])
    assert info.value.code == 2


def test_run_integration_failure_exits_3(capsys):
    # the fast component underflows to exactly zero and the positivity guard trips
    code, _, err = run(["run", "--problem", "dahlquist(-1e6)", "--dt", "1", "--t-end", "60"], capsys)
    assert code == 3
    assert "NonPositiveState" in err


# -- problem files ------------------------------------------------------------------

def test_problem_file(tmp_path, capsys):
    path = tmp_path / "box.toml"
    path.write_text(PROBLEM_FILE)
    code, out, _ = run(["run", "--problem", str(path)], capsys)
    assert code == 0
    assert cli.main(["run", "--problem", "real-eigs"]) == 0
    from_file, err_file = fileio.read_trajectory_csv(out)
    builtin, err_builtin = fileio.read_trajectory_csv(capsys.readouterr().out)
    # same dynamics; the steady state comes from a least-squares solve instead of a closed form
    assert np.array_equal(from_file.states, builtin.states)
    assert np.allclose(err_file, err_builtin, rtol=0.0, atol=1e-12)


def test_problem_file_nested_matrix_and_invariants(tmp_path):
    path = tmp_path / "dz.toml"
    path.write_text('dimension = 4\n'
                    'matrix = [[-200, 0, 0, 100], [0, -400, 300, 0], [0, 400, -300, 0], [200, 0, 0, -100]]\n'
                    'y0 = [4, 1, 9, 1]\n'
                    'invariants = [[1, 1, 1, 1], [1, 2, 2, 1]]\n')
    system, y0 = fileio.load_problem_file(path)
    assert system.label == "dz" and system.k == 2
    assert np.array_equal(system.invariant_matrix @ y0, [15.0, 25.0])


def test_problem_file_dump_round_trip(tmp_path):
    prob = STIFF_PROBLEMS["complex-eigs"]()
    path = tmp_path / "c.toml"
    path.write_text(fileio.dump_problem_file(prob.system, prob.y0))
    system, y0 = fileio.load_problem_file(path)
    assert np.array_equal(system.A, prob.A) and np.array_equal(y0, prob.y0)


@pytest.mark.parametrize("body", [
    "dimension = 2\nmatrix = [-1, -1, 1, 1]\ny0 = [1, 1]\n",        # not Metzler
    "dimension = 2\nmatrix = [-1, 0, 0, -1]\ny0 = [1, 1]\n",        # no invariant
    "dimension = 2\nmatrix = [-1, 1, 1]\ny0 = [1, 1]\n",            # wrong size
    "dimension = 2\nmatrix = [-1, 1, 1, -1]\ny0 = [1, 0]\n",        # not positive
    "dimension = 2\nmatrix = [-1, 1, 1, -1]\n",                     # missing y0
    "dimension = 2\nmatrix = [-1, 1, 1, -1\ny0 = [1, 1]\n",         # not TOML
])
def test_bad_problem_files(tmp_path, capsys, body):
    path = tmp_path / "bad.toml"
    path.write_text(body)
    with pytest.raises(fileio.ProblemFileError):
        fileio.load_problem_file(path)
    code, _, err = run(["run", "--problem", str(path)], capsys)
    assert code == 2 and "bad.toml" in err


# -- analyze ----------------------------------------------------------------------------

def test_analyze(capsys):
    code, out, _ = run(["analyze", "--problem", "complex-eigs", "--alpha", "1", "--dt", "5"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["verdict"] == "Stable" and doc["k"] == 1
    assert [round(x) for x in doc["eigs_A"][0]] == [0, 0]


def test_analyze_with_probe(capsys):
    code, out, _ = run(["analyze", "--probe", "--seed", "3", "--epsilon", "0.1"], capsys)
    assert code == 0
    (probe,) = json.loads(out)["probe"]
    assert probe["max_excursion"] < 0.1 and probe["converged_fraction"] == 1.0


def test_analyze_bad_dt(capsys):
    assert run(["analyze", "--dt", "0"], capsys)[0] == 2


# -- region --------------------------------------------------------------------------------

def test_region_alpha_one(tmp_path, capsys):
    out = tmp_path / "region.csv"
    assert run(["region", "--alpha", "1", "--window=-10,0,-5,5", "--resolution", "100",
                "--output", str(out)], capsys)[0] == 0
    rows = read_rows(out)
    assert len(rows) == 10000
    assert max(float(r["modulus"]) for r in rows) <= 1.0 + 1e-12
    svg = out.with_suffix(".svg").read_text()
    assert svg.startswith("<?xml") and "<svg" in svg


def test_region_trapezoid_axis(capsys):
    code, out, _ = run(["region", "--alpha", "0.5", "--resolution", "11x21"], capsys)
    assert code == 0
    rows = [r for r in csv.DictReader(out.splitlines()) if float(r["re"]) == 0.0]
    assert len(rows) == 21
    assert all(abs(float(r["modulus"]) - 1.0) <= 1e-10 for r in rows)


@pytest.mark.parametrize("argv", [
    ["region", "--resolution", "1"],
    ["region", "--resolution", "abc"],
    ["region", "--window=0,-1,-1,1"],
    ["region", "--window", "1,2,3"],
    ["region", "--alpha", "0.3"],
])
def test_region_errors(argv, capsys):
    assert run(argv, capsys)[0] == 2


# -- convergence ------------------------------------------------------------------------------

def test_convergence_orders(capsys):
    code, out, err = run(["convergence", "--format", "json"], capsys)
    assert code == 0
    assert 1.8 <= json.loads(out)["order"] <= 2.2
    code, out, err = run(["convergence", "--scheme", "euler"], capsys)
    assert code == 0 and out.startswith("dt,error")
    order = float(err.strip().split("=")[1].split()[0])
    assert 0.8 <= order <= 1.2


def test_convergence_levels(capsys):
    assert run(["convergence", "--levels", "2"], capsys)[0] == 2


def test_convergence_failure_exits_3(capsys):
    assert run(["convergence", "--problem", "dahlquist(-1e6)", "--dt", "1", "--t-end", "60",
                "--levels", "3"], capsys)[0] == 3


# -- reproduce ---------------------------------------------------------------------------------

def test_reproduce_exact_figure(tmp_path):
    assert cli.main(["reproduce", "--figure", "3", "--output", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "fig3_summary.json").read_text())
    assert summary["passed"]
    values = {c["name"]: c["value"] for c in summary["checks"]}
    assert values["inv1"] == 15.0 and values["inv2"] == 25.0
    traj, _ = fileio.read_trajectory_csv((tmp_path / "fig3_exact.csv").read_text())
    assert np.all(np.abs(traj.invariants_trace - [15.0, 25.0]) <= 1e-12 * 25.0)
    assert (tmp_path / "fig3.svg").exists()


def test_reproduce_mprk_figure(tmp_path):
    assert cli.main(["reproduce", "--figure", "4", "--output", str(tmp_path)]) == 0
    checks = json.loads((tmp_path / "fig4_summary.json").read_text())["checks"]
    by_name = {c["name"]: c for c in checks}
    assert by_name["alpha=1: err_to_steady(t=40)"]["value"] < 3e-2
    assert by_name["alpha=5: err_to_steady(t=40)"]["value"] < 3e-2
    assert by_name["alpha=0.5: err_to_steady(t=40)"]["value"] >= 3e-2
    assert by_name["alpha=0.5: err_to_steady(t=20000)"]["value"] < 7e-2
    long_rows = read_rows(tmp_path / "fig4_alpha0.5_long.csv")
    assert len(long_rows) == 4001
    for name in ("fig4.svg", "fig4_long.svg", "fig4_alpha1.csv", "fig4_alpha5.csv"):
        assert (tmp_path / name).exists()


def test_reproduce_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli.main(["reproduce", "--figure", "6", "--output", str(out)]) == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_reproduce_threshold_violation_exits_3(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(cli, "LONG_RUN_BOUND", 1e-9)
    code, _, err = run(["reproduce", "--figure", "5", "--output", str(tmp_path)], capsys)
    assert code == 3 and "thresholds violated" in err
    assert not json.loads((tmp_path / "fig5_summary.json").read_text())["passed"]


# -- entry point ---------------------------------------------------------------------------------

def test_module_entry_point_and_logging(tmp_path):
    env = dict(os.environ, MPRK_LAB_LOG="INFO")
    out = tmp_path / "t.csv"
    proc = subprocess.run([sys.executable, "-m", "mprk_lab.cli", "run", "--output", str(out)],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0
    assert "wrote" in proc.stderr
    proc = subprocess.run([sys.executable, "-m", "mprk_lab.cli", "run", "--dt", "0"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
