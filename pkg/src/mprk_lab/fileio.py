"""Problem files, trajectory CSV and JSON serialisation.

Numbers are written with ``repr(float)``, the shortest decimal string that
round-trips exactly, so re-reading a file gives back the same doubles.

Problem file grammar (a TOML subset)::

    label      = "optional name"
    dimension  = 3
    matrix     = [-200, 100, 100, 100, -400, 100, 100, 300, -200]   # row-major
    y0         = [1, 9, 5]
    invariants = [[1, 1, 1]]                                        # optional

``matrix`` may also be given as a list of rows.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import MPRKLabError
from .mprk import Trajectory
from .pds import LinearPDS, linear_pds_from_matrix


class ProblemFileError(MPRKLabError, ValueError):
    pass


def fmt(x: float) -> str:
    return repr(float(x))


def load_problem_file(path) -> tuple[LinearPDS, np.ndarray]:
    """Parse a problem file into a validated system and its initial state."""
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ProblemFileError(f"{path}: {exc}") from exc
    missing = {"dimension", "matrix", "y0"} - doc.keys()
    if missing:
        raise ProblemFileError(f"{path}: missing keys {sorted(missing)}")
    n = doc["dimension"]
    if not isinstance(n, int) or n < 1:
        raise ProblemFileError(f"{path}: dimension must be a positive integer")
    try:
        A = np.array(doc["matrix"], dtype=float).reshape(n, n)
        y0 = np.array(doc["y0"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemFileError(f"{path}: {exc}") from exc
    if y0.shape != (n,):
        raise ProblemFileError(f"{path}: y0 must have {n} entries")
    if np.any(y0 <= 0.0):
        raise ProblemFileError(f"{path}: y0 must be componentwise positive")
    label = str(doc.get("label", path.stem))
    try:
        system = linear_pds_from_matrix(A, invariants=doc.get("invariants"), label=label)
    except MPRKLabError as exc:
        raise ProblemFileError(f"{path}: {exc}") from exc
    return system, y0


def dump_problem_file(system: LinearPDS, y0) -> str:
    rows = ", ".join(fmt(x) for x in system.A.ravel())
    inv = ", ".join("[" + ", ".join(fmt(x) for x in r) + "]" for r in system.invariant_matrix)
    return (f'label = "{system.label}"\n'
            f"dimension = {system.dim}\n"
            f"matrix = [{rows}]\n"
            f"y0 = [{', '.join(fmt(x) for x in y0)}]\n"
            f"invariants = [{inv}]\n")


def trajectory_header(dim: int, k: int) -> list[str]:
    return (["t"] + [f"y{i + 1}" for i in range(dim)]
            + [f"inv{i + 1}" for i in range(k)] + ["err_to_steady"])


def trajectory_csv(traj: Trajectory, steady_state) -> str:
    steady = np.asarray(steady_state, dtype=float)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(trajectory_header(traj.states.shape[1], traj.invariants_trace.shape[1]))
    for t, y, inv in zip(traj.times, traj.states, traj.invariants_trace):
        err = np.max(np.abs(y - steady))
        w.writerow([fmt(t)] + [fmt(v) for v in y] + [fmt(v) for v in inv] + [fmt(err)])
    return out.getvalue()


def read_trajectory_csv(text: str) -> tuple[Trajectory, np.ndarray]:
    """Parse a trajectory CSV back; returns the trajectory and the error column."""
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    dim = sum(1 for h in header if h.startswith("y"))
    k = sum(1 for h in header if h.startswith("inv"))
    traj = Trajectory(body[:, 0], body[:, 1:1 + dim], body[:, 1 + dim:1 + dim + k])
    return traj, body[:, -1]


def trajectory_json(traj: Trajectory, steady_state) -> str:
    steady = np.asarray(steady_state, dtype=float)
    doc = {
        "metadata": traj.metadata,
        "steady_state": steady.tolist(),
        "norm": "max",
        "times": traj.times.tolist(),
        "states": traj.states.tolist(),
        "invariants": traj.invariants_trace.tolist(),
        "err_to_steady": np.max(np.abs(traj.states - steady), axis=1).tolist(),
    }
    return json.dumps(doc, indent=2)
