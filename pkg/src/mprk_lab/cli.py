"""Command-line front end: ``mprk-lab {run,analyze,region,convergence,reproduce}``.

Usage and configuration errors exit with status 2.  Numerical failures,
failed reproduction thresholds among them, exit with status 3.  Verbosity
is read from the ``MPRK_LAB_LOG`` environment variable (e.g. ``INFO``).
"""
from __future__ import annotations

import argparse
from dataclasses import dataclass
import json
import logging
import os
from pathlib import Path
import sys
from typing import Sequence

import numpy as np

from . import fileio, plotting
from .errors import MPRKLabError
from .linalg import expm_apply
from .mprk import STEPPERS, SchemeConfig, Trajectory, convergence_study, integrate
from .pds import LinearPDS, steady_state_for_initial
from .problems import get_problem
from .stability import analyze, lyapunov_probe, scan_stability_region

log = logging.getLogger("mprk_lab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

SCHEMES = sorted(STEPPERS)

# figure id -> problem label; 1-3 show the exact solutions, 4-6 the MPRK22 runs
FIGURE_PROBLEMS = {1: "real-eigs", 2: "complex-eigs", 3: "double-zero",
                   4: "real-eigs", 5: "complex-eigs", 6: "double-zero"}
EXACT_WINDOW = 0.03
EXACT_SAMPLES = 301
STIFF_TIME, STIFF_BOUND = 0.02, 2e-2
REPRO_ALPHAS = (0.5, 1.0, 5.0)
REPRO_DT, REPRO_T_END, REPRO_LONG_T_END = 5.0, 40.0, 2e4
CONVERGED_BOUND, LONG_RUN_BOUND = 3e-2, 7e-2


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _config_error(exc) -> CommandError:
    return CommandError(f"configuration error: {exc}", EXIT_CONFIG)


def _numeric_error(exc) -> CommandError:
    return CommandError(f"numerical failure: {type(exc).__name__}: {exc}", EXIT_NUMERIC)


@dataclass(frozen=True)
class RunConfig:
    problem: str = "real-eigs"
    scheme: str = "mprk22"
    alpha: float = 1.0
    dt: float = 5.0
    t_end: float = 40.0
    output: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if self.scheme not in STEPPERS:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if not self.dt > 0.0:
            raise ValueError(f"--dt must be positive, got {self.dt}")
        if not self.t_end > 0.0:
            raise ValueError(f"--t-end must be positive, got {self.t_end}")
        if self.scheme.startswith("mprk22") and not self.alpha >= 0.5:
            raise ValueError(f"--alpha must be >= 1/2 for MPRK22, got {self.alpha}")
        if self.format not in ("csv", "json"):
            raise ValueError(f"unknown format {self.format!r}")


@dataclass(frozen=True)
class LoadedProblem:
    system: LinearPDS
    y0: np.ndarray
    steady_state: np.ndarray
    exact: object = None


def load_problem(name: str) -> LoadedProblem:
    """A built-in label such as ``two-species(1,2)`` or a path to a problem file."""
    path = Path(name)
    if path.suffix == ".toml" or path.is_file():
        system, y0 = fileio.load_problem_file(path)
        return LoadedProblem(system, y0, steady_state_for_initial(system, y0))
    prob = get_problem(name)
    return LoadedProblem(prob.system, prob.y0, prob.steady_state, prob.exact)


def _scheme_config(alpha: float, dt: float, scheme: str) -> SchemeConfig:
    # steppers other than MPRK22 ignore alpha; keep the config valid for them
    return SchemeConfig(alpha if scheme.startswith("mprk22") else max(alpha, 1.0), dt)


def _emit(text: str, output) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)
        log.info("wrote %s", output)


# -- subcommands ---------------------------------------------------------------

def cmd_run(cfg: RunConfig) -> int:
    try:
        prob = load_problem(cfg.problem)
        scheme_cfg = _scheme_config(cfg.alpha, cfg.dt, cfg.scheme)
    except (ValueError, KeyError, MPRKLabError) as exc:
        raise _config_error(exc) from exc
    try:
        traj = integrate(prob.system, prob.y0, scheme_cfg, cfg.t_end, cfg.scheme)
    except (MPRKLabError, ArithmeticError) as exc:
        raise _numeric_error(exc) from exc
    if not np.all(np.isfinite(traj.states)):
        raise CommandError("numerical failure: trajectory is not finite", EXIT_NUMERIC)
    if cfg.format == "json":
        _emit(fileio.trajectory_json(traj, prob.steady_state), cfg.output)
    else:
        _emit(fileio.trajectory_csv(traj, prob.steady_state), cfg.output)
    return EXIT_OK


def cmd_analyze(problem: str, alpha: float, dt: float, output=None, probe: bool = False,
                epsilon: float = 0.1, seed: int = 0) -> int:
    try:
        prob = load_problem(problem)
        SchemeConfig(alpha, dt)
    except (ValueError, KeyError, MPRKLabError) as exc:
        raise _config_error(exc) from exc
    try:
        report = analyze(prob.system, alpha, dt)
        doc = report.to_dict()
        if probe:
            results = lyapunov_probe("mprk22", prob.system, prob.steady_state, [epsilon],
                                     SchemeConfig(alpha, dt), seed=seed)
            doc["probe"] = [vars(r) for r in results]
    except (MPRKLabError, ArithmeticError) as exc:
        raise _numeric_error(exc) from exc
    _emit(json.dumps(doc, indent=2) + "\n", output)
    return EXIT_OK


def parse_window(text: str) -> tuple[tuple[float, float], tuple[float, float]]:
    """``"re_min,re_max,im_min,im_max"`` to two ranges."""
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 4:
        raise ValueError(f"window needs four comma-separated numbers, got {text!r}")
    if not (parts[0] < parts[1] and parts[2] < parts[3]):
        raise ValueError(f"window {text!r} is empty")
    return (parts[0], parts[1]), (parts[2], parts[3])


def parse_resolution(text: str) -> tuple[int, int]:
    """``"100"`` or ``"120x80"`` (real by imaginary)."""
    parts = [int(p) for p in str(text).lower().split("x")]
    if len(parts) == 1:
        parts *= 2
    if len(parts) != 2 or min(parts) < 2:
        raise ValueError(f"resolution must be at least 2 per axis, got {text!r}")
    return parts[0], parts[1]


def region_csv(scan) -> str:
    lines = ["re,im,modulus"]
    lines += [f"{fileio.fmt(x)},{fileio.fmt(y)},{fileio.fmt(m)}" for x, y, m in scan.rows()]
    return "\n".join(lines) + "\n"


def cmd_region(alpha: float, window: str, resolution: str, output=None) -> int:
    try:
        re_range, im_range = parse_window(window)
        res = parse_resolution(resolution)
        if not alpha >= 0.5:
            raise ValueError(f"--alpha must be >= 1/2, got {alpha}")
    except ValueError as exc:
        raise _config_error(exc) from exc
    try:
        scan = scan_stability_region(alpha, re_range, im_range, res)
    except (MPRKLabError, ArithmeticError) as exc:
        raise _numeric_error(exc) from exc
    _emit(region_csv(scan), output)
    if output is not None:
        plotting.plot_region(scan, Path(output).with_suffix(".svg"))
    return EXIT_OK


def cmd_convergence(problem: str, scheme: str, alpha: float, dt_max: float, levels: int,
                    t_end: float, output=None, fmt: str = "csv") -> int:
    try:
        if levels < 3:
            raise ValueError(f"--levels must be at least 3, got {levels}")
        if scheme not in STEPPERS:
            raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
        prob = load_problem(problem)
        _scheme_config(alpha, dt_max, scheme)
        if not t_end > 0.0:
            raise ValueError(f"--t-end must be positive, got {t_end}")
    except (ValueError, KeyError, MPRKLabError) as exc:
        raise _config_error(exc) from exc
    dts = [dt_max / 2.0 ** i for i in range(levels)]
    a = alpha if scheme.startswith("mprk22") else max(alpha, 1.0)
    try:
        study = convergence_study(prob.system, prob.y0, scheme, dts, t_end, a)
    except (MPRKLabError, ArithmeticError) as exc:
        raise _numeric_error(exc) from exc
    if not np.all(np.isfinite(study.errors)):
        raise CommandError("numerical failure: a refinement level diverged", EXIT_NUMERIC)
    if fmt == "json":
        doc = {"scheme": scheme, "alpha": a, "t_end": t_end, "dts": study.dts.tolist(),
               "errors": study.errors.tolist(), "order": study.order,
               "saturated": study.saturated, "norm": "max"}
        _emit(json.dumps(doc, indent=2) + "\n", output)
    else:
        rows = ["dt,error"] + [f"{fileio.fmt(d)},{fileio.fmt(e)}"
                               for d, e in zip(study.dts, study.errors)]
        _emit("\n".join(rows) + "\n", output)
    note = " (saturated at rounding level)" if study.saturated else ""
    print(f"order={study.order:.4f}{note}", file=sys.stderr)
    return EXIT_OK


# -- reproduction --------------------------------------------------------------

def _check(name: str, value: float, bound: float, relation: str) -> dict:
    passed = value < bound if relation == "<" else value >= bound
    return {"name": name, "value": float(value), "bound": bound, "relation": relation,
            "passed": bool(passed)}


def _exact_trajectory(prob, system, times) -> Trajectory:
    states = np.array([prob.exact(t) for t in times])
    return Trajectory(times, states, states @ system.invariant_matrix.T, {"scheme": "exact"})


def _reproduce_exact(fig: int, prob, outdir: Path) -> list[dict]:
    system = prob.system
    times = np.linspace(0.0, EXACT_WINDOW, EXACT_SAMPLES)
    traj = _exact_trajectory(prob, system, times)
    (outdir / f"fig{fig}_exact.csv").write_text(fileio.trajectory_csv(traj, prob.steady_state))
    plotting.plot_trajectory(traj, outdir / f"fig{fig}.svg", title=f"{prob.label}: exact solution")

    target = system.invariant_matrix @ prob.y0
    drift = np.max(np.abs(traj.invariants_trace - target) / np.abs(target))
    oracle = np.array([expm_apply(system.A, t, prob.y0) for t in times[1:]])
    mismatch = np.max(np.abs(oracle - traj.states[1:])) / np.max(np.abs(oracle))
    stiff = np.max(np.abs(prob.exact(STIFF_TIME) - prob.steady_state))
    checks = [
        _check("invariant_drift", drift, 1e-12, "<"),
        _check("exact_vs_expm", mismatch, 1e-9, "<"),
        _check(f"err_to_steady(t={STIFF_TIME:g})", stiff, STIFF_BOUND, "<"),
    ]
    for i, value in enumerate(target):
        checks.append({"name": f"inv{i + 1}", "value": float(value), "relation": "constant",
                       "passed": True})
    return checks


def _reproduce_mprk(fig: int, prob, outdir: Path) -> list[dict]:
    system, y0, steady = prob.system, prob.y0, prob.steady_state
    fine = _exact_trajectory(prob, system, np.linspace(0.0, REPRO_T_END, 801))
    checks, panels = [], []
    for alpha in REPRO_ALPHAS:
        traj = integrate(system, y0, SchemeConfig(alpha, REPRO_DT), REPRO_T_END)
        (outdir / f"fig{fig}_alpha{alpha:g}.csv").write_text(fileio.trajectory_csv(traj, steady))
        panels.append((traj, fine, f"MPRK22({alpha:g}), dt = {REPRO_DT:g}"))
        err = np.max(np.abs(traj.final - steady))
        relation = ">=" if alpha == 0.5 else "<"
        checks.append(_check(f"alpha={alpha:g}: err_to_steady(t={REPRO_T_END:g})", err,
                             CONVERGED_BOUND, relation))
    plotting.plot_trajectory_panels(panels, outdir / f"fig{fig}.svg")

    long = integrate(system, y0, SchemeConfig(0.5, REPRO_DT), REPRO_LONG_T_END)
    (outdir / f"fig{fig}_alpha0.5_long.csv").write_text(fileio.trajectory_csv(long, steady))
    plotting.plot_trajectory(long, outdir / f"fig{fig}_long.svg",
                             title=f"MPRK22(0.5) up to t = {REPRO_LONG_T_END:g}")
    err = np.max(np.abs(long.final - steady))
    checks.append(_check(f"alpha=0.5: err_to_steady(t={REPRO_LONG_T_END:g})", err,
                         LONG_RUN_BOUND, "<"))
    return checks


def cmd_reproduce(figure: int, outdir) -> int:
    if figure not in FIGURE_PROBLEMS:
        raise _config_error(f"--figure must be one of {sorted(FIGURE_PROBLEMS)}, got {figure}")
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise _config_error(exc) from exc
    prob = get_problem(FIGURE_PROBLEMS[figure])
    try:
        if figure <= 3:
            checks = _reproduce_exact(figure, prob, outdir)
        else:
            checks = _reproduce_mprk(figure, prob, outdir)
    except (MPRKLabError, ArithmeticError) as exc:
        raise _numeric_error(exc) from exc
    passed = all(c["passed"] for c in checks)
    summary = {"figure": figure, "problem": prob.label, "norm": "max", "passed": passed,
               "checks": checks}
    (outdir / f"fig{figure}_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    for c in checks:
        log.info("%s %s = %g", "ok  " if c["passed"] else "FAIL", c["name"], c["value"])
    if not passed:
        failed = ", ".join(c["name"] for c in checks if not c["passed"])
        raise CommandError(f"reproduction thresholds violated: {failed}", EXIT_NUMERIC)
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mprk-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, problem="real-eigs", dt=5.0, t_end=40.0):
        p.add_argument("--problem", default=problem,
                       help="built-in label (real-eigs, complex-eigs, double-zero, "
                            "dahlquist(lam), two-species(a,b)) or a .toml problem file")
        p.add_argument("--alpha", type=float, default=1.0)
        p.add_argument("--dt", type=float, default=dt)
        p.add_argument("--t-end", type=float, default=t_end)
        p.add_argument("--output", default=None, help="output file (default: stdout)")

    p = sub.add_parser("run", help="integrate a problem and write the trajectory")
    common(p)
    p.add_argument("--scheme", default="mprk22", choices=SCHEMES)
    p.add_argument("--format", default="csv", choices=("csv", "json"))

    p = sub.add_parser("analyze", help="fixed-point stability report as JSON")
    common(p)
    p.add_argument("--probe", action="store_true", help="also run the empirical Lyapunov probe")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0, help="seed for probe sampling")

    p = sub.add_parser("region", help="sample |R(z)| on a grid (CSV plus SVG)")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--window", default="-10,0,-5,5", help="re_min,re_max,im_min,im_max")
    p.add_argument("--resolution", default="100", help="N or NxM grid points")
    p.add_argument("--output", default=None)

    p = sub.add_parser("convergence", help="error-vs-dt table and fitted order")
    common(p, problem="two-species(1,1)", dt=0.05, t_end=1.0)
    p.add_argument("--scheme", default="mprk22", choices=SCHEMES)
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--format", default="csv", choices=("csv", "json"))

    p = sub.add_parser("reproduce", help="regenerate the data behind a figure")
    p.add_argument("--figure", type=int, required=True, choices=sorted(FIGURE_PROBLEMS))
    p.add_argument("--output", default="reproduce", help="output directory")
    return parser


def _configure_logging() -> None:
    name = os.environ.get("MPRK_LAB_LOG", "WARNING").strip().upper()
    level = int(name) if name.isdigit() else logging.getLevelName(name)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            try:
                cfg = RunConfig(args.problem, args.scheme, args.alpha, args.dt, args.t_end,
                                args.output, args.format)
            except ValueError as exc:
                raise _config_error(exc) from exc
            return cmd_run(cfg)
        if args.command == "analyze":
            return cmd_analyze(args.problem, args.alpha, args.dt, args.output, args.probe,
                               args.epsilon, args.seed)
        if args.command == "region":
            return cmd_region(args.alpha, args.window, args.resolution, args.output)
        if args.command == "convergence":
            return cmd_convergence(args.problem, args.scheme, args.alpha, args.dt, args.levels,
                                   args.t_end, args.output, args.format)
        return cmd_reproduce(args.figure, args.output)
    except CommandError as exc:
        print(f"mprk-lab: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
