"""MPRK22(alpha) time stepping for production-destruction systems.

Two equivalent formulations are provided: the general PDS form, where each
stage is a linear system with Patankar weights, and the matrix form for
linear systems, ``M(y^n) y^{n+1} = y^n`` with ``M(y) = I - dt A diag(tau(y))``.
Both route their stage solves through :func:`linalg.mmatrix_solve`, which
keeps the linear invariants to rounding even for very large steps.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
import logging
import math
from typing import Callable

import numpy as np

from .errors import NonPositiveState, ShapeMismatch, SingularMatrix, StageSolveFailure
from .linalg import as_vector, expm_apply, mmatrix_inverse, mmatrix_solve, shifted_colsums
from .pds import LinearPDS, rhs

log = logging.getLogger(__name__)

UNDERFLOW_LEVEL = 1e-300


@dataclass(frozen=True)
class SchemeConfig:
    alpha: float = 1.0
    dt: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha >= 0.5):
            raise ValueError(f"alpha must be >= 1/2, got {self.alpha}")
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt}")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    invariants_trace: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.invariants_trace = np.atleast_2d(np.asarray(self.invariants_trace, dtype=float))
        if not (len(self.times) == len(self.states) == len(self.invariants_trace)):
            raise ShapeMismatch("trajectory arrays differ in length")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class StageWorkspace:
    y_stage1: np.ndarray
    y_stage2: np.ndarray
    sigma: np.ndarray
    tau: np.ndarray
    step_matrix: np.ndarray
    step_colsums: np.ndarray


def _require_positive(y, what="state"):
    if np.any(~(y > 0.0)):
        raise NonPositiveState(f"{what} {y} is not componentwise positive")


def _solve_stage(M, colsums, b):
    try:
        x = mmatrix_solve(M, colsums, b)
    except SingularMatrix as exc:
        raise StageSolveFailure(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise StageSolveFailure("stage solution is not finite")
    return x


def _weighted_power(y2, y1, alpha):
    # (y2)^(1/alpha) * (y1)^(1 - 1/alpha), evaluated in log space
    _require_positive(y2, "stage value")
    _require_positive(y1, "stage value")
    return np.exp(np.log(y2) / alpha + np.log(y1) * (1.0 - 1.0 / alpha))


def _patankar_system(P, D, denom, h):
    """Matrix and exact column sums of one Patankar-weighted stage."""
    M = -h * P / denom[None, :]
    np.fill_diagonal(M, 1.0 + h * (D.sum(axis=1) - np.diag(P)) / denom)
    # elementwise difference first: exactly zero when P_ij and D_ji coincide
    colsums = 1.0 + h * (D - P.T).sum(axis=1) / denom
    return M, colsums


def mprk22_step(sys, y_n, cfg: SchemeConfig) -> np.ndarray:
    """One MPRK22(alpha) step in production-destruction form."""
    y1 = as_vector(y_n, sys.dim)
    _require_positive(y1)
    a, dt = cfg.alpha, cfg.dt
    P1 = np.asarray(sys.production(y1), dtype=float)
    D1 = np.asarray(sys.destruction(y1), dtype=float)
    M, c = _patankar_system(P1, D1, y1, a * dt)
    y2 = _solve_stage(M, c, y1)
    _require_positive(y2, "stage value")

    w2 = 1.0 / (2.0 * a)
    w1 = 1.0 - w2
    P = w1 * P1 + w2 * np.asarray(sys.production(y2), dtype=float)
    D = w1 * D1 + w2 * np.asarray(sys.destruction(y2), dtype=float)
    sigma = _weighted_power(y2, y1, a)
    M, c = _patankar_system(P, D, sigma, dt)
    y_next = _solve_stage(M, c, y1)
    _require_positive(y_next, "new iterate")
    return y_next


def mprk22_matrices(A, cfg: SchemeConfig) -> tuple[np.ndarray, np.ndarray]:
    """The matrices ``B = (I - alpha dt A)^-1`` and ``C = (1 - 1/(2 alpha)) I + B / (2 alpha)``."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    h = cfg.alpha * cfg.dt
    B = mmatrix_inverse(np.eye(n) - h * A, shifted_colsums(A, h))
    C = (1.0 - 0.5 / cfg.alpha) * np.eye(n) + B * (0.5 / cfg.alpha)
    return B, C


def _shifted(A, residual, h, weights=None):
    """``I - h A diag(weights)`` with column sums taken from ``residual``."""
    n = A.shape[0]
    w = np.ones(n) if weights is None else weights
    M = np.eye(n) - h * A * w[None, :]
    return M, 1.0 - h * residual * w


def mprk22_stages_linear(sys: LinearPDS, y_n, cfg: SchemeConfig) -> StageWorkspace:
    y = as_vector(y_n, sys.dim)
    _require_positive(y)
    a, dt = cfg.alpha, cfg.dt
    Mb, cb = _shifted(sys.A, sys.column_residual, a * dt)
    By = _solve_stage(Mb, cb, y)
    sigma = _weighted_power(By, y, a)
    Cy = (1.0 - 0.5 / a) * y + By * (0.5 / a)
    tau = Cy / sigma
    M, c = _shifted(sys.A, sys.column_residual, dt, tau)
    return StageWorkspace(y, By, sigma, tau, M, c)


def mprk22_step_linear(sys: LinearPDS, y_n, cfg: SchemeConfig) -> np.ndarray:
    """One MPRK22(alpha) step written as ``M(y^n) y^{n+1} = y^n``."""
    ws = mprk22_stages_linear(sys, y_n, cfg)
    y_next = _solve_stage(ws.step_matrix, ws.step_colsums, ws.y_stage1)
    _require_positive(y_next, "new iterate")
    return y_next


def _field(sys, y):
    if isinstance(sys, LinearPDS):
        return sys.A @ y
    return rhs(sys, y, check=False)


def euler_step(sys, y_n, cfg: SchemeConfig) -> np.ndarray:
    y = as_vector(y_n, sys.dim)
    return y + cfg.dt * _field(sys, y)


def heun_step(sys, y_n, cfg: SchemeConfig) -> np.ndarray:
    y = as_vector(y_n, sys.dim)
    k1 = _field(sys, y)
    k2 = _field(sys, y + cfg.dt * k1)
    return y + 0.5 * cfg.dt * (k1 + k2)


def exact_step(sys: LinearPDS, y_n, cfg: SchemeConfig) -> np.ndarray:
    return expm_apply(sys.A, cfg.dt, y_n)


STEPPERS: dict[str, Callable] = {
    "mprk22": mprk22_step,
    "mprk22-linear": mprk22_step_linear,
    "euler": euler_step,
    "heun": heun_step,
    "exact": exact_step,
}


def get_stepper(stepper) -> Callable:
    if callable(stepper):
        return stepper
    try:
        return STEPPERS[stepper]
    except KeyError:
        raise ValueError(f"unknown scheme {stepper!r}; choose from {sorted(STEPPERS)}") from None


def invariant_rows(sys) -> np.ndarray:
    Nm = getattr(sys, "invariant_matrix", None)
    if Nm is None:
        return np.ones((1, sys.dim))
    return np.atleast_2d(Nm)


def step_times(dt: float, t_end: float) -> np.ndarray:
    """Uniform grid with spacing ``dt``; a shorter last step lands on ``t_end``."""
    if not (math.isfinite(t_end) and t_end > 0.0):
        raise ValueError(f"t_end must be positive, got {t_end}")
    q = t_end / dt
    n = round(q)
    if abs(q - n) > 1e-9 * max(1.0, q):
        n = math.floor(q)
    times = dt * np.arange(n + 1, dtype=float)
    if n == 0 or t_end - times[-1] > 1e-9 * t_end:
        times = np.append(times, t_end)
    times[-1] = t_end
    return times


def integrate(sys, y0, cfg: SchemeConfig, t_end: float, stepper="mprk22") -> Trajectory:
    step = get_stepper(stepper)
    y = as_vector(y0, sys.dim)
    Nm = invariant_rows(sys)
    times = step_times(cfg.dt, t_end)
    states = np.empty((len(times), sys.dim))
    states[0] = y
    underflow = False
    for n in range(1, len(times)):
        h = times[n] - times[n - 1]
        step_cfg = cfg if h == cfg.dt else replace(cfg, dt=h)
        y = step(sys, y, step_cfg)
        states[n] = y
        if not underflow and np.any(np.abs(y) < UNDERFLOW_LEVEL):
            underflow = True
            log.warning("state component below %g at t=%g", UNDERFLOW_LEVEL, times[n])
    name = stepper if isinstance(stepper, str) else getattr(stepper, "__name__", "custom")
    meta = {"scheme": name, "alpha": cfg.alpha, "dt": cfg.dt, "underflow": underflow}
    return Trajectory(times, states, states @ Nm.T, meta)


@dataclass(frozen=True)
class ConvergenceStudy:
    dts: np.ndarray
    errors: np.ndarray
    order: float
    saturated: bool


def convergence_study(sys: LinearPDS, y0, stepper, dt_list, t_end: float,
                      alpha: float = 1.0) -> ConvergenceStudy:
    """Max-norm errors at ``t_end`` against ``exp(t_end A) y0`` and the fitted order."""
    dts = np.asarray(dt_list, dtype=float)
    if dts.size < 3:
        raise ValueError("a convergence study needs at least three step sizes")
    if not np.allclose(dts[:-1] / dts[1:], 2.0, rtol=1e-9, atol=0.0):
        raise ValueError("each step size must halve the previous one")
    ref = expm_apply(sys.A, t_end, y0)
    errors = np.array([
        np.max(np.abs(integrate(sys, y0, SchemeConfig(alpha, dt), t_end, stepper).final - ref))
        for dt in dts
    ])
    floor = 1e3 * np.finfo(float).eps * max(np.max(np.abs(ref)), 1.0)
    saturated = bool(np.any(errors <= floor))
    if saturated:
        order = float("nan")
    else:
        order = float(np.polyfit(np.log(dts), np.log(errors), 1)[0])
    return ConvergenceStudy(dts, errors, order, saturated)


def convergence_order(sys: LinearPDS, y0, stepper, dt_list, t_end: float,
                      alpha: float = 1.0) -> float:
    return convergence_study(sys, y0, stepper, dt_list, t_end, alpha).order
