"""Fixed-point stability of MPRK22(alpha) at steady states of linear systems.

The Jacobian of the step map at any positive steady state has the closed
form ``(I - dt A)^-1 (dt/(2 alpha) A (I - (I - alpha dt A)^-1) + I)``,
independent of the steady state itself.  Its eigenvalues are one (once per
linear invariant) together with ``R(dt * lam)`` for the nonzero eigenvalues
``lam`` of ``A``.  A steady state is reported Stable when exactly ``k``
eigenvalues sit at one and all others lie strictly inside the unit disk;
the criterion is sufficient only, so the alternative is Inconclusive.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import json
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NonPositiveState, PoleEvaluation, StageSolveFailure
from .linalg import (
    Spectrum,
    as_matrix,
    as_vector,
    eigenvalues,
    mmatrix_inverse,
    mmatrix_solve,
    norm_inf,
    shifted_colsums,
)
from .mprk import SchemeConfig, get_stepper
from .pds import LinearPDS

UNIT_TOL = 1e-8


class Verdict(str, Enum):
    STABLE = "Stable"
    INCONCLUSIVE = "Inconclusive"


class ContinuousStability(str, Enum):
    ASYMPTOTICALLY_STABLE = "AsymptoticallyStable"
    STABLE = "Stable"
    UNSTABLE = "Unstable"


# -- Jacobians ---------------------------------------------------------------

def mprk22_jacobian(A, alpha: float, dt: float) -> np.ndarray:
    """Closed-form Jacobian of the MPRK22(alpha) step at a positive steady state."""
    A = as_matrix(A, square=True)
    if alpha < 0.5 or dt < 0.0:
        raise ValueError(f"need alpha >= 1/2 and dt >= 0, got alpha={alpha}, dt={dt}")
    n = A.shape[0]
    I = np.eye(n)
    B = mmatrix_inverse(I - alpha * dt * A, shifted_colsums(A, alpha * dt))
    inner = (dt / (2.0 * alpha)) * A @ (I - B) + I
    c = shifted_colsums(A, dt)
    return np.column_stack([mmatrix_solve(I - dt * A, c, col) for col in inner.T])


def jacobian_fd(step: Callable[[np.ndarray], np.ndarray], y_star, h: float | None = None) -> np.ndarray:
    """Central-difference Jacobian of ``step`` at ``y_star``, column by column."""
    y_star = as_vector(y_star)
    if h is None:
        h = 1e-6 * (1.0 + norm_inf(y_star))
    if h <= 0.0:
        raise ValueError("difference step must be positive")
    cols = []
    for j in range(y_star.size):
        e = np.zeros_like(y_star)
        e[j] = h
        cols.append((np.asarray(step(y_star + e)) - np.asarray(step(y_star - e))) / (2.0 * h))
    return np.column_stack(cols)


# -- stability functions -------------------------------------------------------

def stability_function(z, alpha: float):
    """``R(z) = (-z^2 - 2 alpha z + 2) / (2 (1 - alpha z)(1 - z))``; works on arrays."""
    z = np.asarray(z, dtype=complex)
    den = 2.0 * (1.0 - alpha * z) * (1.0 - z)
    if np.any(den == 0.0):
        raise PoleEvaluation(f"R has poles at z = 1 and z = 1/alpha = {1.0 / alpha:g}")
    value = (-z * z - 2.0 * alpha * z + 2.0) / den
    return complex(value) if value.ndim == 0 else value


def stability_function_ncs(z: float, alpha: float) -> float:
    """Stability function of MPRK22ncs(alpha) on the adapted Dahlquist problem, real ``z <= 0``."""
    z = float(z)
    if z > 0.0:
        raise DomainError("the non-integer powers restrict R to the real ray z <= 0")
    if alpha < 0.5:
        raise DomainError(f"alpha must be >= 1/2, got {alpha}")
    g = (1.0 - alpha * z) ** (1.0 - 1.0 / alpha)
    return g / (g - z * (1.0 - (alpha - 0.5) * z))


@dataclass(frozen=True)
class RegionScan:
    alpha: float
    re: np.ndarray
    im: np.ndarray
    modulus: np.ndarray  # shape (len(im), len(re))

    @property
    def z(self) -> np.ndarray:
        return self.re[None, :] + 1j * self.im[:, None]

    def rows(self):
        for i, y in enumerate(self.im):
            for j, x in enumerate(self.re):
                yield float(x), float(y), float(self.modulus[i, j])


def scan_stability_region(alpha: float, re_range=(-10.0, 0.0), im_range=(-5.0, 5.0),
                          resolution=(100, 100)) -> RegionScan:
    """Sample ``|R(z)|`` on a uniform rectangular grid."""
    if np.isscalar(resolution):
        resolution = (int(resolution), int(resolution))
    nx, ny = resolution
    if nx < 2 or ny < 2:
        raise ValueError("resolution must be at least 2 per axis")
    if not (re_range[0] < re_range[1] and im_range[0] < im_range[1]):
        raise ValueError(f"empty window {re_range} x {im_range}")
    re = np.linspace(*re_range, nx)
    im = np.linspace(*im_range, ny)
    z = re[None, :] + 1j * im[:, None]
    return RegionScan(alpha, re, im, np.abs(stability_function(z, alpha)))


# -- verdicts -------------------------------------------------------------------

@dataclass
class StabilityReport:
    eigs_A: Spectrum
    eigs_Dg: Spectrum
    k: int
    unit_eigs_found: int
    max_other_modulus: float
    R_values: np.ndarray
    verdict: Verdict
    alpha: float
    dt: float
    advisories: dict = field(default_factory=dict)
    continuous: ContinuousStability | None = None
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "alpha": self.alpha,
            "dt": self.dt,
            "k": self.k,
            "eigs_A": self.eigs_A.to_pairs(),
            "eigs_Dg": self.eigs_Dg.to_pairs(),
            "R_values": [[float(v.real), float(v.imag)] for v in self.R_values],
            "unit_eigs_found": self.unit_eigs_found,
            "max_other_modulus": self.max_other_modulus,
            "verdict": self.verdict.value,
            "continuous": None if self.continuous is None else self.continuous.value,
            "advisories": dict(self.advisories),
            "norm": "max",
        }

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("indent", 2)
        return json.dumps(self.to_dict(), **kwargs)


def fixed_point_verdict(eigs_Dg, k: int, tol: float = UNIT_TOL) -> tuple[Verdict, int, float]:
    """Stable iff exactly ``k`` eigenvalues lie within ``tol`` of one and the rest have modulus ``<= 1 - tol``.

    Returns ``(verdict, unit_eigs_found, max_other_modulus)``.
    """
    if k < 1:
        raise ValueError("need at least one invariant")
    if not 0.0 < tol < 0.1:
        raise ValueError(f"tolerance must lie in (0, 0.1), got {tol}")
    values = np.asarray(getattr(eigs_Dg, "values", eigs_Dg), dtype=complex)
    at_one = np.abs(values - 1.0) <= tol
    others = np.abs(values[~at_one])
    max_other = float(others.max()) if others.size else 0.0
    found = int(at_one.sum())
    stable = found == k and max_other <= 1.0 - tol
    return (Verdict.STABLE if stable else Verdict.INCONCLUSIVE), found, max_other


def _cluster(values, tol):
    groups: list[list[complex]] = []
    for v in values:
        for g in groups:
            if abs(v - g[0]) <= tol:
                g.append(v)
                break
        else:
            groups.append([v])
    return groups


def continuous_stability_check(A, tol: float | None = None) -> ContinuousStability:
    """Lyapunov stability of the steady states of ``y' = A y``."""
    A = as_matrix(A, square=True)
    n = A.shape[0]
    scale = max(norm_inf(A), 1.0)
    if tol is None:
        tol = 1e-8 * scale
    lam = eigenvalues(A).values
    max_re = float(lam.real.max())
    if max_re < -tol:
        return ContinuousStability.ASYMPTOTICALLY_STABLE
    if max_re > tol:
        return ContinuousStability.UNSTABLE
    for group in _cluster([v for v in lam if abs(v.real) <= tol], tol):
        lam = np.mean(group)
        sv = np.linalg.svd(A - lam * np.eye(n), compute_uv=False)
        geometric = int(np.sum(sv <= 1e-10 * scale))
        if geometric < len(group):
            return ContinuousStability.UNSTABLE
    return ContinuousStability.STABLE


def analyze(sys: LinearPDS, alpha: float, dt: float, tol: float = UNIT_TOL) -> StabilityReport:
    """Spectral stability report of MPRK22(alpha) with step ``dt`` on ``sys``."""
    cfg = SchemeConfig(alpha, dt)
    A = sys.A
    eigs_A = eigenvalues(A)
    Dg = mprk22_jacobian(A, cfg.alpha, cfg.dt)
    eigs_Dg = eigenvalues(Dg)
    lam = eigs_A.sorted()
    R_values = np.asarray(stability_function(cfg.dt * lam, cfg.alpha), dtype=complex).ravel()
    verdict, found, max_other = fixed_point_verdict(eigs_Dg, sys.k, tol)
    scale = max(norm_inf(A), 1.0)
    nonzero = lam[np.abs(lam) > 1e-8 * scale]
    rho = float(np.abs(eigs_Dg.values).max())
    advisories = {
        "alpha_boundary": bool(alpha == 0.5),
        "nonzero_eigs_A_negative_real_part": bool(np.all(nonzero.real < 0.0)),
        "spectral_radius_Dg": rho,
        "instability_flag": bool(rho > 1.0 + tol),
        "kernel_dim": int(sys.kernel.shape[0]),
        "k_mismatch": bool(sys.kernel.shape[0] != sys.k),
    }
    return StabilityReport(eigs_A, eigs_Dg, sys.k, found, max_other, R_values, verdict,
                           cfg.alpha, cfg.dt, advisories, continuous_stability_check(A), sys.label)


# -- empirical probe --------------------------------------------------------------

@dataclass(frozen=True)
class ProbeResult:
    epsilon: float
    delta_used: float
    max_excursion: float
    converged_fraction: float
    steps: int
    samples: int
    slice_samples: int


def _directions(rng, n, count, y_star, delta, project=None, max_tries=10000):
    out = []
    tries = 0
    while len(out) < count and tries < max_tries:
        tries += 1
        d = rng.standard_normal(n)
        if project is not None:
            d = project @ d
        size = np.max(np.abs(d))
        if size == 0.0:
            continue
        y0 = y_star + d * (delta / size)
        if np.all(y0 > 0.0):
            out.append(y0)
    return out


def _orbit_distance(step, y0, y_star, n_steps):
    """Largest and final max-norm distance from ``y_star`` along the orbit of ``y0``."""
    y = y0
    worst = np.max(np.abs(y - y_star))
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n_steps):
            try:
                y = np.asarray(step(y))
            except (NonPositiveState, StageSolveFailure, ArithmeticError):
                return np.inf, np.inf
            dist = np.max(np.abs(y - y_star))
            if not np.isfinite(dist):
                return np.inf, np.inf
            worst = max(worst, dist)
    return float(worst), float(np.max(np.abs(y - y_star)))


def lyapunov_probe(stepper, sys, y_star, epsilons: Sequence[float], cfg: SchemeConfig | None = None,
                   samples_per_eps: int = 32, n_steps: int = 200, seed: int = 0,
                   converge_tol: float = 1e-6) -> list[ProbeResult]:
    """Empirical check of Lyapunov stability and of convergence on the invariant slice.

    For each ``eps`` starting points are drawn on the max-norm sphere of radius
    ``delta = eps / 10`` around ``y_star`` and iterated ``n_steps`` times;
    ``max_excursion`` is the largest distance to ``y_star`` seen on any orbit,
    including the starting point.  A second batch is drawn inside the
    invariant slice through ``y_star`` and counted as converged when it ends
    within ``converge_tol`` of ``y_star``.
    """
    cfg = cfg or SchemeConfig()
    step_fn = get_stepper(stepper)
    y_star = as_vector(y_star, sys.dim)
    if np.any(y_star <= 0.0):
        raise NonPositiveState("probe centre must be positive")
    Nm = getattr(sys, "invariant_matrix", np.ones((1, sys.dim)))
    Nm = np.atleast_2d(Nm)
    project = np.eye(sys.dim) - Nm.T @ np.linalg.solve(Nm @ Nm.T, Nm)

    def step(y):
        return step_fn(sys, y, cfg)

    rng = np.random.default_rng(seed)
    results = []
    for eps in epsilons:
        delta = eps / 10.0
        starts = _directions(rng, sys.dim, samples_per_eps, y_star, delta)
        slice_starts = _directions(rng, sys.dim, samples_per_eps, y_star, delta, project)
        worst = 0.0
        for y0 in starts:
            worst = max(worst, _orbit_distance(step, y0, y_star, n_steps)[0])
        converged = 0
        for y0 in slice_starts:
            orbit_worst, final = _orbit_distance(step, y0, y_star, n_steps)
            worst = max(worst, orbit_worst)
            converged += final <= converge_tol
        fraction = converged / len(slice_starts) if slice_starts else 0.0
        results.append(ProbeResult(float(eps), delta, float(worst), fraction, n_steps,
                                   len(starts), len(slice_starts)))
    return results
