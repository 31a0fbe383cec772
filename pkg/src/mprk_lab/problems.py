"""Stiff linear test problems with closed-form solutions.

The three 100-scaled systems below have exact solutions written as
eigenvector expansions with the coefficients fitted to their initial data.
These closed forms are kept as transcribed; tests compare them against the
matrix exponential, so a typo in either shows up as a disagreement.
"""
from __future__ import annotations

from dataclasses import dataclass
import re
from typing import Callable

import numpy as np

from .errors import ParameterViolation
from .linalg import Spectrum
from .pds import LinearPDS, linear_pds_from_matrix


@dataclass(frozen=True)
class NamedProblem:
    label: str
    system: LinearPDS
    y0: np.ndarray
    exact: Callable[[float], np.ndarray]
    steady_state: np.ndarray
    spectrum: Spectrum

    @property
    def A(self) -> np.ndarray:
        return self.system.A


def problem_real_eigs() -> NamedProblem:
    A = 100.0 * np.array([[-2.0, 1.0, 1.0], [1.0, -4.0, 1.0], [1.0, 3.0, -2.0]])
    c1, c2, c3 = 1.0, 4.0, -6.0
    steady = np.array([5.0, 3.0, 7.0])
    v2, v3 = np.array([-1.0, 0.0, 1.0]), np.array([0.0, -1.0, 1.0])

    def exact(t):
        return c1 * steady + c2 * np.exp(-300.0 * t) * v2 + c3 * np.exp(-500.0 * t) * v3

    system = linear_pds_from_matrix(A, invariants=[[1.0, 1.0, 1.0]], label="real-eigs")
    return NamedProblem("real-eigs", system, np.array([1.0, 9.0, 5.0]), exact, c1 * steady,
                        Spectrum([0.0, -300.0, -500.0], 3))


def problem_complex_eigs() -> NamedProblem:
    A = 100.0 * np.array([[-4.0, 3.0, 1.0], [2.0, -4.0, 3.0], [2.0, 1.0, -4.0]])
    c1, c2, c3 = 1.0, -2.0, -6.0
    steady = np.array([13.0, 14.0, 10.0])
    u, w = np.array([-1.0, 0.0, 1.0]), np.array([1.0, -1.0, 0.0])

    def exact(t):
        decay = np.exp(-600.0 * t)
        cos, sin = np.cos(100.0 * t), np.sin(100.0 * t)
        return (c1 * steady + c2 * decay * (cos * u - sin * w)
                + c3 * decay * (cos * w + sin * u))

    system = linear_pds_from_matrix(A, invariants=[[1.0, 1.0, 1.0]], label="complex-eigs")
    return NamedProblem("complex-eigs", system, np.array([9.0, 20.0, 8.0]), exact, c1 * steady,
                        Spectrum([0.0, -600.0 + 100.0j, -600.0 - 100.0j], 3))


def problem_double_zero() -> NamedProblem:
    A = 100.0 * np.array([
        [-2.0, 0.0, 0.0, 1.0],
        [0.0, -4.0, 3.0, 0.0],
        [0.0, 4.0, -3.0, 0.0],
        [2.0, 0.0, 0.0, -1.0],
    ])
    c1, c2, c3, c4 = 30.0 / 7.0, 5.0 / 3.0, -23.0 / 7.0, 7.0 / 3.0
    v1 = np.array([0.0, 1.0, 4.0 / 3.0, 0.0])
    v2 = np.array([1.0, 0.0, 0.0, 2.0])
    v3 = np.array([0.0, 1.0, -1.0, 0.0])
    v4 = np.array([1.0, 0.0, 0.0, -1.0])

    def exact(t):
        return c1 * v1 + c2 * v2 + c3 * np.exp(-700.0 * t) * v3 + c4 * np.exp(-300.0 * t) * v4

    system = linear_pds_from_matrix(A, invariants=[[1.0, 1.0, 1.0, 1.0], [1.0, 2.0, 2.0, 1.0]],
                                    label="double-zero")
    return NamedProblem("double-zero", system, np.array([4.0, 1.0, 9.0, 1.0]), exact,
                        c1 * v1 + c2 * v2, Spectrum([0.0, 0.0, -300.0, -700.0], 4))


def problem_dahlquist_adapted(lam: float = -1.0, y0=(1.0, 1.0)) -> NamedProblem:
    """``y1' = lam y1, y2' = -lam y1``: exponential decay feeding a reservoir."""
    if not lam < 0.0:
        raise ParameterViolation(f"lambda must be negative, got {lam}")
    A = np.array([[lam, 0.0], [-lam, 0.0]])
    y0 = np.asarray(y0, dtype=float)
    total = y0.sum()

    def exact(t):
        first = y0[0] * np.exp(lam * t)
        return np.array([first, total - first])

    label = f"dahlquist({lam:g})"
    system = linear_pds_from_matrix(A, invariants=[[1.0, 1.0]], label=label)
    return NamedProblem(label, system, y0, exact, np.array([0.0, total]), Spectrum([0.0, lam], 2))


def problem_2d(a: float = 1.0, b: float = 1.0, y0=(1.5, 0.5)) -> NamedProblem:
    """Two-species exchange ``A = [[-a, b], [a, -b]]``."""
    if a < 0.0 or b < 0.0 or a + b <= 0.0:
        raise ParameterViolation(f"need a, b >= 0 and a + b > 0, got a={a}, b={b}")
    A = np.array([[-a, b], [a, -b]], dtype=float)
    y0 = np.asarray(y0, dtype=float)
    steady = y0.sum() / (a + b) * np.array([b, a])

    def exact(t):
        return steady + (y0 - steady) * np.exp(-(a + b) * t)

    label = f"two-species({a:g},{b:g})"
    system = linear_pds_from_matrix(A, invariants=[[1.0, 1.0]], label=label)
    return NamedProblem(label, system, y0, exact, steady, Spectrum([0.0, -(a + b)], 2))


STIFF_PROBLEMS = {
    "real-eigs": problem_real_eigs,
    "complex-eigs": problem_complex_eigs,
    "double-zero": problem_double_zero,
}

_CALL = re.compile(r"^\s*([a-z0-9-]+)\s*(?:\((.*)\))?\s*$")


def get_problem(label: str) -> NamedProblem:
    """Look up a problem by label, e.g. ``real-eigs`` or ``two-species(1,2)``."""
    m = _CALL.match(label)
    if not m:
        raise KeyError(f"cannot parse problem label {label!r}")
    name, args = m.group(1), m.group(2)
    params = [float(x) for x in args.split(",")] if args and args.strip() else []
    if name in STIFF_PROBLEMS:
        if params:
            raise ParameterViolation(f"{name} takes no parameters")
        return STIFF_PROBLEMS[name]()
    if name == "dahlquist":
        return problem_dahlquist_adapted(*params[:1])
    if name == "two-species":
        return problem_2d(*params[:2])
    raise KeyError(f"unknown problem {label!r}")
