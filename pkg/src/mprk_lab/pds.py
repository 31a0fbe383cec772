"""Production-destruction systems and their linear specialisation.

A production-destruction system (PDS) is described by two matrix-valued
functions of the state, ``P(y)`` and ``D(y)``, with ``y_i' = sum_j P_ij -
D_ij``.  A positive linear system ``y' = A y`` with Metzler ``A`` is turned
into a PDS by letting every off-diagonal flux ``a_ij * y_j`` appear once as
production of species ``i`` and once as destruction of species ``j``, so
conservative matrices are conservative by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable
import warnings

import numpy as np

from .errors import (
    DependentSpan,
    NoInvariant,
    NonPositiveState,
    NotMetzler,
    RankDeficient,
    ShapeMismatch,
    SingularMatrix,
)
from .linalg import (
    as_matrix,
    as_vector,
    kernel_basis,
    mat_inverse,
    norm_inf,
    numerical_rank,
    row_echelon_basis,
)

METZLER_TOL = 1e-13
INVARIANT_RTOL = 1e-10
CONSERVATION_RTOL = 1e-12
SAMPLE_SEED = 20220301


class NonConservativeWarning(UserWarning):
    """The total ``1^T y`` is not among the invariants of a linear system."""


@dataclass(frozen=True)
class ProductionDestructionSystem:
    dim: int
    production: Callable[[np.ndarray], np.ndarray]
    destruction: Callable[[np.ndarray], np.ndarray]
    label: str = ""


@dataclass(frozen=True)
class LinearPDS:
    """Positive linear system ``y' = A y`` viewed as a PDS.

    ``invariant_matrix`` holds a basis of ``ker(A^T)`` as rows and ``kernel``
    a basis of ``ker(A)`` as rows.  ``column_residual`` is the column sum of
    ``A`` with negligible values snapped to exactly zero; it is what the
    integrators use in place of the diagonal.
    """

    A: np.ndarray
    invariant_matrix: np.ndarray
    kernel: np.ndarray
    column_residual: np.ndarray
    label: str = ""

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def k(self) -> int:
        return self.invariant_matrix.shape[0]

    @property
    def is_conservative(self) -> bool:
        return bool(np.all(self.column_residual == 0.0))

    def production(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        P = np.clip(self.A, 0.0, None) * y[None, :]
        np.fill_diagonal(P, np.clip(self.column_residual, 0.0, None) * y)
        return P

    def destruction(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        off = np.clip(self.A, 0.0, None)
        np.fill_diagonal(off, 0.0)
        D = (off * y[None, :]).T.copy()
        np.fill_diagonal(D, np.clip(-self.column_residual, 0.0, None) * y)
        return D


@dataclass(frozen=True)
class InvariantSlice:
    """Affine set ``{y : N y = target}`` of states sharing invariant values."""

    invariant_matrix: np.ndarray
    target: np.ndarray = field(default=None)

    def __post_init__(self):
        Nm = np.atleast_2d(np.asarray(self.invariant_matrix, dtype=float))
        object.__setattr__(self, "invariant_matrix", Nm)
        if self.target is not None:
            target = as_vector(self.target, Nm.shape[0])
            object.__setattr__(self, "target", target)

    @classmethod
    def through(cls, invariant_matrix, y_star) -> "InvariantSlice":
        Nm = np.atleast_2d(np.asarray(invariant_matrix, dtype=float))
        return cls(Nm, Nm @ np.asarray(y_star, dtype=float))

    def contains(self, y, rtol: float = 1e-10) -> bool:
        values = invariant_values(self, y)
        return bool(np.all(np.abs(values - self.target) <= rtol * (1.0 + np.abs(self.target))))


def linear_pds_from_matrix(A, invariants=None, label: str = "") -> LinearPDS:
    """Validate a Metzler matrix and wrap it as a :class:`LinearPDS`.

    ``invariants`` may supply explicit invariant rows; otherwise a reduced
    row echelon basis of ``ker(A^T)`` is used, which is ``(1, ..., 1)`` for a
    conservative matrix with a single invariant.
    """
    A = as_matrix(A, square=True)
    n = A.shape[0]
    off = A - np.diag(np.diag(A))
    if np.any(off < -METZLER_TOL):
        i, j = np.argwhere(off < -METZLER_TOL)[0]
        raise NotMetzler(f"off-diagonal entry a[{i},{j}] = {A[i, j]:g} is negative")
    scale = norm_inf(A)

    left = kernel_basis(A.T)
    if not left:
        raise NoInvariant("ker(A^T) is trivial; the system has no linear invariant")
    kernel = np.array(kernel_basis(A))
    if invariants is None:
        Nm = row_echelon_basis(np.array(left))
    else:
        Nm = np.atleast_2d(np.asarray(invariants, dtype=float))
        if Nm.shape[1] != n:
            raise ShapeMismatch(f"invariant rows have length {Nm.shape[1]}, expected {n}")
        if Nm.shape[0] != len(left) or numerical_rank(Nm) != Nm.shape[0]:
            raise DependentSpan(f"expected {len(left)} independent invariant rows, got {Nm.shape[0]}")
    for row in Nm:
        if norm_inf(row @ A) > INVARIANT_RTOL * scale * norm_inf(row):
            raise NoInvariant(f"row {row} is not a left null vector of A")

    residual = A.sum(axis=0)
    residual[np.abs(residual) <= METZLER_TOL * max(scale, 1.0)] = 0.0
    ones = np.ones(n)
    coef, *_ = np.linalg.lstsq(Nm.T, ones, rcond=None)
    if norm_inf(Nm.T @ coef - ones) > 1e-8:
        warnings.warn(
            "1^T y is not a linear invariant; positivity of MPRK22 is not guaranteed",
            NonConservativeWarning,
            stacklevel=2,
        )
    return LinearPDS(A, Nm, kernel, residual, label)


def rhs(sys, y, check: bool = True) -> np.ndarray:
    """Right-hand side ``sum_j P_ij(y) - D_ij(y)``."""
    y = as_vector(y, sys.dim)
    if check and np.any(y <= 0.0):
        raise NonPositiveState(f"state {y} is not componentwise positive")
    return (np.asarray(sys.production(y)) - np.asarray(sys.destruction(y))).sum(axis=1)


def sample_states(dim: int, count: int = 10, low: float = 0.1, high: float = 10.0,
                  seed: int = SAMPLE_SEED) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return list(rng.uniform(low, high, size=(count, dim)))


def check_conservative(sys, samples=None) -> bool:
    """True when ``1^T rhs(y)`` vanishes (to rounding) at every sample state."""
    if samples is None:
        samples = sample_states(sys.dim)
    for y in samples:
        y = as_vector(y, sys.dim)
        if np.any(y <= 0.0):
            raise NonPositiveState(f"sample {y} is not componentwise positive")
        P = np.asarray(sys.production(y))
        D = np.asarray(sys.destruction(y))
        f = (P - D).sum(axis=1)
        scale = max(np.abs(f).sum(), np.abs(P).sum() + np.abs(D).sum())
        if abs(f.sum()) > CONSERVATION_RTOL * scale:
            return False
    return True


def invariant_values(slice_: InvariantSlice, y) -> np.ndarray:
    Nm = slice_.invariant_matrix
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size != Nm.shape[1]:
        raise ShapeMismatch(f"state of length {y.size} does not match {Nm.shape[1]} columns")
    return Nm @ y


def steady_state_for_initial(sys: LinearPDS, y0) -> np.ndarray:
    """The steady state on the invariant slice through ``y0``.

    Solves the stacked system ``[A; N] y = [0; N y0]``, which has full column
    rank whenever zero is a semisimple eigenvalue of ``A``.
    """
    y0 = as_vector(y0, sys.dim)
    if np.any(y0 <= 0.0):
        raise NonPositiveState(f"initial state {y0} is not componentwise positive")
    A, Nm = sys.A, sys.invariant_matrix
    scale = norm_inf(A) or 1.0
    K = np.vstack([A / scale, Nm])
    rhs_ = np.concatenate([np.zeros(sys.dim), Nm @ y0])
    sv = np.linalg.svd(K, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise RankDeficient("stacked steady-state system is numerically rank deficient")
    y, *_ = np.linalg.lstsq(K, rhs_, rcond=None)
    # one step of refinement tightens N y = N y0 to rounding
    corr, *_ = np.linalg.lstsq(K, rhs_ - K @ y, rcond=None)
    return y + corr


def matrix_from_invariants(kernel_span, invariant_span) -> np.ndarray:
    """Build ``A`` with ``ker(A) = span(kernel_span)`` and ``ker(A^T) = span(invariant_span)``.

    ``A`` maps the kernel vectors to zero and a complement basis of the
    kernel onto a basis of the orthogonal complement of the invariants.
    """
    V = np.atleast_2d(np.asarray(kernel_span, dtype=float))
    Nm = np.atleast_2d(np.asarray(invariant_span, dtype=float))
    k, n = V.shape
    if Nm.shape != (k, n):
        raise DependentSpan(f"kernel span {V.shape} and invariant span {Nm.shape} differ in shape")
    if not 1 <= k < n:
        raise DependentSpan(f"need 1 <= k < N, got k={k}, N={n}")
    if numerical_rank(V) != k or numerical_rank(Nm) != k:
        raise DependentSpan("spanning vectors are linearly dependent")
    S = np.array(kernel_basis(Nm))
    W = np.array(kernel_basis(V))
    T = np.vstack([V, W]).T
    image = np.hstack([np.zeros((n, k)), S.T])
    try:
        return image @ mat_inverse(T)
    except SingularMatrix as exc:
        raise DependentSpan("kernel span and its complement are not independent") from exc
