"""Dense linear algebra used throughout the package.

Matrices and vectors are plain ``numpy`` float arrays; every function here
is pure and leaves its inputs untouched.  Eigenvalues are computed by
Householder reduction to Hessenberg form followed by the Francis
double-shift QR iteration, so complex eigenvalues of a real matrix always
come out as exactly conjugate pairs.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import NoConvergence, Overflow, ShapeMismatch, SingularMatrix

PIVOT_RTOL = 1e-13
KERNEL_RTOL = 1e-10


def as_matrix(A, square: bool = False) -> np.ndarray:
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ShapeMismatch(f"expected a non-empty 2-d matrix, got shape {A.shape}")
    if square and A.shape[0] != A.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def as_vector(v, dim: int | None = None) -> np.ndarray:
    v = np.array(v, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise ShapeMismatch(f"expected a non-empty 1-d vector, got shape {v.shape}")
    if dim is not None and v.size != dim:
        raise ShapeMismatch(f"expected a vector of length {dim}, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def norm_inf(A) -> float:
    A = np.asarray(A)
    if A.ndim == 1:
        return float(np.max(np.abs(A))) if A.size else 0.0
    return float(np.max(np.sum(np.abs(A), axis=1)))


# -- elementary operations -------------------------------------------------

def mat_mul(A, B) -> np.ndarray:
    A, B = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    if A.shape[-1] != B.shape[0]:
        raise ShapeMismatch(f"cannot multiply {A.shape} by {B.shape}")
    return A @ B


def mat_add(A, B) -> np.ndarray:
    A, B = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ShapeMismatch(f"cannot add {A.shape} and {B.shape}")
    return A + B


def mat_scale(A, c: float) -> np.ndarray:
    return float(c) * np.asarray(A, dtype=float)


def transpose(A) -> np.ndarray:
    return np.array(A, dtype=float).T.copy()


def mat_inverse(A) -> np.ndarray:
    """Inverse by LU solves against the identity columns."""
    A = as_matrix(A, square=True)
    lu, piv = lu_factor(A)
    n = A.shape[0]
    return np.column_stack([_lu_substitute(lu, piv, e) for e in np.eye(n)])


# -- LU with partial pivoting ----------------------------------------------

def lu_factor(A) -> tuple[np.ndarray, np.ndarray]:
    """Return the packed LU factors and the row permutation of ``A``.

    Raises SingularMatrix when a pivot falls below ``1e-13 * ||A||_inf``.
    """
    A = as_matrix(A, square=True)
    n = A.shape[0]
    lu = A.copy()
    piv = np.arange(n)
    threshold = PIVOT_RTOL * norm_inf(A)
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) <= threshold:
            raise SingularMatrix(f"pivot {abs(lu[p, k]):.3e} at column {k} below {threshold:.3e}")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            piv[[k, p]] = piv[[p, k]]
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return lu, piv


def _lu_substitute(lu, piv, b) -> np.ndarray:
    n = lu.shape[0]
    x = np.asarray(b, dtype=float)[piv].copy()
    for i in range(1, n):
        x[i] -= lu[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - lu[i, i + 1:] @ x[i + 1:]) / lu[i, i]
    return x


def lu_solve(A, b) -> np.ndarray:
    A = as_matrix(A, square=True)
    b = as_vector(b, A.shape[0])
    lu, piv = lu_factor(A)
    return _lu_substitute(lu, piv, b)


def mmatrix_solve(M, colsums, b) -> np.ndarray:
    """Solve ``M x = b`` for a column diagonally dominant M-matrix.

    ``M`` must have nonpositive off-diagonal entries and ``colsums`` must be
    its (nonnegative) column sums, supplied by the caller because they are
    usually known exactly, e.g. all ones for the stage matrices of a
    conservative system.  The diagonal of ``M`` is never read: each pivot is
    rebuilt from the column sum and the off-diagonal magnitudes, so
    elimination involves no cancellation (Grassmann-Taksar-Heyman style) and
    ``colsums @ x`` matches ``sum(b)`` to rounding even when ``M`` is huge.

    Falls back to ``lu_solve`` when the sign pattern does not hold.
    """
    M = as_matrix(M, square=True)
    n = M.shape[0]
    c = as_vector(colsums, n).copy()
    b = as_vector(b, n)
    off = M - np.diag(np.diag(M))
    if np.any(off > 0.0) or np.any(c < 0.0):
        return lu_solve(M, b)
    W = off.copy()
    x = b.copy()
    d = np.empty(n)
    for k in range(n):
        d[k] = c[k] - W[k + 1:, k].sum()
        if not d[k] > 0.0:
            raise SingularMatrix(f"M-matrix pivot {d[k]:.3e} at column {k} is not positive")
        factor = W[k + 1:, k] / d[k]
        W[k + 1:, k + 1:] -= np.outer(factor, W[k, k + 1:])
        c[k + 1:] -= W[k, k + 1:] * (c[k] / d[k])
        x[k + 1:] -= factor * x[k]
        # the trailing diagonal is rebuilt from c, so clear what the update put there
        idx = np.arange(k + 1, n)
        W[idx, idx] = 0.0
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - W[i, i + 1:] @ x[i + 1:]) / d[i]
    return x


def mmatrix_inverse(M, colsums) -> np.ndarray:
    """Inverse of an M-matrix with known column sums, one :func:`mmatrix_solve` per column."""
    M = as_matrix(M, square=True)
    return np.column_stack([mmatrix_solve(M, colsums, e) for e in np.eye(M.shape[0])])


def shifted_colsums(A, h: float) -> np.ndarray:
    """Column sums of ``I - h A``, exact when a column of ``A`` sums to zero up to rounding."""
    A = as_matrix(A, square=True)
    residual = A.sum(axis=0)
    residual[np.abs(residual) <= PIVOT_RTOL * max(norm_inf(A), 1.0)] = 0.0
    return 1.0 - h * residual


# -- eigenvalues -------------------------------------------------------------

@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a real square matrix, with algebraic multiplicity."""

    values: np.ndarray
    source_dim: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex).ravel()
        object.__setattr__(self, "values", values)
        if values.size != self.source_dim:
            raise ShapeMismatch(f"{values.size} eigenvalues for dimension {self.source_dim}")

    def __len__(self):
        return self.values.size

    def __iter__(self):
        return iter(self.values)

    def sorted(self) -> np.ndarray:
        """Eigenvalues ordered by decreasing real part, then imaginary part."""
        order = np.lexsort((-self.values.imag, -self.values.real))
        return self.values[order]

    def to_pairs(self) -> list[list[float]]:
        return [[float(v.real), float(v.imag)] for v in self.sorted()]


def hessenberg(A) -> np.ndarray:
    """Upper Hessenberg matrix similar to ``A`` via Householder reflectors."""
    H = as_matrix(A, square=True).copy()
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1:, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        v = x.copy()
        v[0] += math.copysign(alpha, x[0])
        v /= np.linalg.norm(v)
        H[k + 1:, k:] -= 2.0 * np.outer(v, v @ H[k + 1:, k:])
        H[:, k + 1:] -= 2.0 * np.outer(H[:, k + 1:] @ v, v)
        H[k + 2:, k] = 0.0
    return H


def eigenvalues(A, max_sweeps: int | None = None) -> Spectrum:
    """All eigenvalues of a real square matrix.

    Francis double-shift QR on the Hessenberg form with deflation; each
    converged 2x2 block with complex roots yields an exactly conjugate pair.
    The total number of QR sweeps is capped at ``30 * n**2``.
    """
    A = as_matrix(A, square=True)
    n = A.shape[0]
    if max_sweeps is None:
        max_sweeps = 30 * n * n
    # 1-based working copy keeps the index arithmetic of the classic algorithm
    a = np.zeros((n + 1, n + 1))
    a[1:, 1:] = hessenberg(A)
    wr = np.zeros(n + 1)
    wi = np.zeros(n + 1)
    anorm = sum(abs(a[i, j]) for i in range(1, n + 1) for j in range(max(i - 1, 1), n + 1))
    nn = n
    t = 0.0
    sweeps = 0
    while nn >= 1:
        its = 0
        while True:
            l = 1
            for ll in range(nn, 1, -1):
                s = abs(a[ll - 1, ll - 1]) + abs(a[ll, ll])
                if s == 0.0:
                    s = anorm
                if abs(a[ll, ll - 1]) + s == s:
                    a[ll, ll - 1] = 0.0
                    l = ll
                    break
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
                break
            y = a[nn - 1, nn - 1]
            w = a[nn, nn - 1] * a[nn - 1, nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = math.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + math.copysign(z, p)
                    wr[nn - 1] = wr[nn] = x + z
                    if z:
                        wr[nn] = x - w / z
                    wi[nn - 1] = wi[nn] = 0.0
                else:
                    wr[nn - 1] = wr[nn] = x + p
                    wi[nn - 1] = z
                    wi[nn] = -z
                nn -= 2
                break
            if sweeps >= max_sweeps:
                raise NoConvergence(f"QR iteration did not converge within {max_sweeps} sweeps")
            if its > 0 and its % 10 == 0:
                # exceptional shift
                t += x
                for i in range(1, nn + 1):
                    a[i, i] -= x
                s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                y = x = 0.75 * s
                w = -0.4375 * s * s
            its += 1
            sweeps += 1
            m = nn - 2
            while m >= l:
                z = a[m, m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                q = a[m + 1, m + 1] - z - r - s
                r = a[m + 2, m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                if u + v == v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                a[i, i - 2] = 0.0
                if i != m + 2:
                    a[i, i - 3] = 0.0
            for k in range(m, nn):
                if k != m:
                    p = a[k, k - 1]
                    q = a[k + 1, k - 1]
                    r = a[k + 2, k - 1] if k != nn - 1 else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                if s == 0.0:
                    continue
                if k == m:
                    if l != m:
                        a[k, k - 1] = -a[k, k - 1]
                else:
                    a[k, k - 1] = -s * x
                p += s
                x = p / s
                y = q / s
                z = r / s
                q /= p
                r /= p
                for j in range(k, nn + 1):
                    p = a[k, j] + q * a[k + 1, j]
                    if k != nn - 1:
                        p += r * a[k + 2, j]
                        a[k + 2, j] -= p * z
                    a[k + 1, j] -= p * y
                    a[k, j] -= p * x
                for i in range(l, min(nn, k + 3) + 1):
                    p = x * a[i, k] + y * a[i, k + 1]
                    if k != nn - 1:
                        p += z * a[i, k + 2]
                        a[i, k + 2] -= p * r
                    a[i, k + 1] -= p * q
                    a[i, k] -= p
    return Spectrum(wr[1:] + 1j * wi[1:], n)


# -- kernels and ranks ------------------------------------------------------

def kernel_basis(A, rank_tol: float | None = None) -> list[np.ndarray]:
    """Orthonormal basis of the numerical kernel of ``A``.

    Singular values at or below ``rank_tol`` (default ``1e-10 * ||A||_inf``)
    count as zero.
    """
    A = as_matrix(A)
    if rank_tol is None:
        rank_tol = KERNEL_RTOL * norm_inf(A)
    _, sv, vt = np.linalg.svd(A)
    sv = np.concatenate([sv, np.zeros(A.shape[1] - sv.size)])
    return [vt[i].copy() for i in range(A.shape[1]) if sv[i] <= rank_tol]


def numerical_rank(A, rank_tol: float | None = None) -> int:
    A = np.asarray(A)
    return A.shape[1] - len(kernel_basis(A, rank_tol))


def row_echelon_basis(rows, tol: float = 1e-12) -> np.ndarray:
    """Reduced row echelon form of a full-rank set of rows.

    Gives a deterministic, readable basis of the row span; a single row is
    scaled so that its first non-negligible entry is one.
    """
    R = np.array(rows, dtype=float)
    if R.ndim == 1:
        R = R[None, :]
    k, n = R.shape
    row = 0
    for col in range(n):
        if row == k:
            break
        p = row + int(np.argmax(np.abs(R[row:, col])))
        if abs(R[p, col]) <= tol * max(1.0, np.abs(R).max()):
            continue
        R[[row, p]] = R[[p, row]]
        R[row] /= R[row, col]
        for i in range(k):
            if i != row:
                R[i] -= R[i, col] * R[row]
        row += 1
    if row < k:
        raise SingularMatrix("rows are linearly dependent")
    R[np.abs(R) < tol] = 0.0
    return R


# -- matrix exponential -----------------------------------------------------

def expm(A, t: float = 1.0) -> np.ndarray:
    """``exp(t A)`` by scaling and squaring of a truncated Taylor series."""
    A = as_matrix(A, square=True)
    n = A.shape[0]
    X = float(t) * A
    nrm = norm_inf(X)
    if not math.isfinite(nrm):
        raise Overflow("matrix norm is not representable")
    s = 0 if nrm <= 0.5 else int(math.ceil(math.log2(nrm / 0.5)))
    X = X / 2.0 ** s
    E = np.eye(n)
    term = np.eye(n)
    for j in range(1, 40):
        term = term @ X / j
        E = E + term
        if norm_inf(term) <= 1e-18 * norm_inf(E):
            break
    with np.errstate(over="raise", invalid="raise"):
        try:
            for _ in range(s):
                E = E @ E
        except FloatingPointError as exc:
            raise Overflow("matrix exponential overflowed during squaring") from exc
    if not np.all(np.isfinite(E)):
        raise Overflow("matrix exponential is not representable")
    return E


def expm_apply(A, t: float, y0) -> np.ndarray:
    A = as_matrix(A, square=True)
    y0 = as_vector(y0, A.shape[0])
    if t == 0.0:
        return y0.copy()
    return expm(A, t) @ y0
