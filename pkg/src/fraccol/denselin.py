"""Small dense linear algebra: LU solves, eigenvalues, PSD tests.

The kernels are thin wrappers over LAPACK (through numpy/scipy) that add the
error reporting and output conventions the rest of the package relies on.
Faddeev-LeVerrier lives here too; it is used only as an independent
cross-check of characteristic polynomials.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, DomainError, SingularMatrixError

__all__ = [
    "SingularMatrixError",
    "LUFactor",
    "lu_factor",
    "lu_solve",
    "eigenvalues",
    "PSDResult",
    "symmetric_part_psd",
    "faddeev_leverrier",
    "inf_norm",
]

PIVOT_FLOOR = 1e-300
MAX_EIG_DIM = 64


def _as_square(a, name="A"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DomainError(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} has non-finite entries")
    return a


def inf_norm(a) -> float:
    """Maximum absolute row sum."""
    a = np.asarray(a)
    if a.ndim == 1:
        return float(np.max(np.abs(a))) if a.size else 0.0
    return float(np.max(np.sum(np.abs(a), axis=1)))


@dataclass(frozen=True, eq=False)
class LUFactor:
    """Partially pivoted LU factorization, reusable for several solves."""

    lu: np.ndarray
    piv: np.ndarray

    @property
    def n(self) -> int:
        return self.lu.shape[0]

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise DomainError(f"right-hand side has {b.shape[0]} rows, expected {self.n}")
        return scipy.linalg.lu_solve((self.lu, self.piv), b, check_finite=False)


def lu_factor(a) -> LUFactor:
    """Factor ``a``; raise :class:`SingularMatrixError` on a pivot below 1e-300."""
    a = _as_square(a)
    # singularity is reported below, with the failing step
    with np.errstate(all="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    small = np.nonzero(~(np.abs(np.diag(lu)) >= PIVOT_FLOOR))[0]
    if small.size:
        k = int(small[0])
        raise SingularMatrixError(f"matrix is singular: zero pivot at elimination step {k}", index=k)
    return LUFactor(lu, piv)


def lu_solve(a, b) -> np.ndarray:
    """Solve ``a @ x = b`` for one or several right-hand sides."""
    return lu_factor(a).solve(b)


def eigenvalues(a) -> np.ndarray:
    """All eigenvalues of a real square matrix (``n <= 64``), with multiplicity.

    Computed by LAPACK ``dgeev`` (balancing, Hessenberg reduction, Francis
    double-shift QR).  Complex eigenvalues come in exact conjugate pairs,
    real ones have an imaginary part of exactly zero.  The result is sorted
    by real part, then imaginary part.
    """
    a = _as_square(a)
    n = a.shape[0]
    if n > MAX_EIG_DIM:
        raise DomainError(f"eigenvalues() is meant for n <= {MAX_EIG_DIM}, got {n}")
    try:
        lam = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"QR iteration failed to converge: {exc}") from None
    lam = np.asarray(lam, dtype=complex)
    return _pair_conjugates(lam)


def _pair_conjugates(lam):
    # Force exact conjugate symmetry: pair each upper-half-plane eigenvalue
    # with its nearest lower-half partner and average them.
    upper = [z for z in lam if z.imag > 0]
    lower = [z for z in lam if z.imag < 0]
    real = [complex(z.real, 0.0) for z in lam if z.imag == 0]
    if len(upper) != len(lower):
        raise ConvergenceError("eigenvalues of a real matrix did not pair up")
    lower = list(lower)
    paired = []
    for z in upper:
        k = min(range(len(lower)), key=lambda i: abs(lower[i] - z.conjugate()))
        w = lower.pop(k)
        mid = complex(0.5 * (z.real + w.real), 0.5 * (z.imag - w.imag))
        paired += [mid, mid.conjugate()]
    out = np.array(real + paired, dtype=complex)
    order = np.lexsort((out.imag, out.real))
    return out[order]


@dataclass(frozen=True)
class PSDResult:
    is_psd: bool
    min_eigenvalue: float
    tol: float

    def __bool__(self):
        return self.is_psd


def symmetric_part_psd(s, tol: float = 0.0) -> PSDResult:
    """Is ``(S + S^T)/2`` positive semidefinite up to ``-tol``?"""
    s = _as_square(s, "S")
    sym = 0.5 * (s + s.T)
    lam_min = float(np.linalg.eigvalsh(sym)[0])
    return PSDResult(lam_min >= -tol, lam_min, float(tol))


def faddeev_leverrier(a) -> np.ndarray:
    """Coefficients ``p_0 = 1, p_1, ..., p_n`` of ``det(λI - A) = Σ p_k λ^(n-k)``."""
    a = _as_square(a)
    n = a.shape[0]
    eye = np.eye(n)
    mk = np.zeros((n, n))
    p = [1.0]
    for k in range(1, n + 1):
        mk = a @ mk + p[-1] * eye
        p.append(-np.trace(a @ mk) / k)
    return np.array(p)
