"""Well-posedness certificates for one collocation step.

A step is uniquely solvable when ``M = D1 W D2 W^-1`` has no real negative
eigenvalue.  This module checks that directly (``spectrum``), through the
signs of the characteristic polynomial coefficients (``charpoly_subsets``,
cross-checked by ``charpoly_leverrier``), and through the alternative
Lax-Milgram and small-step criteria.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import denselin
from .collocation import (
    CollocationMatrices,
    CollocationRule,
    build_matrices,
    make_points,
    generalized_vandermonde_dets,
    vandermonde_det,
)
from .errors import CertificateError, DomainError, SingularMatrixError
from .specfun import caputo_power_coefficients

__all__ = [
    "IMAG_TOL",
    "NEG_TOL",
    "SpectrumReport",
    "CharPolyReport",
    "LaxMilgramResult",
    "StepsizeCheck",
    "ResolventEstimate",
    "spectrum",
    "classify_eigenvalues",
    "charpoly_subsets",
    "charpoly_leverrier",
    "lax_milgram_check",
    "lax_milgram_D_m2",
    "ode_stepsize_check",
    "estimate_resolvent_bound",
    "ScanRow",
    "FamilySummary",
    "scan",
    "summarize_scan",
]

IMAG_TOL = 1e-8
NEG_TOL = 1e-10
MAX_SUBSET_M = 16
MAX_LEVERRIER_M = 20


@dataclass(frozen=True)
class SpectrumReport:
    m: int
    alpha: float
    family: str
    eigenvalues: np.ndarray = field(repr=False)
    is_real: np.ndarray = field(repr=False)
    has_real_negative: bool
    all_real_parts_positive: bool
    real_eigenvalue_count: int
    min_real_part: float

    @property
    def is_real_negative(self) -> np.ndarray:
        return self.is_real & (self.eigenvalues.real < -NEG_TOL)


def classify_eigenvalues(lam, imag_tol: float = IMAG_TOL, neg_tol: float = NEG_TOL):
    """Return ``(is_real, is_real_negative)`` masks.

    ``λ`` counts as real iff ``|Im λ| <= imag_tol * max(1, |λ|)`` and as
    real negative iff it is real and ``Re λ < -neg_tol``.
    """
    lam = np.asarray(lam, dtype=complex)
    is_real = np.abs(lam.imag) <= imag_tol * np.maximum(1.0, np.abs(lam))
    return is_real, is_real & (lam.real < -neg_tol)


def spectrum(
    rule: CollocationRule,
    alpha: float,
    imag_tol: float = IMAG_TOL,
    neg_tol: float = NEG_TOL,
    matrices: CollocationMatrices | None = None,
) -> SpectrumReport:
    """Eigenvalues of ``M`` for ``rule`` and ``alpha`` with their classification."""
    mats = matrices if matrices is not None else build_matrices(rule, alpha)
    lam = denselin.eigenvalues(mats.M)
    is_real, real_neg = classify_eigenvalues(lam, imag_tol, neg_tol)
    return SpectrumReport(
        m=rule.m,
        alpha=float(alpha),
        family=rule.family,
        eigenvalues=lam,
        is_real=is_real,
        has_real_negative=bool(real_neg.any()),
        all_real_parts_positive=bool(np.all(lam.real > 0.0)),
        real_eigenvalue_count=int(is_real.sum()),
        min_real_part=float(lam.real.min()),
    )


@dataclass(frozen=True)
class CharPolyReport:
    """``det(M_alpha - λ W) = Σ_j (-λ)^j a_j``."""

    coefficients: np.ndarray
    all_positive: bool
    cross_check_residual: float
    reference: np.ndarray = field(repr=False)


def _subset_exponents(m, alpha):
    # one row per subset I of {1..m}; bit k-1 set <=> k in I
    masks = np.arange(2 ** m)
    k = np.arange(1, m + 1)
    in_set = (masks[:, None] >> (k - 1)[None, :]) & 1
    betas = k[None, :] - alpha * (1 - in_set)
    return in_set.astype(bool), betas


def charpoly_subsets(rule: CollocationRule, alpha: float) -> CharPolyReport:
    """Characteristic polynomial coefficients as sums of subset determinants.

    ``a_j`` is the sum over all ``I ⊆ {1..m}`` with ``#I = j`` of
    ``det M_I``, where ``M_I`` takes column ``k`` from ``W`` if ``k ∈ I``
    and from ``M_alpha`` otherwise.  Each ``det M_I`` equals
    ``(Π_{k∉I} c_k)`` times a generalized Vandermonde determinant with
    exponents ``k`` (``k ∈ I``) or ``k - α`` (``k ∉ I``).
    """
    m = rule.m
    if m > MAX_SUBSET_M:
        raise DomainError(f"subset enumeration is capped at m = {MAX_SUBSET_M}, got {m}")
    c = np.array(caputo_power_coefficients(m, alpha))
    in_set, betas = _subset_exponents(m, float(alpha))
    dets = generalized_vandermonde_dets(rule.points, betas)
    weights = np.prod(np.where(in_set, 1.0, c[None, :]), axis=1)
    sizes = in_set.sum(axis=1)
    terms = weights * dets
    a = np.array([math.fsum(terms[sizes == j]) for j in range(m + 1)])
    ref = charpoly_leverrier(build_matrices(rule, alpha))
    resid = float(np.max(np.abs(a - ref) / np.maximum(1.0, np.abs(ref))))
    return CharPolyReport(a, bool(np.all(a > 0.0)), resid, ref)


def charpoly_leverrier(matrices: CollocationMatrices) -> np.ndarray:
    """Coefficients ``a_0..a_m`` from Faddeev-LeVerrier, scaled by ``det W``.

    ``det(M_alpha - λW) = det W · det(W^-1 M_alpha - λI)``, and
    ``W^-1 M_alpha = W^-1 M W`` has the characteristic polynomial of ``M``.
    """
    m = matrices.m
    if m > MAX_LEVERRIER_M:
        raise DomainError(f"LeVerrier cross-check is capped at m = {MAX_LEVERRIER_M}")
    p = denselin.faddeev_leverrier(matrices.M)
    det_w = vandermonde_det(matrices.rule)
    j = np.arange(m + 1)
    return det_w * (-1.0) ** (m - j) * p[m - j]


@dataclass(frozen=True)
class LaxMilgramResult:
    passed: bool
    min_eigenvalue: float
    tol: float

    def __bool__(self):
        return self.passed


def lax_milgram_check(rule: CollocationRule, alpha: float, D) -> LaxMilgramResult:
    """Is the symmetric part of ``W^T diag(D) W D2_hat`` positive semidefinite?

    ``D2_hat = D2 / c_1``; the rescaling does not change the PSD status.
    The tolerance on the minimum eigenvalue is ``1e-12`` times the infinity
    norm of the matrix.
    """
    D = np.asarray(D, dtype=float)
    if D.shape != (rule.m,):
        raise DomainError(f"D must have {rule.m} entries")
    if not np.all(np.isfinite(D)) or np.any(D <= 0.0):
        raise DomainError("all entries of D must be positive")
    c = np.array(caputo_power_coefficients(rule.m, alpha))
    theta = rule.points
    W = theta[:, None] ** np.arange(1, rule.m + 1)[None, :]
    S = W.T @ (D[:, None] * W) * (c / c[0])[None, :]
    tol = 1e-12 * denselin.inf_norm(S)
    res = denselin.symmetric_part_psd(S, tol)
    return LaxMilgramResult(res.is_psd, res.min_eigenvalue, tol)


def lax_milgram_D_m2(theta1: float, alpha: float) -> np.ndarray | None:
    """Diagonal weights for the two-point rule ``(θ_1, 1)``, if they exist.

    Returns ``diag(1, θ_1^3)`` when ``θ_1 <= 1 - α/2`` and ``None`` otherwise.
    """
    theta1 = float(theta1)
    if not (0.0 < theta1 < 1.0):
        raise DomainError(f"theta1 must lie in (0, 1), got {theta1}")
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    if theta1 > 1.0 - 0.5 * alpha:
        return None
    return np.array([1.0, theta1 ** 3])


@dataclass(frozen=True)
class StepsizeCheck:
    passed: bool
    norm: float
    bound: float


def ode_stepsize_check(rule: CollocationRule, alpha: float, tau: float, c_values) -> StepsizeCheck:
    """Small-step test ``τ^α ||(D1 W D2)^-1 D_c W||_∞ < 1`` for fractional ODEs.

    ``c_values`` are the reaction coefficients at the collocation points.
    The test is sufficient, not necessary, for unique solvability.
    """
    if not tau > 0.0:
        raise DomainError(f"tau must be positive, got {tau}")
    c_values = np.asarray(c_values, dtype=float)
    if c_values.shape != (rule.m,):
        raise DomainError(f"c_values must have {rule.m} entries")
    mats = build_matrices(rule, alpha)
    X = denselin.lu_solve(mats.M_alpha, c_values[:, None] * mats.W)
    norm = denselin.inf_norm(X)
    bound = tau ** alpha * norm
    return StepsizeCheck(bound < 1.0, norm, bound)


@dataclass(frozen=True)
class ResolventEstimate:
    """Grid estimate of ``C_M = sup_{λ>=0} ||(M + λI)^-1||_∞``.

    This is a sampled supremum, so it may undershoot between grid points.
    """

    C_M: float
    argmax_lambda: float
    lambda_min: float
    lambda_max: float
    samples: int
    tail_value: float
    tail_verified: bool
    norm_at_zero: float


def estimate_resolvent_bound(
    matrices: CollocationMatrices,
    lambda_max: float | None = None,
    samples: int = 200,
) -> ResolventEstimate:
    """Sample ``||(M + λI)^-1||_∞`` at ``λ = 0`` and on a log-spaced grid.

    The grid runs from ``1e-3 ||M||`` to ``lambda_max`` (default
    ``1e6 ||M||``).  ``tail_verified`` reports whether
    ``λ ||R(λ)||`` lies in ``[0.9, 1.1]`` at ``lambda_max``.
    """
    report = spectrum(matrices.rule, matrices.alpha, matrices=matrices)
    if report.has_real_negative:
        raise CertificateError("M has a real negative eigenvalue; the resolvent is unbounded")
    M = np.asarray(matrices.M)
    m = M.shape[0]
    norm_m = denselin.inf_norm(M)
    if lambda_max is None:
        lambda_max = 1e6 * norm_m
    lambda_min = 1e-3 * norm_m
    if not lambda_max > lambda_min:
        raise DomainError("lambda_max must exceed 1e-3 ||M||")
    if samples < 2:
        raise DomainError("need at least two samples")
    grid = np.concatenate(([0.0], np.geomspace(lambda_min, lambda_max, samples)))
    eye = np.eye(m)
    norms = np.empty_like(grid)
    for i, lam in enumerate(grid):
        try:
            norms[i] = denselin.inf_norm(denselin.lu_solve(M + lam * eye, eye))
        except SingularMatrixError:
            raise DomainError(f"M + λI is numerically singular at λ = {lam:g}") from None
    k = int(np.argmax(norms))
    tail = float(grid[-1] * norms[-1])
    return ResolventEstimate(
        C_M=float(norms[k]),
        argmax_lambda=float(grid[k]),
        lambda_min=float(lambda_min),
        lambda_max=float(lambda_max),
        samples=int(samples),
        tail_value=tail,
        tail_verified=bool(0.9 <= tail <= 1.1),
        norm_at_zero=float(norms[0]),
    )


@dataclass(frozen=True)
class ScanRow:
    family: str
    m: int
    alpha: float
    real_count: int
    has_real_negative: bool
    min_real_part: float
    real_all_positive: bool

    @property
    def parity_ok(self) -> bool:
        """Odd ``m``: exactly one real eigenvalue, positive.  Even ``m``: none."""
        return self.real_count == self.m % 2 and self.real_all_positive


@dataclass(frozen=True)
class FamilySummary:
    family: str
    no_real_negative: bool
    all_real_parts_positive: bool
    some_negative_real_part: bool
    parity: bool

    def to_dict(self) -> dict:
        return {
            "no_real_negative": self.no_real_negative,
            "all_real_parts_positive": self.all_real_parts_positive,
            "some_negative_real_part": self.some_negative_real_part,
            "parity": self.parity,
        }


def _scan_one(args):
    family, m, alpha = args
    rep = spectrum(make_points(family, m), alpha)
    real_positive = bool(np.all(rep.eigenvalues[rep.is_real].real > 0.0))
    return ScanRow(
        family,
        m,
        float(alpha),
        rep.real_eigenvalue_count,
        rep.has_real_negative,
        rep.min_real_part,
        real_positive,
    )


def scan(families, ms, alphas, threads: int | None = None) -> list[ScanRow]:
    """Spectrum summaries over ``families x ms x alphas``, sorted by (family, m, alpha)."""
    tasks = [(f, int(m), float(a)) for f in families for m in ms for a in alphas]
    if threads is not None and threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_scan_one, tasks))
    else:
        rows = [_scan_one(t) for t in tasks]
    return sorted(rows, key=lambda r: (r.family, r.m, r.alpha))


def summarize_scan(rows) -> dict:
    """One :class:`FamilySummary` per family present in ``rows``."""
    out = {}
    for fam in sorted({r.family for r in rows}):
        sel = [r for r in rows if r.family == fam]
        out[fam] = FamilySummary(
            fam,
            no_real_negative=not any(r.has_real_negative for r in sel),
            all_real_parts_positive=all(r.min_real_part > 0.0 for r in sel),
            some_negative_real_part=any(r.min_real_part < 0.0 for r in sel),
            parity=all(r.parity_ok for r in sel),
        )
    return out
