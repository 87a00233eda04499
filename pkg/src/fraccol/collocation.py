"""Collocation point families and the per-step collocation matrices.

On the reference interval ``[0, 1]`` a collocation solution is
``U(s) = sum_j v_j s^j`` (``j = 1..m``, so ``U(0) = 0``).  With points
``0 < θ_1 < ... < θ_m = 1`` the matrices are

* ``W[l, j] = θ_l^j``                      (values at the points),
* ``D1 = diag(θ_l^-α)``, ``D2 = diag(c_j)`` (Caputo power rule),
* ``M_alpha = D1 W D2``                     (Caputo derivative at the points),
* ``M = M_alpha W^-1``                      (nodal values -> nodal derivative).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import roots_jacobi

from . import denselin
from .errors import DomainError, SingularMatrixError
from .specfun import caputo_power_coefficients, gamma

__all__ = [
    "FAMILIES",
    "CollocationRule",
    "CollocationMatrices",
    "make_points",
    "rule_from_points",
    "parse_points",
    "gauss_lobatto_nodes",
    "build_matrices",
    "nodal_caputo_matrix",
    "monomial_caputo_matrix",
    "vandermonde_det",
    "generalized_vandermonde_det",
    "generalized_vandermonde_dets",
]

FAMILIES = ("chebyshev", "equidistant", "lobatto")


@dataclass(frozen=True)
class CollocationRule:
    """Normalized collocation points ``0 < θ_1 < ... < θ_m = 1``."""

    theta: tuple[float, ...]
    family: str = "custom"

    def __post_init__(self):
        theta = tuple(float(t) for t in self.theta)
        object.__setattr__(self, "theta", theta)
        if len(theta) == 0:
            raise DomainError("a collocation rule needs at least one point")
        if not all(math.isfinite(t) for t in theta):
            raise DomainError("collocation points must be finite")
        if theta[0] <= 0.0:
            raise DomainError(f"collocation points must be positive, got θ_1 = {theta[0]}")
        if any(b <= a for a, b in zip(theta, theta[1:])):
            raise DomainError("collocation points must be strictly increasing")
        if theta[-1] != 1.0:
            raise DomainError(f"the last collocation point must be exactly 1, got {theta[-1]!r}")
        if self.family not in FAMILIES + ("custom",):
            raise DomainError(f"unknown point family {self.family!r}")

    @property
    def m(self) -> int:
        return len(self.theta)

    @property
    def points(self) -> np.ndarray:
        return np.array(self.theta)


@dataclass(frozen=True, eq=False)
class CollocationMatrices:
    """Matrices of the collocation step for a rule and fractional order."""

    rule: CollocationRule
    alpha: float
    W: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    M_alpha: np.ndarray
    M: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.rule.m


def gauss_lobatto_nodes(n: int, tol: float = 1e-14, max_iter: int = 100) -> np.ndarray:
    """The ``n + 1`` Gauss-Lobatto-Legendre nodes on ``[-1, 1]``, ascending.

    Interior nodes are the roots of ``P_n'``, found by Newton iteration from
    Chebyshev-Gauss-Lobatto initial guesses.
    """
    if n < 1:
        raise DomainError("need n >= 1")
    x = -np.cos(np.pi * np.arange(1, n) / n)
    for _ in range(max_iter):
        p, dp = _legendre_and_derivative(n, x)
        d2p = (2.0 * x * dp - n * (n + 1) * p) / (1.0 - x * x)
        dx = dp / d2p
        x = x - dx
        if x.size == 0 or np.max(np.abs(dx)) <= tol:
            break
    else:
        raise DomainError(f"Lobatto node iteration did not converge for n={n}")
    nodes = np.concatenate(([-1.0], np.sort(x), [1.0]))
    # enforce exact symmetry about 0
    return 0.5 * (nodes - nodes[::-1])


def _legendre_and_derivative(n, x):
    p_prev, p = np.ones_like(x), x.copy()
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def make_points(family: str, m: int) -> CollocationRule:
    """Collocation points of a named family.

    ``chebyshev``
        ``θ_l = (cos(π(m-l)/m) + 1)/2``: Chebyshev-Lobatto points with the
        left endpoint dropped.
    ``equidistant``
        ``θ_l = l/m``.
    ``lobatto``
        The ``m + 1`` Gauss-Lobatto-Legendre nodes mapped to ``[0, 1]`` with
        the node at 0 dropped.
    """
    if int(m) != m or m < 1:
        raise DomainError(f"m must be a positive integer, got {m!r}")
    m = int(m)
    if family == "chebyshev":
        ell = np.arange(1, m + 1)
        theta = (np.cos(np.pi * (m - ell) / m) + 1.0) / 2.0
    elif family == "equidistant":
        theta = np.arange(1, m + 1) / m
    elif family == "lobatto":
        theta = (gauss_lobatto_nodes(m)[1:] + 1.0) / 2.0
    else:
        raise DomainError(f"unknown point family {family!r}; expected one of {FAMILIES}")
    theta[-1] = 1.0
    return CollocationRule(tuple(theta), family)


def rule_from_points(points: Sequence[float]) -> CollocationRule:
    """A ``custom`` rule from an explicit point list."""
    return CollocationRule(tuple(float(p) for p in points), "custom")


def parse_points(spec, m: int | None = None) -> CollocationRule:
    """Build a rule from a family name, a JSON array string, or a sequence."""
    if isinstance(spec, str):
        text = spec.strip()
        if text.startswith("["):
            try:
                spec = json.loads(text)
            except json.JSONDecodeError as exc:
                raise DomainError(f"invalid JSON point list: {exc}") from None
        else:
            if m is None:
                raise DomainError("m is required for a named point family")
            return make_points(text, m)
    if not isinstance(spec, (list, tuple)) or not all(
        isinstance(p, (int, float)) and not isinstance(p, bool) for p in spec
    ):
        raise DomainError("custom points must be an array of numbers")
    rule = rule_from_points(spec)
    if m is not None and rule.m != m:
        raise DomainError(f"custom point list has {rule.m} entries but m = {m}")
    return rule


def _check_alpha(alpha):
    alpha = float(alpha)
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha!r}")
    return alpha


def _barycentric_weights(x):
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    # scale each factor to avoid overflow for larger m
    diff = diff * (len(x) - 1)
    return 1.0 / np.prod(diff, axis=1)


def nodal_caputo_matrix(rule: CollocationRule, alpha: float) -> np.ndarray:
    """``M = D1 W D2 W^-1`` assembled in the Lagrange basis.

    Column ``i`` holds the Caputo derivative, at the collocation points, of
    the polynomial of degree ``m`` that vanishes at 0 and at every
    ``θ_l`` except ``θ_i`` (where it is 1).  The derivative of that
    polynomial is evaluated with barycentric interpolation and the weakly
    singular integral with Gauss-Jacobi quadrature, so ``W`` is never
    inverted.
    """
    alpha = _check_alpha(alpha)
    theta = rule.points
    m = rule.m
    x = np.concatenate(([0.0], theta))
    w = _barycentric_weights(x)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    dmat = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(dmat, 0.0)
    np.fill_diagonal(dmat, -dmat.sum(axis=1))
    if alpha == 1.0:
        return dmat[1:, 1:].copy()

    nq = m // 2 + 1
    xq, wq = roots_jacobi(nq, -alpha, 0.0)
    u = (xq + 1.0) / 2.0
    # ∫_0^1 (1-u)^-α g(u) du = 2^(α-1) Σ w_q g(u_q)
    wq = wq * 2.0 ** (alpha - 1.0) / gamma(1.0 - alpha)
    out = np.empty((m, m))
    for j, tj in enumerate(theta):
        y = tj * u
        d = y[:, None] - x[None, :]
        hit = d == 0.0
        d[hit] = 1.0
        c = w[None, :] / d
        interp = c / c.sum(axis=1, keepdims=True)
        rows = np.nonzero(hit.any(axis=1))[0]
        for r in rows:
            interp[r] = hit[r].astype(float)
        out[j] = tj ** (1.0 - alpha) * (wq @ interp @ dmat[:, 1:])
    return out


def monomial_caputo_matrix(W: np.ndarray, M_alpha: np.ndarray) -> np.ndarray:
    """``M`` from ``M W = M_alpha`` by an LU solve (``W^T M^T = M_alpha^T``).

    Backward stable but loses eigenvalue accuracy for large ``m`` because
    ``W`` is badly conditioned; kept as a cross-check.
    """
    return denselin.lu_solve(W.T, M_alpha.T).T


def build_matrices(rule: CollocationRule, alpha: float) -> CollocationMatrices:
    """Assemble ``W, D1, D2, M_alpha`` and ``M`` for ``rule`` and ``alpha``."""
    alpha = _check_alpha(alpha)
    theta = rule.points
    powers = np.arange(1, rule.m + 1)
    W = theta[:, None] ** powers[None, :]
    D1 = theta ** (-alpha)
    D2 = np.array(caputo_power_coefficients(rule.m, alpha))
    M_alpha = D1[:, None] * W * D2[None, :]
    if vandermonde_det(rule) <= 0.0:
        raise SingularMatrixError("collocation matrix W is singular")
    M = nodal_caputo_matrix(rule, alpha)
    for a in (W, M_alpha, M):
        a.setflags(write=False)
    return CollocationMatrices(rule, alpha, W, D1, D2, M_alpha, M)


def vandermonde_det(rule: CollocationRule) -> float:
    """Closed form ``det W = (Π θ_j) Π_{i<j} (θ_j - θ_i)``."""
    theta = rule.points
    det = float(np.prod(theta))
    for j in range(1, rule.m):
        det *= float(np.prod(theta[j] - theta[:j]))
    return det


def _validate_increasing_positive(v, name):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise DomainError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(v)) or v[0] <= 0.0 or np.any(np.diff(v) <= 0.0):
        raise DomainError(f"{name} must be positive and strictly increasing")
    return v


def generalized_vandermonde_det(theta: Sequence[float], beta: Sequence[float]) -> float:
    """Determinant of ``[θ_i^β_k]`` for increasing positive ``θ`` and ``β``."""
    theta = _validate_increasing_positive(theta, "theta")
    beta = _validate_increasing_positive(beta, "beta")
    if theta.size != beta.size:
        raise DomainError("theta and beta must have the same length")
    return float(generalized_vandermonde_dets(theta, beta[None, :])[0])


def generalized_vandermonde_dets(theta, betas, chunk: int = 4096) -> np.ndarray:
    """Batched determinants of ``[θ_i^β_k]``, one per row of ``betas``.

    Uses column-scaled Gaussian elimination with partial pivoting in extended
    precision (``np.longdouble``).  No ordering checks are made on ``betas``.
    """
    theta = np.asarray(theta, dtype=float)
    betas = np.atleast_2d(np.asarray(betas, dtype=float))
    out = np.empty(betas.shape[0])
    for start in range(0, betas.shape[0], chunk):
        block = betas[start:start + chunk]
        out[start:start + block.shape[0]] = _batched_det(theta, block)
    return out


def _batched_det(theta, betas):
    log_t = np.log(theta.astype(np.longdouble))
    a = np.exp(log_t[None, :, None] * betas.astype(np.longdouble)[:, None, :])
    n, m, _ = a.shape
    scale = np.abs(a).max(axis=1)
    a /= scale[:, None, :]
    det = np.prod(scale, axis=1)
    rows = np.arange(n)
    for k in range(m):
        p = k + np.argmax(np.abs(a[:, k:, k]), axis=1)
        swap = p != k
        det[swap] = -det[swap]
        row_k = a[rows, k].copy()
        a[rows, k] = a[rows, p]
        a[rows, p] = row_k
        pivot = a[:, k, k]
        det *= pivot
        if k < m - 1:
            mult = a[:, k + 1:, k] / np.where(pivot == 0, 1, pivot)[:, None]
            a[:, k + 1:, k:] -= mult[:, :, None] * a[:, k, None, k:]
    return det.astype(float)
