"""Memory weights of the Caputo derivative for piecewise polynomials.

For a past interval ``[t_{j-1}, t_j]`` and an evaluation time ``t*`` beyond
it, the contribution of ``s^i`` (local variable ``s``) involves

    I_i(A, α) = ∫_0^1 u^i (A - u)^-α du,    A = (t* - t_{j-1}) / τ_j >= 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError
from .specfun import gamma

__all__ = [
    "A_SWITCH",
    "HistoryWeightTable",
    "history_weights",
    "history_weights_array",
    "history_weights_oracle",
    "HistoryCache",
    "history_at",
    "caputo_history_term",
]

# Forward recurrence below A_SWITCH, power series in 1/A above.
A_SWITCH = 1.5
_SERIES_RTOL = 1e-17


@dataclass(frozen=True)
class HistoryWeightTable:
    alpha: float
    A: float
    values: np.ndarray = field(repr=False)

    def __getitem__(self, i):
        return self.values[i]

    def __len__(self):
        return len(self.values)


def _check(A, alpha):
    alpha = float(alpha)
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha!r}")
    A = np.asarray(A, dtype=float)
    if np.any(~np.isfinite(A)) or np.any(A < 1.0):
        raise DomainError("A must be finite and >= 1")
    if alpha == 1.0 and np.any(A == 1.0):
        raise DomainError("I_i(1, α) diverges at α = 1")
    return A, alpha


def history_weights(i_max: int, A: float, alpha: float, method: str = "auto") -> HistoryWeightTable:
    """``I_0 .. I_{i_max}`` at a single ``A``.

    ``method`` is ``"auto"``, ``"recurrence"`` or ``"series"``; the last two
    force a branch (the series requires ``A > 1``).
    """
    values = history_weights_array(i_max, np.array([A]), alpha, method)[:, 0]
    return HistoryWeightTable(float(alpha), float(A), values)


def history_weights_array(i_max: int, A, alpha: float, method: str = "auto") -> np.ndarray:
    """Vectorized weights, shape ``(i_max + 1, len(A))``."""
    if int(i_max) != i_max or i_max < 0:
        raise DomainError(f"i_max must be a non-negative integer, got {i_max!r}")
    A, alpha = _check(np.atleast_1d(A), alpha)
    out = np.empty((int(i_max) + 1, A.size))
    if method == "auto":
        low = A <= A_SWITCH
    elif method == "recurrence":
        low = np.ones(A.shape, dtype=bool)
    elif method == "series":
        if np.any(A == 1.0):
            raise DomainError("the series branch needs A > 1")
        low = np.zeros(A.shape, dtype=bool)
    else:
        raise DomainError(f"unknown method {method!r}")
    if low.any():
        out[:, low] = _recurrence(int(i_max), A[low], alpha)
    if (~low).any():
        out[:, ~low] = _series(int(i_max), A[~low], alpha)
    return out


def _recurrence(i_max, A, alpha):
    out = np.empty((i_max + 1, A.size))
    beta = 1.0 - alpha
    Am1 = A - 1.0
    with np.errstate(divide="ignore"):
        tail = np.where(Am1 > 0.0, Am1 ** beta, 0.0) if beta > 0.0 else np.ones_like(A)
        if beta > 0.0:
            # A^β - (A-1)^β without cancellation
            pos = Am1 > 0.0
            diff = np.where(pos, tail * np.expm1(beta * np.log(A / np.where(pos, Am1, 1.0))), A ** beta)
            out[0] = diff / beta
        else:
            out[0] = np.log(A / Am1)
    for i in range(1, i_max + 1):
        out[i] = (i * A * out[i - 1] - tail) / (i + beta)
    return out


def _series(i_max, A, alpha):
    # I_i = A^-α Σ_n (α)_n / (n! A^n (i+n+1)); terms are below A^-n.
    n_terms = int(math.ceil(math.log(_SERIES_RTOL) / -math.log(A.min()))) + 2
    n = np.arange(n_terms)
    poch = np.ones(n_terms)
    poch[1:] = np.cumprod((alpha + n[:-1]) / (n[1:]))
    geo = np.exp(-np.outer(n, np.log(A)))  # (n_terms, nA)
    coef = poch[:, None] * geo
    i = np.arange(i_max + 1)
    denom = 1.0 / (i[:, None] + n[None, :] + 1.0)  # (i, n)
    # sum smallest terms first
    out = (denom[:, ::-1] @ coef[::-1]) * A[None, :] ** (-alpha)
    return out


def history_weights_oracle(
    i: int,
    A: float,
    alpha: float,
    tol: float = 1e-12,
    max_depth: int = 60,
    max_pieces: int = 200_000,
) -> float:
    """Reference value of ``I_i(A, α)`` by adaptive quadrature.

    Works in the distance ``w = 1 - u`` to the singular end, so the kernel
    ``(A - 1 + w)^-α`` is evaluated without cancellation.  ``[0, 1]`` is cut
    geometrically towards ``w = 0`` (pieces ``[2^-(k+1), 2^-k]``) and each
    piece is integrated by adaptive interval halving with 10-point
    Gauss-Legendre rules, accepting a piece once its error is small relative
    to itself or to its length share of a lower bound on the integral.  The
    last sliver ``[0, ε]`` uses the exact kernel integral with the
    ``(1 - w)^i`` factor bounded.  Intended for tests only.
    """
    A, alpha = _check(A, alpha)
    delta = float(A) - 1.0
    x, w = np.polynomial.legendre.leggauss(10)

    def f(v):
        return (1.0 - v) ** i * (delta + v) ** (-alpha)

    def gl(a, b):
        h = 0.5 * (b - a)
        return h * float(np.dot(w, f(a + h * (x + 1.0))))

    # the kernel is >= A^-α, so the integral is >= A^-α / (i + 1)
    floor = 0.1 * tol * float(A) ** (-alpha) / (i + 1)
    pieces = 0

    def adapt(a, b, whole, depth):
        nonlocal pieces
        pieces += 1
        if pieces > max_pieces:
            raise ConvergenceError("oracle exceeded its subdivision cap")
        mid = 0.5 * (a + b)
        left, right = gl(a, mid), gl(mid, b)
        # relative test, or an absolute share of the global lower bound
        if abs(left + right - whole) <= max(0.1 * tol * abs(left + right), floor * (b - a)):
            return left + right
        if depth >= max_depth:
            raise ConvergenceError("oracle failed to reach tolerance")
        return adapt(a, mid, left, depth + 1) + adapt(mid, b, right, depth + 1)

    parts = []
    hi = 1.0
    for _ in range(1000):
        lo = 0.5 * hi
        parts.append(adapt(lo, hi, gl(lo, hi), 0))
        hi = lo
        total = math.fsum(parts)
        kernel_tail = _kernel_integral(delta, alpha, hi)
        # on [0, ε]: (1-ε)^i <= (1-w)^i <= 1
        low_factor = (1.0 - hi) ** i
        err = 0.5 * kernel_tail * (1.0 - low_factor)
        if err <= 0.1 * tol * total:
            return math.fsum(parts + [0.5 * kernel_tail * (1.0 + low_factor)])
    raise ConvergenceError("oracle tail did not shrink below tolerance")


def _kernel_integral(delta, alpha, eps):
    """∫_0^ε (δ + w)^-α dw."""
    if alpha == 1.0:
        return math.log1p(eps / delta)
    beta = 1.0 - alpha
    if delta == 0.0:
        return eps ** beta / beta
    return delta ** beta * math.expm1(beta * math.log1p(eps / delta)) / beta


class HistoryCache:
    """Per-solve cache of scaled memory weights keyed by ``(k, ell)``.

    Each entry has shape ``(k - 1, m)`` and holds
    ``τ_j^-α · i · I_{i-1}(A_j) / Γ(1-α)`` for past intervals ``j`` and
    ``i = 1..m``.
    """

    def __init__(self):
        self._store = {}

    def get(self, key):
        return self._store.get(key)

    def put(self, key, value):
        self._store[key] = value

    def __len__(self):
        return len(self._store)


def _memory_weights(nodes, m, alpha, k, t):
    tau = np.diff(nodes[:k])  # past intervals 1..k-1
    A = (t - nodes[: k - 1]) / tau
    # roundoff may put A a hair below 1 at the interval endpoint
    A = np.maximum(A, 1.0)
    I = history_weights_array(m - 1, A, alpha)  # (m, k-1)
    i = np.arange(1, m + 1)
    return (tau ** (-alpha))[:, None] * (i[None, :] * I.T) / gamma(1.0 - alpha)


def history_at(nodes, blocks, alpha: float, k: int, t: float, cache=None, key=None) -> np.ndarray:
    """Memory part of the Caputo derivative at time ``t`` in interval ``k``.

    ``nodes`` are the mesh nodes ``t_0..t_M``; ``blocks[j-1]`` is the
    ``(m, N)`` coefficient block of interval ``j``.  Intervals are numbered
    from 1, so ``k = 1`` has no history.
    """
    blocks_past = blocks[: k - 1]
    if k < 1:
        raise DomainError("interval index k starts at 1")
    if len(blocks_past) < k - 1:
        raise DomainError(f"coefficient blocks for intervals 1..{k - 1} are required")
    if k == 1:
        shape = np.shape(blocks[0])[1:] if len(blocks) else ()
        return np.zeros(shape)
    V = np.asarray(blocks_past)  # (k-1, m, N...)
    m = V.shape[1]
    if alpha == 1.0:
        return np.zeros(V.shape[2:])
    G = cache.get(key) if cache is not None and key is not None else None
    if G is None:
        G = _memory_weights(np.asarray(nodes, dtype=float), m, alpha, k, float(t))
        if cache is not None and key is not None:
            cache.put(key, G)
    return np.tensordot(G, V, axes=([0, 1], [0, 1]))


def caputo_history_term(mesh, blocks, rule, alpha: float, k: int, ell: int, cache=None) -> np.ndarray:
    """Memory term at the collocation point ``t_k^ell`` (``ell = 1..m``)."""
    if not 1 <= ell <= rule.m:
        raise DomainError(f"ell must lie in 1..{rule.m}")
    nodes = mesh.nodes
    t = nodes[k - 1] + rule.theta[ell - 1] * (nodes[k] - nodes[k - 1])
    return history_at(nodes, blocks, alpha, k, t, cache=cache, key=(k, ell))
