"""Continuous collocation time stepping for subdiffusion and fractional ODEs.

On ``[t_{k-1}, t_k]`` the solution is ``U_{k-1} + Σ_j V_{k,j} s^j`` with
``s = (t - t_{k-1}) / τ_k``.  Each step solves for the ``m`` coefficient
blocks ``V_k`` from the equation imposed at the collocation points
``t_{k-1} + θ_ℓ τ_k``; the memory of earlier intervals enters the right-hand
side through :mod:`fraccol.history`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import denselin
from .catalog import InitialCondition, ScalarSource, Source
from .collocation import CollocationMatrices, CollocationRule, build_matrices
from .errors import CertificateError, DomainError, SingularMatrixError
from .history import HistoryCache, history_at
from .spatial import (
    Coefficient,
    EllipticCoefficients,
    SpatialGrid,
    TridiagonalMatrix,
    assemble_operator,
    coefficient,
)
from .wellposed import ode_stepsize_check, spectrum

__all__ = [
    "MAX_SYSTEM_SIZE",
    "TemporalMesh",
    "SubdiffusionProblem",
    "StepDiagnostics",
    "PiecewiseSolution",
    "StepSystem",
    "StepsizeWarning",
    "assemble_step",
    "solve",
    "evaluate",
    "caputo_derivative",
    "collocation_residual",
    "solve_fode",
]

MAX_SYSTEM_SIZE = 4000


class StepsizeWarning(UserWarning):
    """The sufficient small-step condition for a fractional ODE step fails."""


@dataclass(frozen=True)
class TemporalMesh:
    """Graded mesh ``t_k = T (k/M)^r``."""

    M: int
    T: float = 1.0
    r: float = 1.0

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise DomainError(f"M must be a positive integer, got {self.M!r}")
        if not (math.isfinite(self.T) and self.T > 0.0):
            raise DomainError(f"T must be positive, got {self.T!r}")
        if not (math.isfinite(self.r) and self.r >= 1.0):
            raise DomainError(f"grading exponent r must be >= 1, got {self.r!r}")
        object.__setattr__(self, "M", int(self.M))
        nodes = self.T * (np.arange(self.M + 1) / self.M) ** self.r
        nodes[-1] = self.T
        if np.any(np.diff(nodes) <= 0.0):
            raise DomainError("mesh nodes are not strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "_nodes", nodes)

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes

    def tau(self, k: int) -> float:
        return float(self._nodes[k] - self._nodes[k - 1])

    def collocation_times(self, k: int, rule: CollocationRule) -> np.ndarray:
        return self._nodes[k - 1] + rule.points * self.tau(k)


@dataclass(frozen=True, eq=False)
class SubdiffusionProblem:
    """``D^α u + L u = f`` on ``(xl, xr) x (0, T]`` with zero Dirichlet data."""

    alpha: float
    rule: CollocationRule
    mesh: TemporalMesh
    grid: SpatialGrid
    coeff: EllipticCoefficients = field(default_factory=EllipticCoefficients)
    source: Source = field(default_factory=Source)
    initial: InitialCondition = field(default_factory=InitialCondition)

    def __post_init__(self):
        if not (0.0 < float(self.alpha) <= 1.0):
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def exact(self):
        return self.source.exact if self.source.kind == "manufactured" else None

    def operator(self) -> TridiagonalMatrix:
        return assemble_operator(self.grid, self.coeff)

    def f(self, t: float, Lh: TridiagonalMatrix) -> np.ndarray:
        return self.source(t, self.alpha, self.grid, self.coeff, Lh)


@dataclass(frozen=True)
class StepDiagnostics:
    k: int
    tau: float
    linear_residual: float


@dataclass(eq=False)
class PiecewiseSolution:
    """Nodal values ``U`` (``(M+1, N)``) and coefficient blocks ``V`` (``(M, m, N)``)."""

    alpha: float
    rule: CollocationRule
    mesh: TemporalMesh
    U: np.ndarray
    V: np.ndarray
    diagnostics: list = field(default_factory=list)
    cache: HistoryCache = field(default_factory=HistoryCache, repr=False)

    def locate(self, t: float) -> tuple[int, float]:
        """Interval ``k`` with ``t ∈ (t_{k-1}, t_k]`` and the local ``s``; ``(0, 0)`` at ``t = 0``."""
        nodes = self.mesh.nodes
        t = float(t)
        if not (0.0 <= t <= nodes[-1]):
            raise DomainError(f"t = {t} lies outside [0, {nodes[-1]}]")
        if t == 0.0:
            return 0, 0.0
        k = int(np.searchsorted(nodes, t, side="left"))
        return k, (t - nodes[k - 1]) / (nodes[k] - nodes[k - 1])

    def local_value(self, k: int, s: float) -> np.ndarray:
        return _horner(self.U[k - 1], self.V[k - 1], s)

    def evaluate(self, t: float, node=None):
        """Solution at time ``t`` at all nodes or at ``node``."""
        k, s = self.locate(t)
        u = self.U[0] if k == 0 else self.local_value(k, s)
        return u if node is None else u[node]


def evaluate(solution: PiecewiseSolution, t: float, node=None):
    return solution.evaluate(t, node)


def _horner(u_prev, Vk, s):
    acc = Vk[-1]
    for j in range(Vk.shape[0] - 2, -1, -1):
        acc = Vk[j] + s * acc
    return u_prev + s * acc


@dataclass(frozen=True, eq=False)
class StepSystem:
    matrix: np.ndarray
    rhs: np.ndarray

    def unstack(self, x, m):
        return np.asarray(x).reshape(m, -1)


def block_matrix(mats: CollocationMatrices, tau: float, alpha: float, Lh_dense: np.ndarray) -> np.ndarray:
    """``M_alpha ⊗ I + τ^α W ⊗ L_h`` with blocks ordered by basis index."""
    n = Lh_dense.shape[0]
    return np.kron(mats.M_alpha, np.eye(n)) + tau**alpha * np.kron(mats.W, Lh_dense)


def _history_blocks(solution_like, k, t_points, cache):
    alpha, nodes, V = solution_like
    m = len(t_points)
    if k == 1 or alpha == 1.0:
        return np.zeros((m,) + V.shape[2:])
    return np.stack([history_at(nodes, V[: k - 1], alpha, k, t, cache, (k, ell)) for ell, t in enumerate(t_points, 1)])


def assemble_step(problem: SubdiffusionProblem, k: int, history, U_prev, matrices=None, Lh=None) -> StepSystem:
    """Block system of step ``k`` given ``U_{k-1}`` and the memory terms.

    ``history`` has shape ``(m, N)`` (row ``ℓ`` at ``t_k^ℓ``).  The unknown
    stacks ``V_{k,1}, ..., V_{k,m}``.
    """
    mats = matrices if matrices is not None else build_matrices(problem.rule, problem.alpha)
    Lh = Lh if Lh is not None else problem.operator()
    m, N = problem.rule.m, problem.grid.N
    history = np.asarray(history, dtype=float).reshape(m, N)
    U_prev = np.asarray(U_prev, dtype=float)
    if U_prev.shape != (N,):
        raise DomainError(f"U_prev must have shape ({N},)")
    tau = problem.mesh.tau(k)
    ta = tau**problem.alpha
    B = block_matrix(mats, tau, problem.alpha, Lh.to_dense())
    f = np.stack([problem.f(t, Lh) for t in problem.mesh.collocation_times(k, problem.rule)])
    rhs = ta * (f - Lh.matvec(U_prev)[None, :] - history)
    return StepSystem(B, rhs.ravel())


class _Factorizations:
    # uniform meshes reuse one factorization for every step
    def __init__(self, build):
        self._build = build
        self._store = {}

    def get(self, k, tau):
        key = float(tau)
        if key not in self._store:
            B = self._build(tau)
            try:
                self._store[key] = (B, denselin.lu_factor(B))
            except SingularMatrixError:
                raise SingularMatrixError(f"step system of interval {k} is singular", index=k) from None
        return self._store[key]


def _linear_residual(B, x, b):
    r = denselin.inf_norm(B @ x - b)
    scale = denselin.inf_norm(B) * denselin.inf_norm(x) + denselin.inf_norm(b)
    return r / scale if scale > 0.0 else 0.0


def _check_size(m, N):
    if m * N > MAX_SYSTEM_SIZE:
        raise DomainError(f"step system of size m*N = {m * N} exceeds the cap {MAX_SYSTEM_SIZE}")


def certify(rule: CollocationRule, alpha: float):
    """Refuse rules whose ``M`` has a real negative eigenvalue."""
    report = spectrum(rule, alpha)
    if report.has_real_negative:
        raise CertificateError(f"M has a real negative eigenvalue for m={rule.m}, alpha={alpha}")
    return report


def solve(problem: SubdiffusionProblem) -> PiecewiseSolution:
    """March ``k = 1..M`` and return the piecewise polynomial solution."""
    rule, mesh, alpha = problem.rule, problem.mesh, problem.alpha
    m, N = rule.m, problem.grid.N
    _check_size(m, N)
    certify(rule, alpha)
    mats = build_matrices(rule, alpha)
    Lh = problem.operator()
    Ld = Lh.to_dense()
    factors = _Factorizations(lambda tau: block_matrix(mats, tau, alpha, Ld))

    U = np.empty((mesh.M + 1, N))
    V = np.zeros((mesh.M, m, N))
    U[0] = problem.initial(problem.grid)
    sol = PiecewiseSolution(alpha, rule, mesh, U, V)
    for k in range(1, mesh.M + 1):
        tau = mesh.tau(k)
        times = mesh.collocation_times(k, rule)
        hist = _history_blocks((alpha, mesh.nodes, V), k, times, sol.cache)
        f = np.stack([problem.f(t, Lh) for t in times])
        rhs = (tau**alpha * (f - Lh.matvec(U[k - 1])[None, :] - hist)).ravel()
        B, lu = factors.get(k, tau)
        x = lu.solve(rhs)
        V[k - 1] = x.reshape(m, N)
        U[k] = _horner(U[k - 1], V[k - 1], 1.0)
        sol.diagnostics.append(StepDiagnostics(k, tau, _linear_residual(B, x, rhs)))
    return sol


def caputo_derivative(solution: PiecewiseSolution, k: int, s: float) -> np.ndarray:
    """``D^α U`` at ``t_{k-1} + s τ_k`` for ``0 < s <= 1``."""
    alpha, rule = solution.alpha, solution.rule
    mesh = solution.mesh
    tau = mesh.tau(k)
    m = rule.m
    j = np.arange(1, m + 1)
    if alpha == 1.0:
        local = (j * s ** (j - 1.0)) @ solution.V[k - 1] / tau
    else:
        c = build_matrices(rule, alpha).D2
        local = (c * s ** (j - alpha)) @ solution.V[k - 1] * tau ** (-alpha)
    t = mesh.nodes[k - 1] + s * tau
    if k == 1 or alpha == 1.0:
        return local
    on_grid = any(s == th for th in rule.theta)
    key = (k, rule.theta.index(s) + 1) if on_grid else None
    return local + history_at(mesh.nodes, solution.V[: k - 1], alpha, k, t, solution.cache, key)


def collocation_residual(solution: PiecewiseSolution, problem: SubdiffusionProblem, s=None) -> float:
    """``max |D^α U + L_h U - f|`` over intervals, nodes and local points ``s``.

    ``s`` defaults to the collocation points, where the residual vanishes up
    to rounding.
    """
    Lh = problem.operator()
    points = problem.rule.theta if s is None else np.atleast_1d(s)
    worst = 0.0
    for k in range(1, problem.mesh.M + 1):
        for sv in points:
            sv = float(sv)
            t = problem.mesh.nodes[k - 1] + sv * problem.mesh.tau(k)
            u = solution.local_value(k, sv)
            r = caputo_derivative(solution, k, sv) + Lh.matvec(u) - problem.f(t, Lh)
            worst = max(worst, float(np.max(np.abs(r))))
    return worst


def source_scale(problem: SubdiffusionProblem) -> float:
    """``max(1, ||f||_∞)`` over all collocation times."""
    Lh = problem.operator()
    worst = 1.0
    for k in range(1, problem.mesh.M + 1):
        for t in problem.mesh.collocation_times(k, problem.rule):
            worst = max(worst, float(np.max(np.abs(problem.f(t, Lh)))))
    return worst


def solve_fode(
    alpha: float,
    rule: CollocationRule,
    mesh: TemporalMesh,
    c=0.0,
    f: ScalarSource | None = None,
    u0: float = 0.0,
) -> PiecewiseSolution:
    """Fractional ODE ``D^α u + ĉ(t) u = f(t)``, ``u(0) = u0``.

    Each step solves ``(M_alpha + τ^α diag(ĉ(t_k^ℓ)) W) V = τ^α (f - ĉ U_{k-1} - hist)``.
    A :class:`StepsizeWarning` is issued for steps where the sufficient
    solvability bound fails.  The result has ``N = 1``.
    """
    if not (0.0 < float(alpha) <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha!r}")
    alpha = float(alpha)
    c = c if isinstance(c, Coefficient) else coefficient(c)
    f = f if f is not None else ScalarSource()
    mats = build_matrices(rule, alpha)
    m = rule.m
    U = np.empty((mesh.M + 1, 1))
    V = np.zeros((mesh.M, m, 1))
    U[0] = float(u0)
    sol = PiecewiseSolution(alpha, rule, mesh, U, V)
    for k in range(1, mesh.M + 1):
        tau = mesh.tau(k)
        times = mesh.collocation_times(k, rule)
        cv = np.asarray(c(times), dtype=float)
        check = ode_stepsize_check(rule, alpha, tau, cv)
        if not check.passed:
            warnings.warn(
                f"step {k}: tau^alpha ||(D1 W D2)^-1 D_c W|| = {check.bound:.6g} >= 1",
                StepsizeWarning,
                stacklevel=2,
            )
        hist = _history_blocks((alpha, mesh.nodes, V), k, times, sol.cache)[:, 0]
        fv = np.array([f(t, alpha, c) for t in times])
        B = mats.M_alpha + tau**alpha * cv[:, None] * mats.W
        rhs = tau**alpha * (fv - cv * U[k - 1, 0] - hist)
        try:
            x = denselin.lu_solve(B, rhs)
        except SingularMatrixError:
            raise SingularMatrixError(f"step matrix of interval {k} is singular", index=k) from None
        V[k - 1, :, 0] = x
        U[k] = _horner(U[k - 1], V[k - 1], 1.0)
        sol.diagnostics.append(StepDiagnostics(k, tau, _linear_residual(B, x, rhs)))
    return sol
