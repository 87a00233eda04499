"""Semilinear subdiffusion ``D^α u + L u = f(x, t, u)`` by fixed-point steps.

Each step freezes the nonlinearity at the current iterate, solves the linear
collocation system, and repeats.  The reaction ``c`` of ``L`` is moved into
the nonlinearity, so the linear solves use ``L`` with ``c = 0`` and the
Lipschitz constant grows by ``max |c|``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .catalog import SeparableExact, Source
from .collocation import build_matrices
from .errors import ConvergenceError, DomainError
from .spatial import Coefficient, EllipticCoefficients, SpatialGrid, assemble_operator
from .stepper import (
    PiecewiseSolution,
    StepDiagnostics,
    SubdiffusionProblem,
    _check_size,
    _Factorizations,
    _history_blocks,
    _horner,
    _linear_residual,
    block_matrix,
    caputo_derivative,
    certify,
)
from .wellposed import ResolventEstimate, estimate_resolvent_bound

__all__ = [
    "SemilinearSource",
    "SemilinearProblem",
    "IterationReport",
    "ContractionWarning",
    "contraction_check",
    "step_semilinear",
    "solve_semilinear",
    "semilinear_residual",
]

DEFAULT_TOL = 1e-11
DEFAULT_MAX_ITER = 100


class ContractionWarning(UserWarning):
    """``τ^α μ C_M >= 1``: the fixed-point map is not known to contract."""


@dataclass(frozen=True)
class SemilinearSource:
    """``f(x, t, u) = amplitude · sin(u) + g(x, t)`` with Lipschitz bound ``mu``.

    ``mu`` defaults to ``|amplitude|`` and may not be smaller.  When ``g`` is
    manufactured, it is compensated so that its exact solution also solves
    the semilinear problem.
    """

    amplitude: float = 0.0
    g: Source = field(default_factory=Source)
    mu: float | None = None

    def __post_init__(self):
        amp = float(self.amplitude)
        if not math.isfinite(amp):
            raise DomainError("amplitude must be finite")
        mu = abs(amp) if self.mu is None else float(self.mu)
        if not (math.isfinite(mu) and mu >= abs(amp)):
            raise DomainError(f"mu = {mu} does not bound |df/du| = {abs(amp)}")
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "mu", mu)

    def g_values(self, t, alpha, grid, coeff, Lh_full):
        g = self.g(t, alpha, grid, coeff, Lh_full)
        if self.g.kind == "manufactured" and self.amplitude != 0.0:
            g = g - self.amplitude * np.sin(self.g.exact.value(grid, t))
        return g


@dataclass(frozen=True, eq=False)
class SemilinearProblem:
    alpha: float
    rule: object
    mesh: object
    grid: SpatialGrid
    coeff: EllipticCoefficients = field(default_factory=EllipticCoefficients)
    source: SemilinearSource = field(default_factory=SemilinearSource)
    initial: object = None

    def linear_part(self) -> SubdiffusionProblem:
        """Same problem with ``c = 0`` and a zero source (the reaction is moved to ``f``)."""
        kw = {} if self.initial is None else {"initial": self.initial}
        return SubdiffusionProblem(
            self.alpha,
            self.rule,
            self.mesh,
            self.grid,
            replace(self.coeff, c=Coefficient("constant", (0.0,))),
            **kw,
        )

    @property
    def exact(self) -> SeparableExact | None:
        g = self.source.g
        return g.exact if g.kind == "manufactured" else None

    @property
    def mu(self) -> float:
        """Lipschitz bound after the reaction is folded in."""
        return self.source.mu + float(np.max(np.abs(self.coeff.c(self.grid.x))))

    def nonlinearity(self, t, u, Lh_full, c_nodes):
        g = self.source.g_values(t, self.alpha, self.grid, self.coeff, Lh_full)
        return self.source.amplitude * np.sin(u) + g - c_nodes * u


@dataclass
class IterationReport:
    k: int
    iterations: int
    updates: list
    converged: bool
    bound: float
    check_failed: bool

    @property
    def final_update(self) -> float:
        return self.updates[-1] if self.updates else 0.0


def contraction_check(rule, alpha: float, tau: float, mu: float, resolvent: ResolventEstimate) -> bool:
    """``τ^α μ C_M < 1``."""
    if not tau > 0.0 or not mu >= 0.0:
        raise DomainError("tau must be positive and mu non-negative")
    return bool(tau**alpha * mu * resolvent.C_M < 1.0)


class _Context:
    def __init__(self, problem: SemilinearProblem):
        self.problem = problem
        lin = problem.linear_part()
        self.linear = lin
        self.mats = build_matrices(problem.rule, problem.alpha)
        self.L0 = lin.operator()
        self.Lfull = assemble_operator(problem.grid, problem.coeff)
        self.c_nodes = problem.coeff.c(problem.grid.x)
        Ld = self.L0.to_dense()
        self.factors = _Factorizations(lambda tau: block_matrix(self.mats, tau, problem.alpha, Ld))
        self.resolvent = estimate_resolvent_bound(self.mats)


def step_semilinear(
    problem: SemilinearProblem,
    k: int,
    solution: PiecewiseSolution,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    _ctx: _Context | None = None,
) -> IterationReport:
    """Fill ``solution.V[k-1]`` and ``solution.U[k]`` by fixed-point iteration.

    Starts from ``U_{k-1}`` at every collocation point and stops once the
    max-norm change of the collocation values is at most ``tol``.
    """
    if not tol > 0.0:
        raise DomainError("tol must be positive")
    ctx = _ctx if _ctx is not None else _Context(problem)
    alpha, rule, mesh = problem.alpha, problem.rule, problem.mesh
    m, N = rule.m, problem.grid.N
    tau = mesh.tau(k)
    ta = tau**alpha
    times = mesh.collocation_times(k, rule)
    U_prev = solution.U[k - 1]
    hist = _history_blocks((alpha, mesh.nodes, solution.V), k, times, solution.cache)
    LU_prev = ctx.L0.matvec(U_prev)[None, :]
    B, lu = ctx.factors.get(k, tau)
    bound = ta * problem.mu * ctx.resolvent.C_M
    check_failed = not contraction_check(rule, alpha, tau, problem.mu, ctx.resolvent)

    Ucol = np.tile(U_prev, (m, 1))
    updates = []
    x = None
    for _ in range(max_iter):
        f = np.stack([problem.nonlinearity(t, Ucol[ell], ctx.Lfull, ctx.c_nodes) for ell, t in enumerate(times)])
        rhs = (ta * (f - LU_prev - hist)).ravel()
        x = lu.solve(rhs)
        Vk = x.reshape(m, N)
        Unew = U_prev[None, :] + ctx.mats.W @ Vk
        upd = float(np.max(np.abs(Unew - Ucol)))
        updates.append(upd)
        Ucol = Unew
        solution.V[k - 1] = Vk
        if upd <= tol:
            break
    converged = updates[-1] <= tol
    solution.U[k] = _horner(U_prev, solution.V[k - 1], 1.0)
    solution.diagnostics.append(StepDiagnostics(k, tau, _linear_residual(B, x, rhs)))
    report = IterationReport(k, len(updates), updates, converged, bound, check_failed)
    if not converged:
        raise ConvergenceError(
            f"fixed-point iteration of step {k} did not converge in {max_iter} iterations "
            f"(last update {updates[-1]:.3g}, tau^alpha mu C_M = {bound:.3g})",
            index=k,
            report=report,
        )
    return report


def solve_semilinear(
    problem: SemilinearProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[PiecewiseSolution, list]:
    """March all steps; returns the solution and one :class:`IterationReport` per step."""
    m, N = problem.rule.m, problem.grid.N
    _check_size(m, N)
    certify(problem.rule, problem.alpha)
    ctx = _Context(problem)
    mesh = problem.mesh
    U = np.empty((mesh.M + 1, N))
    V = np.zeros((mesh.M, m, N))
    U[0] = ctx.linear.initial(problem.grid)
    sol = PiecewiseSolution(problem.alpha, problem.rule, mesh, U, V)
    reports = []
    warned = False
    for k in range(1, mesh.M + 1):
        rep = step_semilinear(problem, k, sol, tol, max_iter, _ctx=ctx)
        if rep.check_failed and not warned:
            warnings.warn(
                f"tau^alpha mu C_M = {rep.bound:.4g} >= 1 at step {k}; contraction is not guaranteed",
                ContractionWarning,
                stacklevel=2,
            )
            warned = True
        reports.append(rep)
    return sol, reports


def semilinear_residual(solution: PiecewiseSolution, problem: SemilinearProblem) -> float:
    """Collocation residual with ``f(·, ·, U)`` evaluated at the computed ``U``."""
    L0 = problem.linear_part().operator()
    Lfull = assemble_operator(problem.grid, problem.coeff)
    c_nodes = problem.coeff.c(problem.grid.x)
    worst = 0.0
    for k in range(1, problem.mesh.M + 1):
        times = problem.mesh.collocation_times(k, problem.rule)
        for s, t in zip(problem.rule.theta, times):
            u = solution.local_value(k, s)
            r = caputo_derivative(solution, k, s) + L0.matvec(u) - problem.nonlinearity(t, u, Lfull, c_nodes)
            worst = max(worst, float(np.max(np.abs(r))))
    return worst
