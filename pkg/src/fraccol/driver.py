"""End-to-end runs from a parsed configuration, and the tabular outputs."""

from __future__ import annotations

import numpy as np

from .config import ProblemConfig
from .semilinear import contraction_check, semilinear_residual, solve_semilinear
from .stepper import PiecewiseSolution, certify, collocation_residual, solve, source_scale
from .wellposed import SpectrumReport, estimate_resolvent_bound
from .collocation import build_matrices

__all__ = ["RunResult", "run_problem", "solution_rows", "spectrum_rows", "format_csv"]


class RunResult:
    def __init__(self, solution: PiecewiseSolution, report: dict):
        self.solution = solution
        self.report = report


def certificate_summary(rep: SpectrumReport) -> dict:
    return {
        "family": rep.family,
        "m": rep.m,
        "alpha": rep.alpha,
        "has_real_negative": rep.has_real_negative,
        "real_eigenvalue_count": rep.real_eigenvalue_count,
        "min_real_part": rep.min_real_part,
    }


def _max_error(solution, problem):
    exact = problem.exact
    if exact is None:
        return None
    nodes = problem.mesh.nodes
    return float(max(np.max(np.abs(solution.U[k] - exact.value(problem.grid, nodes[k]))) for k in range(len(nodes))))


def run_problem(cfg: ProblemConfig) -> RunResult:
    """Solve the configured problem and collect the report.

    Raises :class:`~fraccol.errors.CertificateError` or
    :class:`~fraccol.errors.SingularMatrixError` on failure.
    """
    problem = cfg.problem
    cert = certify(problem.rule, problem.alpha)
    report = {"certificate": certificate_summary(cert)}
    if cfg.semilinear:
        sol, steps = solve_semilinear(problem, cfg.tol, cfg.max_iter)
        resolvent = estimate_resolvent_bound(build_matrices(problem.rule, problem.alpha))
        taus = [problem.mesh.tau(k) for k in range(1, problem.mesh.M + 1)]
        report["residual_max"] = semilinear_residual(sol, problem)
        report["iterations"] = [r.iterations for r in steps]
        report["converged"] = all(r.converged for r in steps)
        report["contraction_check"] = all(
            contraction_check(problem.rule, problem.alpha, t, problem.mu, resolvent) for t in taus
        )
        report["contraction_bound"] = max(r.bound for r in steps)
        report["C_M"] = resolvent.C_M
        report["mu"] = problem.mu
    else:
        sol = solve(problem)
        report["residual_max"] = collocation_residual(sol, problem)
        report["residual_scale"] = source_scale(problem)
    report["max_linear_residual"] = max(d.linear_residual for d in sol.diagnostics)
    err = _max_error(sol, problem)
    if err is not None:
        report["max_error"] = err
    return RunResult(sol, report)


def solution_rows(solution: PiecewiseSolution, grid):
    x = grid.x
    for k, t in enumerate(solution.mesh.nodes):
        for i in range(grid.N):
            yield (float(t), float(x[i]), float(solution.U[k, i]))


def spectrum_rows(rep: SpectrumReport):
    neg = rep.is_real_negative
    for i, lam in enumerate(rep.eigenvalues):
        yield (rep.family, rep.m, rep.alpha, i, lam.real, lam.imag, bool(rep.is_real[i]), bool(neg[i]))


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % (float(v) + 0.0)
    return str(v)


def format_csv(header, rows) -> str:
    """CSV text with 17 significant digits and ``\\n`` line endings."""
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"
