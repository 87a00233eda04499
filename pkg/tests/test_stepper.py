import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fraccol.catalog import InitialCondition, ScalarSource, SeparableExact, Source, TimeProfile
from fraccol.collocation import FAMILIES, build_matrices, make_points, rule_from_points
from fraccol.errors import CertificateError, DomainError, SingularMatrixError
from fraccol.spatial import EllipticCoefficients, SpatialGrid, assemble_operator
from fraccol import stepper
from fraccol.stepper import (
    StepsizeWarning,
    SubdiffusionProblem,
    TemporalMesh,
    assemble_step,
    collocation_residual,
    solve,
    solve_fode,
    source_scale,
)


def manufactured_problem(family, m, alpha, terms, M=4, N=20, r=1.0, coeff=None, operator="discrete"):
    ex = SeparableExact(TimeProfile(terms))
    return SubdiffusionProblem(
        alpha,
        make_points(family, m),
        TemporalMesh(M, 1.0, r),
        SpatialGrid(N),
        coeff or EllipticCoefficients(),
        Source("manufactured", exact=ex, operator=operator),
        InitialCondition("exact", exact=ex),
    )


def nodal_error(sol, problem):
    ex = problem.exact
    return max(np.abs(sol.U[k] - ex.value(problem.grid, t)).max() for k, t in enumerate(problem.mesh.nodes))


def l1_scheme(alpha, mesh, Lh, f, u0):
    # classical L1 discretization on a nonuniform mesh, written out directly
    t = mesh.nodes
    g = math.gamma(2 - alpha)
    A = Lh.to_dense()
    U = [np.array(u0, dtype=float)]
    for k in range(1, len(t)):
        b = [((t[k] - t[j - 1]) ** (1 - alpha) - (t[k] - t[j]) ** (1 - alpha)) / ((t[j] - t[j - 1]) * g) for j in range(1, k + 1)]
        mem = sum(b[j - 1] * (U[j] - U[j - 1]) for j in range(1, k))
        lhs = b[k - 1] * np.eye(len(u0)) + A
        rhs = f(t[k]) - (mem if k > 1 else 0.0) + b[k - 1] * U[k - 1]
        U.append(np.linalg.solve(lhs, rhs))
    return np.array(U)


class TestMesh:
    def test_graded_nodes(self):
        mesh = TemporalMesh(4, 2.0, 2.0)
        np.testing.assert_allclose(mesh.nodes, 2.0 * (np.arange(5) / 4) ** 2)
        assert mesh.nodes[0] == 0.0 and mesh.nodes[-1] == 2.0
        assert mesh.tau(1) == pytest.approx(0.125)

    @pytest.mark.parametrize("args", [(0,), (3, -1.0), (3, 1.0, 0.5), (2.5,)])
    def test_invalid(self, args):
        with pytest.raises(DomainError):
            TemporalMesh(*args)


class TestAssembly:
    def test_m2_n2_against_entrywise_kronecker(self):
        alpha = 0.45
        rule = make_points("chebyshev", 2)
        coeff = EllipticCoefficients(b=0.3, c=0.7)
        grid = SpatialGrid(2)
        prob = SubdiffusionProblem(alpha, rule, TemporalMesh(3, 1.0, 2.0), grid, coeff, Source("constant", value=2.0))
        k = 2
        hist = np.array([[0.1, -0.2], [0.3, 0.4]])
        U_prev = np.array([0.5, -1.0])
        sys_ = assemble_step(prob, k, hist, U_prev)
        L = assemble_operator(grid, coeff).to_dense()
        mats = build_matrices(rule, alpha)
        tau = prob.mesh.tau(k)
        B = np.zeros((4, 4))
        for l in range(2):
            for j in range(2):
                for p in range(2):
                    for q in range(2):
                        B[2 * l + p, 2 * j + q] = mats.M_alpha[l, j] * (p == q) + tau**alpha * mats.W[l, j] * L[p, q]
        np.testing.assert_allclose(sys_.matrix, B, rtol=1e-15, atol=1e-13)
        rhs = np.concatenate([tau**alpha * (2.0 - L @ U_prev - hist[l]) for l in range(2)])
        np.testing.assert_allclose(sys_.rhs, rhs, rtol=1e-14)

    def test_m1_is_l1_operator(self):
        alpha = 0.3
        prob = SubdiffusionProblem(alpha, make_points("equidistant", 1), TemporalMesh(2), SpatialGrid(4))
        B = assemble_step(prob, 1, np.zeros((1, 4)), np.zeros(4)).matrix
        tau = 0.5
        L = prob.operator().to_dense()
        c1 = 1 / math.gamma(2 - alpha)
        np.testing.assert_allclose(B / tau**alpha, L + c1 * tau ** (-alpha) * np.eye(4), rtol=1e-14)

    def test_no_space_operator_gives_ode_form(self):
        rule = make_points("lobatto", 3)
        prob = SubdiffusionProblem(0.6, rule, TemporalMesh(1), SpatialGrid(1), EllipticCoefficients(a=1e-300))
        B = assemble_step(prob, 1, np.zeros((3, 1)), np.zeros(1)).matrix
        np.testing.assert_allclose(B, build_matrices(rule, 0.6).M_alpha, atol=1e-200)

    def test_first_step_equals_direct_construction(self):
        alpha, m, N = 0.7, 3, 5
        prob = manufactured_problem("lobatto", m, alpha, ((1.0, 2.0),), M=2, N=N)
        sys_ = assemble_step(prob, 1, np.zeros((m, N)), prob.initial(prob.grid))
        mats = build_matrices(prob.rule, alpha)
        L = prob.operator().to_dense()
        tau = prob.mesh.tau(1)
        B = np.block([[mats.M_alpha[l, j] * np.eye(N) + tau**alpha * mats.W[l, j] * L for j in range(m)] for l in range(m)])
        np.testing.assert_allclose(sys_.matrix, B, rtol=1e-14, atol=1e-12)

    def test_dimension_checks(self):
        prob = SubdiffusionProblem(0.5, make_points("lobatto", 2), TemporalMesh(2), SpatialGrid(3))
        with pytest.raises(DomainError):
            assemble_step(prob, 1, np.zeros((2, 3)), np.zeros(4))
        with pytest.raises(ValueError):
            assemble_step(prob, 1, np.zeros((2, 4)), np.zeros(3))


class TestSolve:
    def test_zero_problem(self):
        prob = SubdiffusionProblem(0.5, make_points("chebyshev", 3), TemporalMesh(5, 1.0, 2.0), SpatialGrid(7))
        sol = solve(prob)
        assert np.all(sol.U == 0) and np.all(sol.V == 0)
        assert collocation_residual(sol, prob) == 0.0
        t = prob.mesh.collocation_times(3, prob.rule)[1]
        assert np.all(sol.evaluate(t) == 0)

    @pytest.mark.parametrize("family", FAMILIES)
    @pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
    def test_polynomial_exactness(self, family, m):
        prob = manufactured_problem(family, m, 0.4, ((1.0, float(m)),))
        sol = solve(prob)
        assert nodal_error(sol, prob) <= 1e-8
        assert collocation_residual(sol, prob) <= 1e-8 * source_scale(prob)

    @given(
        st.sampled_from(FAMILIES),
        st.integers(1, 5),
        st.integers(1, 8),
        st.integers(1, 20),
        st.floats(0.05, 0.95),
        st.floats(1.0, 3.0),
        st.lists(st.floats(-2, 2), min_size=6, max_size=6),
    )
    def test_polynomial_exactness_property(self, family, m, M, N, alpha, r, coefs):
        terms = tuple((coefs[p], float(p)) for p in range(m + 1))
        coeff = EllipticCoefficients(a=1.5, b=0.3, c=0.5)
        prob = manufactured_problem(family, m, alpha, terms, M=M, N=N, r=r, coeff=coeff)
        sol = solve(prob)
        assert nodal_error(sol, prob) <= 1e-8
        assert collocation_residual(sol, prob) <= 1e-8 * source_scale(prob)

    @pytest.mark.parametrize("alpha", [0.2, 0.4, 0.9])
    def test_l1_equivalence(self, alpha):
        prob = manufactured_problem("chebyshev", 1, alpha, ((1.0, 1.0 + alpha), (0.5, 2.0)), M=32, N=15, r=2.0)
        sol = solve(prob)
        Lh = prob.operator()
        ref = l1_scheme(alpha, prob.mesh, Lh, lambda t: prob.f(t, Lh), prob.initial(prob.grid))
        assert np.abs(sol.U - ref).max() <= 1e-10

    def test_continuity_and_evaluation(self):
        prob = manufactured_problem("lobatto", 3, 0.5, ((1.0, 1.5),), M=6, N=5, r=2.0)
        sol = solve(prob)
        for k in range(1, prob.mesh.M + 1):
            np.testing.assert_array_equal(sol.evaluate(prob.mesh.nodes[k]), sol.U[k])
            np.testing.assert_array_equal(sol.local_value(k, 1.0), sol.U[k])
            np.testing.assert_array_equal(sol.local_value(k, 0.0), sol.U[k - 1])
        np.testing.assert_array_equal(sol.evaluate(0.0), prob.initial(prob.grid))
        assert sol.evaluate(0.3, node=2) == sol.evaluate(0.3)[2]
        with pytest.raises(DomainError):
            sol.evaluate(1.01)
        with pytest.raises(DomainError):
            sol.evaluate(-1e-9)

    def test_residual_is_not_vacuous(self):
        # a non-polynomial exact solution satisfies the scheme only at the collocation points
        prob = manufactured_problem("chebyshev", 2, 0.5, ((1.0, 1.5),), M=4, N=10)
        sol = solve(prob)
        assert collocation_residual(sol, prob) <= 1e-8 * source_scale(prob)
        mid = 0.5 * (prob.rule.theta[0] + prob.rule.theta[1])
        assert collocation_residual(sol, prob, s=mid) > 1e-6

    def test_diagnostics(self):
        prob = manufactured_problem("equidistant", 2, 0.5, ((1.0, 2.0),), M=3, N=6)
        sol = solve(prob)
        assert [d.k for d in sol.diagnostics] == [1, 2, 3]
        assert max(d.linear_residual for d in sol.diagnostics) < 1e-14

    def test_size_cap(self):
        prob = SubdiffusionProblem(0.5, make_points("chebyshev", 5), TemporalMesh(1), SpatialGrid(801))
        with pytest.raises(DomainError):
            solve(prob)

    def test_certificate_gate(self, monkeypatch):
        class Fake:
            has_real_negative = True

        monkeypatch.setattr(stepper, "spectrum", lambda rule, alpha: Fake())
        prob = SubdiffusionProblem(0.5, make_points("chebyshev", 2), TemporalMesh(1), SpatialGrid(3))
        with pytest.raises(CertificateError):
            solve(prob)

    def test_singular_step_reports_interval(self, monkeypatch):
        prob = SubdiffusionProblem(0.5, make_points("chebyshev", 2), TemporalMesh(3, 1.0, 2.0), SpatialGrid(3))
        real = stepper.block_matrix

        def broken(mats, tau, alpha, L):
            B = real(mats, tau, alpha, L)
            if tau > 0.3:
                B[:, 0] = 0.0
            return B

        monkeypatch.setattr(stepper, "block_matrix", broken)
        with pytest.raises(SingularMatrixError) as exc:
            solve(prob)
        assert exc.value.index == 2

    def test_continuous_operator_source_converges_in_space(self):
        errs = []
        for N in (9, 19, 39):
            prob = manufactured_problem("lobatto", 2, 0.5, ((1.0, 2.0),), M=2, N=N, operator="continuous")
            errs.append(nodal_error(solve(prob), prob))
        assert errs[0] > errs[1] > errs[2]
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)


class TestFODE:
    def test_linear_exact_solution_is_reproduced(self):
        alpha = 0.5
        sol = solve_fode(alpha, make_points("chebyshev", 3), TemporalMesh(1), 0.0, ScalarSource.manufactured([[1.0, 1.0]]))
        assert abs(sol.U[1, 0] - 1.0) <= 1e-10
        np.testing.assert_allclose(sol.V[0, :, 0], [1.0, 0.0, 0.0], atol=1e-10)

    def test_constant_source_approximates_power(self):
        alpha = 0.5
        sol = solve_fode(alpha, make_points("lobatto", 4), TemporalMesh(1), 0.0, ScalarSource.terms([[1.0, 0.0]]))
        exact = 1 / math.gamma(1 + alpha)
        assert abs(sol.U[1, 0] - exact) < 0.05

    def test_zero(self):
        sol = solve_fode(0.3, make_points("lobatto", 2), TemporalMesh(4))
        assert np.all(sol.U == 0)

    def test_stepsize_warning(self):
        with pytest.warns(StepsizeWarning):
            solve_fode(0.5, make_points("chebyshev", 1), TemporalMesh(1, 2.0), 1.0, ScalarSource.terms([[1.0, 0.0]]))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            solve_fode(0.5, make_points("chebyshev", 1), TemporalMesh(1, 1.2), 1.0, ScalarSource.terms([[1.0, 0.0]]))

    @pytest.mark.parametrize("family", FAMILIES)
    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_errors_decrease_under_refinement(self, family, m):
        alpha = 0.4
        errs = []
        for M in (8, 16, 32, 64):
            mesh = TemporalMesh(M, 1.0, 2.0)
            sol = solve_fode(alpha, make_points(family, m), mesh, 1.0, ScalarSource.manufactured([[1.0, 1 + alpha]]))
            errs.append(np.abs(sol.U[:, 0] - mesh.nodes ** (1 + alpha)).max())
        assert all(a > b for a, b in zip(errs, errs[1:]))

    def test_time_dependent_reaction_polynomial_exactness(self):
        from fraccol.spatial import Coefficient

        c = Coefficient("linear", (1.0, 2.0))
        f = ScalarSource.manufactured([[1, 0], [2, 1], [-1, 3]])
        with pytest.warns(StepsizeWarning):
            sol = solve_fode(0.6, make_points("lobatto", 3), TemporalMesh(5, 1.0, 1.5), c, f, u0=1.0)
        t = sol.mesh.nodes
        np.testing.assert_allclose(sol.U[:, 0], 1 + 2 * t - t**3, atol=1e-10)

    def test_invalid_alpha(self):
        with pytest.raises(DomainError):
            solve_fode(1.5, make_points("lobatto", 2), TemporalMesh(1))
