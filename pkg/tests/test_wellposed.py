import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fraccol.collocation import FAMILIES, build_matrices, make_points, rule_from_points, vandermonde_det
from fraccol.errors import DomainError
from fraccol.specfun import caputo_power_coefficient
from fraccol.wellposed import (
    charpoly_leverrier,
    charpoly_subsets,
    classify_eigenvalues,
    estimate_resolvent_bound,
    lax_milgram_check,
    lax_milgram_D_m2,
    ode_stepsize_check,
    scan,
    spectrum,
    summarize_scan,
)


def _mp_pencil(rule, alpha, dps):
    mpmath.mp.dps = dps
    th = [mpmath.mpf(t) for t in rule.theta]
    al = mpmath.mpf(alpha)
    m = rule.m
    W = mpmath.matrix(m, m)
    Ma = mpmath.matrix(m, m)
    for i in range(m):
        for j in range(m):
            W[i, j] = th[i] ** (j + 1)
            Ma[i, j] = th[i] ** (j + 1 - al) * mpmath.gamma(j + 2) / mpmath.gamma(j + 2 - al)
    return W, Ma


def _m2_closed_form(t1, alpha):
    # det(M_alpha - λW) for points (t1, 1), coefficient by coefficient
    c1 = math.gamma(2) / math.gamma(2 - alpha)
    c2 = math.gamma(3) / math.gamma(3 - alpha)
    a2 = t1 * (1 - t1)
    a1 = c2 * t1 * (1 - t1 ** (1 - alpha)) + c1 * t1 ** (1 - alpha) * (1 - t1 ** (1 + alpha))
    a0 = c1 * c2 * t1 ** (1 - alpha) * (1 - t1)
    return a0, a1, a2


class TestClassification:
    def test_thresholds(self):
        lam = np.array([-1.0, -1e-11, 2.0 + 1e-9j, -3.0 + 1e-6j, 5.0 + 4e-8j, 5.0 + 6e-8j])
        is_real, neg = classify_eigenvalues(lam)
        assert is_real.tolist() == [True, True, True, False, True, False]
        assert neg.tolist() == [True, False, False, False, False, False]

    def test_m1_spectrum_is_first_coefficient(self):
        rep = spectrum(make_points("chebyshev", 1), 0.5)
        assert rep.eigenvalues[0] == pytest.approx(1.1283791671, abs=1e-10)
        assert rep.real_eigenvalue_count == 1 and not rep.has_real_negative

    @pytest.mark.parametrize("family", FAMILIES)
    @pytest.mark.parametrize("m", [2, 5, 8, 12, 16, 20])
    @pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
    def test_eigenvalues_against_independent_high_precision(self, family, m, alpha):
        rule = make_points(family, m)
        W, Ma = _mp_pencil(rule, alpha, 50)
        ref = [complex(z) for z in mpmath.eig(Ma * mpmath.inverse(W), left=False, right=False)]
        got = list(spectrum(rule, alpha).eigenvalues)
        norm = np.abs(build_matrices(rule, alpha).M).sum(axis=1).max()
        for z in ref:
            k = min(range(len(got)), key=lambda i: abs(got[i] - z))
            assert abs(got.pop(k) - z) <= 1e-8 * norm

    @given(st.sampled_from(FAMILIES), st.integers(1, 20), st.floats(0.02, 0.98))
    def test_no_real_negative_eigenvalue(self, family, m, alpha):
        assert not spectrum(make_points(family, m), alpha).has_real_negative

    def test_chebyshev_even_m_small_alpha_has_real_pair(self):
        # two real eigenvalues near 1.12 and 1.14, confirmed by sign changes
        # of det(M_alpha - λW) in 60-digit arithmetic
        rule = make_points("chebyshev", 8)
        rep = spectrum(rule, 0.05)
        real = np.sort(rep.eigenvalues[rep.is_real].real)
        np.testing.assert_allclose(real, [1.12149, 1.14330], atol=1e-5)
        W, Ma = _mp_pencil(rule, 0.05, 60)
        signs = [mpmath.sign(mpmath.det(Ma - mpmath.mpf(x) * W)) for x in ("1.11", "1.13", "1.15")]
        assert signs[0] != signs[1] and signs[1] != signs[2]


class TestCharPoly:
    def test_m1(self):
        rule = make_points("equidistant", 1)
        rep = charpoly_subsets(rule, 0.3)
        c1 = caputo_power_coefficient(1, 0.3)
        np.testing.assert_allclose(rep.coefficients, [c1, 1.0], rtol=1e-14)

    def test_m2_closed_form(self):
        rep = charpoly_subsets(rule_from_points([0.5, 1.0]), 0.5)
        np.testing.assert_allclose(rep.coefficients, _m2_closed_form(0.5, 0.5), rtol=1e-12)
        np.testing.assert_allclose(rep.coefficients, [0.600211, 0.736120, 0.25], atol=1e-6)

    @given(st.floats(0.02, 0.98), st.floats(0.02, 0.98))
    def test_m2_closed_form_property(self, t1, alpha):
        rep = charpoly_subsets(rule_from_points([t1, 1.0]), alpha)
        np.testing.assert_allclose(rep.coefficients, _m2_closed_form(t1, alpha), rtol=1e-10)

    @pytest.mark.parametrize("family", FAMILIES)
    @pytest.mark.parametrize("m", [3, 6, 9, 12])
    @pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
    def test_paths_agree_and_are_positive(self, family, m, alpha):
        rule = make_points(family, m)
        rep = charpoly_subsets(rule, alpha)
        assert rep.all_positive
        assert np.all(np.abs(rep.coefficients - rep.reference) <= 1e-8 * np.abs(rep.reference))
        assert rep.coefficients[-1] == pytest.approx(vandermonde_det(rule), rel=1e-10)

    @pytest.mark.parametrize("m", [2, 3, 4, 5])
    def test_roots_are_eigenvalues(self, m):
        rule = make_points("lobatto", m)
        a = charpoly_subsets(rule, 0.4).coefficients
        # Σ (-λ)^j a_j, highest power first for polyroots
        coeffs = [a[j] * (-1) ** j for j in range(m, -1, -1)]
        mpmath.mp.dps = 30
        roots = sorted((complex(z) for z in mpmath.polyroots(coeffs, maxsteps=200)), key=lambda z: (z.real, z.imag))
        np.testing.assert_allclose(spectrum(rule, 0.4).eigenvalues, roots, atol=1e-8)

    @given(st.lists(st.floats(0.02, 0.98), min_size=0, max_size=5, unique=True), st.floats(0.05, 0.95))
    def test_positive_coefficients_for_arbitrary_points(self, pts, alpha):
        pts = sorted(pts)
        if pts and min(np.diff(pts + [1.0])) < 0.02:
            return
        rule = rule_from_points(pts + [1.0])
        rep = charpoly_subsets(rule, alpha)
        assert rep.all_positive
        assert not spectrum(rule, alpha).has_real_negative

    def test_size_cap(self):
        with pytest.raises(DomainError):
            charpoly_subsets(make_points("chebyshev", 17), 0.5)
        with pytest.raises(DomainError):
            charpoly_leverrier(build_matrices(make_points("chebyshev", 21), 0.5))


class TestLaxMilgram:
    @pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
    def test_boundary(self, alpha):
        t = 1 - alpha / 2
        D = lax_milgram_D_m2(t, alpha)
        assert lax_milgram_check(rule_from_points([t, 1.0]), alpha, D).passed
        t_bad = t + 0.05
        assert lax_milgram_D_m2(t_bad, alpha) is None
        assert not lax_milgram_check(rule_from_points([t_bad, 1.0]), alpha, [1.0, t_bad**3]).passed

    def test_closed_form_matches_min_eigenvalue_sign(self):
        # with D = diag(1, θ^3) the symmetric part is PSD iff
        # 4C(θ^2+p)(θ^4+p) >= (1+C)^2 (θ^3+p)^2 at p = θ^3, C = 2/(2-α)
        for alpha in (0.3, 0.6):
            for t in np.linspace(0.05, 0.95, 19):
                C = 2 / (2 - alpha)
                p = t**3
                expected = 4 * C * (t**2 + p) * (t**4 + p) - (1 + C) ** 2 * (t**3 + p) ** 2 >= 0
                got = lax_milgram_check(rule_from_points([t, 1.0]), alpha, [1.0, t**3])
                if abs(t - (1 - alpha / 2)) > 1e-9:
                    assert got.passed == expected

    def test_invalid_D(self):
        with pytest.raises(DomainError):
            lax_milgram_check(rule_from_points([0.5, 1.0]), 0.5, [1.0, -1.0])
        with pytest.raises(DomainError):
            lax_milgram_check(rule_from_points([0.5, 1.0]), 0.5, [1.0])
        with pytest.raises(DomainError):
            lax_milgram_D_m2(1.0, 0.5)


class TestStepsize:
    def test_threshold_four_over_pi(self):
        rule = make_points("chebyshev", 1)
        assert ode_stepsize_check(rule, 0.5, 4 / math.pi * 0.99, [1.0]).passed
        assert not ode_stepsize_check(rule, 0.5, 4 / math.pi * 1.01, [1.0]).passed
        chk = ode_stepsize_check(rule, 0.5, 2.0, [1.0])
        assert chk.bound == pytest.approx(math.sqrt(2) * math.sqrt(math.pi) / 2, rel=1e-13)

    def test_zero_reaction_always_passes(self):
        assert ode_stepsize_check(make_points("lobatto", 4), 0.5, 100.0, [0.0] * 4).passed

    def test_invalid(self):
        with pytest.raises(DomainError):
            ode_stepsize_check(make_points("lobatto", 2), 0.5, 0.0, [1.0, 1.0])


class TestResolvent:
    def test_scalar_case(self):
        est = estimate_resolvent_bound(build_matrices(make_points("chebyshev", 1), 0.5))
        assert est.C_M == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-13)
        assert est.argmax_lambda == 0.0 and est.tail_verified

    @pytest.mark.parametrize("family", FAMILIES)
    @pytest.mark.parametrize("m", [2, 5, 8])
    def test_sampled_bound_dominates_random_lambdas(self, family, m):
        mats = build_matrices(make_points(family, m), 0.6)
        est = estimate_resolvent_bound(mats, samples=400)
        assert est.tail_verified
        rng = np.random.default_rng(m)
        for lam in rng.uniform(0, 5 * np.abs(mats.M).sum(axis=1).max(), 30):
            r = np.abs(np.linalg.inv(mats.M + lam * np.eye(m))).sum(axis=1).max()
            assert r <= est.C_M * 1.05


class TestScan:
    def test_rows_sorted_and_counted(self):
        rows = scan(["lobatto", "chebyshev"], [1, 2, 3], [0.5, 0.25], threads=3)
        assert len(rows) == 12
        assert rows == sorted(rows, key=lambda r: (r.family, r.m, r.alpha))
        assert rows == scan(["lobatto", "chebyshev"], [1, 2, 3], [0.5, 0.25])

    def test_summary(self):
        s = summarize_scan(scan(["equidistant"], [8], [0.9, 0.95]))
        assert s["equidistant"].some_negative_real_part
        assert s["equidistant"].no_real_negative
