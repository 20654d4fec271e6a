import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq
from scipy.stats import poisson

from erspectra.errors import DomainError
from erspectra.scalar_theory import (
    B_STAR,
    bennett_h,
    eval_f,
    is_admissible,
    lambda_ab,
    lambda_d,
    lambda_derivatives_at_beta1,
    quartic_q,
    solve_scale_params,
)


def dense_top(alpha, beta, omega=1.0, n=256):
    e = np.full(n - 1, math.sqrt(omega))
    e[0], e[1] = math.sqrt(alpha), math.sqrt(beta)
    return np.linalg.eigvalsh(np.diag(e, 1) + np.diag(e, -1))[-1]


ADMISSIBLE_GRID = [
    (a, b) for a in (2.2, 2.5, 3.0, 4.0, 5.0, 10.0, 50.0) for b in (0.9, 0.95, 1.0, 1.05, 1.1) if is_admissible(a, b)
]


class TestEvalF:
    def test_value_at_one(self):
        assert eval_f(1.0, 10.0) == pytest.approx(0.1 * math.log(math.sqrt(20 * math.pi)), abs=1e-12)
        assert eval_f(1.0, 10.0) == pytest.approx(0.207023, abs=1e-6)

    def test_value_at_two_tends_to_critical_ratio(self):
        for d in (1e2, 1e4, 1e8):
            expected = 2 * math.log(2) - 1 + math.log(math.sqrt(4 * math.pi * d)) / d
            assert eval_f(2.0, d) == pytest.approx(expected, rel=1e-14)
        assert eval_f(2.0, 1e12) == pytest.approx(1 / B_STAR, abs=1e-9)
        assert 1 / B_STAR == pytest.approx(0.386294, abs=1e-6)

    def test_stirling_matches_poisson_pmf(self):
        # exp(-d f(u)) approximates P(Poisson(d) = du) with relative error O(1/(du))
        for d in (10, 40):
            for k in (d, 2 * d, 3 * d):
                u = k / d
                ratio = math.exp(-d * eval_f(u, d)) / poisson.pmf(k, d)
                assert abs(ratio - 1) <= 1.0 / (6 * k)

    def test_domain(self):
        with pytest.raises(DomainError):
            eval_f(0.5, 1.0)
        with pytest.raises(DomainError):
            eval_f(2.0, 0.0)

    @given(st.floats(1.0, 50.0), st.floats(1.0, 50.0), st.floats(1.0, 100.0))
    def test_strictly_increasing(self, u1, u2, d):
        if u1 == u2:
            return
        lo, hi = min(u1, u2), max(u1, u2)
        assert eval_f(hi, d) > eval_f(lo, d)


class TestScaleParams:
    def test_reference_values(self):
        p = solve_scale_params(100_000, 10)
        assert p.u_frak == pytest.approx(2.612, abs=5e-4)
        assert p.theta == pytest.approx(0.997, abs=1e-3)
        assert p.tau == pytest.approx(6.67, abs=5e-3)
        assert p.d_frak == pytest.approx(1.1)

    def test_against_brentq_oracle(self):
        for N, d in [(100_000, 10), (50_000, 8), (100_000, 7), (10**6, 5)]:
            p = solve_scale_params(N, d)
            target = math.log(N) / d
            u = brentq(lambda x: eval_f(x, d) - target, 1.0, 50.0, xtol=1e-14)
            a = 1 + brentq(lambda x: bennett_h(x) - target, 0.0, 50.0, xtol=1e-14)
            assert p.u_frak == pytest.approx(u, abs=1e-11)
            assert p.a_frak == pytest.approx(a, abs=1e-11)
            assert abs(eval_f(p.u_frak, d) - target) <= 1e-10
            assert abs(bennett_h(p.a_frak - 1) - target) <= 1e-10

    def test_product_identity(self):
        for N, d in [(100_000, 10), (10**7, 4), (5000, 3)]:
            p = solve_scale_params(N, d)
            u = p.u_frak
            assert p.theta * p.tau * (u - 2) == pytest.approx(2 * (u - 1) ** 3.5 / u, rel=1e-12)

    def test_u_and_a_close(self):
        for N, d in [(100_000, 10), (100_000, 7), (10**6, 12)]:
            p = solve_scale_params(N, d)
            assert abs(p.u_frak - p.a_frak) <= 10 * math.log(d) / d

    def test_sigma_is_lambda_d_at_u(self):
        p = solve_scale_params(100_000, 10)
        assert p.sigma == pytest.approx(lambda_d(p.u_frak, 1.0, 10.0), rel=1e-15)
        assert p.sigma == pytest.approx(math.sqrt(1.1) * dense_top(p.u_frak / 1.1, 1 / 1.1, 1.0), abs=1e-9)

    def test_subcritical_raises(self):
        with pytest.raises(DomainError, match="subcritical"):
            solve_scale_params(100_000, 30)

    def test_regime_guard(self):
        with pytest.raises(DomainError):
            solve_scale_params(100, 20)
        with pytest.raises(DomainError):
            solve_scale_params(2, 1)


class TestLambda:
    def test_beta_one_identity(self):
        assert lambda_ab(4, 1) == pytest.approx(4 / math.sqrt(3), abs=1e-12)
        assert lambda_ab(4, 1) == pytest.approx(2.309401, abs=1e-6)

    def test_full_formula_branch_agrees(self):
        # the general formula evaluated at beta = 1 gives inner = 4 - 2.5 + 1.5 = 3
        beta = 1.0 + 1e-13
        assert lambda_ab(4, beta) == pytest.approx(4 / math.sqrt(3), abs=1e-9)

    def test_reference_value(self):
        assert lambda_ab(2.3745, 0.90909) == pytest.approx(2.0090, abs=5e-5)
        assert lambda_ab(2.3745, 0.90909) == pytest.approx(dense_top(2.3745, 0.90909), abs=1e-9)

    @pytest.mark.parametrize("alpha,beta", ADMISSIBLE_GRID)
    def test_matches_dense_truncation(self, alpha, beta):
        assert lambda_ab(alpha, beta) == pytest.approx(dense_top(alpha, beta), abs=1e-9)

    @given(st.floats(2.01, 1000.0))
    def test_identity_on_range(self, alpha):
        assert abs(lambda_ab(alpha, 1.0) - alpha / math.sqrt(alpha - 1)) <= 1e-12 * max(1.0, alpha)

    def test_domain(self):
        with pytest.raises(DomainError):
            lambda_ab(1.9, 1.0)
        with pytest.raises(DomainError):
            lambda_ab(3.0, 0.8)

    def test_lambda_d(self):
        assert lambda_d(4, 1, 1e12) == pytest.approx(4 / math.sqrt(3), abs=1e-9)
        lo = lambda_ab(6, 1)
        val = lambda_d(6, 1, 10)
        assert lo <= val <= lo + 10 / 60
        assert val == pytest.approx(math.sqrt(1.1) * dense_top(6 / 1.1, 1 / 1.1), abs=1e-9)
        assert val == pytest.approx(dense_top(6, 1, omega=1.1), abs=1e-9)

    def test_derivatives(self):
        np.testing.assert_allclose(lambda_derivatives_at_beta1(3.0), (0.176777, 0.265165), atol=1e-6)
        np.testing.assert_allclose(lambda_derivatives_at_beta1(4.0), (0.192450, 0.256600), atol=1e-6)
        da, db = lambda_derivatives_at_beta1(2.0 + 1e-12)
        assert da < 1e-11 and db < 1e-11
        with pytest.raises(DomainError):
            lambda_derivatives_at_beta1(2.0)

    @pytest.mark.parametrize("alpha", [2.5, 3.0, 4.0, 10.0])
    def test_derivatives_finite_difference(self, alpha):
        h = 1e-6
        fd_a = (lambda_ab(alpha + h, 1.0) - lambda_ab(alpha - h, 1.0)) / (2 * h)
        fd_b = (lambda_ab(alpha, 1.0 + h) - lambda_ab(alpha, 1.0 - h)) / (2 * h)
        da, db = lambda_derivatives_at_beta1(alpha)
        assert fd_a == pytest.approx(da, rel=1e-6)
        assert fd_b == pytest.approx(db, rel=1e-6)

    def test_quartic(self):
        assert abs(quartic_q(4, 1, 4 / math.sqrt(3))) <= 1e-9
        assert quartic_q(4, 1, 2) == pytest.approx(4.0)
        assert abs(quartic_q(3, 1.05, lambda_ab(3, 1.05))) <= 1e-9 * 9

    @pytest.mark.parametrize("alpha,beta", ADMISSIBLE_GRID)
    def test_quartic_root_on_grid(self, alpha, beta):
        assert abs(quartic_q(alpha, beta, lambda_ab(alpha, beta))) <= 1e-9 * alpha**2


class TestLambdaShape:
    @given(st.floats(2.05, 200.0), st.floats(-1.0, 1.0), st.floats(0.001, 0.5))
    @settings(max_examples=200)
    def test_monotone_in_alpha_and_beta(self, alpha, t, step):
        beta = 1.0 + 0.05 * min(1.0, alpha - 2.0) * t
        assert lambda_ab(alpha + step, beta) > lambda_ab(alpha, beta)
        beta2 = min(beta + 0.01 * step * min(1.0, alpha - 2.0), 1.0 + 0.05 * min(1.0, alpha - 2.0))
        if beta2 > beta:
            assert lambda_ab(alpha, beta2) >= lambda_ab(alpha, beta)

    def test_gap_bound_constant(self):
        ratios = [
            (lambda_ab(a, b) - 2) * a**1.5 / (a - 2) ** 2
            for a in np.linspace(2.02, 200, 400)
            for b in np.linspace(1 - 0.15 * min(1, a - 2), 1 + 0.15 * min(1, a - 2), 9)
        ]
        assert min(ratios) >= 0.1

    def test_expansion_in_beta(self):
        worst = 0.0
        for a in np.linspace(2.05, 100, 200):
            _, db = lambda_derivatives_at_beta1(a)
            for b in np.linspace(1 - 0.15 * min(1, a - 2), 1 + 0.15 * min(1, a - 2), 11):
                if b == 1.0:
                    continue
                err = abs(lambda_ab(a, b) - a / math.sqrt(a - 1) - db * (b - 1))
                worst = max(worst, err * a / (b - 1) ** 2)
        assert worst <= 10.0

    def test_comparable_to_sqrt_alpha(self):
        for a, b in ADMISSIBLE_GRID:
            assert 0.5 * math.sqrt(a) <= lambda_ab(a, b) <= 2 * math.sqrt(a)
