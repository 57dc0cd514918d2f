import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seacgd.errors import ContractViolation
from seacgd.objective import (LARGE_GRADIENT, NEAR_SOSP, SADDLE_REGION, LandscapeParams, ObjectiveSpec,
                              PaperQuartic, as_block, classify_point, make_objective, min_eigenvalue,
                              quartic_constants, register_objective, registered_objectives)

from conftest import HalfSquare, quartic_reference


def fd_gradient(obj, x, h=1e-6):
    g = np.empty(obj.d)
    for i in range(obj.d):
        e = np.zeros(obj.d)
        e[i] = h
        g[i] = (obj.value(x + e) - obj.value(x - e)) / (2 * h)
    return g


class TestSpec:
    def test_rejects_small_dim(self):
        with pytest.raises(ContractViolation):
            ObjectiveSpec(d=1, lipschitz_L=1, hessian_rho=1, global_min_fstar=0)

    @pytest.mark.parametrize("L,rho", [(0, 1), (1, 0), (-1, 1)])
    def test_rejects_nonpositive_constants(self, L, rho):
        with pytest.raises(ContractViolation):
            ObjectiveSpec(d=2, lipschitz_L=L, hessian_rho=rho, global_min_fstar=0)

    def test_landscape_positive(self):
        LandscapeParams(1, 1, 1)
        with pytest.raises(ContractViolation):
            LandscapeParams(1, 0, 1)


class TestEval:
    def test_saddle_value_exact(self, quartic2):
        assert quartic2.value(np.array([1.0, -1.0])) == 0.0

    def test_minimum_value(self, quartic2):
        assert quartic2.value(np.array([1 + 1 / math.sqrt(2), -1.0])) == pytest.approx(-0.5, abs=1e-12)

    def test_hand_value(self, quartic2):
        assert quartic2.value(np.array([2.0, 0.0])) == pytest.approx(2.0, abs=1e-14)

    @pytest.mark.parametrize("d", [2, 10, 100, 1000])
    def test_minimum_value_scales(self, d):
        obj = PaperQuartic(d)
        for sign in (1, -1):
            assert abs(obj.value(obj.local_minimum(sign)) + d / 4) <= 1e-12 * d

    @pytest.mark.parametrize("d", [2, 4, 10, 100])
    def test_saddle_gradient_exactly_zero(self, d):
        obj = PaperQuartic(d)
        assert obj.value(obj.saddle()) == 0.0
        assert np.all(obj.gradient(obj.saddle()) == 0.0)

    def test_dimension_mismatch(self, quartic2):
        with pytest.raises(ContractViolation):
            quartic2.value(np.zeros(3))

    def test_odd_dim_rejected(self):
        with pytest.raises(ContractViolation):
            PaperQuartic(3)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-3, 3), min_size=6, max_size=6))
    def test_matches_reference(self, xs):
        obj = PaperQuartic(6)
        x = np.array(xs)
        assert obj.value(x) == pytest.approx(quartic_reference(xs), rel=1e-12, abs=1e-11)


class TestGradient:
    def test_block_example_d2(self, quartic2):
        g = quartic2.block_gradient(np.array([2.0, 0.0]), slice(0, 1))
        np.testing.assert_allclose(g, [4.0, 0.0], atol=1e-12)

    def test_block_example_d4(self):
        obj = PaperQuartic(4)
        g = obj.block_gradient(np.array([2.0, 2.0, 0.0, 0.0]), [2, 3])
        np.testing.assert_allclose(g, [0.0, 0.0, 4.0, 4.0], atol=1e-12)

    def test_stationary_block(self, quartic2):
        assert np.all(quartic2.block_gradient(np.array([1.0, -1.0]), slice(0, 2)) == 0)

    @pytest.mark.parametrize("d", [2, 10, 100])
    def test_finite_differences(self, d):
        obj = PaperQuartic(d)
        rng = np.random.default_rng(d)
        worst = 0.0
        for _ in range(100):
            x = rng.uniform(-3, 3, d)
            g = obj.gradient(x)
            fd = fd_gradient(obj, x)
            worst = max(worst, np.max(np.abs(g - fd) / np.maximum(np.abs(g), 1.0)))
        assert worst <= 1e-6

    def test_formula(self):
        obj = PaperQuartic(4)
        x = np.array([0.5, 1.5, -2.0, 0.3])
        r, s = obj.to_rs(x)
        a = r - 1
        expected = [8 * a ** 3 - 4 * a] * 2 + [4 * (s + 1)] * 2
        np.testing.assert_allclose(obj.gradient(x), expected, rtol=1e-13)

    def test_block_values_length(self):
        obj = PaperQuartic(10)
        x = np.linspace(-1, 1, 10)
        bv = obj.block_values(x, slice(3, 8))
        np.testing.assert_array_equal(bv, obj.gradient(x)[3:8])

    def test_empty_and_bad_blocks(self, quartic2):
        with pytest.raises(ContractViolation):
            as_block(slice(1, 1), 2)
        with pytest.raises(ContractViolation):
            as_block([0, 2], 4)
        with pytest.raises(ContractViolation):
            as_block(slice(0, 3), 2)
        with pytest.raises(ContractViolation):
            as_block([], 2)


class TestHessian:
    def test_saddle_examples(self, quartic2):
        x = quartic2.saddle()
        np.testing.assert_allclose(quartic2.hessian_vector_product(x, np.array([1.0, 0.0])), [-4, 0], atol=1e-12)
        np.testing.assert_allclose(quartic2.hessian_vector_product(x, np.array([0.0, 1.0])), [0, 4], atol=1e-12)

    def test_zero_vector(self, quartic2):
        x = np.array([0.3, 0.7])
        assert np.all(quartic2.hessian_vector_product(x, np.zeros(2)) == 0)

    def test_symmetry(self):
        obj = PaperQuartic(20)
        rng = np.random.default_rng(1)
        for _ in range(20):
            x, v, w = rng.uniform(-3, 3, (3, 20))
            assert abs(obj.hessian_vector_product(x, v) @ w - v @ obj.hessian_vector_product(x, w)) <= 1e-10 * (
                1 + abs(obj.hessian_vector_product(x, v) @ w))

    def test_analytic_matches_fd(self):
        obj = PaperQuartic(8)
        rng = np.random.default_rng(2)
        x, v = rng.uniform(-2, 2, (2, 8))
        fd = HalfSquare.hessian_vector_product(obj, x, v)  # generic central differences
        np.testing.assert_allclose(obj.hessian_vector_product(x, v), fd, rtol=1e-6, atol=1e-6)

    def test_generic_fd_hvp(self, half_square):
        v = np.array([0.3, -2.0])
        np.testing.assert_allclose(half_square.hessian_vector_product(np.array([1.0, 2.0]), v), v, rtol=1e-8)

    @pytest.mark.parametrize("d", [2, 10, 100, 10_000])
    def test_lambda_min_at_saddle(self, d):
        obj = PaperQuartic(d)
        lam, ok = min_eigenvalue(obj, obj.saddle())
        assert ok
        assert lam == pytest.approx(-4.0, abs=1e-3)


class TestConstants:
    def test_values(self):
        L, rho = quartic_constants(2)
        assert L == 33.5
        assert rho == pytest.approx(60.0, rel=1e-12)
        assert quartic_constants(100)[1] == pytest.approx(24 * 1.25 * 2 ** 1.5 / 10, rel=1e-12)

    @pytest.mark.parametrize("d", [2, 10, 100])
    def test_bounds_hold_on_box(self, d):
        # Hessian eigenvalues are 24a^2 - 4 (r-direction) and 4 (s-direction),
        # the third derivative along unit vectors peaks at 24|a| 2^1.5 / sqrt(d)
        obj = PaperQuartic(d)
        a = np.linspace(-obj.box_halfwidth, obj.box_halfwidth, 2001)
        assert max(np.abs(24 * a ** 2 - 4).max(), 4.0) <= obj.spec.lipschitz_L + 1e-12
        assert (24 * np.abs(a) * 2 ** 1.5 / math.sqrt(d)).max() <= obj.spec.hessian_rho + 1e-9

    def test_hessian_eigen_along_r(self):
        obj = PaperQuartic(10)
        x = obj.point(1.5, -1.0)
        u = np.r_[np.ones(5), np.zeros(5)] / math.sqrt(5)
        assert u @ obj.hessian_vector_product(x, u) == pytest.approx(24 * 0.25 - 4, rel=1e-10)


class TestClassify:
    def test_saddle(self, quartic2):
        pc = classify_point(quartic2, quartic2.saddle(), 0.1)
        assert pc.tag == SADDLE_REGION
        assert pc.min_eig_estimate == pytest.approx(-4, abs=0.01)
        assert pc.grad_norm == 0.0

    def test_minimum(self, quartic2):
        assert classify_point(quartic2, quartic2.local_minimum(), 0.1).tag == NEAR_SOSP

    def test_large_gradient(self, quartic2):
        pc = classify_point(quartic2, np.array([3.0, 0.0]), 0.1)
        assert pc.tag == LARGE_GRADIENT
        assert pc.grad_norm == pytest.approx(math.hypot(56, 4))

    def test_regime(self, quartic2):
        L, rho = quartic2.spec.lipschitz_L, quartic2.spec.hessian_rho
        with pytest.raises(ContractViolation):
            classify_point(quartic2, quartic2.saddle(), 1.01 * L * L / rho)

    def test_low_confidence_flag(self, quartic2):
        pc = classify_point(quartic2, quartic2.saddle(), 0.1, power_iters=1)
        assert pc.low_confidence
        assert pc.tag in (SADDLE_REGION, NEAR_SOSP)


class TestRegistry:
    def test_builtin(self):
        assert "paper_quartic" in registered_objectives()
        assert make_objective("paper_quartic", d=4).d == 4

    def test_unknown(self):
        with pytest.raises(ContractViolation):
            make_objective("nope", d=2)

    def test_register_custom(self):
        name = "half_square_test"
        if name not in registered_objectives():
            register_objective(name, lambda d: HalfSquare(d))
        assert make_objective(name, d=3).value(np.ones(3)) == 1.5
        with pytest.raises(ValueError):
            register_objective(name, lambda d: HalfSquare(d))

    def test_lower_bound_check(self, quartic2):
        quartic2.check_lower_bound(-0.5)
        with pytest.raises(ContractViolation):
            quartic2.check_lower_bound(-0.6)


class TestCentering:
    def test_saddle_is_origin(self):
        obj = PaperQuartic(10)
        assert np.all(obj.aggregates(obj.saddle()) == 0.0)
        assert obj.to_rs(obj.point(1.5, -0.25)) == pytest.approx((1.5, -0.25))

    def test_hvp_uses_uncentered_direction(self):
        obj = PaperQuartic(4)
        v = np.ones(4)
        np.testing.assert_allclose(obj.hessian_vector_product(obj.saddle(), v), [-4, -4, 4, 4], atol=1e-12)
