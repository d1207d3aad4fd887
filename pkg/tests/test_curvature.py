import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svrnaq.numerics import DimensionError
from svrnaq.optim import (
    CurvatureBuffer,
    CurvaturePair,
    DenseInverseHessian,
    IdentityHessian,
    StepSchedule,
    initial_scaling,
    naq_hessian_update,
    step_size,
    two_loop_direction,
)

from conftest import random_spd


def explicit_fold(pairs, d):
    """Dense inverse Hessian: gamma*I folded through the textbook BFGS product form."""
    if pairs:
        gamma = np.mean([(p @ q) / (q @ q) for p, q in pairs])
    else:
        gamma = 1.0
    H = gamma * np.eye(d)
    I = np.eye(d)
    for p, q in pairs:
        rho = 1.0 / (q @ p)
        H = (I - rho * np.outer(p, q)) @ H @ (I - rho * np.outer(q, p)) + rho * np.outer(p, p)
    return H


def random_pairs(gen, d, m):
    A = random_spd(gen, d, 30.0)
    pairs = []
    for _ in range(m):
        p = gen.standard_normal(d)
        pairs.append((p, A @ p + 0.01 * gen.standard_normal(d)))
    return pairs


class TestCurvaturePair:
    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            CurvaturePair([1.0, 2.0], [1.0])

    @pytest.mark.parametrize("p, q, ok", [
        ([1.0, 0.0], [1.0, 0.0], True),
        ([1.0, 0.0], [-1.0, 0.0], False),
        ([1.0, 0.0], [0.0, 1.0], False),
        ([0.0, 0.0], [1.0, 0.0], False),
        ([1.0, 0.0], [1e-9, 1.0], False),
    ])
    def test_safeguard(self, p, q, ok):
        assert CurvaturePair(p, q).acceptable() is ok

    def test_update_skips_negative_curvature(self):
        H = np.eye(2)
        H_new, accepted = naq_hessian_update(H, CurvaturePair([1.0, 0.0], [-1.0, 0.0]))
        assert not accepted
        assert H_new is H


class TestTwoLoop:
    def test_empty_buffer_returns_negative_f(self):
        f = np.array([1.0, -2.0, 3.0])
        np.testing.assert_array_equal(two_loop_direction(f, CurvatureBuffer(4)), -f)

    def test_single_pair_hand_example(self):
        # p = q = e1: gamma = 1, H stays the identity
        buf = CurvatureBuffer(2)
        buf.update(CurvaturePair([1.0, 0.0], [1.0, 0.0]))
        np.testing.assert_allclose(buf.direction([3.0, 4.0]), [-3.0, -4.0], atol=1e-15)

    def test_secant_for_newest_pair(self, gen):
        buf = CurvatureBuffer(5)
        for p, q in random_pairs(gen, 8, 5):
            buf.update(CurvaturePair(p, q))
        newest = buf.pairs[-1]
        np.testing.assert_allclose(-buf.direction(newest.q), newest.p, rtol=1e-10, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(d=st.integers(1, 20), m=st.integers(1, 5), seed=st.integers(0, 2**32 - 1))
    def test_matches_explicit_fold(self, d, m, seed):
        gen = np.random.default_rng(seed)
        pairs = random_pairs(gen, d, m)
        f = gen.standard_normal(d)
        ref = -explicit_fold(pairs, d) @ f
        got = two_loop_direction(f, [CurvaturePair(p, q) for p, q in pairs])
        assert np.linalg.norm(got - ref) / np.linalg.norm(ref) < 1e-10

    def test_fifo_eviction(self, gen):
        buf = CurvatureBuffer(3)
        pairs = random_pairs(gen, 6, 5)
        for p, q in pairs:
            assert buf.update(CurvaturePair(p, q))
        assert len(buf) == 3
        f = gen.standard_normal(6)
        ref = -explicit_fold(pairs[2:], 6) @ f
        np.testing.assert_allclose(buf.direction(f), ref, rtol=1e-10, atol=1e-12)

    def test_rejected_pair_not_stored(self):
        buf = CurvatureBuffer(2)
        assert not buf.update(CurvaturePair([1.0, 0.0], [-1.0, 0.0]))
        assert len(buf) == 0

    def test_dimension_mismatch(self, gen):
        buf = CurvatureBuffer(2)
        buf.update(CurvaturePair([1.0, 0.0], [1.0, 0.0]))
        with pytest.raises(DimensionError):
            buf.direction([1.0, 2.0, 3.0])

    def test_bad_memory(self):
        with pytest.raises(ValueError):
            CurvatureBuffer(0)


class TestDenseInverseHessian:
    def test_first_update_scaled(self, gen):
        pairs = random_pairs(gen, 5, 3)
        H = DenseInverseHessian(5)
        for p, q in pairs:
            assert H.update(CurvaturePair(p, q))
        gamma = (pairs[0][0] @ pairs[0][1]) / (pairs[0][1] @ pairs[0][1])
        I = np.eye(5)
        ref = gamma * I
        for p, q in pairs:
            rho = 1.0 / (q @ p)
            ref = (I - rho * np.outer(p, q)) @ ref @ (I - rho * np.outer(q, p)) + rho * np.outer(p, p)
        np.testing.assert_allclose(H.H, ref, rtol=1e-10, atol=1e-12)
        assert H.n_updates == 3

    def test_unscaled_keeps_identity_start(self):
        H = DenseInverseHessian(2, scale_first=False)
        H.update(CurvaturePair([2.0, 0.0], [1.0, 0.0]))
        np.testing.assert_allclose(H.H, np.diag([2.0, 1.0]), atol=1e-15)

    def test_skip_leaves_matrix(self):
        H = DenseInverseHessian(3)
        assert not H.update(CurvaturePair([1.0, 0, 0], [-1.0, 0, 0]))
        np.testing.assert_array_equal(H.H, np.eye(3))
        assert H.n_updates == 0

    def test_identity_hessian(self):
        ident = IdentityHessian()
        assert ident.update(CurvaturePair([1.0], [-1.0]))
        np.testing.assert_array_equal(ident.direction([1.0, -2.0]), [-1.0, 2.0])


class TestInitialScaling:
    def test_empty(self):
        assert initial_scaling([]) == 1.0

    def test_mean_of_ratios(self):
        pairs = [CurvaturePair([1.0, 0.0], [2.0, 0.0]), CurvaturePair([0.0, 3.0], [0.0, 1.0])]
        assert initial_scaling(pairs) == pytest.approx((0.5 + 3.0) / 2)


class TestStepSize:
    @pytest.mark.parametrize("alpha0, t, expected", [(1.0, 1, 1.0), (1.0, 4, 0.5), (0.1, 100, 0.01), (2.0, 9, 2 / 3)])
    def test_decay(self, alpha0, t, expected):
        assert step_size(StepSchedule(alpha0), t) == pytest.approx(expected, rel=1e-15)

    def test_constant(self):
        s = StepSchedule(0.3, decay=False)
        assert [s(t) for t in (1, 5, 1000)] == [0.3, 0.3, 0.3]

    def test_zero_alpha(self):
        assert StepSchedule(0.0)(7) == 0.0

    def test_counter_is_one_based(self):
        with pytest.raises(ValueError):
            step_size(StepSchedule(1.0), 0)

    def test_negative_alpha(self):
        with pytest.raises(ValueError):
            StepSchedule(-1.0)

    @settings(max_examples=50)
    @given(t=st.integers(1, 10**6))
    def test_monotone(self, t):
        s = StepSchedule(1.0)
        assert s(t + 1) < s(t)
        assert s(t) == pytest.approx(1 / math.sqrt(t))


class TestSpecExamples:
    def test_identity_equal_pair(self):
        H, ok = naq_hessian_update(np.eye(3), CurvaturePair([1.0, 2.0, 0.5], [1.0, 2.0, 0.5]))
        assert ok
        assert np.max(np.abs(H @ np.array([1.0, 2.0, 0.5]) - [1.0, 2.0, 0.5])) < 1e-12

    def test_random_pd_matches_explicit(self, gen):
        H0 = random_spd(gen, 10, 20.0)
        p = gen.standard_normal(10)
        q = random_spd(gen, 10, 20.0) @ p
        H, ok = naq_hessian_update(H0, CurvaturePair(p, q))
        rho, I = 1.0 / (q @ p), np.eye(10)
        ref = (I - rho * np.outer(p, q)) @ H0 @ (I - rho * np.outer(q, p)) + rho * np.outer(p, p)
        assert ok and np.max(np.abs(H - ref)) < 1e-12

    def test_qp_minus_one_skips(self):
        H0 = np.eye(2)
        H, ok = naq_hessian_update(H0, CurvaturePair([1.0, 0.0], [-1.0, 0.0]))
        assert not ok and np.array_equal(H, H0)

    def test_empty_buffer_example(self):
        np.testing.assert_array_equal(two_loop_direction([1.0, -2.0], []), [-1.0, 2.0])

    def test_single_pair_secant(self):
        e = np.zeros(5)
        e[0] = 1.0
        np.testing.assert_allclose(two_loop_direction(e, [CurvaturePair(e, e)]), -e, atol=1e-15)

    def test_m4_d15(self, gen):
        pairs = random_pairs(gen, 15, 4)
        f = gen.standard_normal(15)
        ref = -explicit_fold(pairs, 15) @ f
        got = two_loop_direction(f, [CurvaturePair(p, q) for p, q in pairs])
        assert np.linalg.norm(got - ref) / np.linalg.norm(ref) < 1e-10

    def test_step_size_small_alpha(self):
        assert step_size(StepSchedule(0.025), 25) == pytest.approx(0.005, rel=1e-15)
