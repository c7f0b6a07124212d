import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fastlip.core import (
    BoundingBox,
    BoxMarginError,
    ConditionViolationError,
    DivergentSeriesError,
    EvaluationError,
    InvalidInputError,
    ProblemSpec,
    UnsupportedKError,
    delta_Delta,
    fd_check_gradients,
    geometric_tail_norm,
    inf_norm,
    matrix_power_nonneg,
    one_norm,
    q_ratio,
    spectral_radius,
    transpose_norm,
)
from fastlip.gallery import make_toy

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def square(n=None):
    if n is None:
        return st.integers(1, 5).flatmap(lambda k: arrays(float, (k, k), elements=finite))
    return arrays(float, (n, n), elements=finite)


class TestBox:
    def test_rejects_inverted_bounds(self):
        with pytest.raises(InvalidInputError):
            BoundingBox([0.0, 1.0], [1.0, 0.0])

    def test_corners(self):
        box = BoundingBox([0, 0], [1, 2])
        c = box.corners()
        assert c.shape == (4, 2)
        assert {tuple(r) for r in c} == {(0, 0), (0, 2), (1, 0), (1, 2)}

    def test_contains_and_clip(self):
        box = BoundingBox([0, 0], [1, 1])
        assert box.contains([0.5, 1.0])
        assert not box.contains([1.1, 0.5])
        np.testing.assert_array_equal(box.clip([1.5, -2.0]), [1.0, 0.0])


class TestProblemSpec:
    def test_index_sets_default_to_complement(self):
        p = ProblemSpec(n=3, m=1, obj_grad=lambda x: np.ones((3, 1)), con=lambda x: 0 * x,
                        box=BoundingBox(np.zeros(3), np.ones(3)), eq_set=[1])
        assert p.ineq_set == (0, 2)
        assert p.eq_set == (1,)

    def test_overlapping_sets_rejected(self):
        with pytest.raises(InvalidInputError):
            ProblemSpec(n=2, m=1, obj_grad=lambda x: np.ones((2, 1)), con=lambda x: x,
                        box=BoundingBox([0, 0], [1, 1]), ineq_set=[0, 1], eq_set=[1])

    def test_shape_checked(self):
        p = ProblemSpec(n=2, m=1, obj_grad=lambda x: np.ones((3, 1)), con=lambda x: x,
                        box=BoundingBox([0, 0], [1, 1]))
        with pytest.raises(EvaluationError):
            p.grad_f0(np.zeros(2))

    def test_nonfinite_constraint_value(self):
        p = ProblemSpec(n=1, m=1, obj_grad=lambda x: np.ones((1, 1)), con=lambda x: np.array([np.nan]),
                        box=BoundingBox([0], [1]))
        with pytest.raises(EvaluationError):
            p.f(np.zeros(1))

    def test_fd_fallback_matches_analytic(self):
        toy = make_toy(-0.3, 0.3)
        fd = ProblemSpec(n=2, m=2, obj_grad=toy.obj_grad, con=toy.con, box=toy.box)
        x = np.array([0.3, 0.7])
        np.testing.assert_allclose(fd.grad_f(x), toy.grad_f(x), atol=1e-8)


class TestNorms:
    def test_examples(self):
        A = np.array([[1.0, -2.0], [3.0, 4.0]])
        assert inf_norm(A) == 7.0
        assert one_norm(A) == 6.0
        assert transpose_norm(A, "inf") == 6.0
        assert transpose_norm(A, "one") == 7.0

    def test_unknown_norm(self):
        with pytest.raises(InvalidInputError):
            transpose_norm(np.eye(2), "fro")

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidInputError):
            inf_norm(np.array([[np.inf]]))

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 5).flatmap(lambda k: st.tuples(square(k), square(k))), st.sampled_from(["inf", "one"]))
    def test_submultiplicative(self, AB, base):
        A, B = AB
        lhs = transpose_norm(A @ B, base)
        rhs = transpose_norm(A, base) * transpose_norm(B, base)
        assert lhs <= rhs * (1 + 1e-12) + 1e-12


class TestSpectralRadius:
    @settings(max_examples=200, deadline=None)
    @given(square())
    def test_upper_bound_close_to_eigvals(self, A):
        rho = float(np.max(np.abs(np.linalg.eigvals(A))))
        est = spectral_radius(A)
        assert est >= rho * (1 - 1e-9) - 1e-12
        assert est <= inf_norm(A) + 1e-12

    def test_complex_pair(self):
        # rotation scaled by 0.5: dominant eigenvalues 0.5 e^{+-i theta}
        th = 0.7
        R = 0.5 * np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        assert spectral_radius(R) == pytest.approx(0.5, rel=1e-6)

    def test_nilpotent(self):
        assert spectral_radius(np.array([[0.0, 5.0], [0.0, 0.0]])) == 0.0

    def test_nonsquare(self):
        with pytest.raises(InvalidInputError):
            spectral_radius(np.ones((2, 3)))


class TestQuantities:
    def test_q_ratio(self):
        assert q_ratio(np.array([[2.0, 1.0], [1.0, 2.0]])) == 0.5
        assert q_ratio(np.array([[0.0], [1.0]])) == 0.0

    def test_q_ratio_negative(self):
        with pytest.raises(ConditionViolationError):
            q_ratio(np.array([[-1.0], [1.0]]))

    def test_matrix_power(self):
        A = np.array([[0.0, 0.3], [-0.3, 0.0]])
        assert not matrix_power_nonneg(A, 1)
        assert not matrix_power_nonneg(A, 2)  # A^2 = -0.09 I
        assert matrix_power_nonneg(A, 4)
        with pytest.raises(UnsupportedKError):
            matrix_power_nonneg(A, 9)

    def test_geometric_tail(self):
        A = np.array([[0.5]])
        assert geometric_tail_norm(A, 1) == 0.0
        assert geometric_tail_norm(A, 3) == pytest.approx(0.75)
        assert geometric_tail_norm(A, math.inf) == pytest.approx(1.0)
        with pytest.raises(DivergentSeriesError):
            geometric_tail_norm(np.array([[1.0]]), math.inf)

    @settings(max_examples=100, deadline=None)
    @given(arrays(float, (3, 3), elements=st.floats(0, 0.3)), st.integers(1, 8))
    def test_finite_tail_below_geometric(self, A, k):
        assert geometric_tail_norm(A, k) <= geometric_tail_norm(A, math.inf) + 1e-12


class TestFdCheck:
    def test_toy_gradients_agree(self):
        assert fd_check_gradients(make_toy(0.9, -0.7), [0.4, 0.6]) < 1e-8

    def test_wrong_gradient_detected(self):
        toy = make_toy(0.9, 0.9)
        bad = ProblemSpec(n=2, m=2, obj=toy.obj, obj_grad=toy.obj_grad, con=toy.con,
                          con_grad=lambda x: toy.grad_f(x).T * 2, box=toy.box)
        assert fd_check_gradients(bad, [0.4, 0.6]) > 0.1

    def test_point_too_close_to_boundary(self):
        with pytest.raises(BoxMarginError):
            fd_check_gradients(make_toy(0.1, 0.1), [0.0, 0.5])


class TestDocumentedValues:
    def test_toy_gradient_norm_at_corner(self):
        assert inf_norm(np.array([[0.0, 0.3], [-0.3, 0.0]])) == pytest.approx(0.3)
        assert inf_norm(np.eye(2)) == 1.0

    def test_q_ratio_identical_rows(self):
        assert q_ratio(np.array([[0.7, 2.0], [0.7, 2.0], [0.7, 2.0]])) == 1.0

    def test_q_ratio_zero_entry(self):
        assert q_ratio(np.array([[1.0, 0.0], [1.0, 1.0]])) == 0.0

    def test_delta_Delta(self):
        assert delta_Delta(np.array([[2.0, 1.0], [1.0, 2.0]])) == (1.0, 2.0)
        assert delta_Delta(np.ones((3, 2))) == (1.0, 1.0)
        assert delta_Delta(np.array([[-1.0, 3.0], [0.0, 2.0]])) == (-1.0, 3.0)

    def test_square_of_negative_swap_is_nonneg(self):
        assert matrix_power_nonneg(np.array([[0.0, -0.2], [-0.2, 0.0]]), 2)

    def test_tail_scalar_and_swap(self):
        assert geometric_tail_norm(0.3 * np.eye(2), math.inf) == pytest.approx(0.3 / 0.7)
        assert geometric_tail_norm(np.array([[0.0, 0.3], [0.3, 0.0]]), 3) == pytest.approx(0.39)

    def test_transpose_norm_symmetric(self):
        S = np.array([[1.0, -2.0], [-2.0, 5.0]])
        assert transpose_norm(S) == inf_norm(S)

    def test_affine_fd_exact(self):
        G = np.array([[0.1, 0.4], [0.3, 0.2]])
        p = ProblemSpec(n=2, m=1, obj=lambda x: np.array([x.sum()]), obj_grad=lambda x: np.ones((2, 1)),
                        con=lambda x: G @ x + 1.0, con_grad=lambda x: G.T, box=BoundingBox([0, 0], [5, 5]))
        assert fd_check_gradients(p, [1.0, 2.0]) <= 1e-9
