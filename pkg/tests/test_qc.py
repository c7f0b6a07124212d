import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fastlip.core import BoundingBox, ConditionSample, ProblemSpec
from fastlip.gallery import make_power_control, make_toy
from fastlip.qc import (
    ALL_SPECIAL,
    IMPLICATIONS,
    OLD_II,
    OLD_III,
    Q1,
    Q2D,
    QINF,
    QINFD,
    QK,
    BoxWarning,
    BudgetError,
    Condition,
    check_condition,
    evaluate_point,
    implication_audit,
    point_passes,
    sample_grid,
    sample_random,
)


def toy_check(a, b, cond):
    p = make_toy(a, b)
    return check_condition(p, cond, sample_grid(p.box, 33))


def sample_from(G0, A):
    G0 = np.asarray(G0, dtype=float)
    A = np.asarray(A, dtype=float)
    q = float(np.min(G0.min(axis=0) / G0.max(axis=0))) if np.all(G0 >= 0) and np.all(G0.max(axis=0) > 0) else (0.0 if np.all(G0 >= 0) else math.nan)
    return ConditionSample(np.zeros(A.shape[0]), G0, A, q, float(G0.min()), float(G0.max()),
                           float(np.abs(A).sum(axis=1).max()))


class TestParse:
    @pytest.mark.parametrize("text,expected", [
        ("q1", Q1), ("QINFD", QINFD), ("qk(3)", QK(3)), ("qk3", QK(3)), ("qkinf", QK(math.inf)),
        ("old_ii", OLD_II), ("old3", OLD_III),
    ])
    def test_parse(self, text, expected):
        assert Condition.parse(text) == expected

    def test_round_trip(self):
        for c in ALL_SPECIAL + (QK(1), QK(8), QK(math.inf)):
            assert Condition.parse(str(c)) == c

    @pytest.mark.parametrize("bad", ["q7", "qk(0)", "qk(9)", ""])
    def test_bad_ids(self, bad):
        with pytest.raises(ValueError):
            Condition.parse(bad)


class TestToyThresholds:
    @pytest.mark.parametrize("a,b", [(0.9, 0.9), (0.5, 0.0), (0.25, 0.9)])
    def test_q1_passes_below_one(self, a, b):
        assert toy_check(a, b, Q1).passed

    def test_q1_fails_at_one(self):
        rep = toy_check(1.0, 1.0, Q1)
        assert not rep.passed
        assert any(name == "cont" for _, name in rep.failures)

    def test_mixed_signs_fail_q1_pass_qinfd(self):
        rep = toy_check(-0.3, 0.3, Q1)
        assert [name for _, name in rep.failures if name == "pos"]
        assert toy_check(-0.3, 0.3, QINFD).passed

    def test_qinfd_worst_margin(self):
        # 1/3 bound vs max |a|,|b| = 0.3 at a corner
        m = toy_check(-0.3, 0.3, QINFD).worst_margins["inf"]
        assert m.value == pytest.approx(0.3)
        assert m.bound == pytest.approx(1 / 3)

    def test_q2d_thresholds(self):
        assert toy_check(-0.4, -0.4, Q2D).passed
        assert not toy_check(-0.6, -0.6, Q2D).passed

    def test_qinfd_fails_above_third(self):
        assert not toy_check(0.6, 0.6, QINFD).passed
        assert not toy_check(-0.4, 0.4, QINFD).passed


class TestPointwise:
    def test_qk2_nilpotent_like(self):
        # A^2 >= 0 with negative A entries: QK(2) can hold where Q1 cannot
        s = sample_from([[1.0], [1.0]], [[0.0, -0.2], [0.0, 0.0]])
        assert not point_passes(s, Q1)
        assert point_passes(s, QK(2))

    def test_qk_inf_has_no_sign_requirement(self):
        s = sample_from([[1.0], [1.0]], [[0.0, -0.2], [-0.2, 0.0]])
        assert "pos" not in evaluate_point(s, QK(math.inf))
        assert point_passes(s, QK(math.inf))

    def test_old_iii_needs_scalar_objective(self):
        s = sample_from([[2.0, 1.0], [1.0, 2.0]], np.zeros((2, 2)))
        checks = evaluate_point(s, OLD_III)
        assert not checks["iii.a"].ok

    def test_old_ii_needs_equal_entries(self):
        s = sample_from([[1.0, 1.0], [1.0, 1.0]], [[0.0, 0.1], [0.1, 0.0]])
        assert point_passes(s, OLD_II)
        s2 = sample_from([[1.0, 1.1], [1.0, 1.0]], [[0.0, 0.1], [0.1, 0.0]])
        assert not point_passes(s2, OLD_II)

    def test_zero_row_objective_fails_q1(self):
        s = sample_from([[1.0], [0.0]], np.zeros((2, 2)))
        assert not evaluate_point(s, Q1)["f0.rows"].ok


class TestGrid:
    def test_budget(self):
        with pytest.raises(BudgetError):
            sample_grid(BoundingBox(np.zeros(5), np.ones(5)), 33)

    def test_random_includes_corners(self):
        g = sample_random(BoundingBox(np.zeros(2), np.ones(2)), 10, seed=1)
        assert len(g) == 14

    def test_grid_must_be_inside_box(self):
        with pytest.raises(ValueError):
            check_condition(make_toy(0.1, 0.1), Q1, np.array([[2.0, 0.0]]))

    def test_box_warning(self):
        p = make_toy(1.5, 1.5)  # f(1,1) = 1.25 leaves [0,1]^2
        with pytest.warns(BoxWarning):
            check_condition(p, Q1, sample_grid(p.box, 5))


class TestReport:
    def test_json_schema(self):
        doc = json.loads(toy_check(-0.3, 0.3, QINFD).to_json())
        assert doc["schema_version"] == 1
        assert set(doc) >= {"condition", "grid", "verdict", "margins", "failures"}
        assert doc["grid"]["total_points"] == 33 * 33

    def test_byte_identical(self):
        assert toy_check(0.6, 0.6, QINFD).to_json() == toy_check(0.6, 0.6, QINFD).to_json()

    def test_thread_count_does_not_change_report(self, monkeypatch):
        monkeypatch.setenv("FL_THREADS", "1")
        one = toy_check(-0.3, 0.3, QK(3)).to_json()
        monkeypatch.setenv("FL_THREADS", "4")
        assert toy_check(-0.3, 0.3, QK(3)).to_json() == one

    def test_evaluation_failure_recorded(self):
        def con_grad(x):
            if x[0] > 0.9:
                raise RuntimeError("boom")
            return np.array([[0.5]])

        p = ProblemSpec(n=1, m=1, obj_grad=lambda x: np.ones((1, 1)), con=lambda x: 0.5 * x,
                        con_grad=con_grad, box=BoundingBox([0.0], [1.0]))
        rep = check_condition(p, Q1, sample_grid(p.box, 11))
        assert rep.verdict == "fail"
        assert any(name.startswith("evaluation-failure") for _, name in rep.failures)


class TestImplications:
    @settings(max_examples=300, deadline=None)
    @given(arrays(float, (3, 2), elements=st.floats(0.01, 3)), arrays(float, (3, 3), elements=st.floats(-0.5, 0.5)))
    def test_every_implication_holds(self, G0, A):
        s = sample_from(G0, A)
        for premise, conclusion in IMPLICATIONS.items():
            if point_passes(s, premise):
                assert point_passes(s, conclusion), (premise, conclusion)

    @settings(max_examples=200, deadline=None)
    @given(arrays(float, (2, 1), elements=st.floats(0.1, 2)), arrays(float, (2, 2), elements=st.floats(-0.4, 0.4)))
    def test_old_iii_implies_qinfd_scalar(self, G0, A):
        s = sample_from(G0, A)
        if point_passes(s, OLD_III):
            assert point_passes(s, QINFD)

    def test_gallery_audit_clean(self):
        for p in (make_toy(-0.3, 0.3), make_toy(0.5, 0.5), make_power_control([[0, 0.3], [0.2, 0]], [1, 1])):
            assert implication_audit(p, sample_grid(p.box, 11)) == []

    def test_audit_detects_broken_checker(self):
        # sabotage: QINF reported as passing everywhere, QK(inf) evaluated honestly
        def broken(sample, cond, context=None):
            if cond == QINF:
                return True
            return point_passes(sample, cond, context)

        p = make_toy(1.5, 1.5)
        bad = implication_audit(p, sample_grid(p.box, 5), evaluate=broken)
        assert bad and all(v.premise == "QINF" for v in bad)

