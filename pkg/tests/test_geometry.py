import numpy as np
import pytest

from pgcon.geometry import (
    active_set,
    compute_delta,
    project_box,
    project_tangent_cone,
)
from pgcon.problem import BoxSet
from pgcon.qp import QpProblem, solve_qp


def cone_projection_oracle(d, x, box, tol=1e-12):
    """Dense-QP projection onto the tangent cone, for cross-checking.

    The tangent cone of a box is a box-shaped cone, so it can be written
    with componentwise bounds and handed to the QP kernel.
    """
    at_lo = np.isfinite(box.lower) & (x - box.lower <= tol)
    at_hi = np.isfinite(box.upper) & (box.upper - x <= tol)
    lo = np.where(at_lo, 0.0, -np.inf)
    hi = np.where(at_hi, 0.0, np.inf)
    qp = QpProblem(H=np.eye(len(d)), q=-np.asarray(d, dtype=float),
                   Aeq=np.zeros((0, len(d))), beq=np.zeros(0), lower=lo, upper=hi)
    return solve_qp(qp).primal


class TestProjectBox:
    def test_clamp(self):
        box = BoxSet.nonnegative(2)
        np.testing.assert_allclose(project_box([-1.0, 2.0], box), [0.0, 2.0])

    def test_identity_inside(self):
        box = BoxSet(np.zeros(2), np.ones(2))
        x = np.array([0.3, 0.7])
        np.testing.assert_allclose(project_box(x, box), x)

    def test_upper_clamp(self):
        box = BoxSet(np.zeros(1), np.ones(1))
        assert project_box([3.0], box)[0] == 1.0

    def test_nonexpansive(self):
        rng = np.random.default_rng(0)
        box = BoxSet(np.array([-1.0, 0.0, -np.inf]), np.array([1.0, np.inf, 2.0]))
        for _ in range(100):
            x, y = rng.standard_normal(3) * 3, rng.standard_normal(3) * 3
            px, py = project_box(x, box), project_box(y, box)
            assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-14


class TestTangentCone:
    def test_boundary_forces_sign(self):
        box = BoxSet.nonnegative(2)
        out = project_tangent_cone([-1.0, 1.0], [0.0, 1.0], box)
        np.testing.assert_allclose(out, [0.0, 1.0])

    def test_interior_identity(self):
        box = BoxSet(np.zeros(2), np.ones(2))
        d = np.array([-0.5, 0.4])
        np.testing.assert_allclose(project_tangent_cone(d, [0.5, 0.5], box), d)

    def test_matches_qp_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(60):
            n = int(rng.integers(1, 7))
            lo = np.where(rng.random(n) < 0.6, -rng.random(n), -np.inf)
            hi = np.where(rng.random(n) < 0.6, rng.random(n), np.inf)
            box = BoxSet(np.minimum(lo, hi), np.maximum(lo, hi))
            x = project_box(rng.standard_normal(n), box)
            # push some components exactly onto their bounds
            for i in range(n):
                if rng.random() < 0.5 and np.isfinite(box.lower[i]):
                    x[i] = box.lower[i]
            d = rng.standard_normal(n) * 2
            mine = project_tangent_cone(d, x, box, tol_active=1e-12)
            ref = cone_projection_oracle(d, x, box)
            np.testing.assert_allclose(mine, ref, atol=1e-10)
            # projection identities onto a convex cone
            assert abs(np.dot(mine, d - mine)) <= 1e-10
            assert np.linalg.norm(mine) <= np.linalg.norm(d) + 1e-12

    def test_fixed_variable_zeroed(self):
        box = BoxSet(np.array([1.0]), np.array([1.0]))
        assert project_tangent_cone([5.0], [1.0], box)[0] == 0.0
        assert project_tangent_cone([-5.0], [1.0], box)[0] == 0.0


class TestDelta:
    def test_feasible_point_zero(self):
        box = BoxSet.nonnegative(2)
        J = np.array([[1.0, 1.0]])
        delta, direction = compute_delta([0.5, 0.5], np.zeros(1), J, box)
        assert delta == 0.0
        np.testing.assert_allclose(direction, np.zeros(2))

    def test_corner_value(self):
        # c(x) = x1 + x2 - 1 at the origin of the orthant: -J'c = (1, 1)
        box = BoxSet.nonnegative(2)
        J = np.array([[1.0, 1.0]])
        c = np.array([-1.0])
        delta, direction = compute_delta([0.0, 0.0], c, J, box)
        assert delta == pytest.approx(np.sqrt(2.0))
        np.testing.assert_allclose(direction, [1.0, 1.0])

    def test_interior_norm(self):
        box = BoxSet.free(3)
        rng = np.random.default_rng(2)
        J = rng.standard_normal((2, 3))
        c = rng.standard_normal(2)
        delta, _ = compute_delta(np.zeros(3), c, J, box)
        assert delta == pytest.approx(np.linalg.norm(J.T @ c))


class TestActiveSet:
    def test_orthant_lower(self):
        box = BoxSet.nonnegative(3)
        aset = active_set([0.0, 2.0, 0.0], box, tol_active=0.0)
        assert aset.at_lower == (0, 2)
        assert aset.at_upper == ()

    def test_all_interior(self):
        box = BoxSet(np.zeros(2), np.ones(2))
        aset = active_set([0.5, 0.5], box)
        assert aset.at_lower == () and aset.at_upper == ()

    def test_fixed_tie_goes_to_lower(self):
        box = BoxSet(np.array([1.0, 0.0]), np.array([1.0, 2.0]))
        aset = active_set([1.0, 2.0], box)
        assert 0 in aset.at_lower and 0 not in aset.at_upper
        assert 1 in aset.at_upper
