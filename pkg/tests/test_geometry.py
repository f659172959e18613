import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfmaxwell.errors import DegenerateGradient, EmptyIntersection
from cfmaxwell.geometry import (
    MINUS,
    PLUS,
    LevelSet,
    closest_point,
    interface_segments,
    level_set_eval,
    side_of,
    unit_normal,
)
from cfmaxwell.problems import make_problem

CIRCLE = LevelSet.circle(0.5, 0.5, 0.25)
STAR5 = LevelSet.star(5, 0.5, 0.5, 0.25, 0.05)
STAR3 = LevelSet.star(3, 0.55, 0.55, 0.25, 0.15)


def test_circle_eval_examples():
    assert level_set_eval(CIRCLE, (0.5, 0.5)) == pytest.approx(-0.0625, abs=1e-15)
    assert level_set_eval(CIRCLE, (0.75, 0.5)) == pytest.approx(0.0, abs=1e-15)


def test_star_on_interface_at_theta_zero():
    r = float(STAR5.star_radius(0.0))
    assert level_set_eval(STAR5, (0.5 + r, 0.5)) == pytest.approx(0.0, abs=1e-15)


def test_side_of_examples():
    assert side_of(CIRCLE, (0.5, 0.5)) == MINUS
    assert side_of(CIRCLE, (0.05, 0.05)) == PLUS
    # zero level set belongs to the plus side
    assert side_of(CIRCLE, (0.75, 0.5)) == PLUS


def test_closest_point_examples():
    np.testing.assert_allclose(closest_point(CIRCLE, (0.6, 0.5)), (0.75, 0.5), atol=1e-12)
    np.testing.assert_allclose(closest_point(CIRCLE, (0.75, 0.5)), (0.75, 0.5), atol=1e-12)


def test_closest_point_three_star_against_dense_sampling():
    # one node (h = 1/20) inside the lobe tip at theta = pi/6
    th = math.pi / 6
    rho = float(STAR3.star_radius(th)) - 0.05
    p = np.array([0.55 + rho * math.cos(th), 0.55 + rho * math.sin(th)])
    q = closest_point(STAR3, p)
    assert abs(level_set_eval(STAR3, q)) <= 1e-12

    thetas = np.linspace(0, 2 * np.pi, 100_000, endpoint=False)
    r = STAR3.star_radius(thetas)
    curve = np.column_stack([0.55 + r * np.cos(thetas), 0.55 + r * np.sin(thetas)])
    d = np.hypot(*(curve - p).T)
    i = int(np.argmin(d))
    assert np.linalg.norm(p - q) <= d[i] + 1e-12
    assert np.linalg.norm(q - curve[i]) < 5e-5


def test_closest_point_parallel_to_gradient():
    rng = np.random.default_rng(3)
    th = rng.uniform(0, 2 * np.pi, 50)
    rho = STAR5.star_radius(th) + rng.uniform(-0.05, 0.05, 50)
    P = np.column_stack([0.5 + rho * np.cos(th), 0.5 + rho * np.sin(th)])
    Q = closest_point(STAR5, P)
    assert np.max(np.abs(STAR5.eval(Q[:, 0], Q[:, 1]))) <= 1e-12
    n = unit_normal(STAR5, Q)
    d = P - Q
    cross = d[:, 0] * n[:, 1] - d[:, 1] * n[:, 0]
    assert np.max(np.abs(cross)) <= 1e-10 * max(1.0, np.abs(d).max())


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0, 2 * np.pi),
    st.floats(-0.06, 0.06),
    st.sampled_from(["circle", "star5", "star3"]),
)
def test_closest_point_idempotent(theta, offset, which):
    ls = {"circle": CIRCLE, "star5": STAR5, "star3": STAR3}[which]
    x0, y0 = ls.params[-4:-2] if which != "circle" else ls.params[:2]
    r = float(ls.star_radius(theta)) if which != "circle" else 0.25
    p = np.array([x0 + (r + offset) * math.cos(theta), y0 + (r + offset) * math.sin(theta)])
    q = closest_point(ls, p)
    np.testing.assert_allclose(closest_point(ls, q), q, atol=1e-10)


def test_closest_point_tricircle_near_cusp():
    ls = make_problem("nonsmooth").level_set
    # points around the middle lens, including near its corners
    P = np.array([[0.5, 0.5], [0.5, 0.04], [0.5, 0.98], [0.1, 0.6], [0.9, 0.6]])
    Q = closest_point(ls, P)
    assert np.max(np.abs(ls.eval(Q[:, 0], Q[:, 1]))) <= 1e-12


def test_unit_normal_examples():
    np.testing.assert_allclose(unit_normal(CIRCLE, (0.75, 0.5)), (1.0, 0.0), atol=1e-15)
    np.testing.assert_allclose(unit_normal(CIRCLE, (0.5, 0.75)), (0.0, 1.0), atol=1e-15)


def test_star_normal_matches_finite_differences():
    q = np.array([0.5 + float(STAR5.star_radius(0.0)), 0.5])
    s = 1e-6
    gx = (STAR5.eval(q[0] + s, q[1]) - STAR5.eval(q[0] - s, q[1])) / (2 * s)
    gy = (STAR5.eval(q[0], q[1] + s) - STAR5.eval(q[0], q[1] - s)) / (2 * s)
    fd = np.array([gx, gy]) / math.hypot(gx, gy)
    np.testing.assert_allclose(unit_normal(STAR5, q), fd, atol=1e-6)


def test_unit_normal_degenerate_gradient():
    with pytest.raises(DegenerateGradient):
        unit_normal(CIRCLE, (0.5, 0.5))


def test_segments_circle_arc_length():
    segs = interface_segments(CIRCLE, (0.75, 0.5), 0.15)
    total = sum(s.weights.sum() for s in segs)
    exact = 2 * 0.25 * math.asin(0.075 / 0.25)
    assert total == pytest.approx(exact, abs=1e-6)


def test_segments_flat_interface():
    ls = LevelSet.plane(0.0, 1.0, -0.5)
    segs = interface_segments(ls, (0.5, 0.5), 0.2)
    assert len(segs) == 1
    assert segs[0].weights.sum() == pytest.approx(0.2, abs=1e-12)


def test_segments_empty_intersection():
    with pytest.raises(EmptyIntersection):
        interface_segments(CIRCLE, (0.05, 0.05), 0.05)


@pytest.mark.parametrize("ls", [CIRCLE, STAR5, STAR3], ids=["circle", "star5", "star3"])
def test_segment_points_on_interface_with_unit_outward_normals(ls):
    segs = interface_segments(ls, closest_point(ls, (0.5, 0.72)), 0.15)
    for s in segs:
        assert np.max(np.abs(ls.eval(s.points[:, 0], s.points[:, 1]))) <= 1e-10
        np.testing.assert_allclose(np.linalg.norm(s.normals, axis=1), 1.0, atol=1e-12)
        gx, gy = ls.grad(s.points[:, 0], s.points[:, 1])
        assert np.all(s.normals[:, 0] * gx + s.normals[:, 1] * gy > 0)


def test_arc_length_converges_under_refinement():
    exact = 2 * 0.25 * math.asin(0.075 / 0.25)
    errs = []
    for sub in (4, 8, 16, 32):
        segs = interface_segments(CIRCLE, (0.75, 0.5), 0.15, n_q=1, subgrid=sub, sagitta=1e-9)
        errs.append(abs(sum(s.weights.sum() for s in segs) - exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9)


def test_side_constant_along_paths_not_crossing():
    xs = np.linspace(0.0, 0.2, 200)
    assert np.all(side_of(CIRCLE, np.column_stack([xs, xs])) == PLUS)
    assert np.all(side_of(CIRCLE, np.column_stack([0.4 + xs, np.full_like(xs, 0.5)])) == MINUS)
