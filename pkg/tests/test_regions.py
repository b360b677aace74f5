import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diffpos.errors import PreconditionError
from diffpos.regions import (
    CompactRegion,
    PhaseGapRegion,
    TubeRegion,
    circular_spread,
    state_difference,
    wrap_angle,
)

angles = st.floats(-50, 50, allow_nan=False)


@given(angles)
def test_wrap_angle_range_and_congruence(a):
    w = wrap_angle(a)
    assert -np.pi <= w < np.pi
    assert np.isclose(np.cos(w), np.cos(a), atol=1e-9)
    assert np.isclose(np.sin(w), np.sin(a), atol=1e-9)


@given(angles, angles)
def test_state_difference_is_shortest_arc(a, b):
    d = state_difference(np.array([a]), np.array([b]), np.array([True]))[0]
    assert abs(d) <= np.pi + 1e-12
    assert np.isclose(np.cos(d), np.cos(a - b), atol=1e-9)


def test_box_validation():
    with pytest.raises(PreconditionError):
        CompactRegion((1.0,), (0.0,))
    with pytest.raises(PreconditionError):
        CompactRegion((0.0, 0.0), (1.0,))
    with pytest.raises(PreconditionError):
        CompactRegion((0.0,), (np.inf,))


def test_box_grid_and_boundary():
    r = CompactRegion((-1.0, -2.0), (1.0, 2.0))
    g = r.grid(5)
    assert g.shape == (25, 2)
    assert np.all(r.contains(g))
    b = r.boundary(5)
    assert np.allclose(r.excess(b), 0.0)


def test_full_circle_axis_has_no_faces_and_includes_zero():
    r = CompactRegion((-np.pi, -1.0), (np.pi, 1.0), wrap=(True, False))
    assert np.any(np.all(np.isclose(r.grid(15), 0.0), axis=1))
    b = r.boundary(7)
    assert np.allclose(np.abs(b[:, 1]), 1.0)
    # the angle is unconstrained
    assert r.excess(np.array([3.0, 0.0])) < 0


def test_sub_arc_excess_measured_along_circle():
    r = CompactRegion((-0.5,), (0.5,), wrap=(True,))
    assert np.isclose(r.excess(np.array([0.7])), 0.2)
    assert np.isclose(r.excess(np.array([0.7 + 2 * np.pi])), 0.2)


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=6), st.floats(-10, 10))
def test_circular_spread_rotation_invariant(th, c):
    th = np.array(th)
    assert np.isclose(circular_spread(th), circular_spread(th + c), atol=1e-9)


def test_phase_gap_region_grid_inside_and_boundary_on_edge():
    r = PhaseGapRegion(5, np.pi / 2 - 0.1)
    assert np.all(r.contains(r.grid(), tol=1e-9))
    assert np.allclose(r.excess(r.boundary(6)), 0.0, atol=1e-9)
    s = r.sample(np.random.default_rng(0), 100)
    assert np.all(r.contains(s, tol=1e-12))


def test_tube_region():
    r = TubeRegion(lambda th: 0.5 + 0.1 * np.sin(th), halfwidth=0.05)
    assert np.all(r.contains(r.grid(5)))
    assert np.allclose(r.excess(r.boundary(5)), 0.0)
