import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diffpos.cones import (
    BOUNDARY,
    INTERIOR,
    OUTSIDE,
    boundary_sampler,
    cone_center,
    extreme_rays,
    feasibility_margin,
    hilbert,
    hilbert_distance,
    hilbert_M,
    hilbert_m,
    membership,
    polyhedral_cone,
    quadratic_cone,
    screen_cone,
)
from diffpos.errors import (
    ConeConstructionError,
    DegenerateVectorError,
    InfeasibleConeError,
    PreconditionError,
    SamplerWarning,
)

from oracles import orthant_hilbert, orthant_M_m

positive = st.floats(0.05, 20.0)


def orthant(n):
    return polyhedral_cone(np.eye(n))


def test_membership_status_and_active_set():
    c = polyhedral_cone([[1.0, 0.0], [1.0, 1.0]])
    x = np.zeros(2)
    assert membership(c, x, [1.0, 0.0]).status == INTERIOR
    v = membership(c, x, [0.0, 1.0])
    assert v.status == BOUNDARY and v.active == (0,)
    assert membership(c, x, [-1.0, 0.0]).status == OUTSIDE
    assert membership(c, x, [1.0, 0.0], eps=0.5).margin == pytest.approx(0.5)
    with pytest.raises(DegenerateVectorError):
        membership(c, x, [0.0, 0.0])


@given(st.lists(positive, min_size=3, max_size=3), st.floats(1e-3, 1e3))
def test_membership_is_scale_invariant(v, s):
    c = orthant(3)
    a = membership(c, np.zeros(3), v)
    b = membership(c, np.zeros(3), s * np.array(v))
    assert a.status == b.status
    assert a.margin == pytest.approx(b.margin, abs=1e-12)


def test_construction_errors():
    with pytest.raises(ConeConstructionError):
        polyhedral_cone([[1.0, 0.0]])
    with pytest.raises(ConeConstructionError):
        polyhedral_cone([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(InfeasibleConeError):
        polyhedral_cone([[1.0, 0.0], [-1.0, 0.0]])
    with pytest.raises(ConeConstructionError):
        quadratic_cone([[1.0, 0.0], [1.0, 1.0]])


def test_feasibility_margin_and_center_of_pendulum_cone():
    c = polyhedral_cone([[1.0, 0.0], [1.0, 1.0]])
    eps, u = feasibility_margin(c, np.zeros(2))
    assert eps == pytest.approx(1.0, abs=1e-6)
    center = cone_center(c, np.zeros(2))
    assert center[1] / center[0] == pytest.approx(np.sqrt(2) - 1, abs=1e-5)


def test_extreme_rays():
    rays = extreme_rays(polyhedral_cone([[1.0, 0.0], [1.0, 1.0]]), np.zeros(2))
    expect = {(0.0, 1.0), (round(1 / np.sqrt(2), 8), round(-1 / np.sqrt(2), 8))}
    assert {tuple(np.round(r, 8)) for r in rays} == expect


def test_quadratic_cone_is_ice_cream():
    c = quadratic_cone(np.eye(3))
    x = np.zeros(3)
    assert membership(c, x, [1.0, 0.0, 0.0]).status == INTERIOR
    assert membership(c, x, [1.0, 1.0, 0.0]).status == BOUNDARY
    assert membership(c, x, [-1.0, 0.0, 0.0]).status == OUTSIDE
    assert screen_cone(c, x)["pointed"]


@given(st.integers(3, 5).flatmap(lambda n: st.tuples(
    st.lists(positive, min_size=n, max_size=n), st.lists(positive, min_size=n, max_size=n))))
def test_hilbert_matches_orthant_closed_form(pair):
    a, b = (np.array(v) for v in pair)
    c = orthant(len(a))
    x = np.zeros(len(a))
    assert hilbert_distance(c, x, a, b) == pytest.approx(orthant_hilbert(a, b), abs=1e-8)
    M, m = orthant_M_m(a, b)
    r = hilbert(c, x, a, b)
    assert r.M == pytest.approx(M, rel=1e-9)
    assert r.m == pytest.approx(m, rel=1e-9)


@given(st.lists(positive, min_size=4, max_size=4), st.lists(positive, min_size=4, max_size=4),
       st.floats(1e-2, 1e2), st.floats(1e-2, 1e2))
def test_hilbert_symmetry_and_scaling(a, b, s, t):
    c = orthant(4)
    x = np.zeros(4)
    a, b = np.array(a), np.array(b)
    d = hilbert_distance(c, x, a, b)
    assert hilbert_distance(c, x, b, a) == pytest.approx(d, abs=1e-8)
    assert hilbert_distance(c, x, s * a, t * b) == pytest.approx(d, abs=1e-8)


def test_hilbert_zero_iff_parallel_and_infinite_on_boundary():
    c = orthant(3)
    x = np.zeros(3)
    a = np.array([1.0, 2.0, 3.0])
    assert hilbert_distance(c, x, a, 2.5 * a) == pytest.approx(0.0, abs=1e-9)
    assert hilbert_distance(c, x, a, np.array([1.0, 2.0, 0.0])) == np.inf
    assert hilbert_M(c, x, a, np.array([1.0, 2.0, 0.0])) == np.inf
    assert hilbert_m(c, x, np.array([1.0, 2.0, 0.0]), a) == 0.0


def test_hilbert_rejects_outside_vectors():
    c = orthant(2)
    with pytest.raises(PreconditionError):
        hilbert_distance(c, np.zeros(2), [1.0, -1.0], [1.0, 1.0])


def test_hilbert_batched():
    c = orthant(3)
    rng = np.random.default_rng(1)
    A = rng.uniform(0.1, 5, (50, 3))
    B = rng.uniform(0.1, 5, (50, 3))
    assert np.allclose(hilbert_distance(c, np.zeros((50, 3)), A, B), orthant_hilbert(A, B),
                       atol=1e-8)


def test_boundary_sampler_polyhedral_facet_is_a_ray():
    c = polyhedral_cone([[1.0, 0.0], [1.0, 1.0]])
    pts = boundary_sampler(c, np.zeros(2), 1, count=20)
    assert len(pts) >= 1
    assert np.allclose(c.values(np.zeros(2), pts)[:, 1], 0.0, atol=1e-10)
    assert np.all(c.values(np.zeros(2), pts)[:, 0] >= -1e-10)


def test_boundary_sampler_quadratic_facet():
    c = quadratic_cone(np.eye(3))
    pts = boundary_sampler(c, np.zeros(3), 1, count=50, rng=np.random.default_rng(2))
    assert len(pts) == 50
    vals = c.values(np.zeros(3), pts)
    assert np.allclose(vals[:, 1], 0.0, atol=1e-10)
    assert np.all(vals[:, 0] > 0)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)


def test_boundary_sampler_empty_facet_is_silent():
    c = quadratic_cone(np.eye(3))
    with warnings.catch_warnings():
        warnings.simplefilter("error", SamplerWarning)
        pts = boundary_sampler(c, np.zeros(3), 0, count=10, max_rounds=2)
    assert len(pts) == 0


def test_screen_cone_properties():
    rep = screen_cone(polyhedral_cone([[1.0, 0.0], [1.0, 1.0]]), np.zeros(2))
    assert rep["homogeneity_rel_error"] < 1e-12
    assert rep["nested"] and rep["pointed"]


def test_documented_orthant_examples():
    c = orthant(2)
    x = np.zeros(2)
    v = membership(c, x, [1.0, 2.0])
    assert v.status == INTERIOR and v.margin == pytest.approx(1 / np.sqrt(5))
    r = hilbert(c, x, [2.0, 1.0], [1.0, 1.0])
    assert (r.M, r.m) == (pytest.approx(2.0, rel=1e-9), pytest.approx(1.0, rel=1e-9))
    assert r.distance == pytest.approx(np.log(2), abs=1e-8)
    r = hilbert(c, x, [1.0, 1.0], [1.0, 1.0])
    assert r.M == pytest.approx(1.0) and r.m == pytest.approx(1.0) and r.distance < 1e-9


def test_orthant_facet_in_three_dimensions_is_a_quarter_circle():
    c = orthant(3)
    pts = boundary_sampler(c, np.zeros(3), 0, count=30, rng=np.random.default_rng(0))
    assert len(pts) > 1
    assert np.allclose(pts[:, 0], 0.0, atol=1e-10)
    assert np.all(pts[:, 1:] >= -1e-10)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)


def test_quadratic_axis_and_equator():
    c = quadratic_cone(np.eye(3))
    x = np.zeros(3)
    vals = c.values(x, np.array([1.0, 0.0, 0.0]))
    assert vals[1] == pytest.approx(1.0)
    eq = membership(c, x, [0.0, 0.6, 0.8])
    assert eq.status == OUTSIDE
