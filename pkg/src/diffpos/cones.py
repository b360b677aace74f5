"""Cone fields described by smooth constraint functions.

A direction ``dx != 0`` belongs to the cone ``K_eps(x)`` when every constraint
evaluated on the unit-normalized direction is at least ``eps``.  Constraint
callables are vectorized: ``values(x, dx)`` maps ``(..., n)`` inputs to
``(..., m)`` and ``grad_dx``/``grad_x`` map to ``(..., m, n)``.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .errors import (
    ConeConstructionError,
    DegenerateVectorError,
    InfeasibleConeError,
    PreconditionError,
    SamplerWarning,
)

POLYHEDRAL = "polyhedral"
QUADRATIC = "quadratic"
CUSTOM = "custom"

TOL_BOUNDARY = 1e-9
INTERIOR = "Interior"
BOUNDARY = "Boundary"
OUTSIDE = "Outside"


@dataclass(frozen=True, eq=False)
class ConeField:
    dim: int
    n_constraints: int
    values_fn: Callable
    grad_dx_fn: Callable
    grad_x_fn: Callable | None = None
    kind: str = CUSTOM
    degrees: tuple = ()
    facets: tuple | None = None
    frame: Callable | None = None
    metric: Callable | None = None
    constant: bool = False
    feasibility_eps: float = float("nan")
    name: str = "cone"
    params: dict = field(default_factory=dict)

    def metric_at(self, x):
        x = np.asarray(x, dtype=float)
        if self.metric is None:
            return np.broadcast_to(np.eye(self.dim), x.shape + (self.dim,))
        return np.asarray(self.metric(x), dtype=float)

    def norm(self, x, dx):
        dx = np.asarray(dx, dtype=float)
        if self.metric is None:
            return np.linalg.norm(dx, axis=-1)
        G = self.metric_at(x)
        return np.sqrt(np.maximum(np.einsum("...i,...ij,...j->...", dx, G, dx), 0.0))

    def normalize(self, x, dx):
        dx = np.asarray(dx, dtype=float)
        nrm = self.norm(x, dx)
        if np.any(nrm == 0):
            raise DegenerateVectorError("zero tangent vector has no direction")
        return dx / nrm[..., None]

    def values(self, x, dx):
        x, dx = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(dx, dtype=float))
        return np.asarray(self.values_fn(x, dx), dtype=float)

    def unit_values(self, x, dx):
        return self.values(x, self.normalize(x, dx))

    def grad_dx(self, x, dx):
        x, dx = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(dx, dtype=float))
        g = np.asarray(self.grad_dx_fn(x, dx), dtype=float)
        return np.broadcast_to(g, x.shape[:-1] + (self.n_constraints, self.dim))

    def grad_x(self, x, dx):
        x, dx = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(dx, dtype=float))
        shape = x.shape[:-1] + (self.n_constraints, self.dim)
        if self.grad_x_fn is not None:
            return np.broadcast_to(np.asarray(self.grad_x_fn(x, dx), dtype=float), shape)
        if self.constant and self.metric is None:
            return np.zeros(shape)
        out = np.empty(shape)
        for j in range(self.dim):
            step = 1e-6 * (1.0 + np.abs(x[..., j]))
            xp = np.array(x, copy=True)
            xm = np.array(x, copy=True)
            xp[..., j] += step
            xm[..., j] -= step
            out[..., :, j] = (self.values(xp, dx) - self.values(xm, dx)) / (2.0 * step[..., None])
        return out

    def facets_at(self, x):
        """Constraint indices whose zero set meets the cone in a non-zero ray."""
        if self.kind == POLYHEDRAL and self.facets is None:
            rays = extreme_rays(self, x)
            A = self.values(x, rays) if len(rays) else np.empty((0, self.n_constraints))
            return tuple(i for i in range(self.n_constraints) if np.any(np.abs(A[:, i]) <= 1e-10))
        if self.facets is None:
            return tuple(range(self.n_constraints))
        return self.facets


@dataclass
class MembershipVerdict:
    status: str
    margin: float
    active: tuple


@dataclass
class HilbertResult:
    M: float
    m: float
    distance: float


def _frame_fn(frame, dim):
    if callable(frame):
        return frame, False
    F = np.atleast_2d(np.asarray(frame, dtype=float))
    if F.shape[1] != dim:
        raise ConeConstructionError("frame rows must have length dim")
    return (lambda x: np.broadcast_to(F, np.shape(x)[:-1] + F.shape)), True


def _screen_points(dim, samples):
    if samples is None:
        return np.zeros((1, dim))
    return np.atleast_2d(np.asarray(samples, dtype=float))


def polyhedral_cone(frame, metric=None, *, dim=None, samples=None, n_starts=64, seed=0,
                    name="polyhedral"):
    """Cone ``<F_i(x), dx>_x >= 0`` for a full-rank family of generators.

    ``frame`` is an ``(m, n)`` array of constant rows or a callable
    ``x -> (..., m, n)``; state-dependent frames are screened (rank,
    feasibility) only at ``samples``.
    """
    if dim is None:
        if callable(frame):
            raise ConeConstructionError("dim is required for a state-dependent frame")
        dim = np.atleast_2d(frame).shape[1]
    frame_fn, constant = _frame_fn(frame, dim)
    pts = _screen_points(dim, samples)
    F0 = np.asarray(frame_fn(pts), dtype=float)
    m = F0.shape[-2]
    if m < dim:
        raise ConeConstructionError(f"need at least n={dim} generators, got {m}")
    if np.any(np.linalg.norm(F0, axis=-1) == 0):
        raise ConeConstructionError("generators must be non-zero")

    def rows(x):
        F = np.asarray(frame_fn(x), dtype=float)
        if metric is None:
            return F
        return F @ np.asarray(metric(x), dtype=float)

    cone = ConeField(
        dim=dim,
        n_constraints=m,
        values_fn=lambda x, dx: np.einsum("...mn,...n->...m", rows(x), dx),
        grad_dx_fn=lambda x, dx: rows(x),
        kind=POLYHEDRAL,
        degrees=(1,) * m,
        frame=frame_fn,
        metric=metric,
        constant=constant,
        name=name,
    )
    eps_bar = min(feasibility_margin(cone, p, n_starts=n_starts, seed=seed)[0] for p in pts)
    if eps_bar <= TOL_BOUNDARY:
        raise InfeasibleConeError(f"cone has empty interior (estimated margin {eps_bar:.3e})")
    if np.any(np.linalg.matrix_rank(F0) < dim):
        raise ConeConstructionError("generator frame is rank deficient at a sample point")
    cone = replace(cone, feasibility_eps=eps_bar)
    if constant:
        cone = replace(cone, facets=cone.facets_at(pts[0]))
    return cone


def quadratic_cone(frame, metric=None, *, dim=None, samples=None, n_starts=64, seed=0,
                   name="quadratic"):
    """Pointed quadratic cone from an orthogonal frame ``F_1 .. F_m``.

    ``K_1 = <F_1, dx>`` selects one nappe of the double cone
    ``K_2 = <F_1, dx>^2 - sum_{i>=2} <F_i, dx>^2``.
    """
    if dim is None:
        if callable(frame):
            raise ConeConstructionError("dim is required for a state-dependent frame")
        dim = np.atleast_2d(frame).shape[1]
    frame_fn, constant = _frame_fn(frame, dim)
    pts = _screen_points(dim, samples)
    F0 = np.asarray(frame_fn(pts), dtype=float)
    if F0.shape[-2] < dim:
        raise ConeConstructionError(f"need at least n={dim} frame vectors")
    G0 = np.broadcast_to(np.eye(dim), pts.shape + (dim,)) if metric is None else metric(pts)
    cross = np.einsum("...n,...nk,...ik->...i", F0[..., 0, :], G0, F0[..., 1:, :])
    if np.any(np.abs(cross) > 1e-8):
        raise ConeConstructionError("frame violates orthogonality <F_1, F_i> = 0 for i > 1")
    if np.any(np.linalg.matrix_rank(F0) < dim):
        raise ConeConstructionError("frame is rank deficient at a sample point")

    def rows(x):
        F = np.asarray(frame_fn(x), dtype=float)
        if metric is None:
            return F
        return F @ np.asarray(metric(x), dtype=float)

    def values(x, dx):
        p = np.einsum("...mn,...n->...m", rows(x), dx)
        k1 = p[..., 0]
        k2 = p[..., 0] ** 2 - np.sum(p[..., 1:] ** 2, axis=-1)
        return np.stack([k1, k2], axis=-1)

    def grad_dx(x, dx):
        R = rows(x)
        p = np.einsum("...mn,...n->...m", R, dx)
        g1 = R[..., 0, :]
        g2 = 2.0 * p[..., :1] * R[..., 0, :] - 2.0 * np.einsum("...m,...mn->...n", p[..., 1:], R[..., 1:, :])
        return np.stack([g1, g2], axis=-2)

    cone = ConeField(
        dim=dim,
        n_constraints=2,
        values_fn=values,
        grad_dx_fn=grad_dx,
        kind=QUADRATIC,
        degrees=(1, 2),
        facets=(1,) if dim > 1 else (),
        frame=frame_fn,
        metric=metric,
        constant=constant,
        name=name,
    )
    eps_bar = min(feasibility_margin(cone, p, n_starts=n_starts, seed=seed)[0] for p in pts)
    if eps_bar <= TOL_BOUNDARY:
        raise InfeasibleConeError(f"cone has empty interior (estimated margin {eps_bar:.3e})")
    return replace(cone, feasibility_eps=eps_bar)


def _unit_starts(rng, dim, count, metric_G):
    z = rng.standard_normal((count, dim))
    nrm = np.sqrt(np.einsum("ki,ij,kj->k", z, metric_G, z))
    return z / nrm[:, None]


def _maximin(cone, x, scores, score_grads, n_starts, seed, starts=None):
    """Maximize ``min_i scores_i(u)`` over the metric unit sphere (epigraph SLSQP)."""
    x = np.asarray(x, dtype=float)
    G = np.array(cone.metric_at(x))
    n = cone.dim
    rng = np.random.default_rng(seed)
    U0 = _unit_starts(rng, n, n_starts, G)
    if starts is not None:
        U0 = np.concatenate([np.atleast_2d(starts), U0])
    best_val, best_u = -np.inf, None
    cons = [
        {"type": "ineq",
         "fun": lambda z: scores(z[:n]) - z[n],
         "jac": (None if score_grads is None else
                 lambda z: np.hstack([score_grads(z[:n]), -np.ones((cone.n_constraints, 1))]))},
        {"type": "eq", "fun": lambda z: np.array([z[:n] @ G @ z[:n] - 1.0]),
         "jac": lambda z: np.hstack([2.0 * G @ z[:n], 0.0])[None, :]},
    ]
    cons = [{k: v for k, v in c.items() if v is not None} for c in cons]
    obj_grad = np.zeros(n + 1)
    obj_grad[n] = -1.0
    for u0 in U0:
        z0 = np.append(u0, np.min(scores(u0)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = minimize(lambda z: -z[n], z0, jac=lambda z: obj_grad, constraints=cons,
                           method="SLSQP", options={"maxiter": 200, "ftol": 1e-12})
        u = res.x[:n]
        nrm = np.sqrt(u @ G @ u)
        if not np.isfinite(nrm) or nrm == 0:
            continue
        u = u / nrm
        val = float(np.min(scores(u)))
        if val > best_val:
            best_val, best_u = val, u
    return best_val, best_u


def feasibility_margin(cone, x, n_starts=64, seed=0):
    """Estimate the largest ``eps`` for which ``K_eps(x)`` is non-empty.

    Returns ``(eps_bar, direction)``.
    """
    x = np.asarray(x, dtype=float)
    return _maximin(cone, x,
                    lambda u: cone.values(x, u),
                    lambda u: cone.grad_dx(x, u),
                    n_starts, seed)


def cone_center(cone, x, n_starts=16, seed=0, start=None):
    """Unit direction maximizing the smallest scaled constraint value.

    Each constraint is divided by the norm of its gradient so generators of
    different length weigh equally; for a polyhedral cone this is the
    direction farthest (in angle) from every facet.
    """
    x = np.asarray(x, dtype=float)

    def scores(u):
        g = cone.grad_dx(x, u)
        return cone.values(x, u) / np.maximum(np.linalg.norm(g, axis=-1), 1e-300)

    def unit_grads(u):
        g = cone.grad_dx(x, u)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    # for linear constraints the scaled scores have constant unit gradients
    grads = unit_grads if cone.kind == POLYHEDRAL else None
    return _maximin(cone, x, scores, grads, n_starts, seed, starts=start)[1]


def extreme_rays(cone, x):
    """Extreme rays of a polyhedral cone at ``x`` (unit metric norm)."""
    if cone.kind != POLYHEDRAL:
        raise PreconditionError("extreme rays are defined for polyhedral cones only")
    x = np.asarray(x, dtype=float)
    n = cone.dim
    A = cone.grad_dx(x, np.zeros(n))
    if n == 1:
        cands = [np.array([1.0]), np.array([-1.0])]
    else:
        cands = []
        for combo in itertools.combinations(range(cone.n_constraints), n - 1):
            sub = A[list(combo)]
            if np.linalg.matrix_rank(sub, tol=1e-10) < n - 1:
                continue
            r = np.linalg.svd(sub)[2][-1]
            cands.extend([r, -r])
    rays = []
    for r in cands:
        r = r / cone.norm(x, r)
        vals = A @ r
        if np.all(vals >= -1e-10) and not any(np.linalg.norm(r - q) < 1e-8 for q in rays):
            rays.append(np.where(np.abs(r) < 1e-15, 0.0, r))
    return np.array(rays).reshape(-1, n)


def membership(cone, x, dx, eps=0.0, tol=TOL_BOUNDARY):
    """Classify a single direction against ``K_eps(x)``.

    ``margin`` is ``min_i K_i(x, dx/|dx|) - eps``; ``active`` lists the
    0-based indices within ``tol`` of that minimum.
    """
    x = np.asarray(x, dtype=float)
    dx = np.asarray(dx, dtype=float)
    if cone.norm(x, dx) == 0:
        raise DegenerateVectorError("membership is undefined for the zero vector")
    k = cone.unit_values(x, dx) - eps
    margin = float(k.min())
    active = tuple(int(i) for i in np.flatnonzero(k <= margin + tol))
    if margin > tol:
        status = INTERIOR
    elif margin >= -tol:
        status = BOUNDARY
    else:
        status = OUTSIDE
    return MembershipVerdict(status, margin, active)


def unit_margins(cone, x, dx):
    """Vectorized ``min_i K_i(x, dx/|dx|)``."""
    return cone.unit_values(x, dx).min(axis=-1)


def _in_closed_cone(cone, x, w):
    vals = cone.values(x, w)
    return np.all(vals >= 0.0, axis=-1)


def _check_members(cone, x, *vecs):
    for v in vecs:
        if np.any(cone.norm(x, v) == 0):
            raise PreconditionError("Hilbert metric needs non-zero cone members")
        if np.any(unit_margins(cone, x, v) < -TOL_BOUNDARY):
            raise PreconditionError("Hilbert metric inputs must lie in the cone")


def _broadcast3(x, dx, dy):
    x, dx, dy = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, dx, dy)))
    return x, dx, dy


def hilbert_M(cone, x, dx, dy, rtol=1e-10, bound=1e12):
    """``inf {lam >= 0 : lam*dy - dx in K(x)}`` by bisection; ``inf`` if empty."""
    x, dx, dy = _broadcast3(x, dx, dy)
    _check_members(cone, x, dx, dy)
    shape = x.shape[:-1]

    def feasible(lam):
        return _in_closed_cone(cone, x, lam[..., None] * dy - dx)

    lo = np.zeros(shape)
    hi = np.ones(shape)
    ok = feasible(hi)
    while not ok.all():
        grow = ~ok & (hi < bound)
        if not grow.any():
            break
        lo = np.where(grow, hi, lo)
        hi = np.where(grow, 2.0 * hi, hi)
        ok = ok | (grow & feasible(hi))
    infinite = ~ok
    for _ in range(400):
        active = ~infinite & (hi - lo > rtol * hi)
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        f = feasible(mid)
        hi = np.where(active & f, mid, hi)
        lo = np.where(active & ~f, mid, lo)
    M = np.where(infinite, np.inf, 0.5 * (lo + hi))
    return M if shape else float(M)


def hilbert_m(cone, x, dx, dy, rtol=1e-10, bound=1e12, floor=1e-14):
    """``sup {lam >= 0 : dx - lam*dy in K(x)}`` by bisection."""
    x, dx, dy = _broadcast3(x, dx, dy)
    _check_members(cone, x, dx, dy)
    shape = x.shape[:-1]

    def feasible(lam):
        return _in_closed_cone(cone, x, dx - lam[..., None] * dy)

    scale = cone.norm(x, dx) / cone.norm(x, dy)
    lo = np.zeros(shape)
    hi = np.ones(shape)
    ok = feasible(hi)
    while True:
        grow = ok & (hi < bound)
        if not grow.any():
            break
        lo = np.where(grow, hi, lo)
        hi = np.where(grow, 2.0 * hi, hi)
        ok = np.where(grow, feasible(hi), ok)
    unbounded = ok
    zero = ~feasible(floor * scale) & (lo == 0)
    for _ in range(400):
        active = ~zero & ~unbounded & (hi - lo > rtol * hi)
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        f = feasible(mid)
        lo = np.where(active & f, mid, lo)
        hi = np.where(active & ~f, mid, hi)
    m = np.where(zero, 0.0, np.where(unbounded, np.inf, 0.5 * (lo + hi)))
    return m if shape else float(m)


def hilbert_distance(cone, x, dx, dy, rtol=1e-10):
    """Hilbert projective distance ``log(M/m)``; ``inf`` when undefined."""
    M = np.asarray(hilbert_M(cone, x, dx, dy, rtol=rtol))
    m = np.asarray(hilbert_m(cone, x, dx, dy, rtol=rtol))
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where((m > 0) & np.isfinite(M), np.log(M / np.where(m > 0, m, 1.0)), np.inf)
    d = np.maximum(d, 0.0)
    return d if d.shape else float(d)


def hilbert(cone, x, dx, dy):
    M = hilbert_M(cone, x, dx, dy)
    m = hilbert_m(cone, x, dx, dy)
    return HilbertResult(M, m, hilbert_distance(cone, x, dx, dy))


def project_to_level(cone, x, u, i, level=0.0, iters=50, tol=1e-12):
    """Newton-project unit directions onto ``K_i(x, u) = level`` on the sphere.

    Returns ``(projected, converged_mask)``.
    """
    x = np.asarray(x, dtype=float)
    u = np.array(u, dtype=float, copy=True)
    for _ in range(iters):
        val = cone.values(x, u)[..., i] - level
        g = cone.grad_dx(x, u)[..., i, :]
        gg = np.einsum("...n,...n->...", g, g)
        step = np.where(gg > 0, val / np.where(gg > 0, gg, 1.0), 0.0)
        u = u - step[..., None] * g
        nrm = cone.norm(x, u)
        u = u / np.where(nrm > 0, nrm, 1.0)[..., None]
        if np.all(np.abs(cone.values(x, u)[..., i] - level) <= tol):
            break
    res = np.abs(cone.values(x, u)[..., i] - level)
    return u, res <= 1e-10


def _dedupe(points, min_angle):
    points = np.asarray(points, dtype=float)
    if len(points) == 0:
        return points.reshape(0, points.shape[-1] if points.ndim > 1 else 0)
    kept = []
    for p in points:
        if not kept:
            kept.append(p)
            continue
        cos = np.clip(np.asarray(kept) @ p, -1.0, 1.0)
        if np.all(np.arccos(cos) >= min_angle):
            kept.append(p)
    return np.array(kept)


def boundary_sampler(cone, x, i, count=200, rng=None, level=0.0, max_rounds=20,
                     min_angle=1e-3, include_extreme=True):
    """Unit directions in the cone with ``K_i(x, theta) = level``.

    Uniform sphere samples are filtered to cone members and Newton-projected
    onto the level set; extreme rays are added exactly for polyhedral cones.
    Emits ``SamplerWarning`` when nothing is found on a facet that is known to
    be non-empty.  Fewer than ``count`` distinct samples is not a warning:
    a facet of a planar cone is a single ray.
    """
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(0) if rng is None else rng
    n = cone.dim
    found = []
    if include_extreme and cone.kind == POLYHEDRAL and level == 0.0:
        rays = extreme_rays(cone, x)
        if len(rays):
            on = np.abs(cone.values(x, rays)[:, i]) <= 1e-10
            found.extend(rays[on])
    G = np.array(cone.metric_at(x))
    for _ in range(max_rounds):
        if len(found) >= count:
            break
        cand = _unit_starts(rng, n, max(4 * count, 64), G)
        cand = cand[cone.values(x, cand).min(axis=-1) >= 0.0]
        if not len(cand):
            continue
        proj, ok = project_to_level(cone, x, cand, i, level)
        proj = proj[ok]
        if not len(proj):
            continue
        vals = cone.values(x, proj)
        others = np.delete(vals, i, axis=-1)
        good = np.all(others >= level - 1e-10, axis=-1) if level == 0.0 else np.all(others >= -1e-10, axis=-1)
        found.extend(proj[good])
        found = list(_dedupe(np.array(found), min_angle))
    out = _dedupe(np.array(found).reshape(-1, n), min_angle)[:count] if found else np.empty((0, n))
    if len(out) == 0 and i in cone.facets_at(x):
        warnings.warn(f"no boundary samples found for constraint {i} at x={x.tolist()}",
                      SamplerWarning, stacklevel=2)
    return out


def screen_cone(cone, x, rng=None, count=500, eps_grid=(0.0, 0.01, 0.1)):
    """Sample-based checks of homogeneity, nesting and pointedness at ``x``."""
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(0) if rng is None else rng
    U = _unit_starts(rng, cone.dim, count, np.array(cone.metric_at(x)))
    out = {}
    homog = 0.0
    base = cone.values(x, U)
    for rho in (1e-3, 10.0):
        scaled = cone.values(x, rho * U)
        expect = base * rho ** np.asarray(cone.degrees)
        homog = max(homog, float(np.max(np.abs(scaled - expect) / (1e-12 + np.abs(expect)))))
    out["homogeneity_rel_error"] = homog
    k = base.min(axis=-1)
    nested = True
    for e1, e2 in itertools.combinations(sorted(eps_grid), 2):
        nested &= bool(np.all(~(k > e2 + TOL_BOUNDARY) | (k > e1 + TOL_BOUNDARY)))
    out["nested"] = nested
    kneg = cone.values(x, -U).min(axis=-1)
    out["pointed"] = bool(not np.any((k > TOL_BOUNDARY) & (kneg > TOL_BOUNDARY)))
    return out
