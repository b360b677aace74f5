"""Vector fields on R^n and flat tori, and their fixed-step integration.

All callables are vectorized over leading axes: ``f(x)`` maps ``(..., n)`` to
``(..., n)``, ``jac(x)`` and ``metric(x)`` map ``(..., n)`` to ``(..., n, n)``.
Integrators accept batches of initial conditions the same way.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    DegenerateVectorError,
    DivergenceError,
    EvaluationError,
    NormalizationError,
    PreconditionError,
)
from .regions import CompactRegion, PhaseGapRegion, Region, TubeRegion, state_difference, wrap_state
from .reports import FAIL, PASS, CheckReport

__all__ = [
    "SystemModel",
    "Trajectory",
    "TangentTrajectory",
    "CompactRegion",
    "PhaseGapRegion",
    "TubeRegion",
    "eval_jacobian",
    "finite_difference_jacobian",
    "validate_model",
    "integrate_trajectory",
    "integrate_prolonged",
    "iter_prolonged",
    "normalization_lambda",
    "integrate_normalized",
    "check_forward_invariance",
]


@dataclass(frozen=True, eq=False)
class SystemModel:
    """``xdot = f(x)`` with optional analytic Jacobian and Riemannian metric.

    ``wrap[i]`` marks coordinate ``i`` as an angle on the circle (period 2*pi,
    represented in [-pi, pi)).  ``metric=None`` means the Euclidean metric.
    """

    dim: int
    f: Callable
    jac: Callable | None = None
    metric: Callable | None = None
    wrap: tuple | None = None
    name: str = "model"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.dim) < 1:
            raise PreconditionError("dim must be a positive integer")
        wrap = (False,) * self.dim if self.wrap is None else tuple(bool(w) for w in self.wrap)
        if len(wrap) != self.dim:
            raise PreconditionError("wrap flags must have length dim")
        object.__setattr__(self, "wrap", wrap)

    @property
    def wrap_mask(self):
        return np.asarray(self.wrap, dtype=bool)

    @property
    def metric_constant(self):
        return self.metric is None

    def field(self, x):
        x = np.asarray(x, dtype=float)
        v = np.asarray(self.f(x), dtype=float)
        if not np.all(np.isfinite(v)):
            bad = np.argwhere(~np.isfinite(v))[0]
            raise EvaluationError(f"non-finite vector field entry at index {tuple(bad)}",
                                  coordinate=tuple(int(b) for b in bad))
        return v

    def metric_at(self, x):
        x = np.asarray(x, dtype=float)
        if self.metric is None:
            return np.broadcast_to(np.eye(self.dim), x.shape + (self.dim,))
        return np.asarray(self.metric(x), dtype=float)

    def inner(self, x, a, b):
        if self.metric is None:
            return np.einsum("...i,...i->...", a, b)
        return np.einsum("...i,...ij,...j->...", a, self.metric_at(x), b)

    def norm(self, x, v):
        return np.sqrt(np.maximum(self.inner(x, v, v), 0.0))


def finite_difference_jacobian(model, x):
    """Central differences with per-axis step ``1e-6 * (1 + |x_j|)``."""
    x = np.asarray(x, dtype=float)
    n = model.dim
    J = np.empty(x.shape + (n,))
    for j in range(n):
        step = 1e-6 * (1.0 + np.abs(x[..., j]))
        xp = np.array(x, copy=True)
        xm = np.array(x, copy=True)
        xp[..., j] += step
        xm[..., j] -= step
        J[..., :, j] = (model.field(xp) - model.field(xm)) / (2.0 * step[..., None])
    return J


def eval_jacobian(model, x):
    x = np.asarray(x, dtype=float)
    if model.jac is not None:
        J = np.asarray(model.jac(x), dtype=float)
        J = np.broadcast_to(J, x.shape + (model.dim,))
    else:
        J = finite_difference_jacobian(model, x)
    if not np.all(np.isfinite(J)):
        bad = tuple(int(b) for b in np.argwhere(~np.isfinite(J))[0])
        raise EvaluationError(f"non-finite Jacobian entry at index {bad}", coordinate=bad)
    return J


def metric_derivative(model, x):
    """Array ``D[..., i, :, :] = dG/dx_i``; zeros for the Euclidean metric."""
    x = np.asarray(x, dtype=float)
    n = model.dim
    if model.metric_constant:
        return np.zeros(x.shape[:-1] + (n, n, n))
    D = np.empty(x.shape[:-1] + (n, n, n))
    for i in range(n):
        step = 1e-6 * (1.0 + np.abs(x[..., i]))
        xp = np.array(x, copy=True)
        xm = np.array(x, copy=True)
        xp[..., i] += step
        xm[..., i] -= step
        D[..., i, :, :] = (model.metric_at(xp) - model.metric_at(xm)) / (2.0 * step[..., None, None])
    return D


def validate_model(model, points, rtol=1e-5):
    """Screen metric positivity and the analytic Jacobian at sample points.

    Returns a dict with the smallest metric eigenvalue and the largest
    relative Jacobian discrepancy; raises ``EvaluationError`` on violation.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    G = model.metric_at(points)
    if not np.allclose(G, np.swapaxes(G, -1, -2), atol=1e-12):
        raise EvaluationError("metric is not symmetric")
    min_eig = float(np.linalg.eigvalsh(G).min())
    if min_eig <= 0:
        raise EvaluationError(f"metric not positive definite (min eigenvalue {min_eig:.3e})")
    jac_err = 0.0
    if model.jac is not None:
        Ja = eval_jacobian(model, points)
        Jf = finite_difference_jacobian(model, points)
        scale = np.maximum(1.0, np.abs(Ja).max(axis=(-1, -2)))
        jac_err = float((np.abs(Ja - Jf).max(axis=(-1, -2)) / scale).max())
        if jac_err > rtol:
            raise EvaluationError(f"analytic Jacobian disagrees with finite differences ({jac_err:.2e})")
    return {"min_metric_eigenvalue": min_eig, "jacobian_rel_error": jac_err}


def _step_plan(T, h):
    if h <= 0:
        raise PreconditionError("step h must be positive")
    if T < 0:
        raise PreconditionError("horizon T must be non-negative")
    if T == 0:
        return 0, h
    n = max(1, int(round(T / h)))
    return n, T / n


def _rk4(rhs, y, h):
    k1 = rhs(y)
    k2 = rhs(tuple(a + 0.5 * h * b for a, b in zip(y, k1)))
    k3 = rhs(tuple(a + 0.5 * h * b for a, b in zip(y, k2)))
    k4 = rhs(tuple(a + h * b for a, b in zip(y, k3)))
    return tuple(a + (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
                 for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4))


# States beyond this magnitude are treated as a finite-time blow-up.
DIVERGENCE_BOUND = 1e12


def _check_finite(arrays, t):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise DivergenceError(f"non-finite state at t={t:.6g}", time=t)
        if np.max(np.abs(a), initial=0.0) > DIVERGENCE_BOUND:
            raise DivergenceError(f"state exceeded {DIVERGENCE_BOUND:.0e} at t={t:.6g}", time=t)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    @property
    def final(self):
        return self.states[-1]


@dataclass
class TangentTrajectory:
    """Solution of the prolonged (or normalized) system.

    ``directions`` are unit tangents in the model metric; the tangent itself
    is ``exp(log_mags) * directions`` and is never materialized internally.
    """

    times: np.ndarray
    states: np.ndarray
    directions: np.ndarray
    log_mags: np.ndarray
    renormalizations: int = 0
    max_drift: float = 0.0

    def tangents(self):
        return np.exp(self.log_mags)[..., None] * self.directions


def _iterate(rhs, y0, T, h, wrap, stride, post=None):
    """Fixed-step RK4 driver yielding ``(t, y)`` at stored steps."""
    n_steps, h = _step_plan(T, h)
    stride = max(1, int(stride))
    y = tuple(np.array(a, dtype=float) for a in y0)
    yield 0.0, y
    for k in range(1, n_steps + 1):
        y = _rk4(rhs, y, h)
        t = k * h
        if np.any(wrap):
            y = (wrap_state(y[0], wrap),) + y[1:]
        _check_finite(y, t)
        if post is not None:
            y = post(t, y)
        if k % stride == 0 or k == n_steps:
            yield t, y


def integrate_trajectory(model, x0, T, h=1e-3, stride=1):
    """Classical RK4 with fixed step; wrapped axes reduced to [-pi, pi)."""
    x0 = wrap_state(np.asarray(x0, dtype=float), model.wrap_mask)
    times, states = [], []
    for t, (x,) in _iterate(lambda y: (model.field(y[0]),), (x0,), T, h, model.wrap_mask, stride):
        times.append(t)
        states.append(x)
    return Trajectory(np.array(times), np.array(states))


def iter_prolonged(model, x0, dx0, T, h=1e-3, stride=1):
    """Yield ``(t, x, direction, log_mag)`` along the prolonged system.

    The tangent is renormalized every step and its magnitude accumulated in
    ``log_mag``, so long horizons neither overflow nor underflow.
    """
    x0 = wrap_state(np.asarray(x0, dtype=float), model.wrap_mask)
    dx0 = np.asarray(dx0, dtype=float)
    x0, dx0 = np.broadcast_arrays(x0, dx0)
    mag0 = model.norm(x0, dx0)
    if np.any(mag0 == 0) or not np.all(np.isfinite(mag0)):
        raise DegenerateVectorError("initial tangent must be non-zero")
    acc = {"log": np.log(mag0)}

    def rhs(y):
        x, d = y
        return model.field(x), np.einsum("...ij,...j->...i", eval_jacobian(model, x), d)

    def renorm(t, y):
        x, d = y
        m = model.norm(x, d)
        acc["log"] = acc["log"] + np.log(m)
        return x, d / m[..., None]

    for t, (x, d) in _iterate(rhs, (x0, dx0 / mag0[..., None]), T, h, model.wrap_mask, stride,
                              post=renorm):
        yield t, x, d, acc["log"]


def integrate_prolonged(model, x0, dx0, T, h=1e-3, stride=1):
    """Co-integrate ``(x, dx)``; the magnitude of ``dx`` is kept as a log."""
    times, states, dirs, logs = [], [], [], []
    for t, x, d, lg in iter_prolonged(model, x0, dx0, T, h, stride):
        times.append(t)
        states.append(x)
        dirs.append(d)
        logs.append(lg)
    return TangentTrajectory(np.array(times), np.array(states), np.array(dirs), np.array(logs))


def normalization_lambda(model, x, theta, J=None):
    """Rate that keeps the metric norm of the normalized tangent equal to one.

    ``0.5 * theta^T (G J + J^T G + sum_i dG/dx_i f_i) theta``.
    """
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    J = eval_jacobian(model, x) if J is None else J
    Jth = np.einsum("...ij,...j->...i", J, theta)
    if model.metric_constant:
        return np.einsum("...i,...i->...", theta, Jth)
    G = model.metric_at(x)
    lam = np.einsum("...i,...ij,...j->...", theta, G, Jth)
    dG = np.einsum("...ijk,...i->...jk", metric_derivative(model, x), model.field(x))
    return lam + 0.5 * np.einsum("...i,...ij,...j->...", theta, dG, theta)


def integrate_normalized(model, x0, theta0, T, h=1e-3, stride=1,
                         drift_warn=1e-8, drift_max=1e-6):
    """Integrate ``theta' = (J - lambda) theta`` alongside the state.

    Drift above ``drift_warn`` is corrected by renormalization and counted;
    drift above ``drift_max`` raises ``NormalizationError``.
    """
    x0 = wrap_state(np.asarray(x0, dtype=float), model.wrap_mask)
    th0 = np.asarray(theta0, dtype=float)
    x0, th0 = np.broadcast_arrays(x0, th0)
    if np.any(np.abs(model.norm(x0, th0) - 1.0) > 1e-8):
        raise PreconditionError("theta0 must have unit norm (tolerance 1e-8)")

    def rhs(y):
        x, th = y
        J = eval_jacobian(model, x)
        lam = normalization_lambda(model, x, th, J)
        return model.field(x), np.einsum("...ij,...j->...i", J, th) - lam[..., None] * th

    stats = {"renorm": 0, "drift": 0.0}

    def guard(t, y):
        x, th = y
        nrm = model.norm(x, th)
        drift = float(np.max(np.abs(nrm - 1.0)))
        stats["drift"] = max(stats["drift"], drift)
        if drift > drift_max:
            raise NormalizationError(f"unit-norm drift {drift:.3e} at t={t:.6g}; reduce the step size")
        if drift > drift_warn:
            stats["renorm"] += 1
            th = th / nrm[..., None]
        return x, th

    times, states, dirs = [], [], []
    for t, (x, th) in _iterate(rhs, (x0, th0), T, h, model.wrap_mask, stride, post=guard):
        times.append(t)
        states.append(x)
        dirs.append(th)
    dirs = np.array(dirs)
    return TangentTrajectory(np.array(times), np.array(states), dirs,
                             np.zeros(dirs.shape[:-1]), stats["renorm"], stats["drift"])


def check_forward_invariance(model, region, T=5.0, h=1e-3, boundary_samples=None, tol=1e-9):
    """Screen forward invariance by integrating from boundary samples.

    Only boundary points are integrated: with unique solutions an interior
    trajectory cannot leave before some boundary trajectory does.
    """
    pts = region.boundary(boundary_samples)
    echo = {"T": T, "h": h, "boundary_samples": boundary_samples, "tol": tol,
            "region": region.to_dict()}
    if len(pts) == 0:
        return CheckReport("forward_invariance", PASS, 0.0, 0.0, {}, 0, echo,
                           notes=["region has no boundary"])
    worst = np.full(len(pts), -np.inf)
    worst_state = np.array(pts, copy=True)
    worst_time = np.zeros(len(pts))
    try:
        for t, (x,) in _iterate(lambda y: (model.field(y[0]),), (pts,), T, h, model.wrap_mask, 1):
            e = region.excess(x)
            upd = e > worst
            worst = np.where(upd, e, worst)
            worst_state[upd] = x[upd]
            worst_time[upd] = t
    except DivergenceError as err:
        return CheckReport("forward_invariance", FAIL, -np.inf, 0.0,
                           {"time": err.time, "reason": "divergence"}, len(pts), echo)
    i = int(np.argmax(worst))
    max_exit = float(worst[i])
    verdict = FAIL if max_exit > tol else PASS
    witness = {"x0": pts[i], "x": worst_state[i], "time": worst_time[i], "excess": max_exit}
    return CheckReport("forward_invariance", verdict, -max_exit, 0.0, witness,
                       len(pts), echo)


def wrapped_difference(model, a, b):
    return state_difference(a, b, model.wrap_mask)


__all__ += ["Region", "wrapped_difference", "metric_derivative"]
