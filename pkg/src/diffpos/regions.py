"""Compact candidate regions: axis-aligned boxes, phase-gap sets and tubes.

Every region exposes the same small surface used by the checkers:
``grid(density)``, ``boundary(density)``, ``sample(rng, count)``,
``excess(x)`` (positive outside, ``<= 0`` inside) and ``contains(x, tol)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .errors import PreconditionError

TWO_PI = 2.0 * np.pi


def wrap_angle(a):
    """Reduce angles to [-pi, pi)."""
    return (np.asarray(a, dtype=float) + np.pi) % TWO_PI - np.pi


def wrap_state(x, wrap):
    x = np.array(x, dtype=float, copy=True)
    if np.any(wrap):
        x[..., wrap] = wrap_angle(x[..., wrap])
    return x


def state_difference(a, b, wrap):
    """``a - b`` with shortest-arc differences on wrapped axes."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if np.any(wrap):
        d = np.array(d, copy=True)
        d[..., wrap] = wrap_angle(d[..., wrap])
    return d


def circular_spread(theta):
    """Length of the shortest arc containing all phases (last axis)."""
    th = np.sort(np.mod(np.asarray(theta, dtype=float), TWO_PI), axis=-1)
    gaps = np.diff(th, axis=-1)
    wrap_gap = th[..., :1] + TWO_PI - th[..., -1:]
    gaps = np.concatenate([gaps, wrap_gap], axis=-1)
    return TWO_PI - gaps.max(axis=-1)


class Region:
    dim: int
    wrap: tuple

    @property
    def wrap_mask(self):
        return np.asarray(self.wrap, dtype=bool)

    def excess(self, x):
        raise NotImplementedError

    def contains(self, x, tol=1e-9):
        return self.excess(x) <= tol

    def grid(self, density):
        raise NotImplementedError

    def boundary(self, density):
        raise NotImplementedError

    def sample(self, rng, count):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class CompactRegion(Region):
    """Axis-aligned box; wrapped axes may cover a sub-arc or the full circle."""

    lo: tuple
    hi: tuple
    wrap: tuple = None
    grid_density: int = 15

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi) or not lo:
            raise PreconditionError("lo and hi must be non-empty and of equal length")
        wrap = (False,) * len(lo) if self.wrap is None else tuple(bool(w) for w in self.wrap)
        if len(wrap) != len(lo):
            raise PreconditionError("wrap flags must match the region dimension")
        for i, (a, b, w) in enumerate(zip(lo, hi, wrap)):
            if not np.isfinite(a) or not np.isfinite(b):
                raise PreconditionError(f"axis {i}: bounds must be finite")
            if not w and not a < b:
                raise PreconditionError(f"axis {i}: lo < hi required, got {a} >= {b}")
            if w and not (a < b and b - a <= TWO_PI + 1e-12):
                raise PreconditionError(f"axis {i}: wrapped arc must satisfy lo < hi <= lo + 2pi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "wrap", wrap)

    @property
    def dim(self):
        return len(self.lo)

    def _full_circle(self, i):
        return self.wrap[i] and self.hi[i] - self.lo[i] >= TWO_PI - 1e-12

    def excess(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape[:-1], -np.inf)
        for i in range(self.dim):
            if self._full_circle(i):
                continue
            xi = x[..., i]
            lo, hi = self.lo[i], self.hi[i]
            if self.wrap[i]:
                # distance to the arc measured along the circle
                mid = 0.5 * (lo + hi)
                e = np.abs(wrap_angle(xi - mid)) - 0.5 * (hi - lo)
            else:
                e = np.maximum(lo - xi, xi - hi)
            out = np.maximum(out, e)
        return out

    def _axis_points(self, i, density):
        if self._full_circle(i):
            return -np.pi + TWO_PI * (np.arange(density) + 0.5) / density
        return np.linspace(self.lo[i], self.hi[i], density)

    def grid(self, density=None):
        density = density or self.grid_density
        axes = [self._axis_points(i, density) for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def boundary(self, density=None):
        density = density or self.grid_density
        faces = []
        for i in range(self.dim):
            if self._full_circle(i):
                continue
            axes = [self._axis_points(j, density) for j in range(self.dim)]
            for value in (self.lo[i], self.hi[i]):
                axes_i = list(axes)
                axes_i[i] = np.array([value])
                mesh = np.meshgrid(*axes_i, indexing="ij")
                faces.append(np.stack([m.ravel() for m in mesh], axis=-1))
        if not faces:
            return np.empty((0, self.dim))
        pts = np.unique(np.round(np.concatenate(faces), 14), axis=0)
        return wrap_state(pts, self.wrap_mask)

    def sample(self, rng, count):
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return wrap_state(lo + (hi - lo) * rng.random((count, self.dim)), self.wrap_mask)

    def to_dict(self):
        return {"type": "box", "lo": list(self.lo), "hi": list(self.hi), "wrap": list(self.wrap)}


@dataclass(frozen=True)
class PhaseGapRegion(Region):
    """Phases on the n-torus whose circular spread is at most ``max_gap``.

    Pairwise gaps below ``max_gap`` is the same as the shortest containing
    arc being shorter than ``max_gap`` (for ``max_gap < pi``).  The region is
    invariant under common rotation, so ``grid`` returns a reproducible
    quasi-random cover (Sobol offsets plus the cube vertices) rather than a
    tensor grid.
    """

    n: int
    max_gap: float
    grid_density: int = 15
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise PreconditionError("phase-gap region needs n >= 2")
        if not 0.0 < self.max_gap < np.pi:
            raise PreconditionError("max_gap must lie in (0, pi)")

    @property
    def dim(self):
        return self.n

    @property
    def wrap(self):
        return (True,) * self.n

    def excess(self, x):
        return circular_spread(x) - self.max_gap

    def _offsets(self, count, seed):
        m = 1 << int(np.ceil(np.log2(max(count, 2))))
        sob = qmc.Sobol(d=self.n, scramble=True, seed=seed).random(m)[:count]
        return sob * self.max_gap

    def grid(self, density=None):
        density = density or self.grid_density
        count = density * density
        offsets = self._offsets(count, self.seed)
        verts = np.array(list(itertools.product((0.0, self.max_gap), repeat=self.n)))
        pts = np.concatenate([offsets, verts]) - 0.5 * self.max_gap
        rot = np.random.default_rng(self.seed).uniform(-np.pi, np.pi, len(pts))
        return wrap_angle(pts + rot[:, None])

    def boundary(self, density=None):
        density = density or self.grid_density
        count = density * density
        rng = np.random.default_rng(self.seed + 1)
        offsets = self._offsets(count, self.seed + 1)
        for row in offsets:
            i, j = rng.choice(self.n, size=2, replace=False)
            row[i] = 0.0
            row[j] = self.max_gap
        rot = rng.uniform(-np.pi, np.pi, count)
        return wrap_angle(offsets + rot[:, None])

    def sample(self, rng, count):
        offsets = rng.random((count, self.n)) * self.max_gap
        rot = rng.uniform(-np.pi, np.pi, count)
        return wrap_angle(offsets + rot[:, None])

    def to_dict(self):
        return {"type": "gap", "n": self.n, "max_gap": self.max_gap}


@dataclass(frozen=True)
class TubeRegion(Region):
    """Band ``|v - center(theta)| <= halfwidth`` on the cylinder S x R.

    Axis 0 is the wrapped angle, axis 1 the unbounded coordinate.
    """

    center: Callable = field(compare=False)
    halfwidth: float = 0.05
    grid_density: int = 15
    label: str = "tube"

    @property
    def dim(self):
        return 2

    @property
    def wrap(self):
        return (True, False)

    def excess(self, x):
        x = np.asarray(x, dtype=float)
        return np.abs(x[..., 1] - self.center(x[..., 0])) - self.halfwidth

    def _theta(self, count):
        return -np.pi + TWO_PI * (np.arange(count) + 0.5) / count

    def grid(self, density=None):
        density = density or self.grid_density
        th, w = np.meshgrid(self._theta(4 * density),
                            np.linspace(-self.halfwidth, self.halfwidth, density),
                            indexing="ij")
        th = th.ravel()
        return np.stack([th, self.center(th) + w.ravel()], axis=-1)

    def boundary(self, density=None):
        density = density or self.grid_density
        th = self._theta(4 * density)
        c = self.center(th)
        return np.concatenate([np.stack([th, c - self.halfwidth], -1),
                               np.stack([th, c + self.halfwidth], -1)])

    def sample(self, rng, count):
        th = rng.uniform(-np.pi, np.pi, count)
        w = rng.uniform(-self.halfwidth, self.halfwidth, count)
        return np.stack([th, self.center(th) + w], axis=-1)

    def to_dict(self):
        return {"type": "tube", "label": self.label, "halfwidth": self.halfwidth}
