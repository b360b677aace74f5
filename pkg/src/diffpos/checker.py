"""Sampled certification of differential positivity.

Three pointwise tests evaluate the derivative of each cone constraint along
the prolonged vector field at directions sampled on (or near) the cone
boundary.  Two trajectory-level tests complement them: direct propagation of
cone members (``verify_invariance_along_flow``) and a log-linear fit of the
Hilbert distance between propagated pairs (``estimate_contraction``).
Every verdict is a statement at sample resolution, not a proof.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .cones import (
    POLYHEDRAL,
    boundary_sampler,
    extreme_rays,
    hilbert_distance,
    unit_margins,
)
from .dynamics import (
    _iterate,
    check_forward_invariance,
    eval_jacobian,
    iter_prolonged,
    normalization_lambda,
)
from .errors import DivergenceError, PreconditionError, SamplerWarning
from .reports import FAIL, PASS, CheckReport, ContractionReport, decide


@dataclass(frozen=True)
class CheckSettings:
    """Sampling densities and tolerances shared by the pointwise checks."""

    density: int = 15
    n_directions: int = 200
    tol: float = 1e-9
    strict_margin: float = 1e-6
    seed: int = 0
    assume_invariant: bool = False
    invariance_T: float = 5.0
    invariance_h: float = 1e-3
    band_levels: int = 3


def prolonged_derivative(model, cone, x, theta, i, normalized=False):
    """Rate of change of ``K_i(x, theta)`` along the prolonged vector field.

    With ``normalized=True`` the tangent follows ``(J - lambda) theta``, the
    dynamics that keep ``theta`` on the unit sphere.
    """
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    x, theta = np.broadcast_arrays(x, theta)
    fx = model.field(x)
    dth = np.einsum("...ij,...j->...i", eval_jacobian(model, x), theta)
    if normalized:
        dth = dth - normalization_lambda(model, x, theta)[..., None] * theta
    gx = cone.grad_x(x, theta)[..., i, :]
    gd = cone.grad_dx(x, theta)[..., i, :]
    return np.einsum("...n,...n->...", gx, fx) + np.einsum("...n,...n->...", gd, dth)


def _screen_invariance(model, region, settings):
    if settings.assume_invariant:
        return ["forward invariance assumed by override"]
    rep = check_forward_invariance(model, region, T=settings.invariance_T, h=settings.invariance_h)
    if rep.verdict != PASS:
        raise PreconditionError(
            "region failed the forward-invariance screen "
            f"(exit {-rep.worst_margin:.3e} from x0={np.asarray(rep.witness.get('x0')).tolist()}); "
            "pass assume_invariant=True to override")
    return [f"forward invariance screened (T={settings.invariance_T}, "
            f"worst margin {rep.worst_margin:.3e})"]


def _facet_samples(cone, x, levels, settings, rng, caught):
    """Per-constraint direction samples at ``x`` on the requested level sets."""
    out = {}
    facets = cone.facets_at(x)
    for i in range(cone.n_constraints):
        chunks = []
        for level in levels:
            if level == 0.0 and i not in facets:
                continue
            with warnings.catch_warnings(record=True) as rec:
                warnings.simplefilter("always", SamplerWarning)
                pts = boundary_sampler(cone, x, i, count=settings.n_directions, rng=rng, level=level)
            caught.extend(str(w.message) for w in rec if issubclass(w.category, SamplerWarning))
            if len(pts):
                chunks.append(pts)
        out[i] = np.concatenate(chunks) if chunks else np.empty((0, cone.dim))
    return out


def _pointwise(name, model, cone, region, settings, levels, normalized, threshold):
    if cone.dim != model.dim:
        raise PreconditionError("cone and model dimensions differ")
    notes = _screen_invariance(model, region, settings)
    rng = np.random.default_rng(settings.seed)
    X = region.grid(settings.density)
    caught = []
    cached = _facet_samples(cone, X[0], levels, settings, rng, caught) if cone.constant else None

    xs, ths, idx = [], [], []
    for x in X:
        samples = cached if cone.constant else _facet_samples(cone, x, levels, settings, rng, caught)
        for i, th in samples.items():
            if len(th):
                xs.append(np.broadcast_to(x, th.shape))
                ths.append(th)
                idx.append(np.full(len(th), i))
    n = model.dim
    if xs:
        xs = np.concatenate(xs)
        ths = np.concatenate(ths)
        idx = np.concatenate(idx)
        vals = np.empty(len(xs))
        for i in range(cone.n_constraints):
            sel = idx == i
            if sel.any():
                vals[sel] = prolonged_derivative(model, cone, xs[sel], ths[sel], i, normalized)
    else:
        xs = np.empty((0, n))
        ths = np.empty((0, n))
        idx = np.empty(0, dtype=int)
        vals = np.empty(0)
        notes.append("no boundary directions exist (empty facets); condition holds vacuously")

    if len(vals):
        k = int(np.argmin(vals))
        worst = float(vals[k])
        witness = {"x": xs[k], "theta": ths[k], "constraint": int(idx[k]), "margin": worst}
    else:
        worst = np.inf
        witness = {}
    starved = bool(caught)
    verdict = decide(worst, threshold, settings.tol, starved)
    margins = np.column_stack([xs, ths, idx, vals]) if len(vals) else np.empty((0, 2 * n + 2))
    columns = ([f"x_{j + 1}" for j in range(n)] + [f"theta_{j + 1}" for j in range(n)]
               + ["constraint", "margin"])
    echo = {**asdict(settings), "region": region.to_dict(), "cone": cone.name,
            "model": model.name, "levels": list(levels), "threshold": threshold}
    return CheckReport(name, verdict, worst, threshold, witness, int(len(vals)), echo,
                       warnings=sorted(set(caught)), notes=notes, margin_columns=columns,
                       margins=margins)


def _settings(settings, overrides):
    settings = settings or CheckSettings()
    if overrides:
        settings = CheckSettings(**{**asdict(settings), **overrides})
    return settings


def check_theorem1(model, cone, region, settings=None, **overrides):
    """Boundary condition: ``dK_i/dt >= 0`` wherever ``K_i = 0`` on the cone.

    Sufficient for invariance of the cone field along the flow.
    """
    s = _settings(settings, overrides)
    return _pointwise("theorem1", model, cone, region, s, (0.0,), False, 0.0)


def check_theorem2(model, cone, region, T, eps, settings=None, **overrides):
    """Band condition along the normalized dynamics.

    On the band ``0 <= K_i <= eps`` the derivative of ``K_i`` along
    ``(f, (J - lambda) theta)`` must be at least ``eps / T``.
    """
    s = _settings(settings, overrides)
    if not T > 0:
        raise PreconditionError("T must be positive")
    if not eps > 0:
        raise PreconditionError("eps must be positive")
    if np.isfinite(cone.feasibility_eps) and eps > cone.feasibility_eps:
        raise PreconditionError(
            f"eps={eps} exceeds the estimated feasibility margin {cone.feasibility_eps:.4g}")
    levels = tuple(np.linspace(0.0, eps, max(2, s.band_levels)))
    rep = _pointwise("theorem2", model, cone, region, s, levels, True, eps / T)
    rep.config_echo.update({"T": T, "eps": eps})
    return rep


def check_theorem3(model, cone, region, settings=None, **overrides):
    """Strict boundary condition: ``dK_i/dt >= strict_margin`` on every facet."""
    s = _settings(settings, overrides)
    return _pointwise("theorem3", model, cone, region, s, (0.0,), False, s.strict_margin)


def search_theorem2(model, cone, region, T_grid=(0.5, 1.0, 2.0, 5.0),
                    eps_grid=(0.1, 0.05, 0.02, 0.01), settings=None, **overrides):
    """Coarse search for a passing ``(T, eps)``; returns the first PASS or the last report."""
    rep = None
    for eps in eps_grid:
        if np.isfinite(cone.feasibility_eps) and eps > cone.feasibility_eps:
            continue
        for T in T_grid:
            rep = check_theorem2(model, cone, region, T, eps, settings, **overrides)
            if rep.verdict == PASS:
                return rep
    if rep is None:
        raise PreconditionError("no eps in the grid is below the feasibility margin")
    return rep


# -- trajectory-level tests ---------------------------------------------------

def sample_cone_directions(cone, x, rng, count, min_margin=0.0, max_tries=200):
    """Random unit directions with ``min_i K_i >= min_margin`` at each ``x``.

    ``x`` is an ``(count, n)`` batch.  Rejection sampling from the sphere; the
    remaining rows fall back to the cone's most interior sample.
    """
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, np.nan)
    todo = np.ones(len(x), dtype=bool)
    best = np.full(len(x), -np.inf)
    fallback = np.zeros(x.shape)
    for _ in range(max_tries):
        if not todo.any():
            break
        z = rng.standard_normal((int(todo.sum()), cone.dim))
        z = cone.normalize(x[todo], z)
        m = unit_margins(cone, x[todo], z)
        rows = np.flatnonzero(todo)
        better = m > best[rows]
        fallback[rows[better]] = z[better]
        best[rows[better]] = m[better]
        ok = m >= min_margin
        out[rows[ok]] = z[ok]
        todo[rows[ok]] = False
    out[todo] = fallback[todo]
    return out


def _initial_tangents(cone, x0, rng, count):
    """Cone members at ``x0``: extreme rays, facet samples and random interior directions."""
    dirs = []
    if cone.kind == POLYHEDRAL:
        dirs.extend(extreme_rays(cone, x0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SamplerWarning)
        for i in cone.facets_at(x0):
            dirs.extend(boundary_sampler(cone, x0, i, count=max(1, count // 4), rng=rng))
    need = max(0, count - len(dirs))
    if need:
        dirs.extend(sample_cone_directions(cone, np.broadcast_to(x0, (need, cone.dim)), rng, need))
    return np.asarray(dirs[:max(count, len(dirs))], dtype=float).reshape(-1, cone.dim)


def verify_invariance_along_flow(model, cone, region, T=10.0, h=1e-3, n_pairs=20,
                                 directions_per_point=8, seed=0, tol=1e-6, starts=None):
    """Propagate cone members and require they stay in the cone at every step.

    A direct empirical test of invariance, independent of the pointwise
    conditions.  ``n_pairs`` initial states each carry several tangents
    (extreme rays and facet directions first, then interior ones).
    """
    rng = np.random.default_rng(seed)
    X0 = region.sample(rng, n_pairs) if starts is None else np.atleast_2d(starts)
    xs, ds = [], []
    for x0 in X0:
        d = _initial_tangents(cone, x0, rng, directions_per_point)
        xs.append(np.broadcast_to(x0, d.shape))
        ds.append(d)
    xs = np.concatenate(xs)
    ds = np.concatenate(ds)
    echo = {"T": T, "h": h, "n_pairs": len(X0), "directions": len(ds), "seed": seed, "tol": tol,
            "region": region.to_dict(), "cone": cone.name, "model": model.name}

    worst = unit_margins(cone, xs, ds)
    worst_t = np.zeros(len(xs))
    worst_state = np.array(xs, copy=True)
    worst_dir = np.array(ds, copy=True)
    try:
        for t, x, d, _ in iter_prolonged(model, xs, ds, T, h):
            m = unit_margins(cone, x, d)
            upd = m < worst
            worst = np.where(upd, m, worst)
            worst_t[upd] = t
            worst_state[upd] = x[upd]
            worst_dir[upd] = d[upd]
    except DivergenceError as err:
        return CheckReport("invariance_along_flow", FAIL, -np.inf, -tol,
                           {"time": err.time, "reason": "divergence"}, len(xs), echo)
    k = int(np.argmin(worst))
    witness = {"x0": xs[k], "theta0": ds[k], "x": worst_state[k], "theta": worst_dir[k],
               "time": worst_t[k], "margin": worst[k]}
    verdict = FAIL if worst[k] < -tol else PASS
    n = model.dim
    margins = np.column_stack([xs, ds, worst_t, worst])
    cols = ([f"x0_{j + 1}" for j in range(n)] + [f"theta0_{j + 1}" for j in range(n)]
            + ["time_of_min", "min_margin"])
    return CheckReport("invariance_along_flow", verdict, float(worst[k]), -tol, witness, len(xs),
                       echo, notes=violations_note(worst, tol), margin_columns=cols, margins=margins)


def violations_note(worst, tol):
    bad = int(np.sum(worst < -tol))
    return [f"{bad} membership violation(s) beyond {tol:g}"] if bad else []


def _safe_distance(cone, x, a, b):
    ok = (unit_margins(cone, x, a) >= -1e-9) & (unit_margins(cone, x, b) >= -1e-9)
    d = np.full(len(x), np.inf)
    if ok.any():
        d[ok] = hilbert_distance(cone, x[ok], a[ok], b[ok])
    return d


def hilbert_distance_series(model, cone, x0, dx1, dx2, T, h=1e-3, record_every=None):
    """Hilbert distance between two propagated tangents at a common base point.

    Batched over leading axes of ``x0``; returns ``(times, d)`` with ``d`` of
    shape ``(records, batch)``.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    dx1 = np.broadcast_to(np.asarray(dx1, dtype=float), x0.shape)
    dx2 = np.broadcast_to(np.asarray(dx2, dtype=float), x0.shape)
    P = len(x0)
    if record_every is None:
        record_every = max(1, int(round(T / (500 * h))))
    times, dist = [], []
    for t, x, d, _ in iter_prolonged(model, np.concatenate([x0, x0]), np.concatenate([dx1, dx2]),
                                     T, h, stride=record_every):
        times.append(t)
        dist.append(_safe_distance(cone, x[:P], d[:P], d[P:]))
    return np.array(times), np.array(dist)


NOISE_FLOOR = 1e-7


def fit_log_linear(times, d, tail=0.6, floor=NOISE_FLOOR):
    """Least-squares fit ``log d = a - rate * t`` on the tail of the usable span.

    Records at or below ``floor`` (bisection resolution) are dropped; the
    tail is the last ``tail`` fraction of the remaining time span.
    Returns ``(rate, intercept, r_squared, t_start)`` or ``None``.
    """
    times = np.asarray(times, dtype=float)
    d = np.asarray(d, dtype=float)
    valid = np.isfinite(d) & (d > floor)
    if valid.sum() < 3:
        return None
    tv = times[valid]
    lv = np.log(d[valid])
    t0 = tv[0] + (1.0 - tail) * (tv[-1] - tv[0])
    sel = tv >= t0
    if sel.sum() < 3:
        sel = np.ones_like(tv, dtype=bool)
    tt, ll = tv[sel], lv[sel]
    slope, intercept = np.polyfit(tt, ll, 1)
    resid = ll - (intercept + slope * tt)
    ss_tot = float(np.sum((ll - ll.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 1e-20 else 0.0
    return float(-slope), float(intercept), float(r2), float(tt[0])


def estimate_contraction(model, cone, region, T=30.0, h=1e-3, n_pairs=10, seed=0,
                         min_margin=1e-3, starts=None, record_every=None):
    """Fit the exponential decay rate of the Hilbert distance between cone members.

    The reported rate is the worst (smallest) over pairs; ``r_squared`` is the
    smallest goodness of fit.  Pairs whose distance becomes infinite, or
    that start at zero distance, are discarded with a warning.
    """
    rng = np.random.default_rng(seed)
    X0 = region.sample(rng, n_pairs) if starts is None else np.atleast_2d(starts)
    P = len(X0)
    d1 = sample_cone_directions(cone, X0, rng, P, min_margin)
    d2 = sample_cone_directions(cone, X0, rng, P, min_margin)
    times, dist = hilbert_distance_series(model, cone, X0, d1, d2, T, h, record_every)
    echo = {"T": T, "h": h, "n_pairs": P, "seed": seed, "min_margin": min_margin,
            "noise_floor": NOISE_FLOOR, "tail_fraction": 0.6, "region": region.to_dict(),
            "cone": cone.name, "model": model.name}
    warn, per_pair, fits = [], [], []
    for p in range(P):
        dp = dist[:, p]
        entry = {"pair": p, "x0": X0[p], "d0": dp[0]}
        if not np.all(np.isfinite(dp)):
            warn.append(f"pair {p}: Hilbert distance became infinite (boundary contact); discarded")
            entry["discarded"] = "infinite distance"
        elif dp[0] <= NOISE_FLOOR:
            warn.append(f"pair {p}: initial distance below the noise floor; discarded")
            entry["discarded"] = "zero initial distance"
        else:
            fit = fit_log_linear(times, dp)
            if fit is None:
                warn.append(f"pair {p}: fewer than 3 records above the noise floor; discarded")
                entry["discarded"] = "too few records"
            else:
                rate, icpt, r2, t0 = fit
                entry.update(rate=rate, r_squared=r2, tail_start=t0)
                fits.append((rate, icpt, r2, t0, dp[0]))
        per_pair.append(entry)
    if not fits:
        finite0 = dist[0][np.isfinite(dist[0])]
        delta = float(finite0.max()) if len(finite0) else np.inf
        return ContractionReport(np.nan, np.nan, np.nan, T, delta, 0, P, per_pair, echo, warn,
                                 times, dist)
    delta = max(f[4] for f in fits)
    worst = min(fits, key=lambda f: f[0])
    rate, icpt, _, t0, _ = worst
    # log d(t) = log(k Delta) - rate (t - t0) on the tail window
    k_hat = max(1.0, float(np.exp(icpt - rate * t0) / delta))
    r2 = min(f[2] for f in fits)
    return ContractionReport(rate, k_hat, r2, T, delta, len(fits), P - len(fits), per_pair, echo,
                             warn, times, dist)


def check_monotone_order(model, region, T=10.0, h=1e-3, n_pairs=100, seed=0, tol=1e-7,
                         stride=10):
    """Componentwise order preservation ``x0 <= y0  =>  x(t) <= y(t) + tol``.

    The expected behaviour of systems that are cooperative on a box.
    """
    if np.any(model.wrap_mask):
        raise PreconditionError("order preservation is defined for unwrapped coordinates")
    rng = np.random.default_rng(seed)
    a = region.sample(rng, n_pairs)
    b = region.sample(rng, n_pairs)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    worst = np.full(n_pairs, np.inf)
    Y0 = np.concatenate([lo, hi])
    for _, (Y,) in _iterate(lambda y: (model.field(y[0]),), (Y0,), T, h, model.wrap_mask, stride):
        gap = (Y[n_pairs:] - Y[:n_pairs]).min(axis=-1)
        worst = np.minimum(worst, gap)
    k = int(np.argmin(worst))
    verdict = FAIL if worst[k] < -tol else PASS
    echo = {"T": T, "h": h, "n_pairs": n_pairs, "seed": seed, "tol": tol, "stride": stride}
    return CheckReport("monotone_order", verdict, float(worst[k]), -tol,
                       {"x0": lo[k], "y0": hi[k], "min_gap": worst[k]}, n_pairs, echo)
