"""Numerical detectors for the attractors of strictly differentially positive systems.

These are evidence generators, not proofs: each detector records the
hypotheses it checked (with verdicts) and the assumptions it could not check,
and reports ``Undetermined`` unless every hypothesis passed and at least 99%
of sampled initial conditions reached the reported attractor.
"""

from __future__ import annotations

import itertools
import warnings

import numpy as np
from scipy.spatial import cKDTree

from .checker import check_theorem3
from .cones import POLYHEDRAL, boundary_sampler, cone_center, extreme_rays, unit_margins
from .dynamics import _rk4, eval_jacobian, integrate_prolonged, integrate_trajectory, iter_prolonged
from .errors import DivergenceError, PreconditionError, SamplerWarning
from .model_zoo import (
    centroid,
    kuramoto,
    kuramoto_C,
    kuramoto_k2_derivative,
    kuramoto_rho_cone,
    projector,
    saddle_measure,
)
from .regions import TWO_PI, circular_spread, state_difference, wrap_state
from .reports import (
    FAIL,
    FIXED_POINTS,
    LIMIT_CYCLE,
    PASS,
    SYNCHRONIZATION,
    UNDETERMINED,
    AttractorReport,
    CheckReport,
)

COMPLETENESS = ("the unit slice of every cone is complete under the Hilbert metric "
                "(assumed, not checked)")
EPS_SWEEP = (0.2, 0.1, 0.05, 0.02, 0.01)


# -- equilibria ---------------------------------------------------------------

def _classify(eigs, symmetric_zero=0, tol=1e-9):
    re = np.sort(np.real(eigs))
    if symmetric_zero:
        # drop the eigenvalues closest to zero that come from the symmetry
        drop = np.argsort(np.abs(re))[:symmetric_zero]
        re = np.delete(re, drop)
    if len(re) == 0:
        return "neutral"
    if np.all(re < -tol):
        return "stable"
    if np.all(re > tol):
        return "unstable"
    if np.any(re > tol) and np.any(re < -tol):
        return "saddle"
    return "non-hyperbolic"


def find_fixed_points(model, region, grid_density=None, tol=1e-8, dedupe=1e-6, max_iter=60,
                      symmetry=None, seeds=None):
    """Newton refinement from grid seeds; equilibria in ``region``, deduplicated.

    Each entry carries the point, the Jacobian eigenvalues and a stability
    label.  With a ``symmetry`` direction (e.g. common phase shift) points that
    differ only along it are merged and reported as one family.
    """
    X = region.grid(grid_density) if seeds is None else np.atleast_2d(seeds)
    X = np.array(X, dtype=float)
    wrap = model.wrap_mask
    for _ in range(max_iter):
        F = model.field(X)
        J = eval_jacobian(model, X)
        step = np.einsum("kij,kj->ki", np.linalg.pinv(J), F)
        step = np.where(np.isfinite(step), step, 0.0)
        # damp wild steps so seeds do not fly across the state space
        nrm = np.linalg.norm(step, axis=-1, keepdims=True)
        step = step * np.minimum(1.0, 1.0 / np.maximum(nrm, 1e-300))
        X = wrap_state(X - step, wrap)
        if np.all(np.linalg.norm(F, axis=-1) < tol * 1e-2):
            break
    res = np.linalg.norm(model.field(X), axis=-1)
    ok = (res < tol) & region.contains(X, tol=1e-6)
    v = None if symmetry is None else np.asarray(symmetry, dtype=float) / np.linalg.norm(symmetry)
    kept = []
    for x in X[ok][np.argsort(res[ok])]:
        dup = False
        for y in kept:
            d = state_difference(x, y, wrap)
            if v is not None:
                d = d - (d @ v) * v
            if np.linalg.norm(d) < dedupe:
                dup = True
                break
        if not dup:
            kept.append(x)
    out = []
    for x in kept:
        J = eval_jacobian(model, x)
        eigs = np.linalg.eigvals(J)
        entry = {"x": x, "residual": float(np.linalg.norm(model.field(x))),
                 "eigenvalues": eigs, "stability": _classify(eigs, 0 if v is None else 1)}
        if v is not None:
            entry["family"] = "symmetry orbit"
        out.append(entry)
    return out


def _eig_summary(fp):
    e = fp["eigenvalues"]
    return {**fp, "eigenvalues": [[float(np.real(z)), float(np.imag(z))] for z in e]}


# -- conal curves -------------------------------------------------------------

def _curve_fields(cone, x0):
    """Named direction fields spanning the tested conal-curve family at ``x0``."""
    fields = {"center": None}
    if cone.kind == POLYHEDRAL:
        for r, ray in enumerate(extreme_rays(cone, x0)):
            fields[f"ray{r}"] = ray
    return fields


def _direction(cone, x, label, prev, const_cache):
    if cone.constant and label in const_cache:
        return const_cache[label]
    if label == "center":
        u = cone_center(cone, x, n_starts=0 if prev is not None else 16,
                        start=None if prev is None else prev[None, :])
        if u is None:
            u = cone_center(cone, x)
    else:
        rays = extreme_rays(cone, x)
        u = rays[np.argmax(rays @ prev)] if prev is not None else rays[0]
    u = u / cone.norm(x, u)
    if cone.constant:
        const_cache[label] = u
    return u


def check_conal_exit(model, cone, region, n_curves=10, max_arclen=None, ds=None, seed=0,
                     starts=None):
    """Follow conal curves forward and backward until they leave ``region``.

    The tested family is the analytic-center curve plus, for polyhedral
    cones, the extreme-ray curves; arbitrary conal curves are not covered.
    Curves are unit speed in the cone metric and integrated with the
    midpoint rule.
    """
    rng = np.random.default_rng(seed)
    X0 = region.sample(rng, n_curves) if starts is None else np.atleast_2d(starts)
    if max_arclen is None:
        span = np.ptp(region.grid(5), axis=0)
        max_arclen = 10.0 * float(np.linalg.norm(span)) + 1.0
    ds = max_arclen / 4000.0 if ds is None else ds
    wrap = np.asarray(region.wrap, dtype=bool)
    cache = {}
    worst, witness, rows = np.inf, {}, []
    for k, x0 in enumerate(X0):
        for c_idx, label in enumerate(_curve_fields(cone, x0)):
            for sign in (1.0, -1.0):
                x = np.array(x0, dtype=float)
                prev = None
                s = 0.0
                exited = False
                while s < max_arclen:
                    u = sign * _direction(cone, x, label, None if prev is None else sign * prev, cache)
                    xm = wrap_state(x + 0.5 * ds * u, wrap)
                    um = sign * _direction(cone, xm, label, sign * u, cache)
                    x = wrap_state(x + ds * um, wrap)
                    prev = um
                    s += ds
                    if region.excess(x) > 0:
                        exited = True
                        break
                margin = max_arclen - s if exited else -np.inf
                rows.append([k, c_idx, sign, s, float(exited)])
                if margin < worst:
                    worst = margin
                    witness = {"x0": x0, "curve": label, "direction": "forward" if sign > 0 else
                               "backward", "arclength": s, "exited": exited, "x_end": x}
    verdict = FAIL if worst < 0 else PASS
    echo = {"n_curves": len(X0), "max_arclen": max_arclen, "ds": ds, "seed": seed,
            "region": region.to_dict(), "cone": cone.name}
    notes = ["tested family: analytic-center curve"
             + (" and extreme-ray curves" if cone.kind == POLYHEDRAL else "")
             + "; other conal curves are not covered"]
    rep = CheckReport("conal_exit", verdict, worst, 0.0, witness, len(rows), echo, notes=notes)
    rep.margin_columns = ["start", "curve", "sign", "arclength", "exited"]
    rep.margins = np.array(rows, dtype=float)
    return rep


# -- fixed-point convergence --------------------------------------------------

def classify_endpoints(model, states_late, states_final, equilibria, tol=1e-8, radius=1e-6):
    """Index of the equilibrium each trajectory settled on, or -1."""
    wrap = model.wrap_mask
    speed = np.linalg.norm(model.field(states_final), axis=-1)
    moved = np.linalg.norm(state_difference(states_final, states_late, wrap), axis=-1)
    label = np.full(len(states_final), -1)
    settled = (speed < tol) & (moved < tol)
    for j, fp in enumerate(equilibria):
        d = np.linalg.norm(state_difference(states_final, fp["x"], wrap), axis=-1)
        label[settled & (d < radius) & (label < 0)] = j
    return label, speed


def detect_bistable_convergence(model, cone, region, n_ic=500, T=60.0, h=1e-3, seed=0,
                                settings=None, equilibria=None, run_hypotheses=True):
    """Simulate random initial conditions and sort their end states by equilibrium.

    A trajectory counts as converged only if its final speed and its
    displacement over the last 10% of the horizon are both below 1e-8.
    """
    hyps = []
    details = {}
    if run_hypotheses:
        t3 = check_theorem3(model, cone, region, settings)
        ce = check_conal_exit(model, cone, region, seed=seed)
        hyps += [("strict_boundary_condition", t3.verdict), ("conal_curves_exit", ce.verdict)]
        details["strict_margin"] = t3.worst_margin
        details["conal_exit_witness"] = ce.witness
    if equilibria is None:
        equilibria = find_fixed_points(model, region)
    rng = np.random.default_rng(seed)
    X0 = region.sample(rng, n_ic)
    n_steps = max(1, int(round(T / h)))
    stride = max(1, n_steps // 10)
    try:
        traj = integrate_trajectory(model, X0, T, h, stride=stride)
        late, final = traj.states[-2], traj.states[-1]
        label, speed = classify_endpoints(model, late, final, equilibria)
    except DivergenceError:
        label = np.full(n_ic, -1)
        speed = np.full(n_ic, np.inf)
        final = np.full_like(X0, np.nan)
    basins = {}
    for j, fp in enumerate(equilibria):
        key = ",".join(f"{v:.6f}" for v in fp["x"])
        basins[key] = float(np.mean(label == j))
    frac = float(np.mean(label >= 0))
    details.update({"unconverged": int(np.sum(label < 0)), "max_final_speed": float(np.max(speed)),
                    "T": T, "h": h})
    echo = {"n_ic": n_ic, "T": T, "h": h, "seed": seed}
    return AttractorReport(FIXED_POINTS, [_eig_summary(e) for e in equilibria], None, frac, basins,
                           hyps, [COMPLETENESS], details, echo,
                           series={"x0": X0, "final": final, "label": label})


# -- invariant vector field ---------------------------------------------------

def check_invariant_vector_field(model, cone, region, v, eps=0.0, T=10.0, h=1e-3, n_ic=10,
                                 cap=1e6, angle_tol=1e-6, seed=0, density=None):
    """Test a candidate invariant vector field ``v`` in three parts.

    (a) ``v(x)`` is non-zero and strictly inside ``K_eps(x)`` on the grid;
    (b) ``|dpsi_t(x) v(x)| / |v(x)|`` stays below ``cap`` over ``[0, T]``;
    (c) the propagated tangent stays parallel to ``v(psi_t(x))`` within
    ``angle_tol`` radians at every step.
    """
    X = region.grid(density)
    V = np.asarray(v(X), dtype=float)
    nv = cone.norm(X, V)
    echo = {"eps": eps, "T": T, "h": h, "n_ic": n_ic, "cap": cap, "angle_tol": angle_tol,
            "seed": seed}
    details = {}
    if np.any(nv < 1e-12):
        k = int(np.argmin(nv))
        return CheckReport("invariant_vector_field", FAIL, -np.inf, 0.0,
                           {"subcheck": "a", "x": X[k], "reason": "v vanishes"}, len(X), echo)
    m = unit_margins(cone, X, V) - eps
    k = int(np.argmin(m))
    if m[k] <= 0:
        return CheckReport("invariant_vector_field", FAIL, float(m[k]), 0.0,
                           {"subcheck": "a", "x": X[k], "margin": m[k]}, len(X), echo)
    details["a_margin"] = float(m[k])

    rng = np.random.default_rng(seed)
    X0 = region.sample(rng, n_ic)
    V0 = np.asarray(v(X0), dtype=float)
    log_v0 = np.log(cone.norm(X0, V0))
    max_log, max_angle = -np.inf, 0.0
    witness = {}
    for t, x, d, lg in iter_prolonged(model, X0, V0, T, h):
        growth = lg - log_v0
        if growth.max() > max_log:
            max_log = float(growth.max())
        vx = np.asarray(v(x), dtype=float)
        vx = vx / np.linalg.norm(vx, axis=-1, keepdims=True)
        cos = np.clip(np.einsum("...i,...i->...", d / np.linalg.norm(d, axis=-1, keepdims=True), vx),
                      -1.0, 1.0)
        ang = np.arccos(cos)
        # arccos loses precision near 0; use the sine of the angle instead
        sin = np.linalg.norm(d / np.linalg.norm(d, axis=-1, keepdims=True) - cos[..., None] * vx, axis=-1)
        ang = np.where(ang < 1e-3, sin, ang)
        j = int(np.argmax(ang))
        if ang[j] > max_angle:
            max_angle = float(ang[j])
            witness = {"x0": X0[j], "time": t, "angle": max_angle}
    details.update({"max_log_growth": max_log, "max_angle": max_angle})
    if max_log > np.log(cap):
        return CheckReport("invariant_vector_field", FAIL, np.log(cap) - max_log, 0.0,
                           {"subcheck": "b", "max_log_growth": max_log}, len(X) + n_ic, echo,
                           notes=[str(details)])
    if max_angle > angle_tol:
        return CheckReport("invariant_vector_field", FAIL, angle_tol - max_angle, 0.0,
                           {"subcheck": "c", **witness}, len(X) + n_ic, echo, notes=[str(details)])
    rep = CheckReport("invariant_vector_field", PASS, min(details["a_margin"], angle_tol - max_angle),
                      0.0, witness, len(X) + n_ic, echo)
    rep.config_echo["details"] = details
    return rep


# -- periodic orbits ----------------------------------------------------------

def _step(model, x, h):
    y = _rk4(lambda s: (model.field(s[0]),), (x,), h)[0]
    return wrap_state(y, model.wrap_mask)


def _section_crossings(model, x0, p, normal, T, h, radius, max_returns, t_tol=1e-10, min_time=0.0):
    """Upward crossings of ``<normal, x - p> = 0`` near ``p``, localized by bisection in time.

    Crossings earlier than ``min_time`` are ignored so a start on the section
    is not counted as its own return.
    """
    wrap = model.wrap_mask

    def g(x):
        return float(normal @ state_difference(x, p, wrap))

    n_steps = int(round(T / h))
    x = np.array(x0, dtype=float)
    gx = g(x)
    pts, times = [], []
    for k in range(n_steps):
        y = _step(model, x, h)
        if not np.all(np.isfinite(y)):
            raise DivergenceError("non-finite state while tracking section returns", time=k * h)
        gy = g(y)
        if (gx < 0.0 <= gy and (k + 1) * h > min_time
                and np.linalg.norm(state_difference(y, p, wrap)) < radius):
            lo, hi = 0.0, h
            while hi - lo > t_tol:
                mid = 0.5 * (lo + hi)
                if g(_step(model, x, mid)) < 0.0:
                    lo = mid
                else:
                    hi = mid
            tau = 0.5 * (lo + hi)
            pts.append(_step(model, x, tau))
            times.append(k * h + tau)
            if len(pts) >= max_returns:
                break
        x, gx = y, gy
    return np.array(pts).reshape(-1, len(p)), np.array(times)


def _periodic_tree(points, wrap, ref_lo, box):
    z = np.array(points, dtype=float)
    z[:, wrap] = np.mod(z[:, wrap], TWO_PI)
    z[:, ~wrap] = z[:, ~wrap] - ref_lo
    return cKDTree(np.mod(z, box), boxsize=box)


def orbit_distance(A, B, wrap, k=6):
    """Directed Hausdorff distance from points ``A`` to the closed polyline ``B``.

    Distances are measured to segments, not just vertices, so the result does
    not depend on the sampling step; wrapped axes use shortest-arc geometry.
    """
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    wrap = np.asarray(wrap, dtype=bool)
    both = np.concatenate([A, B])
    lo = both[:, ~wrap].min(axis=0) if (~wrap).any() else np.empty(0)
    span = both[:, ~wrap].max(axis=0) - lo if (~wrap).any() else np.empty(0)
    box = np.empty(A.shape[1])
    box[wrap] = TWO_PI
    box[~wrap] = 2.0 * span + 1.0
    tree = _periodic_tree(B, wrap, lo, box)
    qa = np.array(A, dtype=float)
    qa[:, wrap] = np.mod(qa[:, wrap], TWO_PI)
    qa[:, ~wrap] -= lo
    kk = min(k, len(B))
    _, idx = tree.query(np.mod(qa, box), k=kk)
    idx = np.asarray(idx).reshape(len(A), kk)
    N = len(B)
    best = np.full(len(A), np.inf)
    for off in (-1, 0):
        i0 = (idx + off) % N
        i1 = (i0 + 1) % N
        d = state_difference(A[:, None, :], B[i0], wrap)
        seg = state_difference(B[i1], B[i0], wrap)
        ss = np.einsum("...i,...i->...", seg, seg)
        t = np.clip(np.einsum("...i,...i->...", d, seg) / np.where(ss > 0, ss, 1.0), 0.0, 1.0)
        dist = np.linalg.norm(d - t[..., None] * seg, axis=-1)
        best = np.minimum(best, dist.min(axis=-1))
    return float(best.max())


def hausdorff(A, B, wrap):
    return max(orbit_distance(A, B, wrap), orbit_distance(B, A, wrap))


def return_map_contraction(dists, transverse_multipliers, floor):
    """Decide whether section returns of a perturbed start contract.

    With three or more return distances above ``floor`` a geometric fit is
    required (all ratios below one, ``r_squared >= 0.9``).  When contraction
    is so fast that fewer remain, the visible ratios must be below one, at
    least one return must be observed, and the transverse multipliers of
    the monodromy matrix must lie inside the unit circle.
    """
    dists = np.asarray(dists, dtype=float)
    info = {}
    above = dists[dists > floor]
    ratios = above[1:] / above[:-1]
    info["ratios"] = ratios
    if len(above) >= 3:
        k = np.arange(len(above))
        slope, icpt = np.polyfit(k, np.log(above), 1)
        resid = np.log(above) - (icpt + slope * k)
        ss = np.sum((np.log(above) - np.log(above).mean()) ** 2)
        r2 = 1.0 - np.sum(resid ** 2) / ss if ss > 0 else 0.0
        info["fit"] = {"ratio": float(np.exp(slope)), "r_squared": float(r2)}
        return bool(np.all(ratios < 1.0) and r2 >= 0.9), info
    info["fit"] = "contraction reaches the resolution floor within two returns"
    ok = (len(dists) >= 2 and dists[-1] < dists[0] and np.all(ratios < 1.0)
          and np.all(np.asarray(transverse_multipliers) < 1.0))
    return bool(ok), info


def monodromy(model, x, period, h=1e-3):
    n = model.dim
    tr = integrate_prolonged(model, np.broadcast_to(x, (n, n)), np.eye(n), period, h,
                             stride=max(1, int(round(period / h))))
    cols = tr.tangents()[-1]
    return cols.T


def vector_field_in_cone(model, cone, region, eps_sweep=EPS_SWEEP, density=None):
    """Largest ``eps`` in the sweep with ``f(x) in K_eps(x)`` on the grid, or ``None``."""
    X = region.grid(density)
    F = model.field(X)
    nf = cone.norm(X, F)
    if np.any(nf < 1e-12):
        return None, -np.inf
    m = float(unit_margins(cone, X, F).min())
    for eps in sorted(eps_sweep, reverse=True):
        if m >= eps:
            return eps, m
    return None, m


def detect_limit_cycle(model, cone, region, eps=None, T=120.0, h=1e-3, n_ic=10, seed=0,
                       settings=None, x_start=None, section_radius=0.5, max_returns=4,
                       perturbation=1e-2, hausdorff_tol=1e-4, closure_tol=1e-4):
    """Find and test a unique attracting periodic orbit in ``region``.

    Steps: check the hypotheses (no equilibria, ``f`` inside ``K_eps``, strict
    boundary condition), settle past a transient of ``T/2``, erect a section
    through the settled point orthogonal to ``f``, measure the return time
    and closure, test return-map contraction from a perturbed point on the
    section, and compare the orbits reached from ``n_ic`` dispersed starts.
    """
    wrap = model.wrap_mask
    rng = np.random.default_rng(seed)
    hyps, details = [], {}
    echo = {"T": T, "h": h, "n_ic": n_ic, "seed": seed, "section_radius": section_radius,
            "hausdorff_tol": hausdorff_tol, "closure_tol": closure_tol}

    fps = find_fixed_points(model, region)
    hyps.append(("no_fixed_points", PASS if not fps else FAIL))
    if eps is None:
        eps_found, fmargin = vector_field_in_cone(model, cone, region)
    else:
        fmargin = vector_field_in_cone(model, cone, region, (eps,))[1]
        eps_found = eps if fmargin >= eps else None
    details.update({"field_cone_margin": fmargin, "eps": eps_found})
    hyps.append(("vector_field_in_cone", PASS if eps_found is not None else FAIL))
    t3 = check_theorem3(model, cone, region, settings)
    hyps.append(("strict_boundary_condition", t3.verdict))
    details["strict_margin"] = t3.worst_margin

    def undetermined(reason):
        details["reason"] = reason
        return AttractorReport(UNDETERMINED, [_eig_summary(e) for e in fps], None, 0.0, {}, hyps,
                               [COMPLETENESS], details, echo)

    if fps:
        return undetermined("equilibria present in region")

    x0 = region.sample(rng, 1)[0] if x_start is None else np.asarray(x_start, dtype=float)
    p = integrate_trajectory(model, x0, 0.5 * T, h, stride=max(1, int(round(0.5 * T / h)))).final
    fp = model.field(p)
    normal = fp / np.linalg.norm(fp)
    q, tq = _section_crossings(model, p, p, normal, 0.5 * T, h, section_radius, max_returns,
                               min_time=10 * h)
    if len(q) == 0:
        hyps.append(("section_recrossing", FAIL))
        return undetermined("no section recrossing within the horizon")
    hyps.append(("section_recrossing", PASS))
    ret_times = np.diff(np.concatenate([[0.0], tq]))
    period = float(ret_times.mean())
    q_star = q[-1]
    details.update({"return_times": ret_times, "period": period,
                    "section_residual": float(abs(normal @ state_difference(q_star, p, wrap)))})

    # return-map contraction from a perturbed point on the section
    n = model.dim
    M = monodromy(model, q_star, period, h)
    mults = np.linalg.eigvals(M)
    order = np.argsort(np.abs(np.abs(mults) - 1.0))
    transverse = np.abs(mults[order[1:]])
    details["floquet_multipliers"] = [[float(np.real(z)), float(np.imag(z))] for z in mults]
    if n == 1:
        contracting = True
        details["return_map"] = "one-dimensional state: no transverse directions"
    else:
        w = rng.standard_normal(n)
        w -= (w @ normal) * normal
        w /= np.linalg.norm(w)
        start = wrap_state(q_star + perturbation * w, wrap)
        qp, _ = _section_crossings(model, start, q_star, normal, (max_returns + 1) * period * 1.5,
                                   h, section_radius, max_returns, min_time=0.5 * period)
        dists = np.array([perturbation] + [float(np.linalg.norm(state_difference(z, q_star, wrap)))
                                           for z in qp])
        # event times are resolved to 1e-10, so positions only to about that times the speed
        floor = max(1e-12, 100 * 1e-10 * float(np.linalg.norm(model.field(q_star))))
        contracting, info = return_map_contraction(dists, transverse, floor)
        details.update({"return_distances": dists, "return_floor": floor, "return_map": info})
    hyps.append(("return_map_contracts", PASS if contracting else FAIL))

    steps = max(1, int(round(period / h)))
    orbit = integrate_trajectory(model, q_star, period, h).states
    closure = float(np.linalg.norm(state_difference(orbit[-1], q_star, wrap)))
    details["closure"] = closure
    hyps.append(("orbit_closes", PASS if closure < closure_tol else FAIL))

    # uniqueness: dispersed starts settle on the same orbit
    starts = region.sample(rng, n_ic)
    settled = integrate_trajectory(model, starts, 0.5 * T, h,
                                   stride=max(1, int(round(0.5 * T / h)))).final
    tails = integrate_trajectory(model, settled, period, h).states
    ref = orbit[:-1]
    to_ref = np.array([hausdorff(tails[:-1, j], ref, wrap) for j in range(n_ic)])
    pairwise = max((hausdorff(tails[:-1, a], tails[:-1, b], wrap)
                    for a, b in itertools.combinations(range(n_ic), 2)), default=0.0)
    on_orbit = to_ref < hausdorff_tol
    details.update({"hausdorff_to_reference": to_ref, "max_pairwise_hausdorff": pairwise,
                    "orbit_samples": steps + 1})
    hyps.append(("unique_orbit", PASS if on_orbit.all() and pairwise < hausdorff_tol else FAIL))

    cycle = {"period": period, "point_on_section": q_star, "section_normal": normal,
             "section_residual": details["section_residual"], "closure": closure,
             "orbit_stride": max(1, steps // 2000)}
    stride = cycle["orbit_stride"]
    return AttractorReport(LIMIT_CYCLE, [], cycle, float(on_orbit.mean()), {"cycle": float(on_orbit.mean())},
                           hyps, [COMPLETENESS], details, echo,
                           series={"orbit": np.column_stack([h * np.arange(len(orbit))[::stride],
                                                             orbit[::stride]])})


# -- Kuramoto -----------------------------------------------------------------

def k2_margin(n, lambda_param, thetas, rng, count=50):
    """Smallest closed-form ``dK2/dt`` over boundary directions at each phase sample."""
    cone = kuramoto_rho_cone(n, lambda_param)
    worst = np.inf
    arg = None
    for th in thetas:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SamplerWarning)
            dirs = boundary_sampler(cone, th, 1, count=count, rng=rng)
        if not len(dirs):
            continue
        vals = kuramoto_k2_derivative(np.broadcast_to(th, dirs.shape), dirs, lambda_param)
        j = int(np.argmin(vals))
        if vals[j] < worst:
            worst = float(vals[j])
            arg = {"theta": th, "dtheta": dirs[j], "margin": worst}
    return worst, arg


def kuramoto_sync_analysis(n=5, region=None, lambda_param=None, T=50.0, h=1e-3, n_ic=50,
                           n_samples=1000, seed=0, saddle_eps=1e-3, spread_tol=1e-6,
                           directions=50, lambda_sweep=tuple(2 ** k for k in range(9))):
    """Synchronization evidence for all-to-all Kuramoto phases with zero frequencies.

    Checks the coupling identity ``C(theta) 1 = 0``, the closed-form sign of
    the ``K2`` derivative on the cone boundary (sweeping ``lambda`` upward if
    none is given), invariance of the consensus direction, and the decay of
    the phase spread from random starts.
    """
    bundle = kuramoto(n)
    model = bundle.model
    region = bundle.default_region if region is None else region
    rng = np.random.default_rng(seed)
    hyps, details = [], {}

    samples = np.concatenate([region.grid(), region.sample(rng, n_samples)])
    rho, _ = centroid(samples)
    balanced = rho < 1e-12
    if balanced.any():
        raise PreconditionError("region contains balanced phases (rho = 0)")
    spread = circular_spread(samples)
    # the synchronized state itself has zero saddle measure, so the filter
    # only removes points that are also far from synchrony
    keep = (saddle_measure(samples) > saddle_eps) | (spread <= np.pi / 2)
    details["saddle_filtered"] = int(np.sum(~keep))
    samples = samples[keep]

    c1 = float(np.abs(kuramoto_C(samples).sum(axis=-1)).max())
    P = projector(n)
    proj_err = float(max(np.abs(P @ P - P).max(), np.abs(P @ np.ones(n)).max()))
    details.update({"C1_max_abs": c1, "projector_error": proj_err})
    hyps.append(("coupling_identity", PASS if c1 < 1e-13 else FAIL))

    lams = (lambda_param,) if lambda_param is not None else lambda_sweep
    margin, arg, lam_used = -np.inf, None, None
    tried = []
    for lam in lams:
        margin, arg = k2_margin(n, float(lam), samples, rng, directions)
        tried.append([float(lam), margin])
        lam_used = float(lam)
        if margin > 0:
            break
    details.update({"k2_margin": margin, "k2_witness": arg, "lambda_param": lam_used,
                    "lambda_tried": tried})
    hyps.append(("k2_derivative_positive", PASS if margin > 0 else FAIL))
    if margin <= 0:
        details["suggestion"] = "increase lambda_param beyond the largest value tried"

    cone = kuramoto_rho_cone(n, lam_used)
    ones = np.ones(n) / np.sqrt(n)
    inv = check_invariant_vector_field(model, cone, region, lambda x: np.broadcast_to(ones, np.shape(x)),
                                       T=T, h=h, n_ic=5, seed=seed, angle_tol=1e-9)
    details["consensus_invariance"] = inv.config_echo.get("details", inv.witness)
    hyps.append(("consensus_direction_invariant", inv.verdict))

    X0 = region.sample(rng, n_ic)
    n_steps = max(1, int(round(T / h)))
    stride = max(1, n_steps // 500)
    traj = integrate_trajectory(model, X0, T, h, stride=stride)
    spreads = circular_spread(traj.states)
    final = spreads[-1]
    sync = final < spread_tol
    start = len(spreads) // 10
    monotone = bool(np.all(np.diff(spreads[start:], axis=0) <= 1e-12))
    details.update({"final_spread_max": float(final.max()), "spread_monotone": monotone})
    hyps.append(("spread_decays_monotonically", PASS if monotone else FAIL))
    frac = float(sync.mean())
    echo = {"n": n, "T": T, "h": h, "n_ic": n_ic, "n_samples": n_samples, "seed": seed,
            "saddle_eps": saddle_eps, "spread_tol": spread_tol, "region": region.to_dict()}
    series = {"spread": np.column_stack([traj.times, spreads])}
    return AttractorReport(SYNCHRONIZATION, [], None, frac, {"synchronized": frac}, hyps,
                           [COMPLETENESS], details, echo, series=series)
