"""Acceptance criteria 1-8, each at its stated tolerance.

Every test records one ``criterion N: PASS|FAIL`` line that is printed in
the pytest terminal summary, then asserts.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from diffpos.attractors import detect_bistable_convergence, detect_limit_cycle, kuramoto_sync_analysis
from diffpos.checker import (
    CheckSettings,
    check_theorem3,
    estimate_contraction,
    verify_invariance_along_flow,
)
from diffpos.cones import hilbert_distance
from diffpos.dynamics import integrate_normalized, integrate_prolonged
from diffpos.model_zoo import (
    cooperative_demo,
    is_metzler,
    kuramoto,
    metzler_linear,
    orthant_cone,
    pendulum,
)

from oracles import TANH_ROOT_C2, expm_nonnegative, orthant_hilbert, pendulum_facet_margin, tanh_fixed_point


def record(n, ok, detail, started):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail}; {time.perf_counter() - started:.1f} s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def zoo():
    return [pendulum(3.0, 0.0), pendulum(3.0, 1.5), cooperative_demo(2.0),
            metzler_linear([[-1.0, 1.0], [1.0, -1.0]]), kuramoto(5)]


def test_criterion_1_hilbert_orthant_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = {"oracle": 0.0, "symmetry": 0.0, "scaling": 0.0}
    for n in (3, 4, 5):
        count = 334 if n < 5 else 332
        A = np.exp(rng.uniform(-3, 3, (count, n)))
        B = np.exp(rng.uniform(-3, 3, (count, n)))
        x = np.zeros((count, n))
        cone = orthant_cone(n)
        d = hilbert_distance(cone, x, A, B)
        worst["oracle"] = max(worst["oracle"], np.max(np.abs(d - orthant_hilbert(A, B))))
        worst["symmetry"] = max(worst["symmetry"], np.max(np.abs(hilbert_distance(cone, x, B, A) - d)))
        s = np.exp(rng.uniform(-5, 5, (count, 1)))
        r = np.exp(rng.uniform(-5, 5, (count, 1)))
        worst["scaling"] = max(worst["scaling"],
                               np.max(np.abs(hilbert_distance(cone, x, s * A, r * B) - d)))
    ok = all(v <= 1e-8 for v in worst.values())
    record(1, ok, "1000 pairs, max errors " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()), t0)


def test_criterion_2_pendulum_dichotomy():
    t0 = time.perf_counter()
    s = CheckSettings(density=21, n_directions=20)
    target = pendulum_facet_margin(3.0, 0.0)
    parts = []
    ok = True
    for u in (0.0, 0.5, 1.5):
        b = pendulum(3.0, u)
        rep = check_theorem3(b.model, b.cone, b.default_region, s)
        good = rep.verdict == "PASS" and abs(rep.worst_margin - target) <= 0.2 * target
        ok &= good
        parts.append(f"k=3 u={u}: {rep.verdict} {rep.worst_margin:.4f}")
    b = pendulum(1.5, 0.0)
    rep = check_theorem3(b.model, b.cone, b.default_region, s)
    ok &= rep.verdict == "FAIL"
    parts.append(f"k=1.5: {rep.verdict} {rep.worst_margin:.4f}")
    record(2, ok, "; ".join(parts) + f"; analytic {target:.4f}", t0)


def test_criterion_3_soundness_coupling():
    t0 = time.perf_counter()
    s = CheckSettings(density=9, n_directions=30)
    parts = []
    ok = True
    passes = 0
    for b in zoo():
        if check_theorem3(b.model, b.cone, b.default_region, s).verdict != "PASS":
            continue
        passes += 1
        inv = verify_invariance_along_flow(b.model, b.cone, b.default_region, T=30.0, h=1e-3,
                                           n_pairs=4, directions_per_point=4, tol=1e-6)
        con = estimate_contraction(b.model, b.cone, b.default_region, T=30.0, h=1e-3, n_pairs=4)
        good = (inv.verdict == "PASS" and con.fitted_rate > 0 and con.r_squared >= 0.9)
        ok &= good
        parts.append(f"{b.name}{b.params if b.name == 'pendulum' else ''}: inv {inv.verdict}, "
                     f"rate {con.fitted_rate:.3f}, r2 {con.r_squared:.3f}")
    ok &= passes == 5
    record(3, ok, "; ".join(parts), t0)


def test_criterion_4_metzler_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    disagree = 0
    n_metzler = 0
    for _ in range(200):
        A = rng.choice([-1.0, 1.0], (3, 3)) * rng.uniform(0.1, 2.0, (3, 3))
        # bias towards Metzler matrices so both verdicts occur often
        if rng.random() < 0.5:
            A = np.where(np.eye(3, dtype=bool), A, np.abs(A))
        b = metzler_linear(A)
        sign = is_metzler(A)
        exp_ok = expm_nonnegative(A)
        rep = verify_invariance_along_flow(b.model, b.cone, b.default_region, T=1.0, h=1e-3,
                                           n_pairs=2, directions_per_point=6)
        n_metzler += sign
        disagree += not ((rep.verdict == "PASS") == sign == exp_ok)
    record(4, disagree == 0, f"200 matrices, {n_metzler} Metzler, {disagree} disagreements", t0)


def test_criterion_5_limit_cycle():
    t0 = time.perf_counter()
    b = pendulum(3.0, 1.5)
    rep = detect_limit_cycle(b.model, b.cone, b.default_region, n_ic=10, seed=0,
                             settings=CheckSettings(density=9, n_directions=20))
    hyp = dict(rep.hypotheses_checked)
    d = rep.details
    ok = (rep.kind == "LimitCycle" and all(v == "PASS" for v in hyp.values())
          and d["eps"] is not None and d["max_pairwise_hausdorff"] < 1e-4 and d["closure"] < 1e-4)
    record(5, ok, f"{rep.kind}, eps {d.get('eps')}, period {d.get('period', np.nan):.4f}, "
                  f"pairwise Hausdorff {d.get('max_pairwise_hausdorff', np.nan):.1e}, "
                  f"closure {d.get('closure', np.nan):.1e}", t0)


def test_criterion_6_kuramoto_synchronization():
    t0 = time.perf_counter()
    rep = kuramoto_sync_analysis(n=5, T=50.0, h=1e-3, n_ic=50, n_samples=1000, seed=0)
    d = rep.details
    hyp = dict(rep.hypotheses_checked)
    ok = (rep.kind == "Synchronization" and all(v == "PASS" for v in hyp.values())
          and d["C1_max_abs"] < 1e-13 and d["projector_error"] <= 1e-14
          and d["k2_margin"] > 0 and d["final_spread_max"] < 1e-6 and rep.basin_fraction == 1.0)
    record(6, ok, f"C1 {d['C1_max_abs']:.1e}, projector {d['projector_error']:.1e}, "
                  f"K2 margin {d['k2_margin']:.3f} at lambda {d['lambda_param']}, "
                  f"final spread {d['final_spread_max']:.1e}", t0)


def test_criterion_7_bistable():
    t0 = time.perf_counter()
    assert tanh_fixed_point(2.0) == pytest.approx(TANH_ROOT_C2, abs=1e-14)
    b = cooperative_demo(2.0)
    rep = detect_bistable_convergence(b.model, b.cone, b.default_region, n_ic=500, T=60.0,
                                      seed=0, settings=CheckSettings(density=9, n_directions=20))
    xs = sorted(float(fp["x"][0]) for fp in rep.fixed_points)
    loc_err = np.max(np.abs(np.array(xs) - [-TANH_ROOT_C2, 0.0, TANH_ROOT_C2]))
    origin_share = next(v for k, v in rep.basins.items()
                        if np.allclose([float(c) for c in k.split(",")], 0.0))
    hyp = dict(rep.hypotheses_checked)
    ok = (all(v == "PASS" for v in hyp.values()) and rep.basin_fraction == 1.0
          and len(xs) == 3 and loc_err < 1e-6 and origin_share < 0.01
          and rep.details["max_final_speed"] < 1e-8)
    record(7, ok, f"converged {rep.basin_fraction:.3f}, origin share {origin_share:.3f}, "
                  f"location error {loc_err:.1e}, basins {rep.basins}", t0)


def test_criterion_8_normalized_flow_consistency():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    worst_dir, worst_drift = 0.0, 0.0
    for b in zoo():
        n = b.model.dim
        x0 = b.default_region.sample(rng, 1)[0]
        th0 = rng.standard_normal(n)
        th0 /= np.linalg.norm(th0)
        pro = integrate_prolonged(b.model, x0, th0, 20.0, h=1e-3, stride=100)
        nor = integrate_normalized(b.model, x0, th0, 20.0, h=1e-3, stride=100)
        worst_dir = max(worst_dir, float(np.max(np.abs(pro.directions - nor.directions))))
        drift = float(np.max(np.abs(np.linalg.norm(nor.directions, axis=-1) - 1.0)))
        worst_drift = max(worst_drift, drift, nor.max_drift)
    ok = worst_dir < 1e-5 and worst_drift < 1e-6
    record(8, ok, f"max direction gap {worst_dir:.1e}, max drift {worst_drift:.1e}", t0)
