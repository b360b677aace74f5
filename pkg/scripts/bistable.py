"""Basin shares of the cooperative tanh network x' = -x + c tanh(swap(x))."""

import argparse

from diffpos.attractors import detect_bistable_convergence
from diffpos.checker import CheckSettings
from diffpos.model_zoo import cooperative_demo


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--c", type=float, default=2.0)
    ap.add_argument("--n-ic", type=int, default=500)
    ap.add_argument("--T", type=float, default=60.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    b = cooperative_demo(args.c)
    rep = detect_bistable_convergence(b.model, b.cone, b.default_region, n_ic=args.n_ic, T=args.T,
                                      seed=args.seed,
                                      settings=CheckSettings(density=9, n_directions=20))
    print(f"kind: {rep.kind} (converged fraction {rep.basin_fraction:.3f})")
    for name, verdict in rep.hypotheses_checked:
        print(f"  {name}: {verdict}")
    for fp in rep.fixed_points:
        key = ",".join(f"{v:.6f}" for v in fp["x"])
        print(f"  equilibrium ({key}) {fp['stability']}: share {rep.basins[key]:.3f}")


if __name__ == "__main__":
    main()
