"""Compare flow-based cone invariance with the Metzler sign test on random matrices."""

import argparse

import numpy as np
from scipy.linalg import expm

from diffpos.checker import verify_invariance_along_flow
from diffpos.model_zoo import is_metzler, metzler_linear


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=200)
    ap.add_argument("--dim", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    n = args.dim
    table = {}
    for _ in range(args.count):
        A = rng.choice([-1.0, 1.0], (n, n)) * rng.uniform(0.1, 2.0, (n, n))
        if rng.random() < 0.5:
            A = np.where(np.eye(n, dtype=bool), A, np.abs(A))
        b = metzler_linear(A)
        flow = verify_invariance_along_flow(b.model, b.cone, b.default_region, T=1.0,
                                            n_pairs=2, directions_per_point=6).verdict == "PASS"
        sign = is_metzler(A)
        exp_ok = bool(np.all(expm(1e-3 * A) >= 0))
        table[(flow, sign, exp_ok)] = table.get((flow, sign, exp_ok), 0) + 1
    print(f"{'flow':>6} {'sign':>6} {'expm':>6} {'count':>6}")
    for (flow, sign, exp_ok), c in sorted(table.items()):
        print(f"{flow!s:>6} {sign!s:>6} {exp_ok!s:>6} {c:6d}")
    bad = sum(c for (a, b, e), c in table.items() if not a == b == e)
    print(f"disagreements: {bad}")


if __name__ == "__main__":
    main()
