"""Strict boundary margin of the pendulum cone as a function of the damping k.

Prints the sampled worst margin next to the analytic facet value
(k - 2)/sqrt(2) and the verdict for each k.
"""

import argparse

import numpy as np

from diffpos.checker import CheckSettings, check_theorem3
from diffpos.model_zoo import pendulum


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=float, nargs="+", default=[1.0, 1.5, 2.0, 2.5, 3.0, 4.0])
    ap.add_argument("--u", type=float, default=0.0)
    ap.add_argument("--density", type=int, default=21)
    args = ap.parse_args()
    s = CheckSettings(density=args.density, n_directions=20)
    print(f"{'k':>6} {'verdict':>8} {'margin':>10} {'analytic':>10}")
    for k in args.k:
        b = pendulum(k, args.u)
        rep = check_theorem3(b.model, b.cone, b.default_region, s)
        analytic = min(1.0, (k - 2.0) / np.sqrt(2.0))
        print(f"{k:6.2f} {rep.verdict:>8} {rep.worst_margin:10.5f} {analytic:10.5f}")


if __name__ == "__main__":
    main()
