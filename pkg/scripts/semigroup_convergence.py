"""Grid error of the dilation semigroup as the 1D step h shrinks.

For alpha = 2 the error has the closed form (h^2/4)(1/(2t) + 1/(2s)) on any
f with enough room around its maximum, so it falls by 4 when h halves.
Prints the measured error next to that value for a few random
piecewise-linear fields.

    python3 scripts/semigroup_convergence.py
"""

import argparse

import numpy as np

from lcc.morphology import MorphKernel, dilate_1d


def piecewise_linear(x, rng):
    knots = np.sort(rng.uniform(x[0], x[-1], 6))
    return np.interp(x, knots, rng.uniform(0.0, 1.0, 6))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t", type=float, default=0.5)
    ap.add_argument("--s", type=float, default=0.7)
    ap.add_argument("--fields", type=int, default=3)
    args = ap.parse_args()
    t, s = args.t, args.s
    steps = (4e-3, 2e-3, 1e-3, 5e-4)
    seeds = np.random.default_rng(0).integers(0, 2**31, args.fields)
    for alpha in (1.5, 2.0):
        print(f"alpha = {alpha}")
        for seed in seeds:
            errs = []
            for h in steps:
                x = np.arange(-3.0, 3.0 + h / 2, h)
                f = piecewise_linear(x, np.random.default_rng(int(seed)))
                lhs = dilate_1d(dilate_1d(f, h, MorphKernel(t, alpha)), h, MorphKernel(s, alpha))
                rhs = dilate_1d(f, h, MorphKernel(t + s, alpha))
                errs.append(np.abs(lhs - rhs).max())
            ratios = " ".join(f"{a / b:5.2f}" for a, b in zip(errs, errs[1:]))
            print("  errors " + " ".join(f"{e:.3e}" for e in errs) + f"  ratios {ratios}")
        if alpha == 2.0:
            print("  closed form " + " ".join(f"{h * h / 4 * (1 / (2 * t) + 1 / (2 * s)):.3e}" for h in steps))


if __name__ == "__main__":
    main()
