"""delta sweeps on the two demo clouds, with CSV and SVG output.

    python3 scripts/persistence_demo.py --out persistence_out
"""

import argparse
from pathlib import Path

import numpy as np

from lcc.persistence import (
    demo_circle_with_outliers,
    demo_seven_points,
    suggest_delta,
    sweep,
    write_outputs,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="persistence_out")
    ap.add_argument("--steps", type=int, default=200)
    args = ap.parse_args()

    for name, cloud, hi in (("seven", demo_seven_points(), 8.0), ("circle", demo_circle_with_outliers(), 4.0)):
        ind = np.ones(len(cloud), bool)
        d = sweep((ind, cloud), delta_min=0.01, delta_max=hi, steps=args.steps)
        exact = sweep((ind, cloud), delta_min=0.01, delta_max=hi, spacing="exact")
        write_outputs(d, Path(args.out) / name)
        print(f"{name}: {len(cloud)} points")
        for lo, up, k in exact.plateaus:
            print(f"  K = {k:2d} on [{lo:.4f}, {up:.4f})")
        print(f"  suggested delta (sampled) {suggest_delta(d)!r}, (exact) {suggest_delta(exact)!r}")


if __name__ == "__main__":
    main()
