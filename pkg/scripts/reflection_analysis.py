"""Which log-coordinate sign flips preserve pairwise distances.

Every flip keeps ||log g|| fixed, but component labeling depends on
||log(h^-1 g)||. The flips that keep the relative log norm are exactly the
ones that act on the group as automorphisms; the other four change pairwise
distances and so can change the partition.

    python3 scripts/reflection_analysis.py
"""

import numpy as np

from lcc.components import CCParams, find_all_components, same_partition
from lcc.geometry import TWO_PI, MetricWeights, reflect_array, sign_pattern
from lcc.morphology import PointCloud


def main():
    rng = np.random.default_rng(0)
    w = MetricWeights(1.0, 2.0, 0.5)
    pts = np.c_[rng.uniform(0, 10, (80, 2)), rng.uniform(0, TWO_PI, 80)]
    cloud = PointCloud(pts, w)
    delta = float(np.median(cloud.dist)) * 0.2
    ind = np.ones(len(cloud), bool)
    base = find_all_components((ind, cloud), CCParams(delta, w))
    print(f"{len(cloud)} points, delta {delta:.3f}, K = {base.K}")
    for i in range(8):
        moved = PointCloud(reflect_array(pts, i), w)
        change = np.abs(moved.dist - cloud.dist).max()
        lab = find_all_components((ind, moved), CCParams(delta, w))
        signs = "".join("-" if v < 0 else "+" for v in sign_pattern(i))
        print(
            f"pattern {i} ({signs}): max pairwise change {change:.2e}, "
            f"K = {lab.K}, same partition {same_partition(base.labels, lab.labels)}"
        )


if __name__ == "__main__":
    main()
