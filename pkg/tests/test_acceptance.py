"""The eleven acceptance criteria, each at its stated tolerance and size.

Every test prints one ``C<n> <name>: PASS|FAIL (...)`` line; the lines are
repeated in a summary section at the end of the pytest run.
"""

import time

import numpy as np
import pytest
from skimage.filters import threshold_otsu

import conftest
from lcc.affinity import affinity_matrix, dilate_on, initial_field, min_affinity_time
from lcc.components import (
    CCParams,
    alpha_gt1_reach_demo,
    find_all_components,
    find_full_component,
    hop_layers,
    iteration_bound_check,
    oracle_components,
    same_partition,
)
from lcc.config import RunConfig
from lcc.geometry import (
    TWO_PI,
    MetricWeights,
    log_norm,
    reflect_array,
    se2_exp,
    se2_log,
    so3_exp,
    so3_log,
)
from lcc.lifting import coverage, crossing_lines_image, r2_components, run_pipeline
from lcc.morphology import (
    MorphKernel,
    PointCloud,
    dilate_1d,
    dilate_cloud,
    epsilon_of,
)
from lcc.persistence import (
    demo_circle_with_outliers,
    demo_seven_points,
    merge_thresholds,
    suggest_delta,
    sweep,
)


def report(tag: str, name: str, ok: bool, detail: str) -> None:
    line = f"{tag} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)
    assert ok, line


def random_cloud(rng):
    n = int(rng.integers(10, 201))
    pts = np.c_[rng.uniform(0, 10, (n, 2)), rng.uniform(0, TWO_PI, n)]
    return PointCloud(pts, MetricWeights(*rng.uniform(0.1, 5.0, 3)))


def tie_free(rng, cloud):
    """A pairwise distance moved by a relative 1e-7, so no distance equals it."""
    off = cloud.dist[np.triu_indices(len(cloud), 1)]
    return float(rng.choice(off) * (1 + 1e-7 * rng.choice([-1.0, 1.0])))


def criterion1_runs():
    """200 clouds with 10 deltas each, shared by criteria 1 and 3 (cached)."""
    if not hasattr(criterion1_runs, "cache"):
        rng = np.random.default_rng(20240601)
        runs = []
        t0 = time.perf_counter()
        for _ in range(200):
            cloud = random_cloud(rng)
            ind = np.ones(len(cloud), bool)
            for _ in range(10):
                delta = tie_free(rng, cloud)
                lab = find_all_components((ind, cloud), CCParams(delta, cloud.weights))
                runs.append((cloud, ind, delta, lab))
        criterion1_runs.cache = (runs, time.perf_counter() - t0)
    return criterion1_runs.cache


def test_c1_oracle_equivalence():
    runs, label_time = criterion1_runs()
    t0 = time.perf_counter()
    bad = sum(
        not same_partition(lab.labels, oracle_components(ind, cloud, delta).labels)
        for cloud, ind, delta, lab in runs
    )
    # labeling plus oracle comparison
    elapsed = label_time + time.perf_counter() - t0
    report("C1", "oracle equivalence", bad == 0 and elapsed < 30.0,
           f"{bad}/{len(runs)} mismatches, {elapsed:.1f} s, limit 30 s")


def test_c2_state_formula():
    rng = np.random.default_rng(7)
    checked = bad = 0
    for _ in range(50):
        cloud = random_cloud(rng)
        delta = tie_free(rng, cloud)
        ind = np.ones(len(cloud), bool)
        g0 = int(rng.integers(len(cloud)))
        _, steps, hist = find_full_component(g0, (ind, cloud), CCParams(delta, cloud.weights), history=True)
        hops = hop_layers(cloud, delta, g0, ind)
        for n in range(steps + 1):
            expected = np.flatnonzero((hops >= 0) & (hops <= n))
            bad += not np.array_equal(np.sort(hist[n]), expected)
            checked += 1
    report("C2", "state formula", bad == 0, f"{bad}/{checked} iteration states differ from BFS layers")


def test_c3_iteration_bound():
    runs, _ = criterion1_runs()
    viol = sum(not iteration_bound_check(lab, ind, cloud, delta) for cloud, ind, delta, lab in runs)
    report("C3", "iteration bound", viol == 0, f"{viol}/{len(runs)} runs exceed greedy cover + K")


def test_c4_thickening_law():
    rng = np.random.default_rng(11)
    cloud_bad = 0
    for _ in range(50):
        cloud = random_cloud(rng)
        t = tie_free(rng, cloud)
        A = rng.random(len(cloud)) < 0.1
        A[int(rng.integers(len(cloud)))] = True
        out = dilate_cloud(A.astype(float), cloud, MorphKernel(t, 1.0, cloud.weights))
        expected = (cloud.dist[:, A] <= t).any(axis=1)
        cloud_bad += not np.array_equal(out > 0, expected)

    h = 1e-3
    x = np.arange(-4.0, 4.0 + h / 2, h)
    mid = x.size // 2
    worst = 0.0
    for alpha in (1.5, 2.0):
        for t in (0.5, 1.0, 2.0):
            f = np.zeros(x.size)
            f[mid] = 1.0
            out = dilate_1d(f, h, MorphKernel(t, alpha))
            support = np.abs(x[out > 0] - x[mid]).max()
            worst = max(worst, abs(support - epsilon_of(t, alpha)))
    ok = cloud_bad == 0 and worst <= 2 * h
    report("C4", "thickening law", ok,
           f"{cloud_bad}/50 cloud supports differ, worst 1D radius error {worst:.2e} vs limit {2 * h:.0e}")


def piecewise_linear(x, rng):
    knots = np.sort(rng.uniform(x[0], x[-1], 6))
    return np.interp(x, knots, rng.uniform(0.0, 1.0, 6))


def test_c5_semigroup():
    rng = np.random.default_rng(5)
    t, s = 0.5, 0.7
    seeds = [int(v) for v in rng.integers(0, 2**31, 3)]
    sup_ok = True
    ratios = []
    worst = 0.0
    for alpha in (1.5, 2.0):
        for seed in seeds:
            errs = []
            for h in (1e-3, 5e-4):
                x = np.arange(-3.0, 3.0 + h / 2, h)
                f = piecewise_linear(x, np.random.default_rng(seed))
                lhs = dilate_1d(dilate_1d(f, h, MorphKernel(t, alpha)), h, MorphKernel(s, alpha))
                rhs = dilate_1d(f, h, MorphKernel(t + s, alpha))
                errs.append(float(np.abs(lhs - rhs).max()))
            worst = max(worst, errs[0] / 1e-3)
            sup_ok &= errs[0] <= 10 * 1e-3 and errs[1] <= 10 * 5e-4
            ratios.append(errs[0] / errs[1] if errs[1] > 0 else np.inf)
    halves = all(1.6 <= r <= 2.4 for r in ratios)
    report("C5", "semigroup", sup_ok and halves,
           f"sup error <= 10h: {sup_ok} (worst {worst:.2e} h), "
           f"error ratio on halving h: {min(ratios):.2f}..{max(ratios):.2f}, required 1.6..2.4")


def test_c6_reflection_equivariance():
    rng = np.random.default_rng(6)
    part_bad = {i: 0 for i in range(8)}
    pair_change = {i: 0.0 for i in range(8)}
    norm_err = 0.0
    for _ in range(20):
        cloud = random_cloud(rng)
        delta = tie_free(rng, cloud)
        ind = np.ones(len(cloud), bool)
        base = find_all_components((ind, cloud), CCParams(delta, cloud.weights))
        c = np.stack(se2_log(*cloud.points.T, period=cloud.period), axis=-1)
        for i in range(8):
            moved = reflect_array(cloud.points, i, cloud.period)
            mc = np.stack(se2_log(*moved.T, period=cloud.period), axis=-1)
            n0 = log_norm(c, cloud.weights)
            n1 = log_norm(mc, cloud.weights)
            norm_err = max(norm_err, float(np.max(np.abs(n1 - n0) / np.maximum(1.0, n0))))
            other = PointCloud(moved, cloud.weights, cloud.period)
            pair_change[i] = max(pair_change[i], float(np.abs(other.dist - cloud.dist).max()))
            lab = find_all_components((ind, other), CCParams(delta, cloud.weights))
            part_bad[i] += not same_partition(base.labels, lab.labels)
    failing = [i for i in range(8) if part_bad[i]]
    ok = not failing and norm_err <= 1e-12
    report("C6", "reflection equivariance", ok,
           f"norm preserved to {norm_err:.1e}; partitions differ for patterns {failing} "
           f"in {[part_bad[i] for i in failing]} of 20 clouds; largest pairwise distance change "
           f"per pattern {[float(f'{pair_change[i]:.1e}') for i in range(8)]}")


def test_c7_alpha_counterexample():
    e = epsilon_of(1.0, 2.0) * (1 - 1e-3)
    cloud = PointCloud(np.array([[0.0, 0, 0], [e, 0, 0], [2 * e, 0, 0]]), MetricWeights(1.0, 1.0, 1.0))
    out = alpha_gt1_reach_demo(cloud, 1.0, 2.0)
    got = {
        "alpha2 from h2": out["alpha"][1].tolist(),
        "alpha2 from h1": out["alpha"][0].tolist(),
        "alpha1 from h1": out["alpha1"][0].tolist(),
        "alpha1 from h2": out["alpha1"][1].tolist(),
    }
    ok = (
        got["alpha2 from h2"] == [0, 1, 2]
        and got["alpha2 from h1"] == [0, 1]
        and got["alpha1 from h1"] == [0, 1, 2]
        and got["alpha1 from h2"] == [0, 1, 2]
    )
    report("C7", "alpha > 1 counterexample", ok, ", ".join(f"{k}: {v}" for k, v in got.items()))


def test_c8_affinity_bounds():
    rng = np.random.default_rng(3)
    tested = viol = pos_viol = 0
    while tested < 100:
        w = MetricWeights(*rng.uniform(0.2, 3.0, 3))
        n1, n2 = (int(v) for v in rng.integers(3, 15, 2))
        A = np.c_[rng.uniform(0, 1, (n1, 2)), rng.uniform(0, 0.5, n1)]
        B = np.c_[rng.uniform(0, 1, (n2, 2)) + [rng.uniform(1.5, 4.0), 0.0], rng.uniform(0, 0.5, n2)]
        cloud = PointCloud(np.vstack([A, B]), w)
        th = merge_thresholds(cloud)
        # need a delta that keeps each group whole but the two groups apart
        if th[-2] >= cloud.dist[:n1, n1:].min():
            continue
        delta = 0.5 * (th[-2] + th[-1])
        ind = np.ones(len(cloud), bool)
        lab = find_all_components((ind, cloud), CCParams(delta, w))
        if lab.K != 2:
            continue
        tested += 1
        alpha = float(rng.choice([1.5, 2.0]))
        beta = alpha / (alpha - 1)
        t_min = min_affinity_time(cloud, alpha)
        t = t_min * rng.uniform(1.0, 3.0)
        am = affinity_matrix(lab, cloud, np.ones(len(cloud)), t, alpha, 2.0)
        lo = 1 - (t / beta) * (cloud.diameter() / t) ** beta
        hi = 1 - (t / beta) * (delta / t) ** beta
        viol += not (np.all(np.diag(am.a) == 1.0) and lo <= am.a[0, 1] < hi)
        k = MorphKernel(t_min, alpha, w)
        for m in (lab.members(1), lab.members(2)):
            W0 = initial_field(m, np.ones(len(cloud)))
            W1 = dilate_on(m, W0[m], np.arange(len(cloud)), lambda a, b: cloud.dist[np.ix_(a, b)], k)
            pos_viol += not np.all(W1 > 0)
    report("C8", "affinity bounds", viol == 0 and pos_viol == 0,
           f"{viol}/{tested} configurations outside the bounds, "
           f"{pos_viol} dilations with a zero at the minimum time")


def test_c9_crossing_lines():
    t0 = time.perf_counter()
    img, centers = crossing_lines_image(128, (0.0, 67.5, 135.0))
    _, n_r2 = r2_components(img > threshold_otsu(img))
    cfg = (
        RunConfig()
        .with_stage("lift", n_orientations=16, periodicity="pi", polarity="bright")
        .with_stage("cost", lam=50.0, p=3.0)
        .with_stage("components", delta=0.97)
    )
    res = run_pipeline(img, cfg)
    elapsed = time.perf_counter() - t0
    K = res.labeling.K
    best, covers = [], []
    for c in centers:
        cov = [coverage(res.projection == k, c, 1) for k in range(1, K + 1)]
        j = int(np.argmax(cov)) if cov else -1
        best.append(j)
        covers.append(cov[j] if cov else 0.0)
    ok = n_r2 == 1 and K == 3 and len(set(best)) == 3 and min(covers) >= 0.9 and elapsed < 60.0
    report("C9", "crossing lines end to end", ok,
           f"R2 components {n_r2}, SE(2) components {K}, line coverage "
           f"{', '.join(f'{c:.3f}' for c in covers)}, {elapsed:.2f} s, limit 60 s")


def coarsens(fine, coarse) -> bool:
    return all(len(np.unique(coarse[fine == r])) == 1 for r in np.unique(fine[fine >= 0]))


def test_c10_persistence():
    details, ok = [], True
    for name, cloud, hi in (("seven points", demo_seven_points(), 8.0),
                            ("circle with outliers", demo_circle_with_outliers(), 4.0)):
        ind = np.ones(len(cloud), bool)
        d = sweep((ind, cloud), delta_min=0.01, delta_max=hi, steps=200)
        mono = bool(np.all(np.diff(d.counts) <= 0))
        refine = all(coarsens(a, b) for a, b in zip(d.traces, d.traces[1:]))
        interior = [(lo, up) for lo, up, k in d.plateaus if 1 < k < len(cloud)]
        s = suggest_delta(d)
        inside = s is not None and any(lo <= s < up for lo, up in interior)
        ok &= mono and refine and bool(interior) and inside
        details.append(f"{name}: monotone {mono}, coarsening {refine}, suggested {s}")
    report("C10", "persistence monotonicity", ok, "; ".join(details))


def random_rotations(rng, n):
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q.T
    return np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)], -1),
            np.stack([2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)], -1),
            np.stack([2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)], -1),
        ],
        axis=1,
    )


def test_c11_round_trips():
    rng = np.random.default_rng(11)
    n = 10_000
    se2_err = 0.0
    for period in (np.pi, TWO_PI):
        x, y = rng.uniform(-10, 10, (2, n))
        th = rng.uniform(-period / 2, period / 2, n)
        gx, gy, gth = se2_exp(*se2_log(x, y, th, period), period)
        dth = np.abs((gth - th + period / 2) % period - period / 2)
        se2_err = max(se2_err, float(np.max(np.abs(gx - x))), float(np.max(np.abs(gy - y))), float(dth.max()))

    R = random_rotations(rng, n)
    # a third of the samples within 1e-6 of angle 0 and a third within 1e-6 of pi
    axes = rng.normal(size=(n, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    k = n // 3
    R[:k] = so3_exp(axes[:k] * rng.uniform(0, 1e-6, (k, 1)))
    R[k : 2 * k] = so3_exp(axes[k : 2 * k] * (np.pi - rng.uniform(0, 1e-6, (k, 1))))
    so3_err = float(np.max(np.abs(so3_exp(so3_log(R)) - R)))
    ok = se2_err < 1e-10 and so3_err < 1e-8
    report("C11", "geometry round trips", ok,
           f"SE(2) max coordinate error {se2_err:.1e} (limit 1e-10), SO(3) max entry error {so3_err:.1e} (limit 1e-8)")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
