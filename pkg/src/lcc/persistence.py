"""delta sweeps of the component partition and plateau-based delta selection."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import minimum_spanning_tree

from .components import CCParams, find_all_components
from .errors import InvalidArgumentError
from .geometry import MetricWeights
from .morphology import LiftedVolume, PointCloud, _as_indicator


@dataclass
class PersistenceDiagram:
    """Component counts over ascending ``deltas`` and the plateaus they form.

    ``traces`` is ``(len(deltas), N)`` in cloud mode, holding for each point
    the smallest index of its component. In grid mode it is ``None`` and
    ``sizes`` carries the component sizes per delta.
    """

    deltas: np.ndarray
    counts: np.ndarray
    plateaus: list = field(default_factory=list)
    n_points: int = 0
    traces: Optional[np.ndarray] = None
    sizes: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.deltas)


def _representatives(labels: np.ndarray) -> np.ndarray:
    """Replace each label by the smallest flat index carrying it (0 stays -1)."""
    flat = labels.ravel()
    out = np.full(flat.size, -1, dtype=np.int64)
    fg = np.flatnonzero(flat)
    if fg.size:
        _, first, inv = np.unique(flat[fg], return_index=True, return_inverse=True)
        out[fg] = fg[first][inv]
    return out


def merge_thresholds(cloud: PointCloud, indicator=None) -> np.ndarray:
    """Sorted distances at which the cloud partition changes (MST edge lengths)."""
    inside = np.ones(len(cloud), bool) if indicator is None else _as_indicator(indicator)
    idx = np.flatnonzero(inside)
    if idx.size < 2:
        return np.zeros(0)
    D = cloud.dist[np.ix_(idx, idx)].copy()
    # coincident points would vanish from a sparse graph
    D[(D == 0) & ~np.eye(len(idx), dtype=bool)] = np.finfo(float).tiny
    mst = minimum_spanning_tree(csr_matrix(D))
    return np.unique(mst.data)


def delta_grid(delta_min: float, delta_max: float, steps: int, spacing: str = "linear") -> np.ndarray:
    if not (0 < delta_min < delta_max):
        raise InvalidArgumentError("need 0 < delta_min < delta_max")
    if steps < 2:
        raise InvalidArgumentError("need at least 2 steps")
    if spacing == "linear":
        return np.linspace(delta_min, delta_max, steps)
    if spacing == "geometric":
        return np.geomspace(delta_min, delta_max, steps)
    raise InvalidArgumentError(f"unknown spacing {spacing!r}")


def _plateaus(deltas, partitions, counts, delta_max) -> list:
    out = []
    start = 0
    for i in range(1, len(deltas) + 1):
        if i == len(deltas) or not np.array_equal(partitions[i], partitions[start]):
            hi = deltas[i] if i < len(deltas) else delta_max
            out.append((float(deltas[start]), float(hi), int(counts[start])))
            start = i
    return out


def sweep(
    I,
    weights: Optional[MetricWeights] = None,
    delta_min: float = 0.1,
    delta_max: float = 1.0,
    steps: int = 10,
    spacing: str = "linear",
) -> PersistenceDiagram:
    """Label ``I`` at each delta of the sweep.

    ``I`` is an ``(indicator, PointCloud)`` pair or a LiftedVolume indicator.
    ``spacing`` is ``linear``, ``geometric`` or, for clouds only, ``exact``:
    then the deltas are ``delta_min`` plus every merge threshold inside the
    range, so each plateau is exact rather than sampled.
    """
    is_cloud = isinstance(I, tuple)
    if is_cloud:
        ind, cloud = I
        inside = _as_indicator(ind)
        w = cloud.weights
    elif isinstance(I, LiftedVolume):
        inside = _as_indicator(I.data)
        w = weights or MetricWeights()
    else:
        raise InvalidArgumentError("I must be a LiftedVolume or an (indicator, PointCloud) pair")

    if spacing == "exact":
        if not is_cloud:
            raise InvalidArgumentError("exact thresholds are only available for point clouds")
        if not (0 < delta_min < delta_max):
            raise InvalidArgumentError("need 0 < delta_min < delta_max")
        th = merge_thresholds(cloud, inside)
        deltas = np.concatenate([[delta_min], th[(th > delta_min) & (th <= delta_max)]])
    else:
        deltas = delta_grid(delta_min, delta_max, steps, spacing)

    n = int(inside.sum())
    if n == 0:
        return PersistenceDiagram(np.zeros(0), np.zeros(0, dtype=int), [], 0, None, [])

    counts, partitions, sizes = [], [], []
    for d in deltas:
        lab = find_all_components(I, CCParams(float(d), w))
        counts.append(lab.K)
        partitions.append(_representatives(lab.labels))
        sizes.append(lab.sizes())
    counts = np.array(counts, dtype=int)
    plateaus = _plateaus(deltas, partitions, counts, delta_max)
    traces = np.stack(partitions) if is_cloud else None
    return PersistenceDiagram(np.asarray(deltas, float), counts, plateaus, n, traces, sizes)


def suggest_delta(d: PersistenceDiagram) -> Optional[float]:
    """Lower end of the longest plateau with ``1 < K < N``; ties go to the smaller delta.

    Returns ``None`` when there is no interior plateau.
    """
    best = None
    for lo, hi, k in d.plateaus:
        if not 1 < k < d.n_points:
            continue
        length = hi - lo
        if best is None or length > best[0] or (length == best[0] and lo < best[1]):
            best = (length, lo)
    return None if best is None else best[1]


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def write_counts_csv(d: PersistenceDiagram, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["delta", "count"])
        for delta, k in zip(d.deltas, d.counts):
            wr.writerow([_fmt(delta), int(k)])


def write_sizes_csv(d: PersistenceDiagram, path) -> None:
    """Rows ``delta,component_id,size``.

    Cloud ids are the smallest point index of the component, stable across
    delta; grid ids are the labels at that delta.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["delta", "component_id", "size"])
        for i, delta in enumerate(d.deltas):
            if d.traces is not None:
                reps, sz = np.unique(d.traces[i][d.traces[i] >= 0], return_counts=True)
            else:
                sz = d.sizes[i]
                reps = np.arange(1, len(sz) + 1)
            for r, s in zip(reps, sz):
                wr.writerow([_fmt(delta), int(r), int(s)])


def render_svg(d: PersistenceDiagram, width: int = 640, height: int = 360) -> str:
    """Step plot of K(delta) over stacked bars of component sizes."""
    pad = 48
    pw, ph = width - 2 * pad, height - 2 * pad
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if len(d) == 0:
        parts.append("</svg>")
        return "\n".join(parts) + "\n"
    lo, hi = float(d.deltas[0]), float(d.deltas[-1])
    if d.plateaus:
        hi = max(hi, d.plateaus[-1][1])
    span = hi - lo or 1.0
    kmax = max(int(d.counts.max()), 1)

    def X(v):
        return pad + (v - lo) / span * pw

    def Y(frac):
        return pad + ph - frac * ph

    # stacked bars: fraction of points in each component, largest at the bottom
    bw = max(pw / max(len(d), 1) * 0.8, 1.0)
    for i, delta in enumerate(d.deltas):
        if d.traces is not None:
            _, sz = np.unique(d.traces[i][d.traces[i] >= 0], return_counts=True)
        else:
            sz = np.asarray(d.sizes[i])
        sz = np.sort(sz)[::-1] / max(d.n_points, 1)
        base = 0.0
        for j, s in enumerate(sz):
            shade = 200 - int(150 * (j % 6) / 5)
            parts.append(
                f'<rect x="{X(delta) - bw / 2:.2f}" y="{Y(base + s):.2f}" width="{bw:.2f}" '
                f'height="{s * ph:.2f}" fill="rgb({shade},{shade},235)" opacity="0.6"/>'
            )
            base += s
    pts = []
    for i, delta in enumerate(d.deltas):
        nxt = d.deltas[i + 1] if i + 1 < len(d) else hi
        y = Y(d.counts[i] / kmax)
        pts.append(f"{X(delta):.2f},{y:.2f} {X(nxt):.2f},{y:.2f}")
    parts.append(f'<polyline points="{" ".join(pts)}" fill="none" stroke="black" stroke-width="2"/>')
    parts.append(f'<line x1="{pad}" y1="{pad + ph}" x2="{pad + pw}" y2="{pad + ph}" stroke="black"/>')
    parts.append(f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{pad + ph}" stroke="black"/>')
    parts.append(f'<text x="{pad + pw / 2}" y="{height - 12}" text-anchor="middle" font-size="12">delta</text>')
    parts.append(f'<text x="{pad}" y="{pad - 10}" font-size="12">K(delta), max {kmax}</text>')
    parts.append(f'<text x="{pad}" y="{height - 28}" font-size="10">{lo:.4g}</text>')
    parts.append(f'<text x="{pad + pw}" y="{height - 28}" text-anchor="end" font-size="10">{hi:.4g}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_outputs(d: PersistenceDiagram, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "counts": out / "persistence_counts.csv",
        "sizes": out / "persistence_sizes.csv",
        "svg": out / "persistence.svg",
    }
    write_counts_csv(d, paths["counts"])
    write_sizes_csv(d, paths["sizes"])
    paths["svg"].write_text(render_svg(d), encoding="utf-8")
    return {k: str(v) for k, v in paths.items()}


# ---------------------------------------------------------------------------
# Demo clouds
# ---------------------------------------------------------------------------


def demo_seven_points() -> PointCloud:
    """Two well separated groups of four and three points, all with theta = 0."""
    xy = np.array(
        [
            [0.0, 0.0],
            [1.0, 0.3],
            [0.4, 1.1],
            [1.5, 1.2],
            [6.0, 0.5],
            [7.1, 0.2],
            [6.6, 1.4],
        ]
    )
    return PointCloud(np.c_[xy, np.zeros(len(xy))], MetricWeights(1.0, 1.0, 1.0))


def demo_circle_with_outliers(n: int = 20, chord: float = 0.3) -> PointCloud:
    """``n`` points on a circle with neighbour chord ``chord`` plus two outliers.

    The outliers sit about 2.64 and 3.24 from the circle, so the sweep shows a
    long 3-component plateau starting at ``chord``.
    """
    r = 0.5 * chord / np.sin(np.pi / n)
    a = 2 * np.pi * np.arange(n) / n
    xy = np.c_[r * np.cos(a), r * np.sin(a)]
    xy = np.vstack([xy, [[r + 2.64, 0.0], [0.0, -(r + 3.24)]]])
    return PointCloud(np.c_[xy, np.zeros(len(xy))], MetricWeights(1.0, 1.0, 1.0))
