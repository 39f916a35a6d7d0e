"""delta-connected components by repeated alpha = 1 dilation, plus graph oracles.

A component is grown from a seed ``g`` by

    U(n) = 1_I * dilate(U(n-1))       (alpha = 1, t = delta)

until ``U(n) == U(n-1)``. Because the dilation of a union is the union of the
dilations, only the cells added in the previous step need to be expanded; that
frontier form is what ``find_full_component`` runs by default. The iteration
count reported for a component includes the final step that adds nothing, so
a singleton takes 1 iteration and a chain of ``n`` points takes ``n``.

Seeds are picked at the lowest unlabeled index (point order for clouds,
x-fastest scan order for grids).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InvalidArgumentError
from .geometry import MetricWeights
from .morphology import (
    LiftedVolume,
    MorphKernel,
    PointCloud,
    _as_indicator,
    dilate_cloud,
    epsilon_of,
    layer_stencils,
)

UNREACHABLE = -1


@dataclass(frozen=True)
class CCParams:
    delta: float
    weights: MetricWeights = field(default_factory=MetricWeights)
    seed_order: Optional[Sequence[int]] = None

    def __post_init__(self):
        if not np.isfinite(self.delta) or self.delta <= 0:
            raise InvalidArgumentError(f"delta must be > 0, got {self.delta!r}")

    @property
    def alpha(self) -> float:
        # labeling is only exact for alpha = 1; the alpha > 1 path lives in the demo below
        return 1.0


@dataclass
class ComponentLabeling:
    """Labels per point or cell: 0 is background, ``k >= 1`` is component ``k``.

    ``seeds`` holds flat indices (point index, or linear cell index for
    grids); ``iterations[k-1]`` is the iteration count of component ``k``.
    """

    labels: np.ndarray
    seeds: list = field(default_factory=list)
    iterations: list = field(default_factory=list)

    @property
    def K(self) -> int:
        return len(self.seeds)

    @property
    def total_iterations(self) -> int:
        return int(sum(self.iterations))

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.K + 1)[1:]

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.labels.ravel() == k)


# ---------------------------------------------------------------------------
# Neighbour structures
# ---------------------------------------------------------------------------


class _CloudGraph:
    def __init__(self, cloud: PointCloud, delta: float):
        self.adj = cloud.dist <= delta
        self.n = len(cloud)

    def expand(self, frontier: np.ndarray) -> np.ndarray:
        return np.flatnonzero(self.adj[frontier].any(axis=0))


class _GridGraph:
    """Closed delta-neighbourhoods on a LiftedVolume, per theta layer."""

    def __init__(self, vol: LiftedVolume, w: MetricWeights, delta: float):
        self.nx, self.ny, self.nt = vol.dims
        self.n = self.nx * self.ny * self.nt
        self.stencils = layer_stencils(vol, w, delta)

    def expand(self, frontier: np.ndarray) -> np.ndarray:
        nx, ny, nt = self.nx, self.ny, self.nt
        k, rem = np.divmod(frontier, nx * ny)
        j, i = np.divmod(rem, nx)
        found = []
        for layer in np.unique(k):
            sel = k == layer
            st = self.stencils[layer]
            ii = i[sel][:, None] + st.di[None, :]
            jj = j[sel][:, None] + st.dj[None, :]
            kk = (layer + st.dk[None, :]) % nt
            ok = (ii >= 0) & (ii < nx) & (jj >= 0) & (jj < ny)
            kk = np.broadcast_to(kk, ii.shape)
            found.append((ii[ok] + nx * (jj[ok] + ny * kk[ok])))
        return np.unique(np.concatenate(found)) if found else np.zeros(0, dtype=np.int64)


def _graph_for(I, p: CCParams):
    if isinstance(I, tuple) and len(I) == 2 and isinstance(I[1], PointCloud):
        ind, cloud = I
        return _as_indicator(ind).ravel(), _CloudGraph(cloud, p.delta)
    if isinstance(I, LiftedVolume):
        return _as_indicator(I.data).ravel(), _GridGraph(I, p.weights, p.delta)
    raise InvalidArgumentError("I must be a LiftedVolume or an (indicator, PointCloud) pair")


# ---------------------------------------------------------------------------
# Algorithms
# ---------------------------------------------------------------------------


def _grow(seed: int, inside: np.ndarray, graph, history: bool, max_steps: Optional[int] = None):
    member = np.zeros_like(inside)
    member[seed] = True
    frontier = np.array([seed])
    steps = 0
    hist = [np.array([seed])] if history else None
    while True:
        if max_steps is not None and steps >= max_steps:
            break
        steps += 1
        cand = graph.expand(frontier)
        new = cand[inside[cand] & ~member[cand]]
        if history:
            hist.append(np.concatenate([hist[-1], new]))
        if new.size == 0:
            break
        member[new] = True
        frontier = new
    return member, steps, hist


def find_full_component(seed: int, I, p: CCParams, history: bool = False):
    """Grow the component of ``seed`` to its fixed point.

    ``I`` is a LiftedVolume indicator or an ``(indicator, PointCloud)`` pair.
    Returns ``(members, iterations)``, plus the list of member index arrays
    after each step when ``history`` is set (entry ``n`` is the support of
    ``U(n)``).
    """
    inside, graph = _graph_for(I, p)
    seed = int(seed)
    if not 0 <= seed < inside.size or not inside[seed]:
        raise InvalidArgumentError(f"seed {seed} is not in the set")
    member, steps, hist = _grow(seed, inside, graph, history)
    members = np.flatnonzero(member)
    return (members, steps, hist) if history else (members, steps)


def find_all_components(I, p: CCParams) -> ComponentLabeling:
    """Label every delta-connected component of ``I``."""
    inside, graph = _graph_for(I, p)
    shape = I.data.shape if isinstance(I, LiftedVolume) else (inside.size,)
    labels = np.zeros(inside.size, dtype=np.int32)
    seeds, iters = [], []
    order = np.flatnonzero(inside) if p.seed_order is None else np.asarray(p.seed_order, dtype=int)
    for s in order:
        if not inside[s] or labels[s]:
            continue
        member, steps, _ = _grow(int(s), inside & (labels == 0), graph, False)
        seeds.append(int(s))
        iters.append(steps)
        labels[member] = len(seeds)
    return ComponentLabeling(labels.reshape(shape), seeds, iters)


def dense_component(seed: int, indicator, cloud: PointCloud, delta: float, max_steps: Optional[int] = None):
    """Reference form of the growth loop that calls ``dilate_cloud`` every step.

    Slower than the frontier form; kept as a cross-check of the equivalence.
    Returns the list of supports of ``U(0), U(1), ...``.
    """
    inside = _as_indicator(indicator).astype(float)
    k = MorphKernel(delta, 1.0, cloud.weights)
    U = np.zeros(len(cloud))
    U[seed] = 1.0
    supports = [np.flatnonzero(U > 0)]
    while max_steps is None or len(supports) <= max_steps:
        V = inside * dilate_cloud(U, cloud, k)
        supports.append(np.flatnonzero(V > 0))
        if np.array_equal(V, U):
            break
        U = V
    return supports


# ---------------------------------------------------------------------------
# Oracles and checks
# ---------------------------------------------------------------------------


def oracle_components(indicator, cloud: PointCloud, delta: float) -> ComponentLabeling:
    """Connected components of the graph ``d <= delta`` restricted to ``I``.

    Labels are numbered by the smallest member index. Iteration counts are
    not meaningful here and are left empty.
    """
    inside = _as_indicator(indicator).ravel()
    idx = np.flatnonzero(inside)
    labels = np.zeros(inside.size, dtype=np.int32)
    if idx.size == 0:
        return ComponentLabeling(labels)
    sub = cloud.dist[np.ix_(idx, idx)] <= delta
    _, comp = connected_components(csr_matrix(sub), directed=False)
    # renumber by first appearance, i.e. by smallest member index
    _, first = np.unique(comp, return_index=True)
    rank = np.empty(len(first), dtype=np.int32)
    rank[np.argsort(first)] = np.arange(1, len(first) + 1)
    labels[idx] = rank[comp]
    seeds = [int(idx[f]) for f in np.sort(first)]
    return ComponentLabeling(labels, seeds, [])


def same_partition(a, b) -> bool:
    """True when two labelings induce the same partition (numbering ignored)."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape or not np.array_equal(a == 0, b == 0):
        return False
    pairs = np.unique(np.stack([a, b]), axis=1)
    return len(np.unique(pairs[0])) == pairs.shape[1] == len(np.unique(pairs[1]))


def hop_count(cloud: PointCloud, delta: float, g0: int, g: int, indicator=None) -> int:
    """Fewest steps of length ``<= delta`` from ``g0`` to ``g``; ``UNREACHABLE`` if none."""
    return int(hop_layers(cloud, delta, g0, indicator)[g])


def hop_layers(cloud: PointCloud, delta: float, g0: int, indicator=None) -> np.ndarray:
    """Breadth-first hop count from ``g0`` to every point."""
    n = len(cloud)
    inside = np.ones(n, bool) if indicator is None else _as_indicator(indicator).ravel()
    hops = np.full(n, UNREACHABLE, dtype=int)
    hops[g0] = 0
    q = deque([g0])
    adj = cloud.dist <= delta
    while q:
        u = q.popleft()
        for v in np.flatnonzero(adj[u] & inside):
            if hops[v] == UNREACHABLE:
                hops[v] = hops[u] + 1
                q.append(v)
    return hops


def state_formula_check(indicator, cloud: PointCloud, delta: float, g0: int, n: int) -> bool:
    """Support of ``U(g0, ., n)`` equals ``{g : hops(g0, g) <= n}``."""
    inside = _as_indicator(indicator).ravel()
    _, _, hist = _grow(g0, inside, _CloudGraph(cloud, delta), True, max_steps=n)
    support = hist[min(n, len(hist) - 1)]
    hops = hop_layers(cloud, delta, g0, inside)
    expected = np.flatnonzero((hops >= 0) & (hops <= n))
    return bool(np.array_equal(np.sort(support), expected))


def greedy_cover(indicator, cloud: PointCloud, delta: float) -> np.ndarray:
    """Scan-order greedy cover of ``I`` by open balls of radius ``delta``.

    Its size is an upper bound on the covering number.
    """
    inside = _as_indicator(indicator).ravel()
    covered = ~inside
    centres = []
    for i in np.flatnonzero(inside):
        if covered[i]:
            continue
        centres.append(i)
        covered |= cloud.dist[i] < delta
    return np.array(centres, dtype=int)


def iteration_bound_check(labeling: ComponentLabeling, indicator, cloud: PointCloud, delta: float) -> bool:
    """Total iterations ``<=`` greedy cover size ``+ K``."""
    return labeling.total_iterations <= len(greedy_cover(indicator, cloud, delta)) + labeling.K


# ---------------------------------------------------------------------------
# alpha > 1 reach demo
# ---------------------------------------------------------------------------


def grow_real_valued(seed: int, cloud: PointCloud, t: float, alpha: float, max_steps: int = 100):
    """Iterate ``U(n) = 1_I * dilate_t^alpha(U(n-1))`` on real values from a spike.

    Returns the sorted support at the fixed point (values compared exactly).
    """
    k = MorphKernel(t, alpha, cloud.weights)
    U = np.zeros(len(cloud))
    U[seed] = 1.0
    for _ in range(max_steps):
        V = dilate_cloud(U, cloud, k)
        if np.array_equal(V, U):
            break
        U = V
    return np.flatnonzero(U > 0)


def alpha_gt1_reach_demo(cloud: PointCloud, t: float, alpha: float = 2.0) -> dict:
    """Support reached from each seed with the alpha-kernel and with alpha = 1.

    ``cloud`` holds the three points ``h1, h2, h3``. Returns
    ``{"alpha": {seed: members}, "alpha1": {seed: members}}``.
    """
    delta = epsilon_of(t, alpha)
    ones = np.ones(len(cloud), dtype=bool)
    out = {"alpha": {}, "alpha1": {}}
    for s in range(len(cloud)):
        out["alpha"][s] = grow_real_valued(s, cloud, t, alpha)
        members, _ = find_full_component(s, (ones, cloud), CCParams(delta, cloud.weights))
        out["alpha1"][s] = members
    return out
