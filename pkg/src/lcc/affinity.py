"""Affinities between delta-connected components via alpha > 1 dilations.

Each component ``k`` is turned into the field ``W0_k = D 1_k / max_k D``,
dilated with ``k_t^alpha``, and compared with every other component ``l``
through the power mean

    a~_kl = ( mean_{h in l} dilate(W0_k)(h)^p )^(1/p).

The matrix is symmetrised with ``a = max(a~, a~^T)``. Cells are weighted
uniformly, so the cell volume cancels.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .components import ComponentLabeling
from .errors import DegenerateDataError, InvalidArgumentError, PreconditionError
from .geometry import MetricWeights, se2_pairwise, sinc
from .morphology import LiftedVolume, MorphKernel, PointCloud, kernel_value

# Chunk size (target rows) for grid distance blocks.
_CHUNK = 2048


@dataclass
class AffinityMatrix:
    a: np.ndarray
    a_tilde: np.ndarray
    t: float
    alpha: float
    p: float
    component_ids: list = field(default_factory=list)
    T: Optional[float] = None

    @property
    def K(self) -> int:
        return self.a.shape[0]


def initial_field(members, D) -> np.ndarray:
    """``D * 1_component / max_component D`` as a flat array over the domain."""
    D = np.asarray(D, dtype=float).ravel()
    members = np.asarray(members).ravel()
    if members.dtype == bool:
        members = np.flatnonzero(members)
    if members.size == 0:
        raise InvalidArgumentError("component is empty")
    if np.any(D < 0) or np.any(D > 1) or not np.all(np.isfinite(D)):
        raise InvalidArgumentError("data term must lie in [0, 1]")
    peak = D[members].max()
    if peak <= 0:
        raise DegenerateDataError("data term vanishes on the component")
    W = np.zeros_like(D)
    W[members] = D[members] / peak
    return W


def diameter_bound(I, weights: Optional[MetricWeights] = None) -> float:
    """Upper bound on the diameter of ``I``.

    Clouds use the exact maximum pairwise distance. Grids use
    ``sqrt(max(w1, w2) (Lx^2 + Ly^2)) / sinc(period/4) + sqrt(w3) period/2``;
    the sinc factor is the largest stretch the log applies to a translation
    when the relative turn is at most half a period.
    """
    if isinstance(I, PointCloud):
        return I.diameter()
    if isinstance(I, LiftedVolume):
        w = weights or MetricWeights()
        nx, ny, _ = I.dims
        Lx = (nx - 1) * I.spacing[0]
        Ly = (ny - 1) * I.spacing[1]
        spatial = np.sqrt(max(w.w1, w.w2) * (Lx**2 + Ly**2)) / sinc(I.period / 4)
        return float(spatial + np.sqrt(w.w3) * I.period / 2)
    return float(I)


def min_affinity_time(I, alpha: float, weights: Optional[MetricWeights] = None, margin: float = 1e-6) -> float:
    """``Delta^alpha beta^(1 - alpha) (1 + margin)``.

    Above this time the dilated field of any component stays strictly
    positive on all of ``I``. ``I`` may also be a diameter bound given as a number.
    """
    if not alpha > 1 or not np.isfinite(alpha):
        raise PreconditionError("the minimum affinity time needs a finite alpha > 1")
    beta = alpha / (alpha - 1.0)
    delta = diameter_bound(I, weights)
    return float(delta**alpha * beta ** (1.0 - alpha) * (1.0 + margin))


def _cell_coords(vol: LiftedVolume, flat: np.ndarray) -> np.ndarray:
    nx, ny, _ = vol.dims
    k, rem = np.divmod(flat, nx * ny)
    j, i = np.divmod(rem, nx)
    return vol.cell_coords(k, j, i)


def dilate_on(source: np.ndarray, values: np.ndarray, targets: np.ndarray, dist_fn, k: MorphKernel) -> np.ndarray:
    """``max(max_{h in source} values[h] - k(d(g, h)), 0)`` for each target ``g``.

    The zero is the centre term of the dilation for targets outside the
    source support, where the field itself is zero.
    """
    out = np.zeros(targets.size)
    for s in range(0, targets.size, _CHUNK):
        tg = targets[s : s + _CHUNK]
        Dm = dist_fn(tg, source)
        cand = values[None, :] - kernel_value(k, Dm, closed=True)
        out[s : s + _CHUNK] = np.maximum(cand.max(axis=1), 0.0)
    return out


def affinity_matrix(
    labeling: ComponentLabeling,
    domain: Union[PointCloud, LiftedVolume],
    D,
    t: float,
    alpha: float = 2.0,
    p: float = 2.0,
    weights: Optional[MetricWeights] = None,
) -> AffinityMatrix:
    """Pairwise component affinities for a cloud or grid labeling.

    ``D`` holds one data value per point or cell. For grids ``weights`` sets
    the metric; clouds carry their own.
    """
    if not alpha > 1:
        raise PreconditionError("affinities use alpha > 1")
    if p < 1:
        raise InvalidArgumentError("power-mean exponent p must be >= 1")
    labels = np.asarray(labeling.labels).ravel()
    D = np.asarray(D, dtype=float).ravel()
    if D.shape != labels.shape:
        raise InvalidArgumentError("data term and labeling have different sizes")

    if isinstance(domain, PointCloud):
        w = domain.weights
        dist = domain.dist

        def dist_fn(a, b):
            return dist[np.ix_(a, b)]

    elif isinstance(domain, LiftedVolume):
        w = weights or MetricWeights()

        def dist_fn(a, b):
            return se2_pairwise(_cell_coords(domain, a), _cell_coords(domain, b), w, domain.period)

    else:
        raise InvalidArgumentError("domain must be a PointCloud or LiftedVolume")

    k = MorphKernel(t, alpha, w)
    ids = []
    members = []
    for lab in range(1, int(labels.max(initial=0)) + 1):
        m = np.flatnonzero(labels == lab)
        if m.size == 0:
            warnings.warn(f"component {lab} is empty and is left out of the affinity matrix")
            continue
        ids.append(lab)
        members.append(m)
    K = len(ids)
    targets = np.concatenate(members) if K else np.zeros(0, dtype=int)
    bounds = np.cumsum([0] + [m.size for m in members])

    at = np.zeros((K, K))
    for r, m in enumerate(members):
        W0 = initial_field(m, D)
        W1 = dilate_on(m, W0[m], targets, dist_fn, k)
        for c in range(K):
            vals = W1[bounds[c] : bounds[c + 1]]
            at[r, c] = np.mean(vals**p) ** (1.0 / p)
    a = np.maximum(at, at.T)
    return AffinityMatrix(np.clip(a, 0.0, 1.0), at, float(t), float(alpha), float(p), ids)


def group_by_threshold(A: AffinityMatrix, labeling: ComponentLabeling, T: float) -> ComponentLabeling:
    """Merge components joined by a chain of affinities ``> T``.

    Groups are numbered 1..K' in order of their smallest original label.
    """
    if not 0 < T < 1:
        raise InvalidArgumentError("threshold T must lie in (0, 1)")
    adj = A.a > T
    np.fill_diagonal(adj, False)
    _, comp = connected_components(csr_matrix(adj), directed=False)
    _, first = np.unique(comp, return_index=True)
    order = np.argsort(first)
    rank = np.empty(len(first), dtype=np.int32)
    rank[order] = np.arange(1, len(first) + 1)

    lut = np.zeros(int(max(A.component_ids, default=0)) + 1, dtype=np.int32)
    for c, lab in enumerate(A.component_ids):
        lut[lab] = rank[comp[c]]
    labels = lut[np.asarray(labeling.labels)]
    seeds, iters = [], []
    for g in range(1, len(first) + 1):
        cs = [c for c in range(len(comp)) if rank[comp[c]] == g]
        seeds.append(labeling.seeds[A.component_ids[cs[0]] - 1] if labeling.seeds else None)
        if labeling.iterations:
            iters.append(sum(labeling.iterations[A.component_ids[c] - 1] for c in cs))
    A.T = float(T)
    return ComponentLabeling(labels, seeds, iters)
