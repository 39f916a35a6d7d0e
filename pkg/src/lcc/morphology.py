"""Morphological kernels and dilations on point clouds, 1D grids and SE(2) grids.

A dilation here is the max-plus convolution

    out[g] = max_h  f[h] - k(d(g, h))

with the kernel ``k = (t/beta) (d/t)^beta`` (``1/alpha + 1/beta = 1``). For
``alpha = 1`` the kernel degenerates to the ``{0, inf}`` indicator of a ball and
the dilation of an indicator function is a set thickening.

Discrete dilations with ``alpha = 1`` use the closed ball ``d <= t`` so that they
agree with chain connectivity ``d(q_{i+1}, q_i) <= delta``. ``kernel_value``
itself keeps the strict pointwise limit unless asked otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError, PreconditionError
from .geometry import (
    TWO_PI,
    MetricWeights,
    _check_period,
    reduce_angle,
    se2_pairwise,
    se2_relative_norm,
    so3_pairwise,
)

# Relative slack when deciding d <= radius on regular grids, where exact
# ties (e.g. a diagonal step at radius sqrt(2)) are the rule, not the exception.
GRID_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class MorphKernel:
    """``k_t^alpha`` for the metric ``weights``."""

    t: float
    alpha: float = 1.0
    weights: MetricWeights = field(default_factory=MetricWeights)

    def __post_init__(self):
        if not np.isfinite(self.t) or self.t <= 0:
            raise InvalidArgumentError(f"kernel time t must be > 0, got {self.t!r}")
        if not np.isfinite(self.alpha) or self.alpha < 1:
            raise InvalidArgumentError(f"alpha must be >= 1, got {self.alpha!r}")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def beta(self) -> float:
        return np.inf if self.alpha == 1 else self.alpha / (self.alpha - 1.0)

    @property
    def reach(self) -> float:
        """Support radius of a dilated indicator, ``epsilon_of(t, alpha)``."""
        return epsilon_of(self.t, self.alpha)

    def radius_for_range(self, spread: float) -> float:
        """Distance beyond which the kernel exceeds ``spread``.

        Contributions from farther away can never beat the centre term of a
        field whose values span at most ``spread``.
        """
        if self.alpha == 1:
            return self.t
        if spread <= 0:
            return 0.0
        b = self.beta
        return self.t * (b * spread / self.t) ** (1.0 / b)


def kernel_value(k: MorphKernel, d, closed: bool = False):
    """Evaluate ``k`` at distance ``d`` (scalar or array).

    For ``alpha = 1`` this is 0 inside the ball and ``inf`` outside. The ball is
    open unless ``closed`` is set.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise InvalidArgumentError("distances must be non-negative")
    if k.alpha == 1:
        inside = d <= k.t if closed else d < k.t
        out = np.where(inside, 0.0, np.inf)
    else:
        b = k.beta
        out = (k.t / b) * (d / k.t) ** b
    return out if out.ndim else float(out)


def epsilon_of(t: float, alpha: float) -> float:
    """Radius ``t (beta/t)^(1/beta)`` reached by one dilation; ``t`` when alpha = 1."""
    if t <= 0:
        raise InvalidArgumentError(f"t must be > 0, got {t!r}")
    if alpha < 1:
        raise InvalidArgumentError(f"alpha must be >= 1, got {alpha!r}")
    if alpha == 1:
        return float(t)
    b = alpha / (alpha - 1.0)
    return float(t * (b / t) ** (1.0 / b))


def max_radius_of_influence(n: int, t: float, alpha: float) -> float:
    """Reach of ``n`` successive dilations with time ``t``."""
    if int(n) < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n!r}")
    return epsilon_of(int(n) * t, alpha)


# ---------------------------------------------------------------------------
# Point clouds
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Finite set of group elements with its pairwise distance matrix.

    ``points`` is ``(N, 3)`` for SE(2) (columns x, y, theta) or ``(N, 3, 3)``
    for SO(3).
    """

    points: np.ndarray
    weights: MetricWeights = field(default_factory=MetricWeights)
    period: float = TWO_PI

    def __post_init__(self):
        p = np.array(self.points, dtype=float)
        if p.ndim == 2 and p.shape[1] == 3:
            p = p.copy()
            p[:, 2] = np.mod(p[:, 2], _check_period(self.period))
        elif not (p.ndim == 3 and p.shape[1:] == (3, 3)):
            if p.size == 0:
                p = p.reshape(0, 3)
            else:
                raise InvalidArgumentError(f"points must be (N,3) or (N,3,3), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise InvalidArgumentError("point coordinates must be finite")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def group(self) -> str:
        return "SO3" if self.points.ndim == 3 else "SE2"

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def dist(self) -> np.ndarray:
        if self.group == "SO3":
            D = so3_pairwise(self.points, self.points, self.weights)
        else:
            D = se2_pairwise(self.points, self.points, self.weights, self.period)
        # exact symmetry and zero diagonal; the log chart is symmetric only to rounding
        D = np.minimum(D, D.T)
        np.fill_diagonal(D, 0.0)
        D.setflags(write=False)
        return D

    def diameter(self) -> float:
        return float(self.dist.max()) if len(self) else 0.0

    @classmethod
    def from_elements(cls, elements, weights: Optional[MetricWeights] = None) -> "PointCloud":
        from .geometry import SE2, SO3

        elements = list(elements)
        w = weights or MetricWeights()
        if not elements:
            return cls(np.zeros((0, 3)), w)
        if all(isinstance(e, SE2) for e in elements):
            periods = {e.period for e in elements}
            if len(periods) != 1:
                raise InvalidArgumentError("elements use different angular periods")
            return cls(np.array([e.as_array() for e in elements]), w, periods.pop())
        if all(isinstance(e, SO3) for e in elements):
            return cls(np.array([e.R for e in elements]), w)
        raise InvalidArgumentError("point cloud elements must all be SE2 or all SO3")


def dilate_cloud(f, cloud: PointCloud, k: MorphKernel) -> np.ndarray:
    """``out[g] = max_h f[h] - k(d(g, h))`` over the cloud (closed ball for alpha = 1)."""
    f = np.asarray(f, dtype=float)
    if f.shape != (len(cloud),):
        raise InvalidArgumentError(f"expected {len(cloud)} values, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise InvalidArgumentError("field values must be finite")
    if len(cloud) == 0:
        return f.copy()
    K = kernel_value(k, cloud.dist, closed=True)
    return np.max(f[None, :] - K, axis=1)


def thicken_cloud(indicator, cloud: PointCloud, delta: float) -> np.ndarray:
    """Indicator of ``{g : d(g, A) <= delta}`` restricted to the cloud."""
    a = _as_indicator(indicator)
    if a.shape != (len(cloud),):
        raise InvalidArgumentError(f"expected {len(cloud)} values, got shape {a.shape}")
    if not a.any():
        return np.zeros(len(cloud), dtype=bool)
    return np.any(cloud.dist[:, a] <= delta, axis=1)


def _as_indicator(values) -> np.ndarray:
    v = np.asarray(values)
    if v.dtype != bool:
        if not np.all((v == 0) | (v == 1)):
            raise InvalidArgumentError("indicator values must be 0 or 1")
        v = v.astype(bool)
    return v


# ---------------------------------------------------------------------------
# 1D grids
# ---------------------------------------------------------------------------


def dilate_1d(f, h: float, k: MorphKernel, radius: Optional[float] = None) -> np.ndarray:
    """Dilation of samples ``f`` on a uniform 1D grid of step ``h`` with ``d = |x|``.

    Only in-domain samples contribute. The kernel is evaluated with unit weight.
    """
    f = np.asarray(f, dtype=float)
    n = f.size
    if radius is None:
        radius = k.radius_for_range(float(f.max() - f.min())) if n else 0.0
    m = min(int(np.floor(radius / h * (1 + GRID_TIE_RTOL))), max(n - 1, 0))
    out = f.copy()
    for s in range(1, m + 1):
        kv = kernel_value(k, s * h, closed=True)
        if not np.isfinite(kv):
            break
        # neighbours on both sides
        np.maximum(out[:-s], f[s:] - kv, out=out[:-s])
        np.maximum(out[s:], f[:-s] - kv, out=out[s:])
    return out


# ---------------------------------------------------------------------------
# SE(2) grids
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class LiftedVolume:
    """Scalar field on a regular ``(x, y, theta)`` grid.

    ``data`` has shape ``(n_theta, ny, nx)``; cell ``(i, j, k)`` sits at
    ``x = i*sx``, ``y = j*sy``, ``theta = k*period/n_theta``.
    """

    data: np.ndarray
    spacing: tuple = (1.0, 1.0)
    period: float = np.pi

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim == 2:
            d = d[None]
        if d.ndim != 3 or min(d.shape) < 1:
            raise InvalidArgumentError(f"volume data must be (n_theta, ny, nx), got {d.shape}")
        if d.dtype != bool and not np.all(np.isfinite(d)):
            raise InvalidArgumentError("volume data must be finite")
        self.data = d
        self.spacing = (float(self.spacing[0]), float(self.spacing[1]))
        if min(self.spacing) <= 0:
            raise InvalidArgumentError("grid spacing must be positive")
        self.period = _check_period(float(self.period))

    @property
    def dims(self) -> tuple:
        """``(nx, ny, n_theta)``."""
        nt, ny, nx = self.data.shape
        return nx, ny, nt

    @property
    def s_theta(self) -> float:
        return self.period / self.data.shape[0]

    def thetas(self) -> np.ndarray:
        return np.arange(self.data.shape[0]) * self.s_theta

    def like(self, data) -> "LiftedVolume":
        return LiftedVolume(data, self.spacing, self.period)

    def cell_coords(self, k, j, i) -> np.ndarray:
        """Group coordinates ``(x, y, theta)`` of cells given by index arrays."""
        return np.stack(
            [np.asarray(i) * self.spacing[0], np.asarray(j) * self.spacing[1], np.asarray(k) * self.s_theta],
            axis=-1,
        ).astype(float)


@dataclass(frozen=True)
class LayerStencil:
    """Offsets ``(dk, dj, di)`` and their distances for one theta layer."""

    dk: np.ndarray
    dj: np.ndarray
    di: np.ndarray
    dist: np.ndarray


def layer_stencils(vol: LiftedVolume, w: MetricWeights, radius: float) -> list:
    """Per-layer offsets with ``d(e, offset) <= radius``.

    The spatial offset is expressed in the frame of layer ``k``, which is what
    makes one stencil valid for every cell of that layer.
    """
    nx, ny, nt = vol.dims
    sx, sy = vol.spacing
    st = vol.s_theta
    r = float(radius) * (1 + GRID_TIE_RTOL)
    smin = np.sqrt(min(w.w1, w.w2))
    bi = min(int(np.floor(r / (smin * sx))), nx - 1)
    bj = min(int(np.floor(r / (smin * sy))), ny - 1)
    di, dj = np.meshgrid(np.arange(-bi, bi + 1), np.arange(-bj, bj + 1), indexing="xy")
    di, dj = di.ravel(), dj.ravel()
    # one representative per residue class of dk, the one of smallest angle
    res = np.arange(nt)
    dth = reduce_angle(res * st, vol.period)
    res = res[np.sqrt(w.w3) * np.abs(dth) <= r]
    dth = np.atleast_1d(dth)[np.sqrt(w.w3) * np.abs(np.atleast_1d(dth)) <= r]
    dk_rep = np.rint(dth / st).astype(int)

    stencils = []
    for k in range(nt):
        th = k * st
        c, s = np.cos(th), np.sin(th)
        px, py = di * sx, dj * sy
        lx = c * px + s * py
        ly = -s * px + c * py
        DK, LX = np.meshgrid(dk_rep, lx, indexing="ij")
        _, LY = np.meshgrid(dk_rep, ly, indexing="ij")
        DTH = np.broadcast_to((dk_rep * st)[:, None], LX.shape)
        d = se2_relative_norm(LX, LY, DTH, w, vol.period)
        keep = d <= r
        DI = np.broadcast_to(di[None, :], LX.shape)
        DJ = np.broadcast_to(dj[None, :], LX.shape)
        stencils.append(LayerStencil(DK[keep], DJ[keep], DI[keep], d[keep]))
    return stencils


def _shift2d(a, dj, di, fill):
    """``out[j, i] = a[j + dj, i + di]`` with ``fill`` outside the domain."""
    ny, nx = a.shape
    out = np.full_like(a, fill)
    if abs(dj) >= ny or abs(di) >= nx:
        return out
    sj_out = slice(max(0, -dj), ny - max(0, dj))
    si_out = slice(max(0, -di), nx - max(0, di))
    sj_in = slice(max(0, dj), ny - max(0, -dj))
    si_in = slice(max(0, di), nx - max(0, -di))
    out[sj_out, si_out] = a[sj_in, si_in]
    return out


def dilate_volume(U: LiftedVolume, k: MorphKernel, stencil_radius: Optional[float] = None) -> LiftedVolume:
    """Grid dilation ``out[g] = max_h U[h] - k(d(g, h))`` over a truncated stencil.

    Space is clamped (cells outside the grid contribute nothing) and theta
    wraps. ``stencil_radius`` defaults to the smallest radius that is exact.
    """
    data = np.asarray(U.data, dtype=float)
    spread = float(data.max() - data.min())
    needed = k.radius_for_range(spread)
    if stencil_radius is None:
        stencil_radius = needed
    elif stencil_radius < needed * (1 - GRID_TIE_RTOL):
        raise PreconditionError(
            f"stencil radius {stencil_radius:g} is below the exact truncation radius {needed:g}"
        )
    nt = data.shape[0]
    out = data.copy()
    if spread == 0 and k.alpha > 1:
        return U.like(out)
    for layer, st in enumerate(layer_stencils(U, k.weights, stencil_radius)):
        kv = kernel_value(k, st.dist, closed=True)
        acc = out[layer]
        for dk, dj, di, v in zip(st.dk, st.dj, st.di, kv):
            if not np.isfinite(v):
                continue
            src = data[(layer + dk) % nt]
            np.maximum(acc, _shift2d(src, dj, di, -np.inf) - v, out=acc)
    return U.like(out)


def thicken_volume(indicator: LiftedVolume, delta: float, w: MetricWeights) -> LiftedVolume:
    """Indicator of cells within closed distance ``delta`` of the set."""
    a = _as_indicator(indicator.data)
    if delta < 0:
        raise InvalidArgumentError("delta must be >= 0")
    if delta == 0 or not a.any():
        return indicator.like(a.copy())
    nt = a.shape[0]
    out = a.copy()
    for layer, st in enumerate(layer_stencils(indicator, w, delta)):
        acc = out[layer]
        for dk, dj, di in zip(st.dk, st.dj, st.di):
            acc |= _shift2d(a[(layer + dk) % nt], dj, di, False)
    return indicator.like(out)


def thicken(indicator, delta: float, w: Optional[MetricWeights] = None, cloud: Optional[PointCloud] = None):
    """Closed ``delta``-thickening of a volume indicator or of a cloud indicator."""
    if isinstance(indicator, LiftedVolume):
        return thicken_volume(indicator, delta, w or MetricWeights())
    if cloud is None:
        raise InvalidArgumentError("thickening cloud values needs the PointCloud")
    return thicken_cloud(indicator, cloud, delta)
