"""Group operations and logarithmic-norm distances on SE(2) and SO(3).

Two layers live here. The scalar layer works on small immutable
``SE2`` / ``SO3`` values and is what the CLI and tests talk to. The array
layer (``se2_log``, ``se2_pairwise`` ...) does the same maths on numpy arrays
and is what the morphology and component code calls in inner loops.

Angles of SE(2) elements are stored reduced to ``[0, period)``. The period
is either ``2*pi`` (oriented structures) or ``pi`` (line structures without
a direction).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import InvalidArgumentError, UnsupportedOperationError

TWO_PI = 2.0 * np.pi
PERIODS = (np.pi, TWO_PI)

# Below this |x| the Taylor series of sin(x)/x is used.
_SINC_TAYLOR = 1e-4
# SO(3) log switches to the symmetric-part branch within this of phi = pi.
_NEAR_PI = 1e-3
# Relative slack for recognising a turn of exactly half a period
_HALF_TURN_TOL = 1e-12


def sinc(x):
    """Unnormalised sinc, ``sin(x)/x``, stable near zero."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SINC_TAYLOR
    safe = np.where(small, 1.0, x)
    x2 = x * x
    taylor = 1.0 - x2 / 6.0 + x2 * x2 / 120.0 - x2 * x2 * x2 / 5040.0
    out = np.where(small, taylor, np.sin(safe) / safe)
    return out if out.ndim else float(out)


def wrap_angle(theta, period=TWO_PI):
    """Reduce to ``[0, period)``."""
    r = np.mod(theta, period)
    r = np.where(r >= period, r - period, r)
    return r if np.ndim(r) else float(r)


def reduce_angle(theta, period=TWO_PI):
    """Reduce to ``(-period/2, period/2]``; the tie goes to ``+period/2``."""
    r = np.mod(theta, period)
    r = np.where(r > period / 2.0, r - period, r)
    r = np.where(r <= -period / 2.0, r + period, r)
    return r if np.ndim(r) else float(r)


def _check_period(period: float) -> float:
    for p in PERIODS:
        if abs(period - p) < 1e-12:
            return p
    raise InvalidArgumentError(f"angular period must be pi or 2*pi, got {period!r}")


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricWeights:
    """Diagonal left-invariant metric: tangential, lateral and angular cost."""

    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0

    def __post_init__(self):
        for name in ("w1", "w2", "w3"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise InvalidArgumentError(f"metric weight {name} must be > 0, got {v!r}")
            object.__setattr__(self, name, float(v))

    def as_array(self) -> np.ndarray:
        return np.array([self.w1, self.w2, self.w3])

    @classmethod
    def parse(cls, text: str) -> "MetricWeights":
        parts = [p for p in text.replace(" ", "").split(",") if p]
        if len(parts) != 3:
            raise InvalidArgumentError(f"expected three comma separated weights, got {text!r}")
        return cls(*(float(p) for p in parts))


@dataclass(frozen=True)
class LogCoords:
    c1: float
    c2: float
    c3: float

    def __post_init__(self):
        for name in ("c1", "c2", "c3"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise InvalidArgumentError(f"log coordinate {name} is not finite")
            object.__setattr__(self, name, v)

    def as_array(self) -> np.ndarray:
        return np.array([self.c1, self.c2, self.c3])

    def norm(self, w: MetricWeights) -> float:
        return float(log_norm(self.as_array(), w))


@dataclass(frozen=True)
class SE2:
    """Roto-translation ``(x, y, theta)``; theta is kept in ``[0, period)``.

    With period pi the element stands for an unoriented pose. ``compose`` and
    ``inverse`` then act on the stored representative, which is not a group
    operation on the quotient; use ``relative_log`` for ``log(h^-1 g)``.
    """

    x: float
    y: float
    theta: float
    period: float = TWO_PI

    def __post_init__(self):
        object.__setattr__(self, "period", _check_period(float(self.period)))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta), self.period))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])

    def matrix(self) -> np.ndarray:
        c, s = np.cos(self.theta), np.sin(self.theta)
        return np.array([[c, -s, self.x], [s, c, self.y], [0.0, 0.0, 1.0]])

    @classmethod
    def identity(cls, period: float = TWO_PI) -> "SE2":
        return cls(0.0, 0.0, 0.0, period)


@dataclass(frozen=True, eq=False)
class SO3:
    """Rotation matrix; orthonormality is checked to 1e-10 per entry."""

    R: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        R = np.array(self.R, dtype=float)
        if R.shape != (3, 3) or not np.all(np.isfinite(R)):
            raise InvalidArgumentError("SO3 needs a finite 3x3 matrix")
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-10 or abs(np.linalg.det(R) - 1.0) > 1e-10:
            raise InvalidArgumentError("matrix is not a rotation (R^T R != I or det != 1)")
        R.setflags(write=False)
        object.__setattr__(self, "R", R)

    def __eq__(self, other):
        return isinstance(other, SO3) and np.array_equal(self.R, other.R)

    def __hash__(self):
        return hash(self.R.tobytes())

    @classmethod
    def identity(cls) -> "SO3":
        return cls(np.eye(3))


GroupElement = Union[SE2, SO3]


def _same_variant(g, h):
    if isinstance(g, SE2) and isinstance(h, SE2):
        if g.period != h.period:
            raise InvalidArgumentError("SE2 elements use different angular periods")
        return
    if isinstance(g, SO3) and isinstance(h, SO3):
        return
    raise InvalidArgumentError(f"cannot mix {type(g).__name__} and {type(h).__name__}")


# ---------------------------------------------------------------------------
# Group operations
# ---------------------------------------------------------------------------


def compose(g: GroupElement, h: GroupElement) -> GroupElement:
    """Group product ``g h``."""
    _same_variant(g, h)
    if isinstance(g, SO3):
        return SO3(g.R @ h.R)
    c, s = np.cos(g.theta), np.sin(g.theta)
    return SE2(g.x + c * h.x - s * h.y, g.y + s * h.x + c * h.y, g.theta + h.theta, g.period)


def inverse(g: GroupElement) -> GroupElement:
    if isinstance(g, SO3):
        return SO3(g.R.T)
    c, s = np.cos(g.theta), np.sin(g.theta)
    return SE2(-(c * g.x + s * g.y), -(-s * g.x + c * g.y), -g.theta, g.period)


def identity_like(g: GroupElement) -> GroupElement:
    return SO3.identity() if isinstance(g, SO3) else SE2.identity(g.period)


# ---------------------------------------------------------------------------
# Array layer: SE(2)
# ---------------------------------------------------------------------------


def se2_log(x, y, theta, period=TWO_PI):
    """Logarithmic coordinates of ``(x, y, theta)`` on the principal branch.

    The angle is first reduced to ``(-period/2, period/2]``.
    """
    th = reduce_angle(np.asarray(theta, dtype=float), period)
    return _se2_log_branch(x, y, th)


def _se2_log_branch(x, y, th):
    """Log coordinates for an angle ``th`` that is already on the wanted branch."""
    half = 0.5 * th
    s = sinc(half)
    ch, sh = np.cos(half), np.sin(half)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c1 = (x * ch + y * sh) / s
    c2 = (-x * sh + y * ch) / s
    return c1, c2, th


def se2_exp(c1, c2, c3, period=TWO_PI):
    half = 0.5 * np.asarray(c3, dtype=float)
    s = sinc(half)
    ch, sh = np.cos(half), np.sin(half)
    x = (c1 * ch - c2 * sh) * s
    y = (c1 * sh + c2 * ch) * s
    return x, y, wrap_angle(c3, period)


def se2_relative(g, h, period=TWO_PI):
    """Components of ``h^{-1} g`` for broadcastable ``(..., 3)`` arrays.

    The returned angle is the raw difference; ``se2_log`` reduces it.
    """
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    dx = g[..., 0] - h[..., 0]
    dy = g[..., 1] - h[..., 1]
    c, s = np.cos(h[..., 2]), np.sin(h[..., 2])
    return c * dx + s * dy, -s * dx + c * dy, g[..., 2] - h[..., 2]


def log_norm(c, w: MetricWeights):
    """``sqrt(w1 c1^2 + w2 c2^2 + w3 c3^2)`` over the last axis of ``c``."""
    c = np.asarray(c, dtype=float)
    wa = w.as_array()
    return np.sqrt(np.sum(wa * c * c, axis=-1))


def se2_relative_norm(lx, ly, dth, w: MetricWeights, period=TWO_PI):
    """``||log||`` of the relative element ``(lx, ly, dth)``.

    A turn of exactly half a period has two principal representatives,
    ``+period/2`` and ``-period/2``. For period pi their log norms differ, and
    picking the positive one alone would make ``d(g, h) != d(h, g)``. There
    the smaller of the two norms is returned.
    """
    c1, c2, c3 = se2_log(lx, ly, dth, period)
    d = np.sqrt(w.w1 * c1 * c1 + w.w2 * c2 * c2 + w.w3 * c3 * c3)
    tie = np.abs(np.abs(c3) - 0.5 * period) <= _HALF_TURN_TOL * period
    if np.any(tie):
        a1, a2, a3 = _se2_log_branch(lx, ly, -c3)
        alt = np.sqrt(w.w1 * a1 * a1 + w.w2 * a2 * a2 + w.w3 * a3 * a3)
        d = np.where(tie, np.minimum(d, alt), d)
    return d


def se2_distance(g, h, w: MetricWeights, period=TWO_PI):
    """Log-norm distance between broadcastable ``(..., 3)`` arrays of elements."""
    lx, ly, dth = se2_relative(g, h, period)
    return se2_relative_norm(lx, ly, dth, w, period)


def se2_pairwise(a, b, w: MetricWeights, period=TWO_PI) -> np.ndarray:
    """Distance matrix ``D[i, j] = d(a_i, b_j)``."""
    a = np.asarray(a, dtype=float).reshape(-1, 3)
    b = np.asarray(b, dtype=float).reshape(-1, 3)
    return se2_distance(a[:, None, :], b[None, :, :], w, period)


# ---------------------------------------------------------------------------
# Array layer: SO(3)
# ---------------------------------------------------------------------------


def _vee(M):
    return np.stack([M[..., 2, 1], M[..., 0, 2], M[..., 1, 0]], axis=-1)


def hat(c):
    c = np.asarray(c, dtype=float)
    z = np.zeros(c.shape[:-1])
    return np.stack(
        [
            np.stack([z, -c[..., 2], c[..., 1]], -1),
            np.stack([c[..., 2], z, -c[..., 0]], -1),
            np.stack([-c[..., 1], c[..., 0], z], -1),
        ],
        axis=-2,
    )


def so3_exp(c) -> np.ndarray:
    """Rodrigues' formula for ``(..., 3)`` rotation vectors."""
    c = np.asarray(c, dtype=float)
    phi = np.linalg.norm(c, axis=-1)
    K = hat(c)
    a = np.asarray(sinc(phi))[..., None, None]
    b = (0.5 * np.asarray(sinc(0.5 * phi)) ** 2)[..., None, None]
    return np.eye(3) + a * K + b * (K @ K)


def so3_log(R) -> np.ndarray:
    """Rotation vector ``phi * axis`` of ``(..., 3, 3)`` rotation matrices."""
    R = np.asarray(R, dtype=float)
    v = _vee(R - np.swapaxes(R, -1, -2))  # 2 sin(phi) a
    cos_phi = np.clip((np.trace(R, axis1=-2, axis2=-1) - 1.0) / 2.0, -1.0, 1.0)
    sin_phi = 0.5 * np.linalg.norm(v, axis=-1)
    phi = np.arctan2(sin_phi, cos_phi)
    out = v / (2.0 * np.asarray(sinc(phi)))[..., None]

    near = np.asarray(phi > np.pi - _NEAR_PI)
    if np.any(near):
        Rn = R[near] if R.ndim > 2 else R[None]
        vn = v[near] if R.ndim > 2 else v[None]
        cn = np.atleast_1d(cos_phi[near] if R.ndim > 2 else cos_phi)
        pn = np.atleast_1d(phi[near] if R.ndim > 2 else phi)
        S = 0.5 * (Rn + np.swapaxes(Rn, -1, -2))
        # a a^T = (S - cos(phi) I) / (1 - cos(phi))
        M = (S - cn[:, None, None] * np.eye(3)) / (1.0 - cn)[:, None, None]
        idx = np.argmax(np.diagonal(M, axis1=-2, axis2=-1), axis=-1)
        rows = M[np.arange(len(idx)), idx]  # a_i * a
        ai = np.sqrt(np.maximum(rows[np.arange(len(idx)), idx], 0.0))
        a = rows / ai[:, None]
        a /= np.linalg.norm(a, axis=-1, keepdims=True)
        flip = np.sum(a * vn, axis=-1) < 0
        a[flip] *= -1.0
        fixed = pn[:, None] * a
        if R.ndim > 2:
            out[near] = fixed
        else:
            out = fixed[0]
    return out


def so3_pairwise(a, b, w: MetricWeights) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(-1, 3, 3)
    b = np.asarray(b, dtype=float).reshape(-1, 3, 3)
    rel = np.einsum("jki,akl->ajil", b, a)  # b_j^T a_i, indexed [i, j]
    return log_norm(so3_log(rel), w)


# ---------------------------------------------------------------------------
# Scalar API
# ---------------------------------------------------------------------------


def log_se2(g: SE2) -> LogCoords:
    if not isinstance(g, SE2):
        raise InvalidArgumentError("log_se2 expects an SE2 element")
    c1, c2, c3 = se2_log(g.x, g.y, g.theta, g.period)
    return LogCoords(float(c1), float(c2), float(c3))


def exp_se2(c: LogCoords, period: float = TWO_PI) -> SE2:
    x, y, th = se2_exp(c.c1, c.c2, c.c3, _check_period(period))
    return SE2(float(x), float(y), float(th), period)


def log_so3(g: SO3) -> LogCoords:
    if not isinstance(g, SO3):
        raise InvalidArgumentError("log_so3 expects an SO3 element")
    return LogCoords(*(float(v) for v in so3_log(g.R)))


def exp_so3(c: LogCoords) -> SO3:
    R = so3_exp(c.as_array())
    # re-orthonormalise away the last ulp so the SO3 check cannot trip
    u, _, vt = np.linalg.svd(R)
    return SO3(u @ vt)


def log_of(g: GroupElement) -> LogCoords:
    return log_so3(g) if isinstance(g, SO3) else log_se2(g)


def relative_log(g: GroupElement, h: GroupElement) -> LogCoords:
    """``log(h^{-1} g)``, well defined for either period."""
    _same_variant(g, h)
    if isinstance(g, SO3):
        return log_so3(SO3(h.R.T @ g.R))
    lx, ly, dth = se2_relative(g.as_array(), h.as_array(), g.period)
    return LogCoords(*(float(v) for v in se2_log(lx, ly, dth, g.period)))


def log_norm_distance(g: GroupElement, h: GroupElement, w: MetricWeights) -> float:
    """``||log(h^{-1} g)||`` in the weighted norm."""
    _same_variant(g, h)
    if isinstance(g, SO3):
        return float(log_norm(so3_log(h.R.T @ g.R), w))
    return float(se2_distance(g.as_array(), h.as_array(), w, g.period))


def sign_pattern(i: int) -> np.ndarray:
    """Bit ``k`` of ``i`` set means coordinate ``c_{k+1}`` is negated."""
    if not 0 <= int(i) < 8:
        raise InvalidArgumentError(f"reflection index must be in 0..7, got {i!r}")
    return np.array([-1.0 if (int(i) >> k) & 1 else 1.0 for k in range(3)])


def reflect(g: GroupElement, i: int) -> SE2:
    """``exp(eps_i log g)`` with ``eps_i`` a sign flip of the log coordinates."""
    if isinstance(g, SO3):
        raise UnsupportedOperationError("reflections are only provided for SE(2)")
    eps = sign_pattern(i)
    c = log_se2(g).as_array() * eps
    return exp_se2(LogCoords(*c), g.period)


def reflect_array(points, i: int, period=TWO_PI) -> np.ndarray:
    """Vectorised ``reflect`` for an ``(N, 3)`` array of SE(2) elements."""
    p = np.asarray(points, dtype=float)
    eps = sign_pattern(i)
    c1, c2, c3 = se2_log(p[:, 0], p[:, 1], p[:, 2], period)
    x, y, th = se2_exp(eps[0] * c1, eps[1] * c2, eps[2] * c3, period)
    return np.stack([x, y, th], axis=-1)
