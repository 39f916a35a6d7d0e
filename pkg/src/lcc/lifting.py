"""Image pipeline: orientation scores, cost, binarisation, thinning and labeling.

Steps, in order: lift the image with cake wavelets, turn ``|W f|`` into a cost
``1 / (1 + lam V^p)``, keep the low-cost cells (Otsu), thin each theta layer,
grow the thinned curves a little along their own orientation, label the
delta-connected components and project the labels back onto the image plane
with a max over theta.

Images are arrays indexed ``[row, col]``; ``x`` is the column and ``y`` the
row, and orientations are measured in that ``(x, y)`` frame.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, signal
from scipy.interpolate import BSpline
from skimage.draw import line as draw_line
from skimage.filters import threshold_otsu
from skimage.morphology import skeletonize

from .components import CCParams, ComponentLabeling, find_all_components
from .config import RunConfig
from .errors import DegenerateDataError, InvalidArgumentError
from .geometry import MetricWeights, reduce_angle
from .morphology import LiftedVolume, _as_indicator, epsilon_of, thicken_volume


# ---------------------------------------------------------------------------
# Cake wavelets
# ---------------------------------------------------------------------------


@dataclass
class WaveletStack:
    """Real spatial kernels ``(n, size, size)`` and their frequency responses."""

    kernels: np.ndarray
    spectra: np.ndarray
    period: float
    radial: np.ndarray = field(repr=False, default=None)

    @property
    def n_orientations(self) -> int:
        return self.kernels.shape[0]

    @property
    def thetas(self) -> np.ndarray:
        return np.arange(self.n_orientations) * self.period / self.n_orientations


def _bspline(order: int):
    knots = np.arange(order + 2) - (order + 1) / 2.0
    b = BSpline.basis_element(knots, extrapolate=False)

    def f(x):
        return np.nan_to_num(b(x), nan=0.0)

    return f


def cake_wavelets(
    n_orientations: int = 32,
    size: int = 41,
    spline_order: int = 2,
    inflection: float = 0.6,
    period: float = np.pi,
    taper: float = 1.0,
) -> WaveletStack:
    """Frequency-domain angular slices with B-spline overlap.

    Slice ``k`` is centred on the frequency direction ``theta_k + pi/2`` so the
    spatial kernel is elongated along ``theta_k``. The squared angular
    windows sum to one; a radial window is flat up to ``inflection`` times
    Nyquist and rolls off with a Gaussian beyond it. The DC term is shared
    equally by all slices.
    """
    if n_orientations < 4 or n_orientations % 2:
        raise InvalidArgumentError("n_orientations must be even and >= 4")
    if size < 3 or size % 2 == 0:
        raise InvalidArgumentError("size must be odd and >= 3")
    if spline_order < 0:
        raise InvalidArgumentError("spline_order must be >= 0")
    if not 0 < inflection <= 1:
        raise InvalidArgumentError("inflection must lie in (0, 1]")
    n = int(n_orientations)
    s_theta = period / n
    # With period 2pi and (order + 1) * s_theta > pi, opposite slices overlap
    # and taking the real part mixes them; the pass band is then only roughly flat.

    freqs = (np.arange(size) - size // 2) / size  # cycles per sample
    u, v = np.meshgrid(freqs, freqs, indexing="xy")
    rho = np.hypot(u, v)
    phi = np.arctan2(v, u)

    rho0 = 0.5 * inflection
    sigma = taper * rho0
    radial = np.where(rho <= rho0, 1.0, np.exp(-0.5 * ((rho - rho0) / sigma) ** 2))

    B = _bspline(spline_order)
    thetas = np.arange(n) * s_theta
    spectra = np.empty((n, size, size))
    dc = rho == 0
    # the real part keeps only half of a one-sided slice; compensated below
    dc_value = 1.0 / np.sqrt(n) if period <= np.pi + 1e-12 else 1.0 / np.sqrt(2 * n)
    for k, th in enumerate(thetas):
        x = reduce_angle(phi - th - np.pi / 2, period) / s_theta
        ang = np.sqrt(np.clip(B(x), 0.0, None))
        ang[dc] = dc_value
        spectra[k] = radial * ang

    kernels = np.empty_like(spectra)
    for k in range(n):
        spatial = np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(spectra[k])))
        kernels[k] = spatial.real
    if period > np.pi + 1e-12:
        # taking the real part halves the power of a one-sided slice
        kernels *= np.sqrt(2.0)
    return WaveletStack(kernels, spectra, float(period), radial)


def frequency_power(stack: WaveletStack) -> np.ndarray:
    """Sum over orientations of ``|FFT(kernel_k)|^2`` on the centred grid."""
    F = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(stack.kernels, axes=(1, 2))), axes=(1, 2))
    return np.sum(np.abs(F) ** 2, axis=0)


# ---------------------------------------------------------------------------
# Lifting and the per-stage maps
# ---------------------------------------------------------------------------


def _per_layer(fn, n: int, threads: int = 1) -> list:
    """``[fn(k) for k in range(n)]``, optionally on a thread pool (order kept)."""
    if threads <= 1 or n <= 1:
        return [fn(k) for k in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


def normalize_image(img) -> np.ndarray:
    a = np.asarray(img, dtype=float)
    if a.ndim == 3:
        a = a[..., :3].mean(axis=-1)
    if a.ndim != 2 or not np.all(np.isfinite(a)):
        raise InvalidArgumentError("image must be a finite 2D array")
    lo, hi = a.min(), a.max()
    return np.zeros_like(a) if hi == lo else (a - lo) / (hi - lo)


def orientation_score(f, W: WaveletStack, spacing=(1.0, 1.0), threads: int = 1) -> LiftedVolume:
    """Correlate the image with each oriented kernel (zero padding)."""
    f = np.asarray(f, dtype=float)
    if f.ndim != 2 or not np.all(np.isfinite(f)):
        raise InvalidArgumentError("image must be a finite 2D array")
    layers = _per_layer(
        lambda k: signal.correlate(f, W.kernels[k], mode="same", method="fft"), W.n_orientations, threads
    )
    return LiftedVolume(np.stack(layers), spacing, W.period)


POLARITIES = ("abs", "bright", "dark")


def vesselness(score: LiftedVolume, sigma: float = 0.0, polarity: str = "abs") -> LiftedVolume:
    """``|W f|`` rescaled to [0, 1], optionally smoothed inside each layer.

    ``polarity="bright"`` keeps only the positive part of the response and
    ``"dark"`` only the negative part. For lines of known contrast this drops
    the side lobes of the real kernels, which ``abs`` turns into weaker
    parallel ridges next to every line.
    """
    if polarity == "abs":
        V = np.abs(score.data)
    elif polarity == "bright":
        V = np.clip(score.data, 0.0, None)
    elif polarity == "dark":
        V = np.clip(-score.data, 0.0, None)
    else:
        raise InvalidArgumentError(f"polarity must be one of {POLARITIES}, got {polarity!r}")
    if sigma > 0:
        V = ndimage.gaussian_filter(V, sigma=(0, sigma, sigma), mode="constant")
    m = V.max()
    return score.like(V / m if m > 0 else V)


def cost_map(V: LiftedVolume, lam: float = 100.0, p: float = 3.0) -> LiftedVolume:
    if lam <= 0 or p <= 0:
        raise InvalidArgumentError("lambda and p must be > 0")
    return V.like(1.0 / (1.0 + lam * np.clip(V.data, 0.0, None) ** p))


def binarize_otsu(C: LiftedVolume) -> LiftedVolume:
    """Cells whose cost falls below the Otsu threshold."""
    data = np.asarray(C.data, dtype=float)
    if data.max() == data.min():
        raise DegenerateDataError("cost field is constant; nothing to threshold")
    thr = threshold_otsu(data)
    return C.like(data < thr)


def thin(indicator: LiftedVolume, threads: int = 1) -> LiftedVolume:
    """Per-layer 2D skeleton (Zhang-Suen)."""
    a = _as_indicator(indicator.data)
    if a.shape[0] == 0:
        return indicator.like(a.copy())
    layers = _per_layer(lambda k: skeletonize(a[k]) if a[k].any() else np.zeros_like(a[k]), a.shape[0], threads)
    return indicator.like(np.stack(layers))


def directional_dilate(
    indicator: LiftedVolume,
    weights: MetricWeights = MetricWeights(0.2, 1.5, 50.0),
    t_small: float = 0.6,
    alpha: float = 1.3,
) -> LiftedVolume:
    """Thicken by ``epsilon_of(t_small, alpha)`` in an anisotropic metric.

    With ``w1`` much smaller than ``w2`` and ``w3`` the growth runs along the
    orientation of each layer.
    """
    if t_small < 0:
        raise InvalidArgumentError("t_small must be >= 0")
    a = _as_indicator(indicator.data)
    if t_small == 0:
        return indicator.like(a.copy())
    return thicken_volume(indicator.like(a), epsilon_of(t_small, alpha), weights)


def project_max(vol) -> np.ndarray:
    """Maximum over the theta axis of a ``(n_theta, ny, nx)`` array or volume."""
    data = vol.data if isinstance(vol, LiftedVolume) else np.asarray(vol)
    if data.ndim == 2:
        return data.copy()
    return data.max(axis=0)


def r2_components(binary2d) -> tuple:
    """4-connected labeling in the plane: ``(labels, count)``."""
    lab, n = ndimage.label(np.asarray(binary2d, bool))
    return lab, int(n)


def filter_small(labeling: ComponentLabeling, min_size: int) -> ComponentLabeling:
    """Drop components smaller than ``min_size`` and renumber the rest in order."""
    if min_size <= 1:
        return labeling
    sizes = labeling.sizes()
    keep = np.flatnonzero(sizes >= min_size) + 1
    lut = np.zeros(labeling.K + 1, dtype=np.int32)
    lut[keep] = np.arange(1, keep.size + 1)
    return ComponentLabeling(
        lut[labeling.labels],
        [labeling.seeds[k - 1] for k in keep],
        [labeling.iterations[k - 1] for k in keep],
    )


# ---------------------------------------------------------------------------
# Whole pipeline
# ---------------------------------------------------------------------------


@dataclass
class PipelineResult:
    score: LiftedVolume
    vessel: LiftedVolume
    cost: LiftedVolume
    binary: LiftedVolume
    thinned: LiftedVolume
    indicator: LiftedVolume
    labeling: ComponentLabeling
    projection: np.ndarray
    delta: float


def lift(image, cfg: RunConfig, threads: int = 1) -> LiftedVolume:
    lc = cfg.lift
    W = cake_wavelets(lc.n_orientations, lc.wavelet_size, lc.spline_order, lc.inflection, lc.period, lc.taper)
    return orientation_score(normalize_image(image), W, threads=threads)


def preprocess(image, cfg: RunConfig, threads: int = 1) -> dict:
    """Every stage up to the dilated indicator the components are taken on."""
    score = lift(image, cfg, threads)
    V = vesselness(score, cfg.lift.smoothing_sigma, cfg.lift.polarity)
    C = cost_map(V, cfg.cost.lam, cfg.cost.p)
    B = binarize_otsu(C)
    T = thin(B, threads)
    dc = cfg.dilation
    I = directional_dilate(T, dc.weights, dc.t, dc.alpha)
    return {"score": score, "vessel": V, "cost": C, "binary": B, "thinned": T, "indicator": I}


def run_pipeline(image, cfg: RunConfig, threads: int = 1) -> PipelineResult:
    if cfg.components.delta is None:
        raise InvalidArgumentError("the component stage needs an explicit delta")
    st = preprocess(image, cfg, threads)
    cc = cfg.components
    lab = find_all_components(st["indicator"], CCParams(cc.delta, cc.weights))
    lab = filter_small(lab, cc.min_component_size)
    return PipelineResult(**st, labeling=lab, projection=project_max(lab.labels), delta=cc.delta)


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------


def crossing_lines_image(
    size: int = 128,
    angles_deg=(0.0, 67.5, 135.0),
    half_length: float = 50.0,
    width: float = 1.0,
):
    """Straight bright lines through the image centre on a dark background.

    Each line has a Gaussian cross profile of standard deviation ``width``
    pixels, which keeps the rasterisation free of staircase aliasing; lines
    are combined with a pixelwise max. Returns ``(image, centerlines)`` where
    ``centerlines[i]`` is the 1-pixel rasterised centre segment of line ``i``.
    """
    c = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    img = np.zeros((size, size))
    centers = []
    for a in np.deg2rad(angles_deg):
        dx, dy = np.cos(a), np.sin(a)
        rx, ry = xx - c, yy - c
        along = rx * dx + ry * dy
        across = -rx * dy + ry * dx
        # soft ends so the segment has no hard corners either
        end = np.clip(half_length + 0.5 - np.abs(along), 0.0, 1.0)
        img = np.maximum(img, np.exp(-0.5 * (across / width) ** 2) * end)
        r0, c0 = int(round(c - half_length * dy)), int(round(c - half_length * dx))
        r1, c1 = int(round(c + half_length * dy)), int(round(c + half_length * dx))
        rr, cc = draw_line(r0, c0, r1, c1)
        m = np.zeros((size, size), bool)
        m[rr, cc] = True
        centers.append(m)
    return img, centers


def coverage(projection_mask, centerline, tolerance: int = 1) -> float:
    """Fraction of centerline pixels within Chebyshev distance ``tolerance`` of the mask."""
    grown = ndimage.binary_dilation(projection_mask, structure=np.ones((3, 3), bool), iterations=tolerance) if tolerance else projection_mask
    return float(np.count_nonzero(grown & centerline)) / max(int(centerline.sum()), 1)
