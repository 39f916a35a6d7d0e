import numpy as np
import pytest
from scipy import ndimage

from lcc.components import ComponentLabeling
from lcc.config import RunConfig
from lcc.errors import DegenerateDataError, InvalidArgumentError
from lcc.geometry import MetricWeights
from lcc.lifting import (
    binarize_otsu,
    cake_wavelets,
    cost_map,
    coverage,
    crossing_lines_image,
    directional_dilate,
    filter_small,
    frequency_power,
    normalize_image,
    orientation_score,
    project_max,
    r2_components,
    run_pipeline,
    thin,
    vesselness,
)
from lcc.morphology import LiftedVolume


def pass_band_deviation(W):
    P = frequency_power(W)
    band = W.radial == 1.0
    return float(np.abs(P[band] - 1.0).max())


# --- cake wavelets -------------------------------------------------------------


@pytest.mark.parametrize("period", [np.pi, 2 * np.pi])
def test_partition_of_unity_default_stack(period):
    W = cake_wavelets(32, 41, period=period)
    assert W.kernels.shape == (32, 41, 41)
    assert pass_band_deviation(W) < 0.05


def test_partition_of_unity_four_orientations():
    # pi-periodic slices never overlap their opposite, so even n = 4 is flat
    assert pass_band_deviation(cake_wavelets(4, 9)) < 0.05
    # 2pi-periodic with n = 4: opposite quadratic slices overlap, so only loosely flat
    assert pass_band_deviation(cake_wavelets(4, 9, period=2 * np.pi)) <= 0.25 + 1e-9


def test_quarter_turn_permutes_kernels():
    for period in (np.pi, 2 * np.pi):
        W = cake_wavelets(8, 21, period=period)
        step = int(round((np.pi / 2) / (period / 8)))
        for k in range(8):
            assert np.abs(W.kernels[(k + step) % 8] - np.rot90(W.kernels[k])).max() < 1e-12


def test_kernels_are_elongated_along_their_orientation():
    W = cake_wavelets(8, 21)
    k0 = W.kernels[0]
    assert np.abs(k0[10, :]).sum() > np.abs(k0[:, 10]).sum()


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n_orientations=6 - 1),
        dict(n_orientations=2),
        dict(size=20),
        dict(size=1),
        dict(spline_order=-1),
        dict(inflection=0.0),
        dict(inflection=1.5),
    ],
)
def test_cake_wavelet_arguments(kwargs):
    with pytest.raises(InvalidArgumentError):
        cake_wavelets(**kwargs)


# --- orientation score ---------------------------------------------------------


def test_zero_image_gives_zero_score():
    S = orientation_score(np.zeros((20, 20)), cake_wavelets(8, 11))
    assert S.data.shape == (8, 20, 20)
    assert not S.data.any()


def test_horizontal_line_peaks_in_layer_zero():
    img = np.zeros((41, 41))
    img[20, 5:36] = 1.0
    S = orientation_score(img, cake_wavelets(8, 21))
    assert np.argmax(np.abs(S.data[:, 20, 20])) == 0


def test_right_angle_crossing_activates_two_layers():
    img = np.zeros((41, 41))
    img[20, 5:36] = 1.0
    img[5:36, 20] = 1.0
    r = np.abs(orientation_score(img, cake_wavelets(8, 21)).data[:, 20, 20])
    top = set(np.argsort(r)[-2:].tolist())
    assert top == {0, 4}
    # both are local maxima along theta
    for k in top:
        assert r[k] > r[(k - 1) % 8] and r[k] > r[(k + 1) % 8]


@pytest.mark.parametrize("period", [np.pi, 2 * np.pi])
def test_rotation_equivariance(rng, period):
    n = 8
    W = cake_wavelets(n, 21, period=period)
    f = rng.random((48, 48))
    S = orientation_score(f, W).data
    R = orientation_score(np.rot90(f), W).data
    step = int(round((np.pi / 2) / (period / n)))
    expected = np.stack([np.rot90(S[(k - step) % n]) for k in range(n)])
    inner = (slice(None), slice(11, -11), slice(11, -11))
    assert np.abs(expected - R)[inner].max() < 1e-6


def test_score_is_deterministic_across_threads(rng):
    W = cake_wavelets(8, 11)
    f = rng.random((30, 30))
    a = orientation_score(f, W, threads=1).data
    b = orientation_score(f, W, threads=4).data
    assert np.array_equal(a, b)


def test_orientation_score_rejects_bad_images():
    with pytest.raises(InvalidArgumentError):
        orientation_score(np.zeros((3, 3, 3)), cake_wavelets(4, 5))
    with pytest.raises(InvalidArgumentError):
        orientation_score(np.full((4, 4), np.nan), cake_wavelets(4, 5))


def test_normalize_image():
    assert normalize_image([[2.0, 4.0], [3.0, 2.0]]).tolist() == [[0.0, 1.0], [0.5, 0.0]]
    assert not normalize_image(np.full((3, 3), 7.0)).any()


# --- vesselness, cost, Otsu ----------------------------------------------------


def test_vesselness_polarity():
    score = LiftedVolume(np.array([[[-2.0, 1.0, 0.5]]]))
    assert vesselness(score).data.ravel().tolist() == [1.0, 0.5, 0.25]
    assert vesselness(score, polarity="bright").data.ravel().tolist() == [0.0, 1.0, 0.5]
    assert vesselness(score, polarity="dark").data.ravel().tolist() == [1.0, 0.0, 0.0]
    with pytest.raises(InvalidArgumentError):
        vesselness(score, polarity="both")


def test_vesselness_of_zero_stays_zero():
    assert not vesselness(LiftedVolume(np.zeros((2, 3, 3))), sigma=1.0).data.any()


def test_cost_map_examples():
    V = LiftedVolume(np.array([[[0.0, 1.0, 0.5]]]))
    C = cost_map(V, 100.0, 3.0).data.ravel()
    assert C[0] == 1.0
    assert C[1] == pytest.approx(1 / 101)
    assert C[0] > C[2] > C[1]
    assert cost_map(V, 1e12, 3.0).data.ravel()[1] < 1e-11
    for lam, p in [(0.0, 3.0), (1.0, 0.0)]:
        with pytest.raises(InvalidArgumentError):
            cost_map(V, lam, p)


def test_otsu_selects_low_cluster(rng):
    data = np.where(rng.random((1, 20, 20)) < 0.3, 0.1, 0.9) + rng.normal(0, 0.01, (1, 20, 20))
    C = LiftedVolume(data)
    B = binarize_otsu(C).data
    assert np.array_equal(B, data < 0.5)
    inverted = binarize_otsu(LiftedVolume(1.0 - data)).data
    assert np.array_equal(inverted, ~B)


def test_otsu_rejects_constant_field():
    with pytest.raises(DegenerateDataError):
        binarize_otsu(LiftedVolume(np.full((2, 4, 4), 0.3)))


# --- thinning ------------------------------------------------------------------


def test_thin_bar():
    a = np.zeros((1, 11, 20), bool)
    a[0, 4:7, 3:17] = True
    T = thin(LiftedVolume(a)).data
    # one cell per column, within one row of the bar's middle
    assert T[0].sum(axis=0).max() == 1
    rows = np.flatnonzero(T[0].any(axis=1))
    cols = np.flatnonzero(T[0].any(axis=0))
    assert set(rows.tolist()) <= {4, 5, 6}
    assert abs(cols.min() - 3) <= 1 and abs(cols.max() - 16) <= 1
    assert np.all(T <= a)


def test_thin_is_idempotent_on_thin_curves():
    a = np.zeros((2, 12, 12), bool)
    a[0, 6, 2:10] = True
    a[1, np.arange(2, 10), np.arange(2, 10)] = True
    assert np.array_equal(thin(LiftedVolume(a)).data, a)


def test_thin_empty():
    assert not thin(LiftedVolume(np.zeros((3, 5, 5), bool))).data.any()


def test_thin_keeps_layer_connectivity(rng):
    eight = np.ones((3, 3), bool)
    blobs = ndimage.binary_dilation(rng.random((4, 40, 40)) < 0.02, structure=np.ones((1, 5, 5), bool))
    T = thin(LiftedVolume(blobs), threads=2).data
    assert np.all(T <= blobs)
    for k in range(4):
        assert ndimage.label(T[k], eight)[1] == ndimage.label(blobs[k], eight)[1]


# --- directional dilation --------------------------------------------------------


def cell_volume(k):
    a = np.zeros((8, 21, 21), bool)
    a[k, 10, 10] = True
    return LiftedVolume(a, (1.0, 1.0), np.pi)


def test_directional_dilation_follows_layer_orientation():
    w = MetricWeights(0.2, 1.5, 50.0)
    for k, axis in [(0, 1), (4, 0)]:
        out = directional_dilate(cell_volume(k), w, 0.6, 1.3).data[k]
        spread_x = np.ptp(np.flatnonzero(out.any(axis=0)))
        spread_y = np.ptp(np.flatnonzero(out.any(axis=1)))
        if axis == 1:
            assert spread_x > 0 and spread_y == 0
        else:
            assert spread_y > 0 and spread_x == 0


def test_directional_dilation_superset_and_zero_time():
    vol = cell_volume(2)
    out = directional_dilate(vol, t_small=0.6).data
    assert np.all(out >= vol.data)
    assert np.array_equal(directional_dilate(vol, t_small=0.0).data, vol.data)
    with pytest.raises(InvalidArgumentError):
        directional_dilate(vol, t_small=-1.0)


# --- projection and helpers ------------------------------------------------------


def test_project_max():
    a = np.zeros((3, 4, 4), int)
    a[1] = np.arange(16).reshape(4, 4)
    assert np.array_equal(project_max(a), a[1])
    lab = np.zeros((2, 5, 5), int)
    lab[0, 2, :] = 1
    lab[1, :, 2] = 2
    p = project_max(lab)
    assert p[2, 2] == 2
    assert p[2, 0] == 1 and p[0, 2] == 2
    assert not project_max(np.zeros((2, 3, 3))).any()
    assert np.array_equal(project_max(LiftedVolume(a)), a[1])


def test_filter_small():
    lab = ComponentLabeling(np.array([1, 1, 2, 3, 3, 3, 0]), [0, 2, 3], [2, 1, 3])
    out = filter_small(lab, 2)
    assert out.labels.tolist() == [1, 1, 0, 2, 2, 2, 0]
    assert out.seeds == [0, 3]
    assert out.iterations == [2, 3]
    assert filter_small(lab, 1) is lab


def test_coverage_and_plane_components():
    line = np.zeros((7, 7), bool)
    line[3, 1:6] = True
    shifted = np.roll(line, 1, axis=0)
    assert coverage(shifted, line, 1) == 1.0
    assert coverage(shifted, line, 0) == 0.0
    assert r2_components(line | np.roll(line, 3, axis=0))[1] == 2


def test_crossing_lines_image():
    img, centers = crossing_lines_image(65, (0.0, 90.0), 20.0)
    assert img.shape == (65, 65)
    assert img.max() == pytest.approx(1.0, abs=0.05)
    assert len(centers) == 2
    assert centers[0].sum() == 41 and centers[1].sum() == 41
    assert r2_components(img > 0.5)[1] == 1


def test_pipeline_needs_delta():
    with pytest.raises(InvalidArgumentError):
        run_pipeline(np.zeros((8, 8)), RunConfig())


def test_pipeline_separates_two_crossing_lines():
    img, centers = crossing_lines_image(64, (0.0, 90.0), 24.0)
    cfg = (
        RunConfig()
        .with_stage("lift", n_orientations=16, polarity="bright")
        .with_stage("cost", lam=50, p=3)
        .with_stage("components", delta=0.97)
    )
    res = run_pipeline(img, cfg)
    assert r2_components(res.binary.data.max(axis=0))[1] == 1
    assert res.labeling.K == 2
    for c in centers:
        covered = [coverage(res.projection == k, c, 1) for k in range(1, 3)]
        assert max(covered) > 0.95
