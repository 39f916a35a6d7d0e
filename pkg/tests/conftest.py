import numpy as np
import pytest

from lcc.geometry import TWO_PI, MetricWeights
from lcc.morphology import LiftedVolume, PointCloud


def random_se2_cloud(rng, n, weights=None, extent=10.0, period=TWO_PI):
    pts = np.c_[rng.uniform(0, extent, (n, 2)), rng.uniform(0, period, n)]
    if weights is None:
        weights = MetricWeights(*rng.uniform(0.1, 5.0, 3))
    return PointCloud(pts, weights, period)


def tie_free_delta(rng, cloud):
    """A pairwise distance nudged by a relative 1e-7, so no distance equals delta."""
    n = len(cloud)
    off = cloud.dist[np.triu_indices(n, 1)]
    d = rng.choice(off) * (1 + 1e-7 * rng.choice([-1.0, 1.0]))
    gap = np.abs(off - d).min()
    assert gap > 1e-12 * d
    return float(d)


def chain_cloud(n, spacing, weights=None):
    """``n`` points on the x axis, ``spacing`` apart, theta = 0."""
    pts = np.c_[np.arange(n) * spacing, np.zeros(n), np.zeros(n)]
    return PointCloud(pts, weights or MetricWeights(1.0, 1.0, 1.0))


def grid_cloud(vol: LiftedVolume, w: MetricWeights) -> PointCloud:
    """Every cell of ``vol`` as a point, in flat index order."""
    nt, ny, nx = vol.data.shape
    k, j, i = np.meshgrid(np.arange(nt), np.arange(ny), np.arange(nx), indexing="ij")
    pts = vol.cell_coords(k.ravel(), j.ravel(), i.ravel())
    return PointCloud(pts, w, vol.period)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# One line per acceptance criterion, printed again at the end of the run so the
# results stay visible with output capture on.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
