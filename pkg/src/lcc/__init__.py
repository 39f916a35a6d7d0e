"""delta-connected components on SE(2) and SO(3) by morphological dilation."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConsistencyError,
    DegenerateDataError,
    InvalidArgumentError,
    LCCError,
    PreconditionError,
    UnsupportedOperationError,
)
from .geometry import SE2, SO3, LogCoords, MetricWeights  # noqa: E402
from .morphology import LiftedVolume, MorphKernel, PointCloud  # noqa: E402
from .components import CCParams, ComponentLabeling, find_all_components, find_full_component  # noqa: E402

__all__ = [
    "CCParams",
    "ComponentLabeling",
    "ConsistencyError",
    "DegenerateDataError",
    "InvalidArgumentError",
    "LCCError",
    "LiftedVolume",
    "LogCoords",
    "MetricWeights",
    "MorphKernel",
    "PointCloud",
    "PreconditionError",
    "SE2",
    "SO3",
    "UnsupportedOperationError",
    "find_all_components",
    "find_full_component",
]
