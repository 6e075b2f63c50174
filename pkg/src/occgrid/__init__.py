"""Occupancy grids: stochastic range-sensor models, Bayesian cell estimation,
opinion-pool fusion, pose uncertainty, map registration and risk-aware planning."""

from .errors import (
    DegenerateLikelihood,
    EnumerationTooLarge,
    NoOverlapWarning,
    PyramidTruncatedWarning,
    SingularCovariance,
    UnsupportedOperation,
)
from .estimation import (
    BeamReading,
    PolarGeometry,
    build_sensor_view,
    integrate_log,
    integrate_multi_sensor,
    integrate_reading,
    read_scan_log,
    update_cell,
    write_scan_log,
)
from .fusion import combine_probabilities, compose_maps
from .grid import (
    EPS,
    CellLabel,
    Disc,
    Grid2D,
    PolarGrid,
    Polygon,
    Segment,
    cell_to_world,
    label_cell,
    label_grid,
    new_grid,
    resample_grid,
    resample_polar_to_cartesian,
    scan_convert,
    world_to_cell,
)
from .planner import Path, PlannerParams, grow_obstacles, plan_path, traversal_cost
from .pose import (
    PoseAT,
    RobotView,
    ViewGraph,
    blur_map,
    compose,
    invert,
    merge,
    robot_based_update,
    view_graph_add,
    world_based_update,
)
from .registration import MotionEstimate, SearchWindow, build_pyramid, correlation_score, solve_motion
from .sensor_models import (
    CalibratedModel,
    GaussianModel,
    IdealModel,
    LikelihoodTable,
    PolarGaussianModel,
    RayDiscretization,
    brute_force_likelihoods,
    forward_density,
    precompute_table,
    ray_cell_likelihoods,
)
from .simulator import SensorSpec, World, ray_cast, sense

__version__ = "0.1.0"

__all__ = [
    "BeamReading",
    "blur_map",
    "brute_force_likelihoods",
    "build_pyramid",
    "build_sensor_view",
    "CalibratedModel",
    "cell_to_world",
    "CellLabel",
    "combine_probabilities",
    "compose",
    "compose_maps",
    "correlation_score",
    "DegenerateLikelihood",
    "Disc",
    "EnumerationTooLarge",
    "EPS",
    "forward_density",
    "GaussianModel",
    "Grid2D",
    "grow_obstacles",
    "IdealModel",
    "integrate_log",
    "integrate_multi_sensor",
    "integrate_reading",
    "invert",
    "label_cell",
    "label_grid",
    "LikelihoodTable",
    "merge",
    "MotionEstimate",
    "new_grid",
    "NoOverlapWarning",
    "Path",
    "plan_path",
    "PlannerParams",
    "PolarGaussianModel",
    "PolarGeometry",
    "PolarGrid",
    "Polygon",
    "PoseAT",
    "precompute_table",
    "PyramidTruncatedWarning",
    "ray_cast",
    "ray_cell_likelihoods",
    "RayDiscretization",
    "read_scan_log",
    "resample_grid",
    "resample_polar_to_cartesian",
    "robot_based_update",
    "RobotView",
    "scan_convert",
    "SearchWindow",
    "Segment",
    "sense",
    "SensorSpec",
    "SingularCovariance",
    "solve_motion",
    "traversal_cost",
    "UnsupportedOperation",
    "update_cell",
    "view_graph_add",
    "ViewGraph",
    "World",
    "world_based_update",
    "world_to_cell",
    "write_scan_log",
]
