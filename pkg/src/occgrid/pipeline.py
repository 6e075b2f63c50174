"""Scenario-driven mapping runs: simulate, build robot views, register, fuse, evaluate."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .estimation import BeamReading, integrate_log, write_scan_log
from .grid import CellLabel, Grid2D, label_grid, new_grid, resample_grid, resample_indices
from .io import dump_json, save_grid, write_pgm
from .planner import PlannerParams
from .pose import (
    PoseAT,
    RobotView,
    ViewGraph,
    compose,
    invert,
    merge,
    robot_based_update,
    view_graph_add,
    view_in_frame,
    world_based_update,
)
from .registration import SearchWindow, solve_motion
from .simulator import SensorSpec, World, sense

WORLD_BASED, ROBOT_BASED = "WORLD_BASED", "ROBOT_BASED"
MODES = (WORLD_BASED, ROBOT_BASED)

# keeps the merge well posed when odometry is declared noiseless
_COV_FLOOR = 1e-12


@dataclass(frozen=True)
class PlanRequest:
    start_cell: tuple[int, int]
    goal_cell: tuple[int, int]
    params: PlannerParams = PlannerParams()


@dataclass
class Scenario:
    """Everything a mapping run needs; poses are ground truth, odometry is derived from them."""

    name: str
    world: World
    poses: list[tuple[float, float, float]]
    sensors: list[SensorSpec]
    frame: Grid2D
    view_cells: tuple[int, int]
    odometry_sigma: tuple[float, float, float] = (0.0, 0.0, 0.0)
    mode: str = WORLD_BASED
    registration: bool = False
    window: SearchWindow | None = None
    seed: int = 0
    band: float = 0.0
    plan: PlanRequest | None = None
    true_odometry: bool = False

    def __post_init__(self):
        if not self.poses:
            raise ValueError("trajectory must contain at least one pose")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not self.sensors:
            raise ValueError("at least one sensor is required")
        names = [s.name for s in self.sensors]
        if len(set(names)) != len(names):
            raise ValueError("sensor names must be unique")
        for p in self.poses:
            if not self.world.contains(p[0], p[1]):
                raise ValueError(f"pose {p} lies outside the world")
        if any(s < 0 for s in self.odometry_sigma):
            raise ValueError("odometry sigmas must be non-negative")
        if min(self.view_cells) < 1:
            raise ValueError("view size must be positive")
        if self.registration and self.window is None:
            self.window = SearchWindow.in_cells(self.frame.resolution, 5, 5.0, 1.0, 2)

    @property
    def odometry_cov(self) -> np.ndarray:
        return np.diag(np.square(self.odometry_sigma))

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | str = ".") -> Scenario:
        try:
            if "world" in d:
                world = World.from_dict(d["world"])
            else:
                wpath = Path(base_dir) / d["world_file"]
                if not wpath.exists():
                    raise ValueError(f"world file not found: {wpath}")
                world = World.load(wpath)
            g = d["grid"]
            frame = new_grid(
                int(g["width_cells"]), int(g["height_cells"]), float(g["resolution_m"]), tuple(g.get("origin_m", (0.0, 0.0)))
            )
            v = d.get("view", {})
            reach = max(float(s["r_max_m"]) for s in d["sensors"])
            default_side = 2 * int(math.ceil(reach / frame.resolution))
            view_cells = (int(v.get("width_cells", default_side)), int(v.get("height_cells", default_side)))
            traj = d["trajectory"]
            reg = d.get("registration", False)
            window = None
            if isinstance(reg, dict):
                window = SearchWindow.in_cells(
                    frame.resolution,
                    int(reg.get("half_width_cells", 5)),
                    float(reg.get("half_width_deg", 5.0)),
                    float(reg.get("step_deg", 1.0)),
                    int(reg.get("levels", 2)),
                )
                reg = bool(reg.get("enabled", True))
            plan = None
            if d.get("planner"):
                p = d["planner"]
                plan = PlanRequest(
                    tuple(p["start_cell"]),
                    tuple(p["goal_cell"]),
                    PlannerParams(
                        float(p.get("tau_c", 1.0)), float(p.get("tau_d", 1.0)), float(p.get("robot_radius_m", 0.0))
                    ),
                )
            return cls(
                name=str(d.get("name", "scenario")),
                world=world,
                poses=[tuple(float(x) for x in pose) for pose in traj["poses_m_rad"]],
                sensors=[SensorSpec.from_dict(s) for s in d["sensors"]],
                frame=frame,
                view_cells=view_cells,
                odometry_sigma=tuple(float(s) for s in traj.get("odometry_sigma_m_rad", (0.0, 0.0, 0.0))),
                mode=str(d.get("mode", WORLD_BASED)).upper(),
                registration=bool(reg),
                window=window,
                seed=int(d.get("seed", 0)),
                band=float(d.get("band", 0.0)),
                plan=plan,
                true_odometry=bool(d.get("debug_true_odometry", False)),
            )
        except KeyError as exc:
            raise ValueError(f"scenario is missing field {exc}") from exc

    @classmethod
    def load(cls, path) -> Scenario:
        path = Path(path)
        if not path.exists():
            raise ValueError(f"scenario file not found: {path}")
        return cls.from_dict(json.loads(path.read_text()), path.parent)

    def replace(self, **kw) -> Scenario:
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(kw)
        return Scenario(**fields)


@dataclass
class Metrics:
    """Map quality against ground truth; ``accuracy`` is ``None`` when no cell is decided."""

    accuracy: float | None
    decided_cells: int
    mean_abs_error: float | None
    observed_cells: int
    pose_errors: list[tuple[float, float]] = field(default_factory=list)
    runtime_s: float | None = None

    def to_dict(self, include_runtime: bool = False) -> dict:
        d = {
            "accuracy": self.accuracy,
            "decided_cells": self.decided_cells,
            "mean_abs_error": self.mean_abs_error,
            "observed_cells": self.observed_cells,
            "pose_errors": [{"translation_m": t, "heading_rad": h} for t, h in self.pose_errors],
        }
        if include_runtime:
            d["runtime_s"] = self.runtime_s
        return d


def evaluate_map(estimate: Grid2D, truth: Grid2D, band: float = 0.0) -> Metrics:
    """Compare MAP labels of ``estimate`` with those of ``truth`` over the estimate's decided cells."""
    if not estimate.same_geometry(truth):
        raise ValueError("estimate and truth grids have different geometry")
    est = label_grid(estimate.values, band)
    ref = label_grid(truth.values, 0.0)
    decided = est != CellLabel.UNKNOWN
    n = int(decided.sum())
    accuracy = float((est[decided] == ref[decided]).mean()) if n else None
    observed = estimate.values != 0.5
    target = (ref == CellLabel.OCCUPIED).astype(float)
    mae = float(np.abs(estimate.values[observed] - target[observed]).mean()) if observed.any() else None
    return Metrics(accuracy, n, mae, int(observed.sum()))


def relative_motion(a, b) -> np.ndarray:
    """Pose of ``b`` seen from ``a`` (both world poses)."""
    return compose(invert(PoseAT(a)), PoseAT(b)).mean


@dataclass
class StepRecord:
    """State after one stop, for diagnostics.

    ``provenance`` labels each cell of ``native_map`` with the index of the
    step-0 cell its content was carried from (-1 when it came from outside);
    ``observed`` marks the cells this stop's view touched and ``decided`` the
    ones it labelled outside the UNKNOWN band.
    """

    true_pose: tuple[float, float, float]
    estimate: PoseAT
    native_map: Grid2D
    world_map: Grid2D
    provenance: np.ndarray
    observed: np.ndarray
    decided: np.ndarray


@dataclass
class MappingRun:
    global_map: Grid2D
    native_map: Grid2D
    graph: ViewGraph
    readings: list[BeamReading]
    metrics: Metrics
    steps: list[StepRecord]
    truth: Grid2D


def build_robot_view(readings, sensors: dict, frame: Grid2D) -> Grid2D:
    """Pool every reading of one stop into a map in the robot's frame."""
    view = frame.blank()
    # each element sits at the robot centre, facing along its bearing
    local = [BeamReading(0.0, 0.0, rd.bearing, 0.0, rd.range, rd.max_range, rd.sensor, rd.t) for rd in readings]
    models = {name: spec.model() for name, spec in sensors.items()}
    integrate_log(view, local, models, r_max={name: spec.r_max for name, spec in sensors.items()})
    return view


def _robot_frame(cells, resolution: float) -> Grid2D:
    w, h = cells
    return new_grid(w, h, resolution, (-0.5 * w * resolution, -0.5 * h * resolution, 0.0))


def run_mapping(scenario: Scenario, out_dir=None, keep_steps: bool = True) -> MappingRun:
    """Drive the robot along the trajectory and build the global map.

    Per stop: sense, fold the readings into a robot view, optionally register
    it against the global map, then fuse it world-based or robot-based. The
    mapper only sees odometry with its covariance, never the true poses.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(scenario.seed)
    res = scenario.frame.resolution
    world_frame = scenario.frame.blank()
    view_frame = _robot_frame(scenario.view_cells, res)
    sensors = {s.name: s for s in scenario.sensors}
    truth = scenario.world.ground_truth(world_frame)

    if scenario.mode == ROBOT_BASED:
        native = _robot_frame((2 * world_frame.width, 2 * world_frame.height), res)
    else:
        native = world_frame.blank()
    provenance = np.arange(native.width * native.height).reshape(native.shape)
    graph = ViewGraph()
    readings: list[BeamReading] = []
    steps: list[StepRecord] = []
    pose_errors = []
    estimate = PoseAT(scenario.poses[0])

    for k, true_pose in enumerate(scenario.poses):
        if k == 0:
            motion = PoseAT.identity()
        else:
            rel = relative_motion(scenario.poses[k - 1], true_pose)
            noise = rng.standard_normal(3) * np.asarray(scenario.odometry_sigma)
            odo = rel if scenario.true_odometry else rel + noise
            motion = PoseAT(odo, scenario.odometry_cov)
        scan = []
        for spec in scenario.sensors:
            scan.extend(sense(scenario.world, true_pose, spec, rng, t=float(k)))
        readings.extend(scan)
        view = build_robot_view(scan, sensors, view_frame)

        if k == 0:
            estimate = PoseAT(scenario.poses[0])
        else:
            if scenario.registration:
                motion = _register(view, native, estimate, motion, scenario)
            estimate = compose(estimate, motion)

        if scenario.mode == WORLD_BASED:
            placed = view_in_frame(view, native, estimate.mean).values
            native = world_based_update(native, RobotView(view, estimate))
        else:
            if k:
                # follow cell contents through the same re-expression the map undergoes
                idx = resample_indices(native, native, tuple(invert(motion).mean))
                provenance = np.where(idx >= 0, provenance.reshape(-1)[np.maximum(idx, 0)], -1)
            native = robot_based_update(native, RobotView(view, estimate), motion)
            placed = view_in_frame(view, native, (0.0, 0.0, 0.0)).values
        view_graph_add(graph, RobotView(view, estimate), motion if k else PoseAT(scenario.poses[0]))

        world_map = _to_world(native, estimate, world_frame, scenario.mode)
        err = estimate.mean - np.asarray(true_pose)
        pose_errors.append((float(math.hypot(err[0], err[1])), float(abs(math.remainder(err[2], 2 * math.pi)))))
        if keep_steps or k == len(scenario.poses) - 1:
            steps.append(
                StepRecord(
                    tuple(true_pose),
                    estimate,
                    native,
                    world_map,
                    provenance.copy(),
                    placed != 0.5,
                    np.abs(placed - 0.5) > scenario.band,
                )
            )
        if out_dir is not None:
            step_dir = Path(out_dir) / "steps"
            step_dir.mkdir(parents=True, exist_ok=True)
            write_pgm(step_dir / f"step_{k:02d}.pgm", native)

    global_map = steps[-1].world_map
    metrics = evaluate_map(global_map, truth, scenario.band)
    metrics.pose_errors = pose_errors
    metrics.runtime_s = time.perf_counter() - t0
    run = MappingRun(global_map, native, graph, readings, metrics, steps, truth)
    if out_dir is not None:
        write_outputs(run, Path(out_dir))
    return run


def _register(view: Grid2D, native: Grid2D, estimate: PoseAT, motion: PoseAT, scenario: Scenario) -> PoseAT:
    """Refine the odometry motion by matching the view against the current global map."""
    floor = np.eye(3) * _COV_FLOOR
    if scenario.mode == WORLD_BASED:
        prior = compose(estimate, motion)
        found = solve_motion(view, native, prior, scenario.window)
        if not found.informative:
            return motion
        fused = merge(PoseAT(prior.mean, prior.cov + floor), found.pose)
        # back out the motion that leads from the previous estimate to the fused pose
        return PoseAT(compose(invert(PoseAT(estimate.mean)), PoseAT(fused.mean)).mean, motion.cov)
    found = solve_motion(view, native, motion, scenario.window)
    if not found.informative:
        return motion
    return merge(PoseAT(motion.mean, motion.cov + floor), found.pose)


def _to_world(native: Grid2D, estimate: PoseAT, world_frame: Grid2D, mode: str) -> Grid2D:
    if mode == WORLD_BASED:
        return native.copy()
    return resample_grid(native, world_frame, tuple(estimate.mean))


def write_outputs(run: MappingRun, out: Path) -> None:
    """Every file here is a pure function of the scenario and seed (no timings)."""
    out.mkdir(parents=True, exist_ok=True)
    views = out / "views"
    views.mkdir(exist_ok=True)
    refs = []
    for k, node in enumerate(run.graph.nodes):
        ref = f"views/view_{k:02d}.npz"
        save_grid(out / ref, node.map)
        refs.append(ref)
    run.graph.save(out / "view_graph.json", refs)
    write_pgm(out / "map_final.pgm", run.global_map)
    save_grid(out / "map_final.npz", run.global_map)
    write_pgm(out / "truth.pgm", run.truth)
    write_scan_log(out / "scan_log.jsonl", run.readings)
    dump_json(out / "metrics.json", run.metrics.to_dict())


def observed_only_at(steps: list[StepRecord], index: int) -> list[np.ndarray]:
    """Per step, the cells of its native map decided by stop ``index`` and untouched by every other stop.

    Cells are followed by provenance, so in robot-frame runs the masks move
    with the map exactly as the mapper moved it.
    """
    index %= len(steps)
    only = set(np.unique(steps[index].provenance[steps[index].decided]).tolist())
    for k, s in enumerate(steps):
        if k != index:
            only -= set(np.unique(s.provenance[s.observed]).tolist())
    only.discard(-1)
    ids = np.fromiter(sorted(only), dtype=np.int64)
    return [np.isin(s.provenance, ids) for s in steps]


def mean_confidence(grid: Grid2D, mask: np.ndarray) -> float:
    """Mean |p - 1/2| over ``mask``."""
    return float(np.abs(grid.values[mask] - 0.5).mean()) if mask.any() else float("nan")


def run_eval(map_grid: Grid2D, world: World, band: float = 0.0) -> Metrics:
    """Score a map against the scan-converted world on the map's own geometry."""
    xmin, ymin, xmax, ymax = world.bounds
    xs, ys = map_grid.cell_centers()
    if not ((xs >= xmin) & (xs <= xmax) & (ys >= ymin) & (ys <= ymax)).any():
        raise ValueError("map does not overlap the world bounds")
    return evaluate_map(map_grid, world.ground_truth(map_grid.blank()), band)
