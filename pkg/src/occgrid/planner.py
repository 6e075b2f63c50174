"""Risk-aware path planning on occupancy grids.

A step into a cell costs ``tau_c * cost(p) + tau_d * step_length`` with
``cost(p) = -ln(1 - p)``; the start cell is never charged. Search is A* on the
8-connected lattice with a straight-line distance heuristic.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
import pathlib

import numpy as np
from scipy import ndimage

from .grid import EPS, Grid2D


def traversal_cost(p, clamp: float | None = None):
    """``-ln(1 - p)``: 0 for certain-empty, ln 2 at UNKNOWN, divergent toward 1."""
    out = -np.log1p(-np.asarray(p, dtype=float))
    if clamp is not None:
        out = np.minimum(out, clamp)
    return float(out) if out.ndim == 0 else out


DEFAULT_COST_CLAMP = float(traversal_cost(1.0 - EPS))

_STEPS = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if (dx, dy) != (0, 0)]


@dataclass(frozen=True)
class PlannerParams:
    """Weights of the risk and distance terms, robot radius (m) and per-cell cost ceiling.

    Cells whose unclamped cost reaches ``cost_clamp`` are impassable.
    """

    tau_c: float = 1.0
    tau_d: float = 1.0
    robot_radius: float = 0.0
    cost_clamp: float = DEFAULT_COST_CLAMP

    def __post_init__(self):
        if self.tau_c < 0 or self.tau_d < 0 or self.tau_c + self.tau_d <= 0:
            raise ValueError("weights must be non-negative with a positive sum")
        if self.robot_radius < 0:
            raise ValueError("robot radius must be non-negative")
        if self.cost_clamp <= 0:
            raise ValueError("cost clamp must be positive")


@dataclass
class Path:
    """Cells ``(ix, iy)`` from start to goal and the total cost of the route."""

    cells: list[tuple[int, int]]
    cost: float
    resolution: float = 1.0
    headings: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.headings:
            self.headings = path_headings(self.cells)

    def to_dict(self) -> dict:
        return {
            "cost": self.cost,
            "poses": [[int(x), int(y), float(h)] for (x, y), h in zip(self.cells, self.headings)],
        }

    def save(self, path) -> None:
        pathlib.Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def path_headings(cells) -> list[float]:
    """Heading of each pose along a cell path, taken from the step leaving it (the last repeats)."""
    if len(cells) < 2:
        return [0.0] * len(cells)
    out = [math.atan2(b[1] - a[1], b[0] - a[0]) for a, b in zip(cells, cells[1:])]
    return out + [out[-1]]


def grow_obstacles(grid: Grid2D, radius: float) -> Grid2D:
    """Dilate occupancy: each cell takes the maximum over the disc of ``radius`` metres."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    r = radius / grid.resolution
    k = int(math.floor(r + 1e-9))
    if k == 0:
        return grid.copy()
    dy, dx = np.mgrid[-k : k + 1, -k : k + 1]
    footprint = dx * dx + dy * dy <= r * r + 1e-9
    return grid.with_values(ndimage.maximum_filter(grid.values, footprint=footprint, mode="nearest"))


def cost_field(grid: Grid2D, params: PlannerParams) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell clamped cost and the mask of impassable cells."""
    raw = traversal_cost(grid.values)
    lethal = raw >= params.cost_clamp
    return np.minimum(raw, params.cost_clamp), lethal


def _check_cell(grid: Grid2D, cell) -> tuple[int, int]:
    ix, iy = int(cell[0]), int(cell[1])
    if not grid.in_bounds(ix, iy):
        raise ValueError(f"cell {cell!r} lies outside the grid")
    return ix, iy


def plan_path(grid: Grid2D, start, goal, params: PlannerParams = PlannerParams()) -> Path | None:
    """Minimum-cost 8-connected path from ``start`` to ``goal``; ``None`` when unreachable."""
    start, goal = _check_cell(grid, start), _check_cell(grid, goal)
    if params.robot_radius > 0:
        grid = grow_obstacles(grid, params.robot_radius)
    cost, lethal = cost_field(grid, params)
    if start == goal:
        return Path([start], 0.0, grid.resolution)
    if lethal[goal[1], goal[0]]:
        return None
    res = grid.resolution
    gx, gy = goal

    def h(x, y):
        return params.tau_d * math.hypot(x - gx, y - gy) * res

    best = {start: 0.0}
    parent: dict = {start: None}
    heap = [(h(*start), 0.0, start)]
    closed = set()
    while heap:
        _, g, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur == goal:
            break
        closed.add(cur)
        x, y = cur
        for dx, dy in _STEPS:
            nx, ny = x + dx, y + dy
            if not (0 <= nx < grid.width and 0 <= ny < grid.height) or lethal[ny, nx]:
                continue
            step = math.sqrt(2.0) if dx and dy else 1.0
            ng = g + (params.tau_c * cost[ny, nx] + params.tau_d * step * res)
            if ng < best.get((nx, ny), math.inf):
                best[(nx, ny)] = ng
                parent[(nx, ny)] = cur
                heapq.heappush(heap, (ng + h(nx, ny), ng, (nx, ny)))
    if goal not in parent:
        return None
    cells = [goal]
    while parent[cells[-1]] is not None:
        cells.append(parent[cells[-1]])
    return Path(cells[::-1], best[goal], res)


def path_cost(grid: Grid2D, cells, params: PlannerParams = PlannerParams()) -> float:
    """Cost of an explicit cell path under the planner's charging rule."""
    cost, _ = cost_field(grid, params)
    total = 0.0
    for (x0, y0), (x1, y1) in zip(cells, cells[1:]):
        if max(abs(x1 - x0), abs(y1 - y0)) != 1:
            raise ValueError("consecutive path cells must be 8-neighbours")
        step = math.sqrt(2.0) if x1 != x0 and y1 != y0 else 1.0
        total += params.tau_c * cost[y1, x1] + params.tau_d * step * grid.resolution
    return total
