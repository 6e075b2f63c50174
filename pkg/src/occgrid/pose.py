"""Approximate Transformations (2D pose + covariance) and uncertainty-aware mapping.

Covariances are propagated to first order. Map blurring mixes a few rotated
copies of the grid (heading uncertainty) and convolves with a Gaussian kernel
(position uncertainty); both act on raw probabilities with 1/2 padding.
"""

from __future__ import annotations

import json
import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import NoOverlapWarning, SingularCovariance
from .fusion import compose_maps
from .grid import Grid2D, _wrap_angle, resample_grid

ROTATION_MIXTURE_SIZE = 5


def wrap_angle(a: float) -> float:
    return float(_wrap_angle(a))


@dataclass(frozen=True)
class PoseAT:
    """Mean pose ``(x, y, theta)`` with a 3x3 covariance over the same variables."""

    mean: np.ndarray
    cov: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def __post_init__(self):
        m = np.array(self.mean, dtype=float).reshape(3)
        m[2] = wrap_angle(m[2])
        c = np.array(self.cov, dtype=float)
        if c.shape != (3, 3):
            raise ValueError("covariance must be 3x3")
        if not np.all(np.isfinite(c)):
            raise ValueError("covariance must be finite")
        scale = max(1.0, float(np.abs(c).max()))
        if np.abs(c - c.T).max() > 1e-12 * scale:
            raise ValueError("covariance must be symmetric")
        c = 0.5 * (c + c.T)
        if np.linalg.eigvalsh(c).min() < -1e-12 * scale:
            raise ValueError("covariance must be positive semidefinite")
        m.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", c)

    @classmethod
    def identity(cls) -> PoseAT:
        return cls(np.zeros(3), np.zeros((3, 3)))

    @classmethod
    def from_sigmas(cls, x, y, theta, sx=0.0, sy=0.0, stheta=0.0) -> PoseAT:
        return cls(np.array([x, y, theta]), np.diag([sx * sx, sy * sy, stheta * stheta]))

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "cov": self.cov.reshape(-1).tolist()}

    @classmethod
    def from_dict(cls, d) -> PoseAT:
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["cov"], dtype=float).reshape(3, 3))


def compose_jacobians(a_mean, b_mean):
    """Jacobians of the head-to-tail composition with respect to a and b."""
    xb, yb = b_mean[0], b_mean[1]
    c, s = math.cos(a_mean[2]), math.sin(a_mean[2])
    ja = np.array([[1.0, 0.0, -xb * s - yb * c], [0.0, 1.0, xb * c - yb * s], [0.0, 0.0, 1.0]])
    jb = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return ja, jb


def compose(a: PoseAT, b: PoseAT, cross_cov=None) -> PoseAT:
    """Head-to-tail composition: pose ``b`` expressed in frame ``a``.

    ``cross_cov`` is Cov(a, b); leave it ``None`` for independent estimates.
    """
    xa, ya, ta = a.mean
    xb, yb, tb = b.mean
    c, s = math.cos(ta), math.sin(ta)
    mean = np.array([xa + xb * c - yb * s, ya + xb * s + yb * c, ta + tb])
    ja, jb = compose_jacobians(a.mean, b.mean)
    cov = ja @ a.cov @ ja.T + jb @ b.cov @ jb.T
    if cross_cov is not None:
        x = ja @ np.asarray(cross_cov, dtype=float) @ jb.T
        cov = cov + x + x.T
    return PoseAT(mean, 0.5 * (cov + cov.T))


def invert_jacobian(mean) -> np.ndarray:
    x, y, t = mean
    c, s = math.cos(t), math.sin(t)
    return np.array([[-c, -s, x * s - y * c], [s, -c, x * c + y * s], [0.0, 0.0, -1.0]])


def invert(a: PoseAT) -> PoseAT:
    """The reverse transformation, with first-order covariance."""
    x, y, t = a.mean
    c, s = math.cos(t), math.sin(t)
    mean = np.array([-x * c - y * s, x * s - y * c, -t])
    j = invert_jacobian(a.mean)
    cov = j @ a.cov @ j.T
    return PoseAT(mean, 0.5 * (cov + cov.T))


def _check_invertible(cov: np.ndarray, name: str) -> None:
    ev = np.linalg.eigvalsh(cov)
    if ev.max() <= 0 or ev.min() <= 1e-14 * ev.max():
        raise SingularCovariance(f"{name} covariance is singular; regularize before merging")


def merge(a: PoseAT, b: PoseAT) -> PoseAT:
    """Information-weighted fusion of two estimates of the same pose."""
    _check_invertible(a.cov, "first")
    _check_invertible(b.cov, "second")
    mb = b.mean.copy()
    mb[2] = a.mean[2] + wrap_angle(b.mean[2] - a.mean[2])
    gain = np.linalg.solve((a.cov + b.cov).T, a.cov.T).T
    mean = a.mean + gain @ (mb - a.mean)
    cov = a.cov - gain @ a.cov
    return PoseAT(mean, 0.5 * (cov + cov.T))


# -- map blurring -----------------------------------------------------------------


def gaussian_kernel(cov_cells: np.ndarray, n_sigma: float = 3.0) -> np.ndarray:
    """Normalised discrete Gaussian over integer cell offsets (rows = y, cols = x)."""
    cov = np.asarray(cov_cells, dtype=float)
    top = float(np.linalg.eigvalsh(cov).max())
    if top < 1e-12:
        return np.ones((1, 1))
    half = int(math.ceil(n_sigma * math.sqrt(top)))
    dy, dx = np.mgrid[-half : half + 1, -half : half + 1]
    if np.linalg.eigvalsh(cov).min() < 1e-9 * top:
        # a line-shaped blur: widen the thin axis just enough to invert
        cov = cov + 1e-9 * top * np.eye(2)
    info = np.linalg.inv(cov)
    q = info[0, 0] * dx * dx + 2 * info[0, 1] * dx * dy + info[1, 1] * dy * dy
    k = np.exp(-0.5 * q)
    return k / k.sum()


def rotation_mixture(sigma_theta: float, k: int = ROTATION_MIXTURE_SIZE):
    """Angles spread over +-2 sigma_theta and their normalised Gaussian weights."""
    if sigma_theta <= 0:
        return np.zeros(1), np.ones(1)
    u = np.linspace(-2.0, 2.0, k)
    w = np.exp(-0.5 * u * u)
    return u * sigma_theta, w / w.sum()


def blur_map(grid: Grid2D, pose_uncertainty: PoseAT, robot_position) -> Grid2D:
    """Spread each cell's evidence according to the pose covariance.

    The heading marginal becomes a mixture of copies rotated about
    ``robot_position``; the (x, y) marginal becomes a convolution. Cells
    outside the grid count as UNKNOWN.
    """
    cov = pose_uncertainty.cov
    px, py = float(robot_position[0]), float(robot_position[1])
    angles, weights = rotation_mixture(math.sqrt(max(cov[2, 2], 0.0)))
    # work on the deviation from 1/2 so UNKNOWN is reproduced exactly
    if angles.size == 1:
        dev = grid.values - 0.5
    else:
        dev = np.zeros(grid.shape)
        for a, w in zip(angles, weights):
            c, s = math.cos(a), math.sin(a)
            about = (px - c * px + s * py, py - s * px - c * py, a)
            dev += w * (resample_grid(grid, grid, about).values - 0.5)
    th = grid.origin[2]
    rot = np.array([[math.cos(th), math.sin(th)], [-math.sin(th), math.cos(th)]])
    cov_cells = rot @ cov[:2, :2] @ rot.T / grid.resolution**2
    kernel = gaussian_kernel(cov_cells)
    if kernel.size > 1:
        dev = ndimage.convolve(dev, kernel, mode="constant", cval=0.0)
    values = 0.5 + dev
    return grid.with_values(values)


# -- views and global maps -------------------------------------------------------


@dataclass
class RobotView:
    """A map in the robot's local frame plus the robot's global pose estimate."""

    map: Grid2D
    pose: PoseAT


def _overlap_cells(view_map: Grid2D, target: Grid2D, transform) -> int:
    xs, ys = view_map.cell_centers()
    tx, ty, th = transform
    c, s = math.cos(th), math.sin(th)
    wx, wy = tx + c * xs - s * ys, ty + s * xs + c * ys
    ix, iy = target.cell_indices(wx, wy)
    return int(target.in_bounds(ix, iy).sum())


def view_in_frame(view_map: Grid2D, target: Grid2D, pose_mean) -> Grid2D:
    """Resample a robot-frame map onto ``target``'s geometry at ``pose_mean``."""
    if _overlap_cells(view_map, target, pose_mean) == 0:
        warnings.warn("view and map extents are disjoint", NoOverlapWarning, stacklevel=3)
    return resample_grid(view_map, target.blank(), tuple(pose_mean))


def world_based_update(global_map: Grid2D, view: RobotView) -> Grid2D:
    """Blur the incoming view by the robot's global pose uncertainty, then pool it in."""
    placed = view_in_frame(view.map, global_map, view.pose.mean)
    blurred = blur_map(placed, view.pose, view.pose.mean[:2])
    return compose_maps(global_map, blurred)


def robot_based_update(global_map: Grid2D, view: RobotView, recent_motion: PoseAT) -> Grid2D:
    """Blur the existing map by the latest motion's uncertainty, then pool the sharp view.

    ``global_map`` is expressed in the previous robot frame and
    ``recent_motion`` takes that frame to the current one. The result lives in
    the current robot frame, whose origin is the robot.
    """
    back = invert(recent_motion)
    moved = resample_grid(global_map, global_map.blank(), tuple(back.mean))
    blurred = blur_map(moved, back, (0.0, 0.0))
    current = view_in_frame(view.map, global_map, (0.0, 0.0, 0.0))
    return compose_maps(current, blurred)


# -- view graph -----------------------------------------------------------------


@dataclass
class ViewGraph:
    """Robot views on the nodes of a stochastic graph of relative motions."""

    nodes: list[RobotView] = field(default_factory=list)
    edges: list[tuple[int, int, PoseAT]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.nodes)

    def add_edge(self, i: int, j: int, motion: PoseAT) -> None:
        n = len(self.nodes)
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ValueError(f"edge ({i}, {j}) does not join two existing nodes")
        self.edges.append((i, j, motion))

    def _path(self, i: int, j: int) -> list[tuple[int, int, PoseAT, bool]]:
        adj: dict[int, list] = {k: [] for k in range(len(self.nodes))}
        for u, v, m in self.edges:
            adj[u].append((v, m, True))
            adj[v].append((u, m, False))
        prev: dict[int, tuple] = {i: None}
        queue = deque([i])
        while queue:
            u = queue.popleft()
            if u == j:
                break
            for v, m, fwd in adj[u]:
                if v not in prev:
                    prev[v] = (u, m, fwd)
                    queue.append(v)
        if j not in prev:
            raise ValueError(f"nodes {i} and {j} are not connected")
        path = []
        while prev[j] is not None:
            u, m, fwd = prev[j]
            path.append((u, j, m, fwd))
            j = u
        return path[::-1]

    def relative_pose(self, i: int, j: int) -> PoseAT:
        """Pose of node ``j`` in the frame of node ``i``, chained along the graph."""
        pose = PoseAT.identity()
        for _, _, m, fwd in self._path(i, j):
            pose = compose(pose, m if fwd else invert(m))
        return pose

    def to_dict(self, map_files: list[str] | None = None) -> dict:
        nodes = []
        for k, node in enumerate(self.nodes):
            nodes.append(
                {
                    "id": k,
                    "pose_mean": node.pose.mean.tolist(),
                    "pose_cov": node.pose.cov.reshape(-1).tolist(),
                    "map_file": map_files[k] if map_files else None,
                }
            )
        edges = [
            {"from": u, "to": v, "mean": m.mean.tolist(), "cov": m.cov.reshape(-1).tolist()}
            for u, v, m in self.edges
        ]
        return {"nodes": nodes, "edges": edges}

    def save(self, path, map_files: list[str] | None = None) -> None:
        Path(path).write_text(json.dumps(self.to_dict(map_files), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path, load_map=None) -> ViewGraph:
        """Rebuild a graph; ``load_map(ref)`` resolves map references (blank 1x1 maps if omitted)."""
        doc = json.loads(Path(path).read_text())
        graph = cls()
        for node in sorted(doc["nodes"], key=lambda n: n["id"]):
            pose = PoseAT(node["pose_mean"], np.asarray(node["pose_cov"]).reshape(3, 3))
            grid = load_map(node["map_file"]) if load_map else Grid2D(1, 1, 1.0)
            graph.nodes.append(RobotView(grid, pose))
        for e in doc["edges"]:
            graph.add_edge(e["from"], e["to"], PoseAT(e["mean"], np.asarray(e["cov"]).reshape(3, 3)))
        return graph


def view_graph_add(graph: ViewGraph, view: RobotView, motion: PoseAT) -> ViewGraph:
    """Append a view reached from the latest node by ``motion``.

    The new node's global pose is the previous node's pose composed with
    ``motion``; for the first node ``motion`` is taken from the origin.
    """
    if graph.nodes:
        pose = compose(graph.nodes[-1].pose, motion)
    else:
        pose = compose(PoseAT.identity(), motion)
    graph.nodes.append(RobotView(view.map, pose))
    if len(graph.nodes) > 1:
        graph.add_edge(len(graph.nodes) - 2, len(graph.nodes) - 1, motion)
    return graph
