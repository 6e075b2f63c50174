"""Occupancy grid data structures, cell geometry, MAP labelling and resampling.

Every grid stores only P[s(C) = OCC]; the EMP probability is its complement.
Stored values are clamped to ``[EPS, 1 - EPS]`` so that a Bayes update can
never drive a cell into an absorbing 0 or 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

EPS = 1e-6
UNKNOWN_P = 0.5

# Distance (in cells) under which a coordinate is snapped onto a cell edge, so
# that points computed as k * resolution land in cell k despite rounding.
_EDGE_SNAP = 1e-9


def clamp_probability(p):
    """Clip probabilities into ``[EPS, 1 - EPS]``; works on scalars and arrays."""
    out = np.clip(p, EPS, 1.0 - EPS)
    if np.ndim(out) == 0:
        return float(out)
    return out


def _as_pose(origin) -> tuple[float, float, float]:
    if origin is None:
        return (0.0, 0.0, 0.0)
    o = tuple(float(v) for v in origin)
    if len(o) == 2:
        o = (o[0], o[1], 0.0)
    if len(o) != 3:
        raise ValueError(f"origin must be (x, y) or (x, y, theta), got {origin!r}")
    return o


@dataclass
class Grid2D:
    """A 2D occupancy grid.

    ``values[iy, ix]`` holds the occupancy probability of cell ``(ix, iy)``.
    ``origin`` is the world pose ``(x, y, theta)`` of the outer corner of cell
    ``(0, 0)``; the grid's x axis points along ``theta``.
    """

    width: int
    height: int
    resolution: float
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if int(self.width) != self.width or int(self.height) != self.height:
            raise ValueError("grid dimensions must be integers")
        self.width = int(self.width)
        self.height = int(self.height)
        if self.width < 1 or self.height < 1:
            raise ValueError(f"grid dimensions must be >= 1, got {self.width}x{self.height}")
        if not (self.resolution > 0 and math.isfinite(self.resolution)):
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        self.resolution = float(self.resolution)
        self.origin = _as_pose(self.origin)
        if self.values is None:
            self.values = np.full((self.height, self.width), UNKNOWN_P)
        else:
            v = np.array(self.values, dtype=float)
            if v.shape != (self.height, self.width):
                raise ValueError(
                    f"values shape {v.shape} does not match grid ({self.height}, {self.width})"
                )
            self.values = clamp_probability(v)

    # -- construction helpers -------------------------------------------------

    def copy(self) -> Grid2D:
        return Grid2D(self.width, self.height, self.resolution, self.origin, self.values.copy())

    def with_values(self, values) -> Grid2D:
        """Same geometry, new (clamped) values."""
        return Grid2D(self.width, self.height, self.resolution, self.origin, values)

    def blank(self) -> Grid2D:
        """Same geometry, every cell UNKNOWN."""
        return Grid2D(self.width, self.height, self.resolution, self.origin)

    def same_geometry(self, other: Grid2D) -> bool:
        return (
            self.width == other.width
            and self.height == other.height
            and self.resolution == other.resolution
            and self.origin == other.origin
        )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    # -- geometry -------------------------------------------------------------

    def to_local(self, x, y):
        """World coordinates -> grid-frame metric coordinates."""
        ox, oy, th = self.origin
        dx = np.asarray(x, dtype=float) - ox
        dy = np.asarray(y, dtype=float) - oy
        c, s = math.cos(th), math.sin(th)
        return c * dx + s * dy, -s * dx + c * dy

    def to_world(self, u, v):
        """Grid-frame metric coordinates -> world coordinates."""
        ox, oy, th = self.origin
        c, s = math.cos(th), math.sin(th)
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return ox + c * u - s * v, oy + s * u + c * v

    def cell_to_world(self, ix, iy):
        """World coordinates of the center of cell ``(ix, iy)``."""
        u = (np.asarray(ix, dtype=float) + 0.5) * self.resolution
        v = (np.asarray(iy, dtype=float) + 0.5) * self.resolution
        x, y = self.to_world(u, v)
        if np.ndim(x) == 0:
            return float(x), float(y)
        return x, y

    def cell_indices(self, x, y):
        """Vectorised lattice indices of world points (may be out of bounds)."""
        u, v = self.to_local(x, y)
        return _snap_floor(u / self.resolution), _snap_floor(v / self.resolution)

    def in_bounds(self, ix, iy):
        ix = np.asarray(ix)
        iy = np.asarray(iy)
        return (ix >= 0) & (ix < self.width) & (iy >= 0) & (iy < self.height)

    def world_to_cell(self, point) -> tuple[int, int] | None:
        """Index of the cell containing ``point``, or ``None`` when outside.

        Cells are half-open, so a point on an edge shared by two cells belongs
        to the one with the larger index.
        """
        ix, iy = self.cell_indices(point[0], point[1])
        ix, iy = int(ix), int(iy)
        if not self.in_bounds(ix, iy):
            return None
        return ix, iy

    def cell_centers(self):
        """World coordinates of all cell centers as two ``(height, width)`` arrays."""
        iy, ix = np.mgrid[0 : self.height, 0 : self.width]
        return self.cell_to_world(ix, iy)

    def sample(self, x, y, fill: float = UNKNOWN_P) -> np.ndarray:
        """Nearest-neighbour lookup of the cells containing world points."""
        ix, iy = self.cell_indices(x, y)
        inside = self.in_bounds(ix, iy)
        out = np.full(np.shape(ix), fill, dtype=float)
        out[inside] = self.values[iy[inside], ix[inside]]
        return out

    def geometry_dict(self) -> dict:
        return {
            "width_cells": self.width,
            "height_cells": self.height,
            "resolution_m": self.resolution,
            "origin_x_m": self.origin[0],
            "origin_y_m": self.origin[1],
            "origin_theta_rad": self.origin[2],
        }


def _snap_floor(u):
    u = np.asarray(u, dtype=float)
    r = np.round(u)
    u = np.where(np.abs(u - r) < _EDGE_SNAP, r, u)
    return np.floor(u).astype(int)


def new_grid(width: int, height: int, resolution: float, origin=(0.0, 0.0, 0.0)) -> Grid2D:
    """A grid with every cell at the maximum-entropy prior 1/2."""
    return Grid2D(width, height, resolution, origin)


def grid_from_dict(d: dict) -> Grid2D:
    """Build an UNKNOWN grid from a geometry dict with unit-suffixed keys."""
    return new_grid(
        d["width_cells"],
        d["height_cells"],
        d["resolution_m"],
        (d.get("origin_x_m", 0.0), d.get("origin_y_m", 0.0), d.get("origin_theta_rad", 0.0)),
    )


def world_to_cell(grid: Grid2D, point) -> tuple[int, int] | None:
    return grid.world_to_cell(point)


def cell_to_world(grid: Grid2D, cell) -> tuple[float, float]:
    return grid.cell_to_world(cell[0], cell[1])


# -- MAP labelling ------------------------------------------------------------


class CellLabel(enum.IntEnum):
    EMPTY = -1
    UNKNOWN = 0
    OCCUPIED = 1


def _check_band(band: float) -> None:
    if not (0.0 <= band < 0.5):
        raise ValueError(f"UNKNOWN band half-width must be in [0, 0.5), got {band}")


def label_cell(p: float, band: float = 0.0) -> CellLabel:
    """MAP decision for one cell, with an optional UNKNOWN band around 1/2."""
    _check_band(band)
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"probability out of range: {p}")
    if p > 0.5 + band:
        return CellLabel.OCCUPIED
    if p < 0.5 - band:
        return CellLabel.EMPTY
    return CellLabel.UNKNOWN


def label_grid(values, band: float = 0.0) -> np.ndarray:
    """Vectorised :func:`label_cell`; returns int8 codes matching :class:`CellLabel`."""
    _check_band(band)
    v = values.values if isinstance(values, Grid2D) else np.asarray(values)
    out = np.zeros(v.shape, dtype=np.int8)
    out[v > 0.5 + band] = CellLabel.OCCUPIED
    out[v < 0.5 - band] = CellLabel.EMPTY
    return out


# -- polar grids --------------------------------------------------------------


@dataclass
class PolarGrid:
    """Occupancy grid in polar coordinates about a sensor pose.

    Range bin ``k`` covers ``[k*d_rho, (k+1)*d_rho)``. Angle bins are laid out
    symmetrically about the pole heading: bin ``j`` covers
    ``[-half_extent + j*d_phi, -half_extent + (j+1)*d_phi)``.
    ``values[j, k]`` is indexed (angle, range).
    """

    n_range: int
    d_rho: float
    n_angle: int
    d_phi: float
    pole: tuple[float, float, float] = (0.0, 0.0, 0.0)
    values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.n_range < 1 or self.n_angle < 1:
            raise ValueError("polar grid needs at least one range and one angle bin")
        if self.d_rho <= 0 or self.d_phi <= 0:
            raise ValueError("polar bin sizes must be positive")
        if self.n_angle * self.d_phi > 2 * math.pi + 1e-12:
            raise ValueError("angular extent exceeds a full turn")
        self.pole = _as_pose(self.pole)
        if self.values is None:
            self.values = np.full((self.n_angle, self.n_range), UNKNOWN_P)
        else:
            v = np.array(self.values, dtype=float)
            if v.shape != (self.n_angle, self.n_range):
                raise ValueError("polar values shape mismatch")
            self.values = clamp_probability(v)

    @property
    def half_extent(self) -> float:
        return 0.5 * self.n_angle * self.d_phi

    @property
    def max_range(self) -> float:
        return self.n_range * self.d_rho

    def range_centers(self) -> np.ndarray:
        return (np.arange(self.n_range) + 0.5) * self.d_rho

    def angle_centers(self) -> np.ndarray:
        return -self.half_extent + (np.arange(self.n_angle) + 0.5) * self.d_phi


def _wrap_angle(a):
    """Wrap to (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    w = np.mod(a + np.pi, 2 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    if w.ndim == 0:
        return float(w)
    return w


def resample_polar_to_cartesian(src: PolarGrid, dst: Grid2D) -> Grid2D:
    """Nearest-neighbour resampling of a polar grid onto ``dst``'s geometry.

    Each cartesian cell center is expressed in polar coordinates about the
    pole and takes the value of the polar cell containing it; centers outside
    the polar extent are UNKNOWN.
    """
    out = np.full(dst.shape, UNKNOWN_P)
    xs, ys = dst.cell_centers()
    px, py, ph = src.pole
    dx = xs - px
    dy = ys - py
    rho = np.hypot(dx, dy)
    phi = _wrap_angle(np.arctan2(dy, dx) - ph)
    k = _snap_floor(rho / src.d_rho)
    j = _snap_floor((phi + src.half_extent) / src.d_phi)
    inside = (k >= 0) & (k < src.n_range) & (j >= 0) & (j < src.n_angle)
    out[inside] = src.values[j[inside], k[inside]]
    return dst.with_values(out)


# -- rigid resampling between grids -------------------------------------------


def resample_indices(src: Grid2D, dst: Grid2D, transform=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Flat index of the ``src`` cell each ``dst`` cell reads from (-1 outside ``src``).

    ``transform`` ``(x, y, theta)`` maps points of ``src``'s world frame into
    ``dst``'s world frame.
    """
    tx, ty, th = _as_pose(transform)
    xs, ys = dst.cell_centers()
    c, s = math.cos(th), math.sin(th)
    dx = xs - tx
    dy = ys - ty
    ix, iy = src.cell_indices(c * dx + s * dy, -s * dx + c * dy)
    return np.where(src.in_bounds(ix, iy), iy * src.width + ix, -1)


def resample_grid(src: Grid2D, dst: Grid2D, transform=(0.0, 0.0, 0.0)) -> Grid2D:
    """Express ``src`` on ``dst``'s geometry by nearest-neighbour lookup.

    Cells that fall outside ``src`` become UNKNOWN.
    """
    idx = resample_indices(src, dst, transform)
    out = np.where(idx >= 0, src.values.reshape(-1)[np.maximum(idx, 0)], UNKNOWN_P)
    return dst.with_values(out)


# -- scan conversion of prior geometric maps -------------------------------------


@dataclass(frozen=True)
class Segment:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        vals = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("segment coordinates must be finite")
        if self.x1 == self.x2 and self.y1 == self.y2:
            raise ValueError("segment endpoints must be distinct")


@dataclass(frozen=True)
class Disc:
    cx: float
    cy: float
    r: float

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ValueError(f"disc radius must be positive, got {self.r}")


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(verts) < 3:
            raise ValueError("polygon needs at least three vertices")
        area = 0.5 * sum(
            verts[i][0] * verts[i - 1][1] - verts[i - 1][0] * verts[i][1] for i in range(len(verts))
        )
        if area == 0.0:
            raise ValueError("polygon is degenerate (zero area)")
        object.__setattr__(self, "vertices", verts)

    @classmethod
    def rectangle(cls, x0: float, y0: float, x1: float, y1: float) -> Polygon:
        return cls(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))


def _points_in_polygon(px, py, verts) -> np.ndarray:
    """Even-odd test, with points on the boundary counted as inside."""
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    inside = np.zeros(px.shape, dtype=bool)
    on_edge = np.zeros(px.shape, dtype=bool)
    n = len(verts)
    for i in range(n):
        x1, y1 = verts[i - 1]
        x2, y2 = verts[i]
        crosses = (y1 > py) != (y2 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (px < xint)
        on_edge |= _point_segment_distance(px, py, x1, y1, x2, y2) <= 1e-12
    return inside | on_edge


def _point_segment_distance(px, py, x1, y1, x2, y2):
    dx, dy = x2 - x1, y2 - y1
    L2 = dx * dx + dy * dy
    t = np.clip(((px - x1) * dx + (py - y1) * dy) / L2, 0.0, 1.0) if L2 > 0 else 0.0
    return np.hypot(px - (x1 + t * dx), py - (y1 + t * dy))


def _segment_cells(frame: Grid2D, seg: Segment) -> np.ndarray:
    """Boolean mask of cells whose closed square the segment intersects (Liang-Barsky)."""
    u1, v1 = frame.to_local(seg.x1, seg.y1)
    u2, v2 = frame.to_local(seg.x2, seg.y2)
    res = frame.resolution
    lo_x = max(int(math.floor(min(u1, u2) / res)) - 1, 0)
    hi_x = min(int(math.floor(max(u1, u2) / res)) + 1, frame.width - 1)
    lo_y = max(int(math.floor(min(v1, v2) / res)) - 1, 0)
    hi_y = min(int(math.floor(max(v1, v2) / res)) + 1, frame.height - 1)
    mask = np.zeros(frame.shape, dtype=bool)
    if lo_x > hi_x or lo_y > hi_y:
        return mask
    iy, ix = np.mgrid[lo_y : hi_y + 1, lo_x : hi_x + 1]
    xmin, xmax = ix * res, (ix + 1) * res
    ymin, ymax = iy * res, (iy + 1) * res
    du, dv = float(u2 - u1), float(v2 - v1)
    t0 = np.zeros(ix.shape)
    t1 = np.ones(ix.shape)
    ok = np.ones(ix.shape, dtype=bool)
    for p, q in ((-du, u1 - xmin), (du, xmax - u1), (-dv, v1 - ymin), (dv, ymax - v1)):
        if p == 0.0:
            ok &= q >= 0
            continue
        r = q / p
        if p < 0:
            t0 = np.maximum(t0, r)
        else:
            t1 = np.minimum(t1, r)
    ok &= t0 <= t1
    mask[lo_y : hi_y + 1, lo_x : hi_x + 1] = ok
    return mask


def geometry_mask(frame: Grid2D, shape) -> np.ndarray:
    """Cells of ``frame`` covered by one geometric primitive."""
    if isinstance(shape, Segment):
        return _segment_cells(frame, shape)
    xs, ys = frame.cell_centers()
    if isinstance(shape, Disc):
        return np.hypot(xs - shape.cx, ys - shape.cy) <= shape.r
    if isinstance(shape, Polygon):
        return _points_in_polygon(xs, ys, shape.vertices)
    raise ValueError(f"unsupported geometry primitive: {shape!r}")


def scan_convert(
    obstacles: Iterable,
    frame: Grid2D,
    p_occ: float = 0.95,
    p_emp: float = 0.05,
    free: Sequence = (),
) -> Grid2D:
    """Rasterise prior geometry into an occupancy grid on ``frame``'s geometry.

    Discs and polygons mark the cells whose centers lie inside or on them.
    Segments have no area, so they mark every cell whose square they cross.
    ``free`` regions (discs/polygons) are written first with ``p_emp`` and
    obstacles override them with ``p_occ``; everything else stays at 1/2.
    """
    if not (p_emp < 0.5 < p_occ):
        raise ValueError("scan conversion requires p_emp < 1/2 < p_occ")
    values = np.full(frame.shape, UNKNOWN_P)
    for region in free:
        if isinstance(region, Segment):
            raise ValueError("a segment cannot declare a free region")
        values[geometry_mask(frame, region)] = p_emp
    for shape in obstacles:
        if not isinstance(shape, (Segment, Disc, Polygon)):
            raise ValueError(f"malformed geometry: {shape!r}")
        values[geometry_mask(frame, shape)] = p_occ
    return frame.with_values(values)
