"""Synthetic worlds and noisy range-sensor emulation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .estimation import BeamReading
from .grid import Disc, Grid2D, Polygon, Segment, scan_convert
from .sensor_models import CalibratedModel

CONE_RAYS = 9


@dataclass
class World:
    """Rectangular bounds ``(xmin, ymin, xmax, ymax)`` holding segment and disc obstacles."""

    bounds: tuple[float, float, float, float]
    segments: list[Segment] = field(default_factory=list)
    discs: list[Disc] = field(default_factory=list)

    def __post_init__(self):
        xmin, ymin, xmax, ymax = (float(b) for b in self.bounds)
        if not (xmin < xmax and ymin < ymax):
            raise ValueError("world bounds must have positive extent")
        self.bounds = (xmin, ymin, xmax, ymax)
        tol = 1e-9
        for s in self.segments:
            for x, y in ((s.x1, s.y1), (s.x2, s.y2)):
                if not (xmin - tol <= x <= xmax + tol and ymin - tol <= y <= ymax + tol):
                    raise ValueError(f"segment {s} leaves the world bounds")
        for d in self.discs:
            if d.cx - d.r < xmin - tol or d.cx + d.r > xmax + tol or d.cy - d.r < ymin - tol or d.cy + d.r > ymax + tol:
                raise ValueError(f"disc {d} leaves the world bounds")
        self._seg = np.array([[s.x1, s.y1, s.x2, s.y2] for s in self.segments], dtype=float).reshape(-1, 4)
        self._disc = np.array([[d.cx, d.cy, d.r] for d in self.discs], dtype=float).reshape(-1, 3)

    def contains(self, x: float, y: float) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin <= x <= xmax and ymin <= y <= ymax

    @property
    def obstacles(self) -> list:
        return [*self.segments, *self.discs]

    def to_dict(self) -> dict:
        return {
            "bounds": list(self.bounds),
            "segments": [[s.x1, s.y1, s.x2, s.y2] for s in self.segments],
            "discs": [[d.cx, d.cy, d.r] for d in self.discs],
        }

    @classmethod
    def from_dict(cls, d) -> World:
        try:
            return cls(
                tuple(d["bounds"]),
                [Segment(*map(float, s)) for s in d.get("segments", [])],
                [Disc(*map(float, c)) for c in d.get("discs", [])],
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed world description: {exc}") from exc

    @classmethod
    def load(cls, path) -> World:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    def ground_truth(self, frame: Grid2D, p_occ: float = 0.95, p_emp: float = 0.05) -> Grid2D:
        """Scan-converted truth: obstacles occupied, the rest of the bounds empty."""
        xmin, ymin, xmax, ymax = self.bounds
        return scan_convert(self.obstacles, frame, p_occ, p_emp, free=[Polygon.rectangle(xmin, ymin, xmax, ymax)])


def _cast(world: World, ox: float, oy: float, angles: np.ndarray) -> np.ndarray:
    """Nearest hit distance along each ray (inf on a miss)."""
    dx, dy = np.cos(angles)[:, None], np.sin(angles)[:, None]
    best = np.full(angles.shape, np.inf)
    if len(world._seg):
        x1, y1, x2, y2 = (world._seg[:, k][None, :] for k in range(4))
        ex, ey = x2 - x1, y2 - y1
        wx, wy = x1 - ox, y1 - oy
        den = dx * ey - dy * ex
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (wx * ey - wy * ex) / den
            u = (wx * dy - wy * dx) / den
        hit = (den != 0) & (t >= 0) & (u >= 0) & (u <= 1)
        best = np.minimum(best, np.where(hit, t, np.inf).min(axis=1))
    if len(world._disc):
        cx, cy, r = (world._disc[:, k][None, :] for k in range(3))
        fx, fy = ox - cx, oy - cy
        b = fx * dx + fy * dy
        c = fx * fx + fy * fy - r * r
        disc = b * b - c
        root = np.sqrt(np.maximum(disc, 0.0))
        near = -b - root
        t = np.where(c <= 0, 0.0, near)
        hit = (disc >= 0) & (t >= 0)
        best = np.minimum(best, np.where(hit, t, np.inf).min(axis=1))
    return best


def ray_cast(world: World, origin, direction: float, r_max: float = math.inf) -> float | None:
    """Distance to the nearest obstacle along a ray, or ``None`` beyond ``r_max``."""
    ox, oy = float(origin[0]), float(origin[1])
    if not world.contains(ox, oy):
        raise ValueError("ray origin lies outside the world bounds")
    d = float(_cast(world, ox, oy, np.array([float(direction)]))[0])
    return d if math.isfinite(d) and d <= r_max else None


SONAR, SCANLINE = "SONAR", "SCANLINE"


@dataclass(frozen=True)
class SensorSpec:
    """A range sensor on the robot: beam geometry plus calibrated noise parameters.

    ``bearings`` are beam directions relative to the robot heading.
    """

    kind: str
    r_max: float
    half_angle: float
    d0: float
    sigma0: float
    sigma1: float = 0.0
    bearings: tuple[float, ...] = (0.0,)
    name: str = "default"

    def __post_init__(self):
        if self.kind not in (SONAR, SCANLINE):
            raise ValueError(f"sensor kind must be {SONAR} or {SCANLINE}")
        if not (0 < self.half_angle < math.pi / 2):
            raise ValueError("beam half-angle must lie in (0, pi/2)")
        if self.r_max <= 0:
            raise ValueError("r_max must be positive")
        if not (0 <= self.d0 <= 1) or self.sigma0 < 0 or self.sigma1 < 0:
            raise ValueError("invalid noise parameters")
        object.__setattr__(self, "bearings", tuple(float(b) for b in self.bearings))

    @classmethod
    def ring(cls, kind: str, n_beams: int, **kw) -> SensorSpec:
        """Beams evenly spaced around the full circle."""
        return cls(kind, bearings=tuple(2 * math.pi * k / n_beams for k in range(n_beams)), **kw)

    def model(self) -> CalibratedModel:
        """The matching inverse-model parameters; the angular spread is half the cone half-angle.

        A noiseless sensor still gets a 1 mm range spread, since the inverse
        model needs a non-degenerate density.
        """
        return CalibratedModel(
            d0=self.d0,
            z_max=self.r_max,
            sigma0=max(self.sigma0, 1e-3),
            sigma1=self.sigma1,
            sigma_theta=0.5 * self.half_angle,
        )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "name": self.name,
            "r_max_m": self.r_max,
            "half_angle_rad": self.half_angle,
            "d0": self.d0,
            "sigma0_m": self.sigma0,
            "sigma1": self.sigma1,
            "bearings_rad": list(self.bearings),
        }

    @classmethod
    def from_dict(cls, d) -> SensorSpec:
        kw = dict(
            kind=d["kind"],
            r_max=float(d["r_max_m"]),
            half_angle=float(d["half_angle_rad"]),
            d0=float(d["d0"]),
            sigma0=float(d["sigma0_m"]),
            sigma1=float(d.get("sigma1", 0.0)),
            name=str(d.get("name", "default")),
        )
        if "bearings_rad" in d:
            return cls(bearings=tuple(d["bearings_rad"]), **kw)
        return cls.ring(n_beams=int(d["n_beams"]), **kw)


def true_range(world: World, x: float, y: float, direction: float, spec: SensorSpec) -> float:
    """Range the sensor would report without noise (``inf`` when nothing is in reach)."""
    if spec.kind == SONAR:
        angles = direction + np.linspace(-spec.half_angle, spec.half_angle, CONE_RAYS)
    else:
        angles = np.array([direction])
    z = float(_cast(world, x, y, angles).min())
    return z if z <= spec.r_max else math.inf


def sense(world: World, pose, spec: SensorSpec, rng: np.random.Generator, t: float = 0.0) -> list[BeamReading]:
    """One scan: a reading per configured bearing, detected with probability D(z)."""
    x, y, heading = (float(v) for v in pose)
    if not world.contains(x, y):
        raise ValueError("sensor pose lies outside the world bounds")
    out = []
    for bearing in spec.bearings:
        z = true_range(world, x, y, heading + bearing, spec)
        detect_u = rng.random()
        noise = rng.standard_normal()
        if math.isfinite(z) and detect_u < spec.d0:
            r = z + (spec.sigma0 + spec.sigma1 * z) * noise
            r = min(max(r, 0.0), spec.r_max)
        else:
            r = spec.r_max
        out.append(BeamReading(x, y, heading, bearing, r, max_range=r >= spec.r_max, sensor=spec.name, t=t))
    return out
