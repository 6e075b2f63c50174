"""Bayesian cell updating from range readings.

Pencil beams update the cells along the ray directly. Beams with an angular
extent are first turned into a polar sensor view, resampled onto the grid and
then pooled cellwise with the current estimate.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from scipy.special import expit, logit

from .errors import DegenerateLikelihood
from .fusion import combine_probabilities
from .grid import Grid2D, PolarGrid, clamp_probability, resample_polar_to_cartesian
from .sensor_models import (
    LikelihoodPair,
    RayDiscretization,
    SensorModel,
    angular_weight,
    has_angular_extent,
    ray_log_odds,
    resolved_at,
    support_limit,
    trace_ray,
)

# confidence ceiling of a single wide-beam reading (0.001 .. 0.999); keeps the
# damped cone edge within 0.02 of 1/2 even where the boresight is certain
VIEW_MAX_LOG_ODDS = float(logit(1.0 - 1e-3))


@dataclass(frozen=True)
class BeamReading:
    """One range measurement. Pose is the sensor's world pose; bearing is relative to it."""

    x: float
    y: float
    heading: float
    bearing: float
    range: float
    max_range: bool = False
    sensor: str = "default"
    t: float = 0.0

    def __post_init__(self):
        if self.range < 0:
            raise ValueError("range must be non-negative")

    @property
    def direction(self) -> float:
        return self.heading + self.bearing

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping) -> BeamReading:
        return cls(
            x=float(d["x"]),
            y=float(d["y"]),
            heading=float(d["heading"]),
            bearing=float(d["bearing"]),
            range=float(d["range"]),
            max_range=bool(d.get("max_range", False)),
            sensor=str(d.get("sensor", "default")),
            t=float(d.get("t", 0.0)),
        )


def write_scan_log(path, readings: Iterable[BeamReading]) -> None:
    """JSON-lines scan log, one reading per line in acquisition order."""
    with open(path, "w") as fh:
        for rd in readings:
            fh.write(rd.to_json() + "\n")


def read_scan_log(path) -> list[BeamReading]:
    lines = Path(path).read_text().splitlines()
    return [BeamReading.from_dict(json.loads(line)) for line in lines if line.strip()]


# -- single-cell Bayes ------------------------------------------------------------


def bayes_update(prior, l_occ, l_emp):
    """Unclamped Bayes rule for one cell (vectorised)."""
    prior = np.asarray(prior, dtype=float)
    num = np.asarray(l_occ, dtype=float) * prior
    den = num + np.asarray(l_emp, dtype=float) * (1.0 - prior)
    if np.any(den == 0):
        raise DegenerateLikelihood("l_occ = l_emp = 0: reading impossible under the model")
    out = num / den
    return float(out) if out.ndim == 0 else out


def update_cell(prior: float, lik) -> float:
    """Posterior occupancy of one cell after a reading with likelihoods ``lik``."""
    lik = LikelihoodPair(*lik)
    if not (math.isfinite(lik.l_occ) and math.isfinite(lik.l_emp)):
        raise ValueError("likelihoods must be finite")
    if lik.l_occ < 0 or lik.l_emp < 0:
        raise ValueError("likelihoods must be non-negative")
    if lik.l_occ == 0 and lik.l_emp == 0:
        raise DegenerateLikelihood("l_occ = l_emp = 0: reading impossible under the model")
    if lik.l_occ == lik.l_emp:
        return float(prior)
    return clamp_probability(bayes_update(prior, lik.l_occ, lik.l_emp))


def apply_log_odds(prior, log_ratio):
    """Sequential update in log-odds form; a zero ratio leaves the prior bit-exact."""
    prior = np.asarray(prior, dtype=float)
    log_ratio = np.asarray(log_ratio, dtype=float)
    with np.errstate(invalid="ignore"):
        post = clamp_probability(expit(logit(prior) + log_ratio))
    return np.where(log_ratio == 0, prior, post)


# -- polar sensor views ---------------------------------------------------------


@dataclass(frozen=True)
class PolarGeometry:
    """Binning of a polar sensor view: range step, angle bins, maximum range."""

    d_rho: float
    n_angle: int
    d_phi: float
    max_range: float

    @property
    def n_range(self) -> int:
        return int(math.ceil(self.max_range / self.d_rho - 1e-9))

    @property
    def half_extent(self) -> float:
        return 0.5 * self.n_angle * self.d_phi


def default_polar_geometry(model: SensorModel, resolution: float, r_max: float) -> PolarGeometry:
    """Polar binning spanning +-3 sigma_theta, with arc cells no wider than half a grid cell."""
    half = 3.0 * model.sigma_theta
    n_angle = max(3, int(math.ceil(2.0 * half * r_max / (0.5 * resolution))))
    if n_angle % 2 == 0:
        n_angle += 1
    return PolarGeometry(0.5 * resolution, n_angle, 2.0 * half / n_angle, r_max)


def radial_log_odds(
    model: SensorModel, d_rho: float, n_range: int, r: float, max_range: bool, r_max: float
) -> np.ndarray:
    """Single-reading log-odds along one radial line of a polar view, capped at
    ``VIEW_MAX_LOG_ODDS``. Bins beyond the model's support are left at 0 (not observed).
    """
    out = np.zeros(n_range)
    model = resolved_at(model, d_rho)
    if max_range:
        n_lim = n_range
    else:
        lim = support_limit(model, r)
        n_lim = n_range if not math.isfinite(lim) else min(n_range, int(math.ceil(lim / d_rho)))
    if n_lim < 1:
        return out
    ray = RayDiscretization.uniform(n_lim, d_rho, r_max)
    out[:n_lim] = np.clip(ray_log_odds(model, ray, r, max_range), -VIEW_MAX_LOG_ODDS, VIEW_MAX_LOG_ODDS)
    return out


def build_sensor_view(
    reading: BeamReading, model: SensorModel, geometry: PolarGeometry
) -> PolarGrid:
    """Posterior polar grid produced by a single reading from the 1/2 prior.

    Each radial line carries the boresight log-odds profile scaled by the
    angular weight of its offset from the beam axis.
    """
    if not has_angular_extent(model):
        raise ValueError(f"{model.variant} model has no angular extent; use a pencil-beam update")
    if abs(reading.bearing) > geometry.half_extent:
        raise ValueError("reading bearing lies outside the polar extent")
    n_range = geometry.n_range
    L = radial_log_odds(
        model, geometry.d_rho, n_range, reading.range, reading.max_range, geometry.max_range
    )
    view = PolarGrid(
        n_range, geometry.d_rho, geometry.n_angle, geometry.d_phi, (reading.x, reading.y, reading.heading)
    )
    w = angular_weight(model, view.angle_centers() - reading.bearing)
    logodds = w[:, None] * L[None, :]
    view.values = np.where(logodds == 0, 0.5, clamp_probability(expit(logodds)))
    return view


# -- grid integration -----------------------------------------------------------


def _pencil_evidence(grid: Grid2D, reading: BeamReading, model: SensorModel, r_max: float | None):
    """In-grid cells of a pencil beam and their log likelihood ratios, or ``None`` on a miss."""
    model = resolved_at(model, grid.resolution)
    if reading.max_range:
        length = reading.range if r_max is None else r_max
    else:
        length = support_limit(model, reading.range)
        if not math.isfinite(length):
            if r_max is None:
                raise ValueError("unbounded model support; pass r_max")
            length = r_max
    ray = trace_ray(grid, (reading.x, reading.y), reading.direction, length, r_max or length)
    if ray is None:
        return None
    cells = np.asarray(ray.cells)
    inside = grid.in_bounds(cells[:, 0], cells[:, 1])
    if not inside.any():
        return None
    L = ray_log_odds(model, ray, reading.range, reading.max_range)
    return cells[inside, 1], cells[inside, 0], L[inside]


def _polar_local(
    grid: Grid2D, reading: BeamReading, model: SensorModel, geometry: PolarGeometry | None, r_max: float | None
) -> Grid2D:
    """Single-reading sensor view resampled onto ``grid``'s geometry."""
    if geometry is None:
        if r_max is None:
            r_max = reading.range if reading.max_range else getattr(model, "z_max", None)
        if r_max is None:
            raise ValueError("polar sensor views need r_max or an explicit geometry")
        geometry = default_polar_geometry(model, grid.resolution, r_max)
        reading = replace(reading, heading=reading.direction, bearing=0.0)
    return resample_polar_to_cartesian(build_sensor_view(reading, model, geometry), grid)


def integrate_reading(
    grid: Grid2D,
    reading: BeamReading,
    model: SensorModel,
    geometry: PolarGeometry | None = None,
    r_max: float | None = None,
) -> bool:
    """Fold one reading into ``grid`` in place.

    Returns ``False`` (and leaves the grid untouched) when the beam footprint
    misses the grid entirely. Without an explicit ``geometry`` the polar view
    is centred on the beam direction, so any bearing is accepted.
    """
    if not has_angular_extent(model):
        hit = _pencil_evidence(grid, reading, model, r_max)
        if hit is None:
            return False
        iy, ix, L = hit
        grid.values[iy, ix] = apply_log_odds(grid.values[iy, ix], L)
        return True
    local = _polar_local(grid, reading, model, geometry, r_max)
    touched = local.values != 0.5
    if not touched.any():
        return False
    grid.values[touched] = combine_probabilities(grid.values[touched], local.values[touched])
    return True


def integrate_log(
    grid: Grid2D,
    readings: Iterable[BeamReading],
    models,
    geometries: Mapping[str, PolarGeometry] | None = None,
    r_max=None,
) -> int:
    """Fold a whole reading log into ``grid`` in place; returns how many readings touched it.

    Each reading's log likelihood ratios are summed exactly and the clamp is
    applied once at the end, so the result does not depend on the order of
    the log. ``models`` and ``r_max`` are either single values or per-sensor mappings.
    """
    evidence = np.zeros(grid.shape)
    touched_by = 0
    for rd in readings:
        if isinstance(models, Mapping):
            if rd.sensor not in models:
                raise ValueError(f"no sensor model registered for sensor id {rd.sensor!r}")
            model = models[rd.sensor]
        else:
            model = models
        reach = r_max.get(rd.sensor) if isinstance(r_max, Mapping) else r_max
        if not has_angular_extent(model):
            hit = _pencil_evidence(grid, rd, model, reach)
            if hit is None:
                continue
            iy, ix, L = hit
            with np.errstate(invalid="ignore"):
                evidence[iy, ix] += L
        else:
            geometry = geometries.get(rd.sensor) if geometries else None
            local = _polar_local(grid, rd, model, geometry, reach).values
            touched = local != 0.5
            if not touched.any():
                continue
            evidence[touched] += logit(local[touched])
        touched_by += 1
    if np.isnan(evidence).any():
        raise DegenerateLikelihood("the log holds contradictory certain evidence for a cell")
    grid.values[:] = apply_log_odds(grid.values, evidence)
    return touched_by


def integrate_multi_sensor(
    grid: Grid2D,
    reading: BeamReading,
    models: Mapping[str, SensorModel],
    geometries: Mapping[str, PolarGeometry] | None = None,
    r_max: float | None = None,
) -> bool:
    """Route a reading to its sensor's model and update the shared grid."""
    if reading.sensor not in models:
        raise ValueError(f"no sensor model registered for sensor id {reading.sensor!r}")
    geometry = geometries.get(reading.sensor) if geometries else None
    return integrate_reading(grid, reading, models[reading.sensor], geometry, r_max)
