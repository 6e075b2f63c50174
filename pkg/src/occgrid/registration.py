"""Correlation-based map registration with a coarse-to-fine exhaustive search."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import NoOverlapWarning, PyramidTruncatedWarning
from .grid import Grid2D, UNKNOWN_P
from .pose import PoseAT, wrap_angle


def _transformed_samples(a: Grid2D, b: Grid2D, transform):
    """Evidence of ``a`` and of ``b`` at the transformed centres of ``a``'s cells."""
    xs, ys = a.cell_centers()
    tx, ty, th = transform
    c, s = math.cos(th), math.sin(th)
    wx, wy = tx + c * xs - s * ys, ty + s * xs + c * ys
    u, v = b.to_local(wx, wy)
    fx, fy = u / b.resolution - 0.5, v / b.resolution - 0.5
    inside = (fx > -0.5) & (fx < b.width - 0.5) & (fy > -0.5) & (fy < b.height - 0.5)
    coords = np.stack([fy[inside], fx[inside]])
    qb = ndimage.map_coordinates(b.values, coords, order=1, mode="nearest")
    return 2.0 * a.values[inside] - 1.0, 2.0 * qb - 1.0


def _score(a: Grid2D, b: Grid2D, transform) -> tuple[float, int]:
    ea, eb = _transformed_samples(a, b, transform)
    if ea.size == 0:
        return 0.0, 0
    return float(np.dot(ea, eb) / ea.size), int(ea.size)


def correlation_score(a: Grid2D, b: Grid2D, transform=(0.0, 0.0, 0.0)) -> float:
    """Mean of (2p-1)(2q-1) over cells of ``a`` whose transformed centres land in ``b``.

    ``transform`` maps ``a``'s world frame into ``b``'s. UNKNOWN cells add
    exactly zero. An empty overlap scores 0 and raises a :class:`NoOverlapWarning`.
    """
    score, n = _score(a, b, transform)
    if n == 0:
        warnings.warn("grids do not overlap under this transform", NoOverlapWarning, stacklevel=2)
    return score


def _halve(grid: Grid2D) -> Grid2D:
    h, w = grid.shape
    padded = np.full((h + h % 2, w + w % 2), UNKNOWN_P)
    padded[:h, :w] = grid.values
    coarse = padded.reshape(padded.shape[0] // 2, 2, padded.shape[1] // 2, 2).mean(axis=(1, 3))
    return Grid2D(coarse.shape[1], coarse.shape[0], 2.0 * grid.resolution, grid.origin, coarse)


def build_pyramid(grid: Grid2D, levels: int) -> list[Grid2D]:
    """Level 0 is ``grid``; each next level averages 2x2 blocks (odd edges padded with 1/2).

    Stops early, with a :class:`PyramidTruncatedWarning`, once a level is a single cell.
    """
    if levels < 1:
        raise ValueError("levels must be at least 1")
    pyramid = [grid]
    while len(pyramid) < levels:
        top = pyramid[-1]
        if top.width == 1 and top.height == 1:
            warnings.warn(
                f"pyramid truncated at {len(pyramid)} of {levels} levels", PyramidTruncatedWarning, stacklevel=2
            )
            break
        pyramid.append(_halve(top))
    return pyramid


@dataclass(frozen=True)
class SearchWindow:
    """Search extent around the prior: half-widths and finest steps, plus pyramid depth."""

    half_width_x: float
    half_width_y: float
    half_width_theta: float
    step_xy: float
    step_theta: float
    levels: int = 3

    def __post_init__(self):
        if self.step_xy <= 0 or self.step_theta <= 0:
            raise ValueError("search steps must be positive")
        if self.step_xy > min(self.half_width_x, self.half_width_y) or self.step_theta > self.half_width_theta:
            raise ValueError("search steps must not exceed the half-widths")
        if self.levels < 1:
            raise ValueError("levels must be at least 1")

    @classmethod
    def in_cells(cls, resolution: float, cells: int = 10, degrees: float = 10.0, step_degrees: float = 1.0, levels: int = 3):
        return cls(
            cells * resolution, cells * resolution, math.radians(degrees), resolution, math.radians(step_degrees), levels
        )


@dataclass(frozen=True)
class MotionEstimate:
    """Registration result; ``informative`` is False when the maps share no evidence."""

    pose: PoseAT
    score: float
    informative: bool


def _axis(half: float, step: float) -> np.ndarray:
    n = int(math.floor(half / step + 1e-9))
    return np.arange(-n, n + 1) * step


def _best(candidates, view: Grid2D, target: Grid2D, prior_mean):
    best_key, best = None, None
    for d in candidates:
        t = (prior_mean[0] + d[0], prior_mean[1] + d[1], prior_mean[2] + d[2])
        score, _ = _score(view, target, t)
        key = (-score, round(math.hypot(d[0], d[1]), 12), round(abs(d[2]), 12))
        if best_key is None or key < best_key:
            best_key, best = key, (d, score)
    return best


def _peak_offset(s_minus: float, s0: float, s_plus: float, step: float) -> float:
    """Vertex of the parabola through three equally spaced scores, kept within half a step."""
    denom = s_plus - 2.0 * s0 + s_minus
    if denom >= 0:
        return 0.0
    return float(np.clip(0.5 * step * (s_minus - s_plus) / denom, -0.5 * step, 0.5 * step))


def _variance_from_curvature(s_minus: float, s0: float, s_plus: float, step: float, floor: float, ceiling: float):
    curvature = (s_plus - 2.0 * s0 + s_minus) / (step * step)
    if curvature >= 0 or s0 <= 0:
        return ceiling
    return float(min(max(-s0 / curvature, floor), ceiling))


def solve_motion(
    view: Grid2D,
    global_map: Grid2D,
    prior: PoseAT,
    window: SearchWindow,
    min_sigma_xy: float | None = None,
    min_sigma_theta: float | None = None,
    refine: bool = True,
) -> MotionEstimate:
    """Find the transform (view frame -> global frame) that best registers the two maps.

    The coarsest pyramid level is searched exhaustively over the window; each
    finer level searches +-2 half-steps around the previous winner. Ties go to
    the smaller displacement, then the smaller rotation. A parabola through
    the winner and its finest-step neighbours refines each coordinate by up to
    half a step; its curvature gives the covariance, floored at half a step
    (or the given minima). With ``refine=False`` the mean stays on the
    search lattice.
    """
    floor_xy = (min_sigma_xy if min_sigma_xy is not None else 0.5 * window.step_xy) ** 2
    floor_th = (min_sigma_theta if min_sigma_theta is not None else 0.5 * window.step_theta) ** 2
    ceil_xy = max(window.half_width_x, window.half_width_y) ** 2
    ceil_th = window.half_width_theta**2
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PyramidTruncatedWarning)
        vp = build_pyramid(view, window.levels)
        gp = build_pyramid(global_map, window.levels)
    top = min(len(vp), len(gp)) - 1
    mean = prior.mean

    if not (np.any(view.values != UNKNOWN_P) and np.any(global_map.values != UNKNOWN_P)):
        return MotionEstimate(prior, 0.0, False)

    sxy, sth = window.step_xy * 2**top, window.step_theta * 2**top
    coarse = itertools.product(
        _axis(window.half_width_x, min(sxy, window.half_width_x)),
        _axis(window.half_width_y, min(sxy, window.half_width_y)),
        _axis(window.half_width_theta, min(sth, window.half_width_theta)),
    )
    d, score = _best(coarse, vp[top], gp[top], mean)
    for level in range(top - 1, -1, -1):
        sxy, sth = window.step_xy * 2**level, window.step_theta * 2**level
        offsets = np.arange(-2, 3) * 0.5
        local = [
            (d[0] + ox * 2 * sxy, d[1] + oy * 2 * sxy, d[2] + ot * 2 * sth)
            for ox, oy, ot in itertools.product(offsets, offsets, offsets)
            if abs(d[0] + ox * 2 * sxy) <= window.half_width_x + 1e-9
            and abs(d[1] + oy * 2 * sxy) <= window.half_width_y + 1e-9
            and abs(d[2] + ot * 2 * sth) <= window.half_width_theta + 1e-9
        ]
        d, score = _best(local, vp[level], gp[level], mean)

    best = (mean[0] + d[0], mean[1] + d[1], mean[2] + d[2])
    if score <= 0:
        return MotionEstimate(prior, 0.0, False)

    def s_at(dx, dy, dt):
        return _score(view, global_map, (best[0] + dx, best[1] + dy, best[2] + dt))[0]

    h, ht = window.step_xy, window.step_theta
    mean_out, var = [], []
    for axis, step, lo, hi in ((0, h, floor_xy, ceil_xy), (1, h, floor_xy, ceil_xy), (2, ht, floor_th, ceil_th)):
        delta = np.zeros(3)
        delta[axis] = step
        s_minus, s_plus = s_at(*(-delta)), s_at(*delta)
        mean_out.append(best[axis] + (_peak_offset(s_minus, score, s_plus, step) if refine else 0.0))
        var.append(_variance_from_curvature(s_minus, score, s_plus, step, lo, hi))
    mean_out[2] = wrap_angle(mean_out[2])
    return MotionEstimate(PoseAT(np.array(mean_out), np.diag(var)), score, True)
