"""Range-sensor models p(r | z) and per-cell likelihoods p[r | s(C_i)].

A reading constrains the *first occupied* cell along the beam. The per-cell
likelihoods are obtained by summing the forward density over the
distribution of that first occupied cell, with every other cell independently
occupied with probability 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import NamedTuple, Union

import numpy as np
from scipy.special import ndtr

from .errors import DegenerateLikelihood, EnumerationTooLarge, UnsupportedOperation
from .grid import Grid2D, _snap_floor

TRUNCATION_SIGMAS = 8.0
_SQRT_2PI = math.sqrt(2.0 * math.pi)
MAX_ENUMERATION_CELLS = 20


@dataclass(frozen=True)
class IdealModel:
    """p(r | z) = delta(r - z): the reading always lands in the first occupied cell."""

    variant = "IDEAL"


@dataclass(frozen=True)
class GaussianModel:
    sigma: float

    variant = "GAUSSIAN"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def range_sigma(self, z):
        return np.full(np.shape(z), self.sigma)

    def detection(self, z):
        return np.ones(np.shape(z))


@dataclass(frozen=True)
class PolarGaussianModel:
    sigma_r: float
    sigma_theta: float

    variant = "POLAR_GAUSSIAN"

    def __post_init__(self):
        if not (self.sigma_r > 0 and self.sigma_theta > 0):
            raise ValueError("sigma_r and sigma_theta must be positive")

    def range_sigma(self, z):
        return np.full(np.shape(z), self.sigma_r)

    def detection(self, z):
        return np.ones(np.shape(z))


@dataclass(frozen=True)
class CalibratedModel:
    """Detection curve times a Gaussian whose spread grows with range.

    D(z) = d0 for z <= z_max and 0 beyond; sigma(z) = sigma0 + sigma1 * z.
    ``sigma_theta`` (optional) gives the beam an angular extent.
    """

    d0: float
    z_max: float
    sigma0: float
    sigma1: float = 0.0
    sigma_theta: float | None = None

    variant = "CALIBRATED"

    def __post_init__(self):
        if not (0.0 < self.d0 <= 1.0):
            raise ValueError("d0 must be in (0, 1]")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        if self.sigma1 < 0:
            raise ValueError("sigma1 must be non-negative")
        if not self.z_max > 0:
            raise ValueError("z_max must be positive")
        if self.sigma_theta is not None and not self.sigma_theta > 0:
            raise ValueError("sigma_theta must be positive when given")

    def range_sigma(self, z):
        return self.sigma0 + self.sigma1 * np.asarray(z, dtype=float)

    def detection(self, z):
        return np.where(np.asarray(z, dtype=float) <= self.z_max, self.d0, 0.0)


SensorModel = Union[IdealModel, GaussianModel, PolarGaussianModel, CalibratedModel]


class LikelihoodPair(NamedTuple):
    l_occ: float
    l_emp: float


def has_angular_extent(model) -> bool:
    if isinstance(model, PolarGaussianModel):
        return True
    return isinstance(model, CalibratedModel) and model.sigma_theta is not None


# -- forward model ----------------------------------------------------------------


def resolved_at(model: SensorModel, bin_width: float) -> SensorModel:
    """``model`` with its range spread floored at half of ``bin_width``.

    Likelihoods are sampled at bin centres, so a spread much narrower than a
    bin can leave a reading between centres with zero density under every
    cell. No sensor is resolved more finely than the lattice it is read on.
    """
    floor = 0.5 * bin_width
    if isinstance(model, GaussianModel) and model.sigma < floor:
        return replace(model, sigma=floor)
    if isinstance(model, PolarGaussianModel) and model.sigma_r < floor:
        return replace(model, sigma_r=floor)
    if isinstance(model, CalibratedModel) and model.sigma0 < floor:
        return replace(model, sigma0=floor)
    return model


def gaussian_density(r, mu, sigma):
    """Normal density truncated to zero beyond TRUNCATION_SIGMAS standard deviations."""
    r = np.asarray(r, dtype=float)
    d = (r - mu) / sigma
    out = np.exp(-0.5 * d * d) / (_SQRT_2PI * sigma)
    return np.where(np.abs(d) > TRUNCATION_SIGMAS, 0.0, out)


def forward_density(model: SensorModel, r, z):
    """p(r | z) in 1/m. The ideal sensor is a delta and cannot be evaluated pointwise."""
    if isinstance(model, IdealModel):
        raise UnsupportedOperation(
            "the ideal sensor density is a delta; use ideal_posterior_profile"
        )
    if np.any(np.asarray(r) < 0) or np.any(np.asarray(z) < 0):
        raise ValueError("ranges must be non-negative")
    out = model.detection(z) * gaussian_density(r, z, model.range_sigma(z))
    return float(out) if np.ndim(out) == 0 else out


def max_range_probability(model: SensorModel, z, r_max: float):
    """P(no detection before r_max | first surface at z)."""
    z = np.asarray(z, dtype=float)
    if isinstance(model, IdealModel):
        out = np.where(z < r_max, 0.0, 1.0)
    else:
        sig = model.range_sigma(z)
        out = 1.0 - model.detection(z) * ndtr((r_max - z) / sig)
    return float(out) if np.ndim(out) == 0 else out


def angular_weight(model: SensorModel, theta):
    """Unit-peak Gaussian weight of a beam offset ``theta`` from the boresight."""
    if not has_angular_extent(model):
        raise UnsupportedOperation(f"{model.variant} model has no angular extent")
    s = model.sigma_theta
    out = np.exp(-0.5 * (np.asarray(theta, dtype=float) / s) ** 2)
    return float(out) if np.ndim(out) == 0 else out


def support_limit(model: SensorModel, r: float) -> float:
    """Largest surface distance z whose density at reading ``r`` is non-zero."""
    if isinstance(model, IdealModel):
        return r
    if isinstance(model, CalibratedModel):
        k = TRUNCATION_SIGMAS * model.sigma1
        if k >= 1.0:
            return math.inf
        return (r + TRUNCATION_SIGMAS * model.sigma0) / (1.0 - k)
    return r + TRUNCATION_SIGMAS * float(model.range_sigma(r))


# -- ray discretisation ---------------------------------------------------------


@dataclass
class RayDiscretization:
    """Cells met by a beam, in order.

    ``s_in``/``s_out`` delimit each cell's chord along the beam and ``z`` is
    the chord midpoint used as the cell's distance. ``cells`` holds lattice
    indices when the ray was traced through a grid.
    """

    z: np.ndarray
    s_in: np.ndarray
    s_out: np.ndarray
    cells: list | None = None
    r_max: float | None = None

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.s_in = np.asarray(self.s_in, dtype=float)
        self.s_out = np.asarray(self.s_out, dtype=float)
        if self.z.ndim != 1 or self.z.size < 1:
            raise ValueError("a ray needs at least one cell")
        if np.any(np.diff(self.z) <= 0):
            raise ValueError("ray cell distances must be strictly increasing")
        if self.s_in.shape != self.z.shape or self.s_out.shape != self.z.shape:
            raise ValueError("chord arrays must match z")

    @property
    def n(self) -> int:
        return int(self.z.size)

    @classmethod
    def uniform(cls, n: int, cell_size: float, r_max: float | None = None) -> RayDiscretization:
        """A 1D ray of ``n`` equal cells starting at the sensor."""
        if n < 1:
            raise ValueError("a ray needs at least one cell")
        edges = np.arange(n + 1) * float(cell_size)
        return cls(0.5 * (edges[:-1] + edges[1:]), edges[:-1], edges[1:], None, r_max)

    def containing_cell(self, r: float) -> int | None:
        idx = np.nonzero((self.s_in <= r) & (r < self.s_out))[0]
        return int(idx[0]) if idx.size else None


def trace_ray(
    grid: Grid2D, origin, angle: float, length: float, r_max: float | None = None
) -> RayDiscretization | None:
    """Lattice cells along a beam, found by stepping at half the grid resolution.

    Cells outside the grid bounds are kept (the lattice is unbounded) so the
    configuration sum sees the whole beam; callers only write in-bound cells.
    Returns ``None`` for a zero-length beam.
    """
    if length <= 0:
        return None
    ox, oy = float(origin[0]), float(origin[1])
    step = 0.5 * grid.resolution
    s = np.arange(0.0, length + 0.5 * step, step)
    s[-1] = min(s[-1], length)
    c, sn = math.cos(angle), math.sin(angle)
    ix, iy = grid.cell_indices(ox + s * c, oy + s * sn)
    keep = np.ones(ix.size, dtype=bool)
    keep[1:] = (ix[1:] != ix[:-1]) | (iy[1:] != iy[:-1])
    ix, iy = ix[keep], iy[keep]

    # exact chord of the beam through each visited cell, in grid-local coordinates
    u0, v0 = grid.to_local(ox, oy)
    th = angle - grid.origin[2]
    du, dv = math.cos(th), math.sin(th)
    res = grid.resolution
    lo = np.zeros(ix.size)
    hi = np.full(ix.size, np.inf)
    for d, p0, idx in ((du, float(u0), ix), (dv, float(v0), iy)):
        a = idx * res
        b = (idx + 1) * res
        if abs(d) < 1e-15:
            continue
        t1 = (a - p0) / d
        t2 = (b - p0) / d
        lo = np.maximum(lo, np.minimum(t1, t2))
        hi = np.minimum(hi, np.maximum(t1, t2))
    ok = hi > lo
    ix, iy, lo, hi = ix[ok], iy[ok], lo[ok], hi[ok]
    if ix.size == 0:
        return None
    z = 0.5 * (lo + hi)
    order = np.argsort(z, kind="stable")
    ix, iy, lo, hi, z = ix[order], iy[order], lo[order], hi[order], z[order]
    uniq = np.ones(z.size, dtype=bool)
    uniq[1:] = np.diff(z) > 0
    cells = list(zip(ix[uniq].tolist(), iy[uniq].tolist()))
    return RayDiscretization(z[uniq], lo[uniq], hi[uniq], cells, r_max)


# -- configuration sums -----------------------------------------------------------


def _outcome_terms(model: SensorModel, ray: RayDiscretization, r: float, max_range: bool):
    """Per-cell p(reading | first occupied cell = j) and p(reading | no object)."""
    if max_range:
        if ray.r_max is None:
            raise ValueError("max-range readings need the ray's r_max")
        return np.asarray(max_range_probability(model, ray.z, ray.r_max), dtype=float), 1.0
    if r < 0:
        raise ValueError("range must be non-negative")
    if isinstance(model, IdealModel):
        f = ((ray.s_in <= r) & (r < ray.s_out)).astype(float)
        return f, 0.0
    return np.asarray(forward_density(model, r, ray.z), dtype=float), 0.0


def _configuration_sums(f: np.ndarray, f0: float, scale_exp: int = 0) -> np.ndarray:
    """Closed form of the configuration sums, scaled by ``2**scale_exp``.

    Given cell i occupied, the first occupied cell is j < i with probability
    (1/2)^j and i itself with (1/2)^(i-1). Given i empty, it is j < i with
    (1/2)^j, j > i with (1/2)^(j-1), and no object at all with (1/2)^(n-1).
    """
    n = f.size
    j = np.arange(1, n + 1, dtype=float)
    w_before = np.exp2(scale_exp - j)
    w_self = np.exp2(scale_exp - (j - 1))
    wf = w_before * f
    prefix = np.concatenate(([0.0], np.cumsum(wf)[:-1]))
    sf = w_self * f
    suffix = np.concatenate((np.cumsum(sf[::-1])[::-1][1:], [0.0]))
    l_occ = prefix + w_self * f
    l_emp = prefix + suffix + math.ldexp(1.0, scale_exp - (n - 1)) * f0
    return np.stack([l_occ, l_emp], axis=1)


def ray_cell_likelihoods(
    model: SensorModel, ray: RayDiscretization, r: float, max_range: bool = False
) -> np.ndarray:
    """``(n, 2)`` array of ``[l_occ, l_emp]`` per ray cell for one reading."""
    if ray is None or ray.n < 1:
        raise ValueError("empty ray")
    f, f0 = _outcome_terms(model, ray, r, max_range)
    return _configuration_sums(f, f0)


def ray_log_odds(
    model: SensorModel, ray: RayDiscretization, r: float, max_range: bool = False
) -> np.ndarray:
    """Per-cell log likelihood ratio log(l_occ / l_emp); may contain +-inf.

    Rescales by a power of two before summing so long rays do not underflow;
    the ratio is unaffected.
    """
    f, f0 = _outcome_terms(model, ray, r, max_range)
    nz = np.nonzero(f > 0)[0]
    first = int(nz[0]) + 1 if nz.size else ray.n
    pairs = _configuration_sums(f, f0, scale_exp=first - 1)
    l_occ, l_emp = pairs[:, 0], pairs[:, 1]
    bad = (l_occ == 0) & (l_emp == 0)
    if np.any(bad):
        raise DegenerateLikelihood("reading has zero likelihood under both cell states")
    with np.errstate(divide="ignore"):
        return np.log(l_occ) - np.log(l_emp)


def configuration_weights(n: int, i: int, state: str) -> dict:
    """Exact weights of the first-occupied-cell outcomes for cell ``i`` (1-based).

    Keys are the 1-based index of the first occupied cell, or ``None`` for the
    no-object outcome. ``state`` is ``"OCC"`` or ``"EMP"``.
    """
    if not (1 <= i <= n):
        raise ValueError("cell index out of range")
    half = Fraction(1, 2)
    weights = {}
    for j in range(1, i):
        weights[j] = half**j
    if state == "OCC":
        weights[i] = half ** (i - 1)
    elif state == "EMP":
        for j in range(i + 1, n + 1):
            weights[j] = half ** (j - 1)
        weights[None] = half ** (n - 1)
    else:
        raise ValueError("state must be 'OCC' or 'EMP'")
    return weights


def brute_force_likelihoods(
    model: SensorModel, ray: RayDiscretization, r: float, max_range: bool = False
) -> np.ndarray:
    """Same quantity as :func:`ray_cell_likelihoods`, by explicit enumeration.

    For each cell, all 2^(n-1) states of the other cells are listed, each
    with probability (1/2)^(n-1); the reading likelihood of a configuration
    is fixed by its first occupied cell.
    """
    n = ray.n
    if n > MAX_ENUMERATION_CELLS:
        raise EnumerationTooLarge(f"refusing to enumerate 2^{n - 1} configurations")
    f, f0 = _outcome_terms(model, ray, r, max_range)
    outcome = np.append(f, f0)  # index n means "no object"
    m = n - 1
    codes = np.arange(2**m, dtype=np.int64)
    others = ((codes[:, None] >> np.arange(m)) & 1).astype(bool)
    out = np.empty((n, 2))
    for i in range(n):
        for col, occupied in ((0, True), (1, False)):
            config = np.insert(others, i, occupied, axis=1)
            any_occ = config.any(axis=1)
            first = np.where(any_occ, config.argmax(axis=1), n)
            out[i, col] = outcome[first].sum() / 2**m
    return out


def ideal_posterior_profile(r: float, ray: RayDiscretization) -> np.ndarray:
    """Closed-form posterior for an ideal sensor: 0 before r, 1 at r, 1/2 after."""
    k = ray.containing_cell(r)
    if k is None:
        raise ValueError(f"range {r} lies outside the ray")
    out = np.full(ray.n, 0.5)
    out[:k] = 0.0
    out[k] = 1.0
    return out


# -- precomputed tables -----------------------------------------------------------


@dataclass(frozen=True)
class LikelihoodTable:
    """Offline table of cell likelihoods for a fixed ray and reading binning.

    ``pairs[b]`` holds the ``(n, 2)`` likelihoods for a reading at the center
    of bin ``b``; the final row is the max-range reading. ``forward_pmf[j]``
    is the discretised reading distribution given the first surface in cell
    ``j`` (bins then the max-range outcome).
    """

    bin_width: float
    n_bins: int
    pairs: np.ndarray
    forward_pmf: np.ndarray

    def bin_index(self, r: float) -> int:
        return int(_snap_floor(r / self.bin_width))

    def lookup(self, r: float, max_range: bool = False) -> np.ndarray:
        if max_range:
            return self.pairs[-1]
        b = self.bin_index(r)
        if not (0 <= b < self.n_bins):
            raise ValueError(f"reading {r} outside the tabulated range")
        return self.pairs[b]

    def bin_centers(self) -> np.ndarray:
        return (np.arange(self.n_bins) + 0.5) * self.bin_width


def _forward_pmf(model: SensorModel, z: np.ndarray, bin_width: float, n_bins: int) -> np.ndarray:
    r_max = n_bins * bin_width
    edges = np.arange(n_bins + 1) * bin_width
    pmf = np.zeros((z.size, n_bins + 1))
    if isinstance(model, IdealModel):
        b = _snap_floor(z / bin_width)
        inside = b < n_bins
        pmf[np.nonzero(inside)[0], b[inside]] = 1.0
        pmf[~inside, -1] = 1.0
        return pmf
    sig = np.asarray(model.range_sigma(z), dtype=float)
    det = np.asarray(model.detection(z), dtype=float)
    cdf = ndtr((edges[None, :] - z[:, None]) / sig[:, None])
    cdf[:, 0] = 0.0  # readings below zero are reported as zero
    pmf[:, :n_bins] = det[:, None] * np.diff(cdf, axis=1)
    pmf[:, -1] = 1.0 - det * ndtr((r_max - z) / sig)
    return pmf


def precompute_table(
    model: SensorModel, ray: RayDiscretization, bin_width: float, n_bins: int | None = None
) -> LikelihoodTable:
    """Tabulate :func:`ray_cell_likelihoods` for every reading bin of a fixed ray."""
    if ray.r_max is None:
        raise ValueError("precomputed tables need the ray's r_max")
    if n_bins is None:
        n_bins = int(round(ray.r_max / bin_width))
    if n_bins < 1:
        raise ValueError("need at least one reading bin")
    centers = (np.arange(n_bins) + 0.5) * bin_width
    pairs = np.empty((n_bins + 1, ray.n, 2))
    for b, r in enumerate(centers):
        f, f0 = _outcome_terms(model, ray, float(r), False)
        pairs[b] = _configuration_sums(f, f0)
    pairs[-1] = ray_cell_likelihoods(model, ray, ray.r_max, max_range=True)
    return LikelihoodTable(float(bin_width), n_bins, pairs, _forward_pmf(model, ray.z, bin_width, n_bins))
