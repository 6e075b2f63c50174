"""Independent Opinion Pool: fusing independent occupancy estimates.

Under maximum-entropy priors, combining P1 and P2 gives
P1 P2 / (P1 P2 + (1 - P1)(1 - P2)), i.e. log-odds add. The sum is formed in
log-odds space; 1/2 is an exact identity and p with 1 - p cancel exactly.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, logit

from .grid import Grid2D, clamp_probability


def combine_probabilities(p1, p2):
    """Fuse two independent occupancy estimates (scalars or arrays)."""
    a = clamp_probability(np.asarray(p1, dtype=float))
    b = clamp_probability(np.asarray(p2, dtype=float))
    out = clamp_probability(expit(logit(a) + logit(b)))
    out = np.where(a == 0.5, b, out)
    out = np.where(b == 0.5, a, out)
    out = np.where(a + b == 1.0, 0.5, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def compose_maps(a: Grid2D, b: Grid2D) -> Grid2D:
    """Cellwise opinion pool of two grids with identical geometry."""
    if not a.same_geometry(b):
        raise ValueError("cannot compose grids with different geometry")
    return a.with_values(combine_probabilities(a.values, b.values))
