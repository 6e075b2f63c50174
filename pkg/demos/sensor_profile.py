"""How repeated readings sharpen a ray's occupancy profile, and how cell size matters.

A Gaussian range sensor (sigma 0.25 m) at x = 0 reports r = 2.0 ten times.
For each cell size the profile after 1, 3 and 10 readings is printed near r.
"""

import numpy as np

from occgrid.estimation import BeamReading, integrate_reading
from occgrid.grid import new_grid
from occgrid.sensor_models import GaussianModel

SIGMA, R = 0.25, 2.0


def profile(cell, readings):
    n = int(round(4.0 / cell))
    g = new_grid(n, 1, cell, (0.0, -0.5 * cell, 0.0))
    out = {}
    for k in range(1, readings + 1):
        integrate_reading(g, BeamReading(0, 0, 0, 0, R), GaussianModel(SIGMA))
        out[k] = g.values[0].copy()
    return (np.arange(n) + 0.5) * cell, out


def main():
    for cell in (0.05, 0.25, 0.5):
        x, out = profile(cell, 10)
        show = (x > R - 1.0) & (x < R + 0.6)
        print(f"cell {cell} m")
        print("   x     " + "  ".join(f"{v:5.2f}" for v in x[show]))
        for k in (1, 3, 10):
            print(f"  n={k:<3d}  " + "  ".join(f"{v:5.3f}" for v in out[k][show]))
        print(f"  peak after 10 readings: {out[10].max():.4f} at x = {x[np.argmax(out[10])]:.3f}\n")


if __name__ == "__main__":
    main()
