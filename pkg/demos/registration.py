"""Recovering the offset between two maps of the same random scene.

A scene of segments and discs is scan-converted twice, once in a frame moved
by a known offset; correlation search then estimates that offset.
"""

import math

import numpy as np

from occgrid.grid import Disc, Grid2D, Polygon, Segment, scan_convert
from occgrid.pose import PoseAT, compose
from occgrid.registration import SearchWindow, solve_motion

N, HALF = 128, 3.2
RES = 2 * HALF / N


def scene(rng):
    obstacles = []
    for _ in range(6):
        x, y = rng.uniform(-0.9 * HALF, 0.9 * HALF, 2)
        a, length = rng.uniform(0, math.pi), rng.uniform(1, 3)
        obstacles.append(Segment(x, y, x + length * math.cos(a), y + length * math.sin(a)))
    for _ in range(3):
        obstacles.append(Disc(*rng.uniform(-0.8 * HALF, 0.8 * HALF, 2), rng.uniform(0.1, 0.4)))
    return obstacles


def main():
    rng = np.random.default_rng(3)
    frame = Grid2D(N, N, RES, (-HALF, -HALF, 0.0))
    free = [Polygon.rectangle(-HALF, -HALF, HALF, HALF)]
    window = SearchWindow.in_cells(RES, 10, 10.0, 1.0, 3)
    print("   true offset (cells, deg)      estimate (cells, deg)")
    for _ in range(5):
        obstacles = scene(rng)
        target = scan_convert(obstacles, frame, free=free)
        dx, dy = rng.uniform(-10, 10, 2) * RES
        dt = math.radians(rng.uniform(-10, 10))
        origin = compose(PoseAT([dx, dy, dt]), PoseAT(frame.origin)).mean
        view = frame.with_values(scan_convert(obstacles, Grid2D(N, N, RES, tuple(origin)), free=free).values)
        est = solve_motion(view, target, PoseAT.identity(), window)
        m = est.pose.mean
        print(
            f"  ({dx / RES:6.2f}, {dy / RES:6.2f}, {math.degrees(dt):6.2f})"
            f"      ({m[0] / RES:6.2f}, {m[1] / RES:6.2f}, {math.degrees(m[2]):6.2f})"
        )


if __name__ == "__main__":
    main()
