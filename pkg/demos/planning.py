"""Planning across the mapped room while trading distance against risk.

Builds the bundled room map, then plans corner to corner with increasing
weight on occupancy risk and with a grown robot footprint. Well-mapped free
space carries almost no risk, so the risk weight matters only near walls.
"""

from importlib.resources import files

from occgrid.pipeline import Scenario, run_mapping
from occgrid.planner import PlannerParams, path_cost, plan_path


def main():
    room = Scenario.load(files("occgrid") / "data" / "room.json")
    grid = run_mapping(room, keep_steps=False).global_map
    start, goal = (5, 5), (grid.width - 6, grid.height - 6)
    print(f"room map {grid.width}x{grid.height} cells, start {start}, goal {goal}")
    for params in (
        PlannerParams(tau_c=0.0, tau_d=1.0),
        PlannerParams(tau_c=0.1, tau_d=1.0),
        PlannerParams(tau_c=1.0, tau_d=1.0),
        PlannerParams(tau_c=1.0, tau_d=1.0, robot_radius=0.2),
    ):
        path = plan_path(grid, start, goal, params)
        label = f"tau_c={params.tau_c:<4} radius={params.robot_radius:<4}"
        if path is None:
            print(f"  {label} unreachable")
        else:
            risk = path_cost(grid, path.cells, PlannerParams(tau_c=1.0, tau_d=0.0))
            worst = max(grid.values[y, x] for x, y in path.cells)
            print(f"  {label} {len(path.cells):4d} cells, cost {path.cost:.3f}, risk {risk:.2e}, highest p on path {worst:.3f}")


if __name__ == "__main__":
    main()
