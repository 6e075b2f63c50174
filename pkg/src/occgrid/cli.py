"""Command-line front end: ``occgrid {simulate,map,plan,match,eval,render}``.

Every failure prints one JSON object on stderr and exits non-zero.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .estimation import write_scan_log
from .grid import Grid2D
from .pipeline import Scenario, run_eval, run_mapping
from .planner import PlannerParams, plan_path
from .pose import PoseAT
from .registration import SearchWindow, solve_motion
from .simulator import World, sense

EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_UNREACHABLE = 3

PATH_BYTE = 0


class CliError(Exception):
    def __init__(self, kind: str, message: str, code: int = EXIT_ERROR):
        super().__init__(message)
        self.kind = kind
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message, EXIT_USAGE)


def _emit(args, obj) -> None:
    if not getattr(args, "quiet", False):
        print(json.dumps(obj, sort_keys=True))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_scenario(args) -> Scenario:
    if not args.scenario:
        raise CliError("usage", "--scenario is required", EXIT_USAGE)
    sc = Scenario.load(args.scenario)
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if getattr(args, "mode", None):
        kw["mode"] = f"{args.mode.upper()}_BASED"
    if args.band is not None:
        kw["band"] = args.band
    return sc.replace(**kw) if kw else sc


def _load_map(path, args) -> Grid2D:
    p = Path(path)
    if not p.exists():
        raise CliError("not_found", f"no such map file: {p}")
    origin = tuple(args.origin) if getattr(args, "origin", None) else None
    return io.load_grid(p, getattr(args, "resolution", None), origin)


def cmd_simulate(args) -> None:
    sc = _load_scenario(args)
    rng = np.random.default_rng(sc.seed)
    readings = []
    for k, pose in enumerate(sc.poses):
        for spec in sc.sensors:
            readings.extend(sense(sc.world, pose, spec, rng, t=float(k)))
    out = _out_dir(args)
    write_scan_log(out / "scan_log.jsonl", readings)
    sc.world.save(out / "world.json")
    io.write_pgm(out / "truth.pgm", sc.world.ground_truth(sc.frame.blank()))
    _emit(args, {"readings": len(readings), "out": str(out)})


def cmd_map(args) -> None:
    sc = _load_scenario(args)
    run = run_mapping(sc, _out_dir(args))
    summary = run.metrics.to_dict(include_runtime=True)
    summary.pop("pose_errors")
    summary["mode"] = sc.mode
    _emit(args, summary)


def _overlay(grid: Grid2D, cells) -> np.ndarray:
    """Map shades compressed into 64..255 with the path drawn at 0."""
    values = 64 + np.floor(grid.values * 191.0 + 0.5)
    for x, y in cells:
        values[y, x] = PATH_BYTE
    return values.astype(np.uint8)[::-1, :]


def cmd_plan(args) -> None:
    grid = _load_map(args.map, args)
    params = PlannerParams(args.tau_c, args.tau_d, args.radius)
    path = plan_path(grid, tuple(args.start), tuple(args.goal), params)
    if path is None:
        raise CliError("unreachable", f"goal {args.goal} cannot be reached from {args.start}", EXIT_UNREACHABLE)
    out = _out_dir(args)
    path.save(out / "path.json")
    (out / "path_overlay.pgm").write_bytes(io.pgm_bytes(_overlay(grid, path.cells)))
    _emit(args, {"cost": path.cost, "cells": len(path.cells)})


def cmd_match(args) -> None:
    view = _load_map(args.view, args)
    target = _load_map(args.map, args)
    window = SearchWindow.in_cells(view.resolution, args.window_cells, args.window_deg, args.step_deg, args.levels)
    prior = PoseAT(np.array(args.prior, dtype=float))
    est = solve_motion(view, target, prior, window)
    result = {"pose": est.pose.to_dict(), "score": est.score, "informative": est.informative}
    if args.out:
        io.dump_json(_out_dir(args) / "match.json", result)
    _emit(args, result)


def cmd_eval(args) -> None:
    grid = _load_map(args.map, args)
    world = World.load(args.world)
    metrics = run_eval(grid, world, args.band or 0.0)
    result = metrics.to_dict()
    result.pop("pose_errors")
    if args.out:
        io.dump_json(_out_dir(args) / "eval.json", result)
    _emit(args, result)


def cmd_render(args) -> None:
    grid = _load_map(args.map, args)
    target = Path(args.out)
    target.parent.mkdir(parents=True, exist_ok=True)
    if target.suffix.lower() == ".csv":
        io.write_csv(target, grid)
    else:
        io.write_pgm(target, grid)
    _emit(args, {"out": str(target)})


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--scenario", help="scenario JSON file")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--out", help="output directory (file for render)")
    common.add_argument("--mode", choices=["world", "robot"], help="global mapping mode")
    common.add_argument("--band", type=float, help="UNKNOWN band half-width around 1/2")
    common.add_argument("--quiet", action="store_true", help="suppress the JSON summary on stdout")
    geometry = _Parser(add_help=False)
    geometry.add_argument("--resolution", type=float, help="cell size for PGM/CSV inputs (m)")
    geometry.add_argument("--origin", type=float, nargs=3, metavar=("X", "Y", "THETA"), help="origin for PGM/CSV inputs")

    parser = _Parser(prog="occgrid", description="Occupancy-grid mapping toolchain.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="write a simulated scan log")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("map", parents=[common], help="run a mapping scenario")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("plan", parents=[common, geometry], help="plan a path on a map")
    p.add_argument("map")
    p.add_argument("--start", type=int, nargs=2, required=True, metavar=("IX", "IY"))
    p.add_argument("--goal", type=int, nargs=2, required=True, metavar=("IX", "IY"))
    p.add_argument("--tau-c", type=float, default=1.0)
    p.add_argument("--tau-d", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=0.0, help="robot radius (m)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("match", parents=[common, geometry], help="register a view against a map")
    p.add_argument("view")
    p.add_argument("map")
    p.add_argument("--prior", type=float, nargs=3, default=[0.0, 0.0, 0.0], metavar=("X", "Y", "THETA"))
    p.add_argument("--window-cells", type=int, default=10)
    p.add_argument("--window-deg", type=float, default=10.0)
    p.add_argument("--step-deg", type=float, default=1.0)
    p.add_argument("--levels", type=int, default=3)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("eval", parents=[common, geometry], help="score a map against a world")
    p.add_argument("map")
    p.add_argument("--world", required=True, help="world JSON file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", parents=[common, geometry], help="convert a grid file to PGM or CSV")
    p.add_argument("map")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    t0 = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        if args.command in ("simulate", "map", "render") and not args.out:
            raise CliError("usage", "--out is required", EXIT_USAGE)
        args.func(args)
    except CliError as exc:
        sys.stderr.write(json.dumps({"error": exc.kind, "message": str(exc)}, sort_keys=True) + "\n")
        return exc.code
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        kind = "invalid_argument" if isinstance(exc, (ValueError, KeyError)) else "io"
        sys.stderr.write(json.dumps({"error": kind, "message": str(exc)}, sort_keys=True) + "\n")
        return EXIT_ERROR
    if not getattr(args, "quiet", False) and math.isfinite(t0):
        sys.stderr.write(f"done in {time.perf_counter() - t0:.2f}s\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
