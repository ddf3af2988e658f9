"""Command-line surface: single runs with full traces, seeded batches with
metrics, three-mode comparisons, heatmap export, and footprint debugging.

Exit codes: 0 success, 2 configuration/usage error, 3 belief collapse.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .configio import ConfigError
from .coverage import Rect
from .geometry import CameraIntrinsics, EnuPoint, footprint_corners_world, footprint_extent
from .metrics import (compute_metrics, export_heatmap, metrics_table,
                      write_heatmap_csv, write_heatmap_pgm, write_metrics_csv)
from .missions import RunRecord, build_setup, execute_run
from .solver import BeliefCollapseError
from .world import Scenario, builtin_scenarios, load_scenario

OUT_ENV = "SKYSEARCH_OUT"
MODES = ("mission", "offboard", "hybrid")


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUT_ENV) or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _seed_for(args, scenario: Scenario) -> int:
    if args.seed is not None:
        return args.seed
    if "seed" in scenario.raw:
        return int(scenario.raw["seed"][-1][0])
    return 0


def run_batch(scenario: Scenario, mode: str, runs: int, seed: int, *,
              paper_literal: bool = False, workers: int = 1) -> list[RunRecord]:
    """Run ``runs`` isolated flights; per-run seeds derive from the master
    seed and index, so results are identical however the batch is spread
    across workers."""
    setups = [build_setup(scenario, mode, f"{seed}:{i}",
                          paper_literal_confidence=paper_literal)
              for i in range(runs)]
    if workers > 1:
        import multiprocessing as mp
        with mp.Pool(workers) as pool:
            return pool.map(execute_run, setups)
    return [execute_run(s) for s in setups]


def write_records(path, records: list[RunRecord]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


def read_records(path) -> list[RunRecord]:
    records = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                records.append(RunRecord.from_dict(json.loads(line)))
    return records


def write_trajectory_csv(path, rec: RunRecord) -> None:
    with open(path, "w") as fh:
        fh.write("t,x,y,z\n")
        for t, x, y, z in rec.trajectory:
            fh.write(f"{t:.3f},{x:.6f},{y:.6f},{z:.6f}\n")


def write_solver_trace_csv(path, rec: RunRecord) -> None:
    from .model import ActionCmd
    names = [a.name for a in ActionCmd]
    with open(path, "w") as fh:
        fh.write("t,action,particles,episodes,survival,"
                 + ",".join(f"q_{n}" for n in names) + "\n")
        for row in rec.solver_trace:
            qs = ",".join("" if q is None else f"{q:.3f}" for q in row["q"])
            fh.write(f"{row['t']:.3f},{row['action']},{row['particles']},"
                     f"{row['episodes']},{row['survival']:.4f},{qs}\n")


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    out = _out_dir(args)
    setup = build_setup(scenario, args.mode, _seed_for(args, scenario),
                        paper_literal_confidence=args.paper_literal_confidence)
    rec = execute_run(setup)
    write_trajectory_csv(out / "trajectory.csv", rec)
    with open(out / "record.json", "w") as fh:
        json.dump(rec.to_dict(), fh, sort_keys=True, indent=1)
    if rec.solver_trace:
        write_solver_trace_csv(out / "solver_trace.csv", rec)
    m = compute_metrics([rec], scenario.truth.victims, args.tolerance)
    write_metrics_csv(out / "metrics.csv", [m])
    print(f"{rec.mode} run seed={rec.seed}: {rec.outcome} in {rec.elapsed_s:.0f} s, "
          f"{len(rec.recorded)} coordinate(s) recorded, coverage {rec.coverage:.2f}")
    print(metrics_table([m]))
    return 0


def _cmd_batch(args) -> int:
    scenario = load_scenario(args.scenario)
    out = _out_dir(args)
    records = run_batch(scenario, args.mode, args.runs, _seed_for(args, scenario),
                        paper_literal=args.paper_literal_confidence,
                        workers=args.workers)
    write_records(out / f"records_{args.mode}.jsonl", records)
    m = compute_metrics(records, scenario.truth.victims, args.tolerance)
    write_metrics_csv(out / "metrics.csv", [m])
    print(metrics_table([m]))
    return 0


def _cmd_compare(args) -> int:
    scenario = load_scenario(args.scenario)
    out = _out_dir(args)
    rows = []
    for mode in MODES:
        records = run_batch(scenario, mode, args.runs, _seed_for(args, scenario),
                            paper_literal=args.paper_literal_confidence,
                            workers=args.workers)
        write_records(out / f"records_{mode}.jsonl", records)
        rows.append(compute_metrics(records, scenario.truth.victims, args.tolerance))
    write_metrics_csv(out / "metrics.csv", rows)
    print(metrics_table(rows))
    return 0


def _cmd_heatmap(args) -> int:
    scenario = load_scenario(args.scenario)
    out = _out_dir(args)
    records = run_batch(scenario, args.mode, args.runs, _seed_for(args, scenario),
                        paper_literal=args.paper_literal_confidence,
                        workers=args.workers)
    write_records(out / f"records_{args.mode}.jsonl", records)
    margin = 2.0
    s = scenario.survey
    bounds = Rect(s.x_min - margin, s.y_min - margin, s.x_max + margin, s.y_max + margin)
    counts, xs, ys = export_heatmap(records, bounds, cell=args.cell)
    write_heatmap_csv(out / f"heatmap_{args.mode}.csv", counts, xs, ys)
    write_heatmap_pgm(out / f"heatmap_{args.mode}.pgm", counts)
    print(f"heatmap over {counts.sum()} recorded coordinate(s) "
          f"written to {out / f'heatmap_{args.mode}.csv'}")
    return 0


def _cmd_footprint(args) -> int:
    cam = CameraIntrinsics(pitch=args.pitch, roll=args.roll)
    l_top, l_bottom, l_left, l_right = footprint_extent(args.z, cam)
    fp = footprint_corners_world(EnuPoint(args.x, args.y, args.z), args.yaw, cam)
    print(f"extents at z={args.z}: top={l_top:.4f} bottom={l_bottom:.4f} "
          f"left={l_left:.4f} right={l_right:.4f}")
    print(f"size: {l_right - l_left:.4f} x {l_top - l_bottom:.4f} m, "
          f"area {fp.area():.4f} m^2")
    for i, (cx, cy) in enumerate(fp.corners):
        print(f"corner[{i}]: ({cx:.4f}, {cy:.4f})")
    return 0


def _add_common(p: argparse.ArgumentParser, with_mode: bool = True) -> None:
    p.add_argument("--scenario", default="l1",
                   help=f"built-in name ({', '.join(builtin_scenarios())}) or file path")
    if with_mode:
        p.add_argument("--mode", choices=MODES, default="mission")
    p.add_argument("--seed", type=int, default=None,
                   help="master seed (default: scenario file seed, else 0)")
    p.add_argument("--out", default=None,
                   help=f"output directory (default $" + OUT_ENV + " or ./out)")
    p.add_argument("--tolerance", type=float, default=2.0,
                   help="radius in metres for a coordinate to count as the true location")
    p.add_argument("--paper-literal-confidence", action="store_true",
                   help="use the distance-increasing confidence model variant")
    p.add_argument("--workers", type=int, default=1,
                   help="process pool size for batches")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skysearch",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one episode with full trace files")
    _add_common(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("batch", help="N seeded runs of one mode plus metrics")
    _add_common(p)
    p.add_argument("--runs", type=int, default=5)
    p.set_defaults(func=_cmd_batch)

    p = sub.add_parser("compare", help="mission vs offboard vs hybrid side by side")
    _add_common(p, with_mode=False)
    p.add_argument("--runs", type=int, default=5)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("heatmap", help="batch plus a 2D histogram of recorded coordinates")
    _add_common(p)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--cell", type=float, default=1.0)
    p.set_defaults(func=_cmd_heatmap)

    p = sub.add_parser("footprint", help="print the camera footprint for a pose")
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--y", type=float, default=0.0)
    p.add_argument("--z", type=float, default=16.0)
    p.add_argument("--yaw", type=float, default=0.0)
    p.add_argument("--pitch", type=float, default=0.0)
    p.add_argument("--roll", type=float, default=0.0)
    p.set_defaults(func=_cmd_footprint)
    return parser


def cli_main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BeliefCollapseError as exc:
        print(f"belief collapse: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
