#!/usr/bin/env python3
"""Run the three flight modes against one scenario and print the
side-by-side accuracy and timing table, with optional heatmap export.

Example:
    python scripts/compare_modes.py --scenario l1 --runs 25 --seed 3 --out out/
"""

import argparse
from pathlib import Path

from skysearch.cli import run_batch, write_records
from skysearch.coverage import Rect
from skysearch.metrics import (compute_metrics, export_heatmap, metrics_table,
                               write_heatmap_csv, write_heatmap_pgm, write_metrics_csv)
from skysearch.world import load_scenario


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", default="l1")
    ap.add_argument("--runs", type=int, default=25)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None)
    ap.add_argument("--heatmaps", action="store_true")
    args = ap.parse_args()

    scenario = load_scenario(args.scenario)
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)

    rows = []
    for mode in ("mission", "offboard", "hybrid"):
        records = run_batch(scenario, mode, args.runs, args.seed)
        rows.append(compute_metrics(records, scenario.truth.victims))
        if out:
            write_records(out / f"records_{mode}.jsonl", records)
            if args.heatmaps:
                s = scenario.survey
                bounds = Rect(s.x_min - 2, s.y_min - 2, s.x_max + 2, s.y_max + 2)
                counts, xs, ys = export_heatmap(records, bounds)
                write_heatmap_csv(out / f"heatmap_{mode}.csv", counts, xs, ys)
                write_heatmap_pgm(out / f"heatmap_{mode}.pgm", counts)
        print(f"{mode}: {args.runs} runs done")

    print()
    print(metrics_table(rows))
    if out:
        write_metrics_csv(out / "metrics.csv", rows)
        print(f"\nwritten to {out}/")


if __name__ == "__main__":
    main()
