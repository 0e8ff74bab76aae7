"""Command-line front end.

Subcommands:
    simulate   one scene file -> raw echo (and optional map) exports
    pipeline   one scene file -> full three-stage run, printed + CSV row
    sweep      sweep spec file or named family -> aggregate CSV (+ SVG)
    masks      one scene file -> estimated-surface region masks as PGM

Exit codes: 0 success, 2 configuration error, 3 trial-failure fraction
above threshold.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .classify import build_masks, write_masks_pgm
from .echo import synthesize, write_echo
from .plotting import write_line_chart
from .ramap import compute_ra_map, write_magnitude_csv, write_map_binary
from .scenario import load_scenario
from .surface import RansacConfig


def _pipeline_options(args) -> harness.PipelineOptions:
    return harness.PipelineOptions(
        estimator=args.estimator,
        k_peaks=args.k_peaks,
        guard_m=args.guard_m,
        ransac=RansacConfig(),
    )


def _add_common(p):
    p.add_argument("--seed", type=int, default=None,
                   help="override the scene/master seed")
    p.add_argument("--out-dir", type=Path, default=Path("."),
                   help="output directory (created if missing)")
    p.add_argument("--estimator", choices=("ls", "ransac"), default="ransac")
    p.add_argument("--k-peaks", type=int, default=None,
                   help="peaks fed to the surface fit (default: length-derived)")
    p.add_argument("--guard-m", type=float, default=1.0,
                   help="guard band half-width around the estimated surface")
    p.add_argument("--export", default="csv",
                   help="comma list from {csv,bin,pgm,svg}")


def _load_scene(args):
    spec = load_scenario(args.scene)
    if args.seed is not None:
        spec = spec.with_seed(args.seed)
    return spec


def _cmd_simulate(args) -> int:
    spec = _load_scene(args)
    exports = set(args.export.split(","))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    echo = synthesize(spec)
    write_echo(args.out_dir / "echo.bin", echo, spec.radar, seed=spec.seed,
               metadata={"scene_class": spec.scene_class.value})
    if {"csv", "bin"} & exports:
        ra_map = compute_ra_map(echo, spec.radar)
        if "csv" in exports:
            write_magnitude_csv(ra_map, args.out_dir / "ra_map.csv")
        if "bin" in exports:
            write_map_binary(ra_map, args.out_dir / "ra_map.bin", seed=spec.seed)
    print(f"wrote {args.out_dir / 'echo.bin'}")
    return 0


def _cmd_pipeline(args) -> int:
    spec = _load_scene(args)
    record = harness.run_trial(spec, _pipeline_options(args))
    if record.error is not None:
        print(f"trial failed: {record.error}", file=sys.stderr)
        return 3
    est, dec, loc = record.estimate, record.decision, record.localization
    print(f"scene class     : {record.scene_class.value}")
    print(f"surface detected: {est.detected}"
          + (f"  (theta={est.orientation_deg:.2f} deg, length={est.length:.2f} m)"
             if est.detected else ""))
    print(f"hypothesis      : {dec.hypothesis.value}")
    print(f"peak            : {dec.peak_range_m:.2f} m @ {dec.peak_angle_deg:.2f} deg")
    print(f"target estimate : ({loc.x:.3f}, {loc.y:.3f}) m"
          + ("" if loc.feasible else "  [infeasible geometry]"))
    if record.error_d is not None:
        print(f"position error  : {record.error_d:.3f} m")
    if "csv" in args.export.split(","):
        args.out_dir.mkdir(parents=True, exist_ok=True)
        out = args.out_dir / "trial.csv"
        header = "hypothesis,x,y,r_radar_prp,r_prp_target,phi_ko_deg,feasible"
        row = loc.to_csv_row()
        if record.truth_target is not None:
            header += ",truth_x,truth_y,error_m"
            row += (f",{record.truth_target[0]:.6f}"
                    f",{record.truth_target[1]:.6f},{record.error_d:.6f}")
        with open(out, "w", encoding="utf-8") as f:
            f.write(header + "\n")
            f.write(row + "\n")
        print(f"wrote {out}")
    return 0


def _cmd_sweep(args) -> int:
    if args.family is not None:
        sweep = harness.SWEEP_FAMILIES[args.family](
            trials_per_point=args.trials, seed=args.seed or 0)
    else:
        with open(args.spec, "r", encoding="utf-8") as f:
            doc = json.load(f)
        if args.trials is not None:
            doc["trials_per_point"] = args.trials
        if args.seed is not None:
            doc["seed"] = args.seed
        doc["grid"] = tuple(doc["grid"])
        sweep = harness.SweepSpec(**doc)

    rows, _ = harness.run_sweep(sweep, _pipeline_options(args),
                                workers=args.workers)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    exports = set(args.export.split(","))
    csv_path = args.out_dir / f"sweep_{sweep.name}.csv"
    harness.write_sweep_csv(rows, csv_path)
    print(f"wrote {csv_path}")
    if "svg" in exports:
        svg_path = args.out_dir / f"sweep_{sweep.name}.svg"
        if sweep.mode == "identification":
            series = {"Pr(I1|I1)": ([r["pr_i1_i1"] for r in rows], None),
                      "Pr(I1|I0)": ([r["pr_i1_i0"] for r in rows], None)}
            ylabel = "probability"
        else:
            series = {"RMSE_d": ([r["rmse_d"] for r in rows],
                                 [r["se_rmse_d"] for r in rows])}
            ylabel = "RMSE_d [m]"
        write_line_chart(svg_path, [r["value"] for r in rows], series,
                         title=sweep.name, xlabel=sweep.swept, ylabel=ylabel)
        print(f"wrote {svg_path}")

    total = sum(r["trials"] for r in rows)
    failed = sum(r["failures"] for r in rows)
    if total and failed / total > args.max_failures:
        print(f"{failed}/{total} trials failed", file=sys.stderr)
        return 3
    return 0


def _cmd_masks(args) -> int:
    spec = _load_scene(args)
    record = harness.run_trial(spec, _pipeline_options(args))
    if record.error is not None or record.estimate is None:
        print(f"trial failed: {record.error}", file=sys.stderr)
        return 3
    if not record.estimate.detected:
        print("no surface detected; nothing to mask", file=sys.stderr)
        return 3
    echo = synthesize(spec)
    ra_map = compute_ra_map(echo, spec.radar)
    masks = build_masks(record.estimate, ra_map, guard_m=args.guard_m)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    out = args.out_dir / "masks.pgm"
    write_masks_pgm(masks, out)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlosradar",
        description="Around-the-corner radar simulation and localization pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="synthesize one scene and export")
    p_sim.add_argument("--scene", required=True, type=Path)
    _add_common(p_sim)
    p_sim.set_defaults(fn=_cmd_simulate)

    p_pipe = sub.add_parser("pipeline", help="run the three-stage pipeline")
    p_pipe.add_argument("--scene", required=True, type=Path)
    _add_common(p_pipe)
    p_pipe.set_defaults(fn=_cmd_pipeline)

    p_sweep = sub.add_parser("sweep", help="run an experiment sweep")
    group = p_sweep.add_mutually_exclusive_group(required=True)
    group.add_argument("--spec", type=Path, help="sweep spec JSON file")
    group.add_argument("--family", choices=sorted(harness.SWEEP_FAMILIES),
                       help="named built-in experiment family")
    p_sweep.add_argument("--trials", type=int, default=None,
                         help="trials per grid point")
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.add_argument("--max-failures", type=float, default=0.1,
                         help="tolerated trial-failure fraction before exit 3")
    _add_common(p_sweep)
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_masks = sub.add_parser("masks", help="export LOS/NLOS masks as PGM")
    p_masks.add_argument("--scene", required=True, type=Path)
    _add_common(p_masks)
    p_masks.set_defaults(fn=_cmd_masks)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
