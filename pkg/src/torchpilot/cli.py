"""Command-line entry point: ``torchpilot {run,suite,features,validate-config}``.

Exit status is 0 when every run finished, 1 when any run aborted, and 2 on
configuration, calibration or I/O errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .config import RunConfig, dump_config, load_config, with_overrides
from .errors import TorchPilotError
from .features import calibrate, measure, write_feature_csv
from .harness import Experiment, RunResult, run_experiment, write_summary_csv, write_telemetry_csv
from .imgproc import quantize
from .ppm import read_ppm

log = logging.getLogger("torchpilot")

EXIT_OK = 0
EXIT_ABORTED = 1
EXIT_ERROR = 2
OUT_ENV = "TORCHPILOT_OUT"


def _run_one(job: tuple[Experiment, str | None]) -> RunResult:
    exp, frame_dir = job
    return run_experiment(exp, frame_dir)


def execute(cfg: RunConfig, out_dir: Path, jobs: int = 1) -> list[RunResult]:
    """Run every descriptor in ``cfg`` and write the per-run and summary CSVs."""
    exps = cfg.experiments()
    out_dir.mkdir(parents=True, exist_ok=True)
    todo = []
    for exp in exps:
        run_dir = out_dir / exp.label
        run_dir.mkdir(parents=True, exist_ok=True)
        todo.append((exp, str(run_dir / "frames") if cfg.dump_frames else None))
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, todo))
    else:
        results = [_run_one(job) for job in todo]
    for exp, res in zip(exps, results):
        write_telemetry_csv(out_dir / exp.label / "telemetry.csv", res)
        log.info(
            "%s: success %.3f over %d steps%s",
            exp.label, res.success_ratio, res.steps, f", aborted ({res.cause.value})" if res.aborted else "",
        )
    write_summary_csv(out_dir / "summary.csv", results)
    return results


def _resolve_out(arg: str | None, cfg: RunConfig) -> Path:
    return Path(arg or os.environ.get(OUT_ENV) or cfg.out_dir)


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    return with_overrides(
        cfg,
        seed=getattr(args, "seed", None),
        dump_frames=True if getattr(args, "dump_frames", False) else None,
    )


def cmd_run(args, force_suite: bool = False) -> int:
    cfg = _load(args)
    if force_suite:
        cfg = replace(cfg, suite=True)
    results = execute(cfg, _resolve_out(args.out, cfg), max(1, args.jobs))
    return EXIT_ABORTED if any(r.aborted for r in results) else EXIT_OK


def cmd_features(args) -> int:
    """Run the perception pipeline over a directory of dumped frames."""
    cfg = _load(args)
    frames_dir = Path(args.frames_dir)
    cal_paths = sorted(frames_dir.glob(args.cal_pattern))
    if not cal_paths:
        raise TorchPilotError(f"{frames_dir}: no calibration frames matching {args.cal_pattern!r}")
    cal = calibrate([quantize(read_ppm(p), cfg.cutoffs) for p in cal_paths], cfg.intensity)
    frame_paths = sorted(frames_dir.glob(args.frame_pattern))
    rows = []
    for idx, p in enumerate(frame_paths):
        m = measure(quantize(read_ppm(p), cfg.cutoffs), cal, cfg.intensity, cfg.lam, cfg.distance_exponent)
        rows.append((idx, m))
    out = Path(args.out) if args.out else frames_dir / "features.csv"
    write_feature_csv(out, rows)
    log.info("calibration centroid (%.2f, %.2f), baseline %.4f", *cal.centroid, cal.baseline_intensity)
    log.info("wrote %d rows to %s", len(rows), out)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    sys.stdout.write(dump_config(cfg))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="torchpilot", description="Vision-guided torch cutting simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, runs: bool):
        sp.add_argument("--config", metavar="PATH", help="YAML run configuration")
        sp.add_argument("--seed", type=int, help="override the configured seed")
        if runs:
            sp.add_argument("--out", metavar="DIR", help=f"output directory (default: ${OUT_ENV} or config)")
            sp.add_argument("--dump-frames", action="store_true", help="write PPM frames per run")
            sp.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel runs")

    common(sub.add_parser("run", help="run the configured experiment(s)"), True)
    common(sub.add_parser("suite", help="run slow/fast/controlled on all three plates"), True)

    fp = sub.add_parser("features", help="compute per-frame features from dumped PPM frames")
    fp.add_argument("frames_dir", metavar="FRAMES_DIR")
    common(fp, False)
    fp.add_argument("--out", metavar="PATH", help="feature CSV path (default: FRAMES_DIR/features.csv)")
    fp.add_argument("--cal-pattern", default="cal_*.ppm", help="glob for calibration frames")
    fp.add_argument("--frame-pattern", default="frame_*.ppm", help="glob for frames to measure")

    vp = sub.add_parser("validate-config", help="validate a config and print it with defaults filled in")
    vp.add_argument("--config", metavar="PATH")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "suite":
            return cmd_run(args, force_suite=True)
        if args.command == "features":
            return cmd_features(args)
        return cmd_validate(args)
    except (TorchPilotError, OSError) as exc:
        where = f"{exc.filename}: " if isinstance(exc, OSError) and exc.filename else ""
        print(f"torchpilot: error: {where}{exc.strerror if isinstance(exc, OSError) else exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
