"""Command-line entry point exposing the pipeline as composable subcommands.

Each stage reads and writes plain files so intermediate artifacts stay
inspectable. Exit status: 0 on success, 1 on validation errors (bad input
data, bad config, bad usage), 2 on I/O errors. Logs are line-delimited JSON
records on stderr. Every run with a file output also writes a small JSON run
manifest alongside it; stdout-only runs log the manifest instead.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import shlex
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .adaptation import (
    LoopConfig,
    TrainerError,
    count_labels,
    generate_pseudo_labels,
    run_loop,
    write_manifest,
    write_pseudo_labels,
)
from .evaluation import evaluate
from .fusion import TierSet, fuse_multiscale
from .gsi import apply_gsi
from .mot_io import (
    PipelineConfig,
    Tier,
    config_as_dict,
    load_config,
    parse_detections,
    parse_ground_truth,
    parse_results,
    write_results,
)
from .report import (
    format_report_text,
    read_report_csv,
    render_report_figure,
    report_row,
    write_report_csv,
)
from .simulate import (
    generate_scenario,
    load_scenario_config,
    write_detections,
    write_gt,
)
from .tracker import SequenceResult, run_sequence

log = logging.getLogger("motpipe")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


class _UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 by default; usage problems are validation
    # errors here and must exit 1.
    def error(self, message):
        raise _UsageError(message)


class _JsonLineFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        payload = {
            "ts": round(record.created, 3),
            "level": record.levelname.lower(),
            "logger": record.name,
            "msg": record.getMessage(),
        }
        return json.dumps(payload)


def _setup_logging(verbose: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonLineFormatter())
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


def _load_pipeline_config(path: str | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    with open(path, encoding="utf-8") as f:
        return load_config(f)


def _write_manifest(out_path: str | None, payload: dict) -> None:
    payload = {"version": __version__, **payload}
    if out_path is None:
        log.info("run manifest: %s", json.dumps(payload, sort_keys=True))
        return
    manifest_path = Path(str(out_path) + ".manifest.json")
    manifest_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_result(path: str) -> SequenceResult:
    with open(path, encoding="utf-8") as f:
        return parse_results(f, name=Path(path).stem)


def _write_result_file(result: SequenceResult, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        write_results(result, f)


def cmd_fuse(args) -> int:
    cfg = _load_pipeline_config(args.config)
    started = time.monotonic()
    sets = []
    for tier in (Tier.LOW, Tier.MEDIUM, Tier.HIGH):
        for flipped, tag in ((False, "orig"), (True, "flip")):
            path = Path(args.dets_dir) / f"{args.seq}.{tier.value}.{tag}.txt"
            with open(path, encoding="utf-8") as f:
                dets = parse_detections(f, source_tier=tier, flipped=flipped)
            sets.append(TierSet(tier, flipped, dets, args.image_width))
    fused = fuse_multiscale(sets, cfg)
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        write_detections(fused, f)
    log.info("fused %d frames into %s", len(fused), args.out)
    _write_manifest(
        args.out,
        {
            "subcommand": "fuse",
            "inputs": {"dets_dir": args.dets_dir, "seq": args.seq},
            "outputs": {"dets": args.out},
            "config": config_as_dict(cfg),
            "image_width": args.image_width,
            "wall_time_s": round(time.monotonic() - started, 3),
        },
    )
    return EXIT_OK


def _track_one(dets_path: str, out_path: str, cfg: PipelineConfig, lost_in_stage2: bool) -> None:
    with open(dets_path, encoding="utf-8") as f:
        dets = parse_detections(f)
    result = run_sequence(dets, cfg, name=Path(dets_path).stem, lost_in_stage2=lost_in_stage2)
    _write_result_file(result, out_path)


def cmd_track(args) -> int:
    cfg = _load_pipeline_config(args.config)
    lost_in_stage2 = not args.no_lost_in_stage2
    started = time.monotonic()
    if len(args.dets) > 1:
        if not args.out_dir:
            raise _UsageError("--out-dir is required with multiple --dets files")
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        jobs = []
        for dets_path in args.dets:
            out_path = out_dir / (Path(dets_path).stem + ".txt")
            jobs.append((dets_path, str(out_path)))
        with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
            futures = [
                pool.submit(_track_one, d, o, cfg, lost_in_stage2) for d, o in jobs
            ]
            for fut in futures:
                fut.result()
        primary_out = str(out_dir / "runs")
        outputs = {"results": [o for _, o in jobs]}
    else:
        if not args.out:
            raise _UsageError("--out is required for a single --dets file")
        _track_one(args.dets[0], args.out, cfg, lost_in_stage2)
        primary_out = args.out
        outputs = {"result": args.out}
    _write_manifest(
        primary_out,
        {
            "subcommand": "track",
            "inputs": {"dets": args.dets},
            "outputs": outputs,
            "config": config_as_dict(cfg),
            "lost_in_stage2": lost_in_stage2,
            "wall_time_s": round(time.monotonic() - started, 3),
        },
    )
    return EXIT_OK


def cmd_gsi(args) -> int:
    cfg = _load_pipeline_config(args.config)
    if args.max_gap is not None or args.length_scale is not None:
        updates = dict(config_as_dict(cfg))
        if args.max_gap is not None:
            updates["gsi_max_gap"] = args.max_gap
        if args.length_scale is not None:
            updates["gsi_length_scale"] = args.length_scale
        cfg = PipelineConfig(**updates)
    started = time.monotonic()
    result = _read_result(args.infile)
    smoothed = apply_gsi(result, cfg)
    _write_result_file(smoothed, args.out)
    log.info(
        "gsi: %d boxes in, %d boxes out", result.total_boxes(), smoothed.total_boxes()
    )
    _write_manifest(
        args.out,
        {
            "subcommand": "gsi",
            "inputs": {"result": args.infile},
            "outputs": {"result": args.out},
            "config": config_as_dict(cfg),
            "wall_time_s": round(time.monotonic() - started, 3),
        },
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    started = time.monotonic()
    with open(args.gt, encoding="utf-8") as f:
        gt = parse_ground_truth(f)
    result = _read_result(args.result)
    report = evaluate(gt, result)
    row = report_row(args.name or Path(args.result).stem, report)
    if args.report == "csv":
        buf = io.StringIO()
        write_report_csv([row], buf)
        text = buf.getvalue()
    else:
        text = format_report_text([row])
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    _write_manifest(
        args.out,
        {
            "subcommand": "eval",
            "inputs": {"gt": args.gt, "result": args.result},
            "outputs": {"report": args.out or "stdout"},
            "metrics": {
                "mota": report.mota,
                "fp": report.fp,
                "fn": report.fn,
                "ids": report.id_switches,
                "gt_count": report.gt_count,
            },
            "wall_time_s": round(time.monotonic() - started, 3),
        },
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    started = time.monotonic()
    with open(args.config, encoding="utf-8") as f:
        cfg = load_scenario_config(f)
    gt, dets = generate_scenario(cfg)
    with open(args.out_gt, "w", encoding="utf-8", newline="\n") as f:
        write_gt(gt, f)
    with open(args.out_dets, "w", encoding="utf-8", newline="\n") as f:
        write_detections(dets, f)
    n_dets = sum(len(v) for v in dets.values())
    log.info("simulated %d frames, %d detections", cfg.n_frames, n_dets)
    _write_manifest(
        args.out_dets,
        {
            "subcommand": "simulate",
            "inputs": {"config": args.config},
            "outputs": {"gt": args.out_gt, "dets": args.out_dets},
            "wall_time_s": round(time.monotonic() - started, 3),
        },
    )
    return EXIT_OK


def cmd_pseudo_label(args) -> int:
    started = time.monotonic()
    with open(args.dets, encoding="utf-8") as f:
        dets = parse_detections(f)
    labels = generate_pseudo_labels(dets, args.threshold)
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        write_pseudo_labels(labels, f)
    log.info("kept %d pseudo-labels at threshold %.2f", count_labels(labels), args.threshold)
    _write_manifest(
        args.out,
        {
            "subcommand": "pseudo-label",
            "inputs": {"dets": args.dets},
            "outputs": {"labels": args.out},
            "threshold": args.threshold,
            "label_count": count_labels(labels),
            "wall_time_s": round(time.monotonic() - started, 3),
        },
    )
    return EXIT_OK


def cmd_adapt(args) -> int:
    cfg = _load_pipeline_config(args.config)
    started = time.monotonic()
    loop = LoopConfig(
        initial_dets=Path(args.dets),
        val_gt=Path(args.val_gt),
        trainer_cmd=shlex.split(args.trainer),
        work_dir=Path(args.work_dir),
        tracker_cfg=cfg,
        metric=args.metric,
    )
    try:
        baseline, records = run_loop(loop, args.max_iterations)
    except TrainerError as err:
        # Persist whatever was recorded before surfacing the failure.
        with open(args.manifest, "w", encoding="utf-8", newline="\n") as f:
            write_manifest(float("nan"), err.records, f)
        raise
    with open(args.manifest, "w", encoding="utf-8", newline="\n") as f:
        write_manifest(baseline, records, f)
    log.info(
        "adaptation finished after %d iterations (baseline %.4f)", len(records), baseline
    )
    _write_manifest(
        args.manifest,
        {
            "subcommand": "adapt",
            "inputs": {"dets": args.dets, "val_gt": args.val_gt},
            "outputs": {"manifest": args.manifest},
            "iterations": len(records),
            "baseline_score": baseline,
            "wall_time_s": round(time.monotonic() - started, 3),
        },
    )
    return EXIT_OK


def cmd_report(args) -> int:
    started = time.monotonic()
    rows = []
    for item in args.runs:
        if "=" not in item:
            raise _UsageError(f"expected NAME=REPORT.csv, got {item!r}")
        name, path = item.split("=", 1)
        with open(path, encoding="utf-8") as f:
            for row in read_report_csv(f):
                rows.append({**row, "method": name})
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        write_report_csv(rows, f)
    sys.stdout.write(format_report_text(rows))
    fig_path = args.fig or str(Path(args.out).with_suffix(".png"))
    render_report_figure(rows, fig_path)
    log.info("report table: %s figure: %s", args.out, fig_path)
    _write_manifest(
        args.out,
        {
            "subcommand": "report",
            "inputs": {"runs": args.runs},
            "outputs": {"table": args.out, "figure": fig_path},
            "wall_time_s": round(time.monotonic() - started, 3),
        },
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="motpipe", description=__doc__)
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("fuse", help="fuse six per-tier detection files")
    p.add_argument("--dets-dir", required=True, help="directory with <seq>.<tier>.<orig|flip>.txt files")
    p.add_argument("--seq", required=True, help="sequence name prefix")
    p.add_argument("--image-width", type=float, required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("track", help="run the two-stage tracker on detections")
    p.add_argument("--dets", action="append", required=True, help="detection file (repeatable)")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None, help="result file (single input)")
    p.add_argument("--out-dir", default=None, help="result directory (multiple inputs)")
    p.add_argument("--no-lost-in-stage2", action="store_true", help="ablation: exclude lost tracklets from stage 2")
    p.add_argument("--jobs", type=int, default=1, help="sequences tracked in parallel")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("gsi", help="interpolate and smooth a result file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-gap", type=int, default=None)
    p.add_argument("--length-scale", type=float, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_gsi)

    p = sub.add_parser("eval", help="CLEAR-MOT evaluation of a result file")
    p.add_argument("--gt", required=True)
    p.add_argument("--result", required=True)
    p.add_argument("--report", choices=("text", "csv"), default="text")
    p.add_argument("--out", default=None, help="write report here instead of stdout")
    p.add_argument("--name", default=None, help="method label in the report")
    p.add_argument("--jobs", type=int, default=1, help="accepted for symmetry; single sequence")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="generate a synthetic scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out-gt", required=True)
    p.add_argument("--out-dets", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pseudo-label", help="threshold detections into gt-like labels")
    p.add_argument("--dets", required=True)
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pseudo_label)

    p = sub.add_parser("adapt", help="run the self-supervised adaptation loop")
    p.add_argument("--dets", required=True, help="base-model detections on the training sequence")
    p.add_argument("--val-gt", required=True)
    p.add_argument("--trainer", required=True, help="trainer command line (quoted)")
    p.add_argument("--work-dir", required=True)
    p.add_argument("--max-iterations", type=int, default=10)
    p.add_argument("--metric", default="mota")
    p.add_argument("--manifest", required=True, help="iteration manifest CSV path")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("report", help="aggregate eval reports into one table + figure")
    p.add_argument("runs", nargs="+", metavar="NAME=REPORT.csv")
    p.add_argument("--out", required=True, help="combined CSV table")
    p.add_argument("--fig", default=None, help="figure path (default: table path with .png)")
    p.set_defaults(func=cmd_report)
    return parser


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_usage(sys.stderr)
            return EXIT_VALIDATION
        _setup_logging(args.verbose)
        return args.func(args)
    except _UsageError as err:
        sys.stderr.write(f"error: {err}\n")
        parser.print_usage(sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, TrainerError) as err:
        log.error("%s", err)
        sys.stderr.write(f"error: {err}\n")
        return EXIT_VALIDATION
    except OSError as err:
        log.error("%s", err)
        sys.stderr.write(f"i/o error: {err}\n")
        return EXIT_IO


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
