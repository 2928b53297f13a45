"""Self-supervised adaptation loop: pseudo-labels, external training, stop rule.

Each iteration filters the current model's detections at an
iteration-dependent confidence threshold (0.5 for the first iteration, 0.1
afterwards) into pseudo bounding-box labels, hands them to an external
trainer command, re-tracks the trainer's fresh detections, and validates
against held ground truth. The loop stops as soon as the validation score
fails to improve on the best score seen so far, the baseline included.

Trainer contract: invoked as ``<cmd> --labels <dir> --epochs <N> --out <dir>``
with the iteration index in the ``ADAPT_ITERATION`` environment variable. It
must write a detection file named ``dets.txt`` (MOTChallenge det format) for
the validation sequence into the output directory and exit 0. Detector
training itself is entirely external to this package; the epoch counts
(40 then 20) are recorded in the manifest and passed through.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Literal, Sequence

from .evaluation import evaluate
from .mot_io import Detection, PipelineConfig, parse_detections, parse_ground_truth
from .tracker import run_sequence

log = logging.getLogger(__name__)

INITIAL_THRESHOLD = 0.5
LATER_THRESHOLD = 0.1
INITIAL_EPOCHS = 40
LATER_EPOCHS = 20

TRAINER_OUTPUT_NAME = "dets.txt"
ITERATION_ENV_VAR = "ADAPT_ITERATION"

Verdict = Literal["continue", "stop", "failed"]


class TrainerError(RuntimeError):
    """External trainer failed or violated its output contract."""

    def __init__(self, message: str, records: list["IterationRecord"] | None = None):
        super().__init__(message)
        self.records = records if records is not None else []


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    threshold: float
    epochs: int
    pseudo_label_count: int
    validation_score: float
    verdict: Verdict


@dataclass
class LoopConfig:
    """Paths and knobs for one adaptation run.

    `initial_dets` are the base model's detections on the unlabeled training
    sequence, which doubles as the validation sequence (scored against
    `val_gt`). The metric knob currently supports 'mota' (reported x100).
    """

    initial_dets: Path
    val_gt: Path
    trainer_cmd: Sequence[str]
    work_dir: Path
    tracker_cfg: PipelineConfig = field(default_factory=PipelineConfig)
    metric: str = "mota"
    min_delta: float = 0.0
    initial_threshold: float = INITIAL_THRESHOLD
    later_threshold: float = LATER_THRESHOLD


def generate_pseudo_labels(
    dets: dict[int, list[Detection]], threshold: float
) -> dict[int, list[Detection]]:
    """Keep exactly the detections with score >= threshold, per frame."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    return {frame: [d for d in ds if d.score >= threshold] for frame, ds in dets.items()}


def count_labels(labels: dict[int, list[Detection]]) -> int:
    return sum(len(v) for v in labels.values())


def write_pseudo_labels(labels: dict[int, list[Detection]], sink: IO[str]) -> None:
    """Emit pseudo-labels in gt-like format with sequential per-frame ids."""
    for frame in sorted(labels):
        for i, d in enumerate(labels[frame], start=1):
            b = d.bbox
            sink.write(
                f"{frame},{i},{b.x:.2f},{b.y:.2f},{b.w:.2f},{b.h:.2f},1,1,1.00\n"
            )


def decide_stop(
    history: Sequence[IterationRecord],
    new_score: float,
    *,
    baseline: float | None = None,
    min_delta: float = 0.0,
) -> Verdict:
    """Continue only on strict improvement over every score seen so far."""
    prev = [r.validation_score for r in history]
    if baseline is not None:
        prev.append(baseline)
    if not prev:
        return "continue"
    return "continue" if new_score > max(prev) + min_delta else "stop"


def _validation_score(dets: dict[int, list[Detection]], loop: LoopConfig, gt) -> float:
    result = run_sequence(dets, loop.tracker_cfg, name="adapt-val")
    report = evaluate(gt, result)
    if loop.metric == "mota":
        return report.mota_pct
    raise ValueError(f"unsupported validation metric {loop.metric!r}")


def _iteration_schedule(loop: LoopConfig, iteration: int) -> tuple[float, int]:
    if iteration == 0:
        return loop.initial_threshold, INITIAL_EPOCHS
    return loop.later_threshold, LATER_EPOCHS


def run_loop(loop: LoopConfig, max_iterations: int) -> tuple[float, list[IterationRecord]]:
    """Run the adaptation loop; returns (baseline score, iteration records).

    The trainer is never invoked after a stop verdict and at most
    `max_iterations` times. A trainer failure aborts the loop with the
    iteration recorded as failed.
    """
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    work = Path(loop.work_dir)
    work.mkdir(parents=True, exist_ok=True)
    with open(loop.val_gt, encoding="utf-8") as f:
        gt = parse_ground_truth(f)
    with open(loop.initial_dets, encoding="utf-8") as f:
        current_dets = parse_detections(f)

    baseline = _validation_score(current_dets, loop, gt)
    log.info("baseline validation score: %.4f", baseline)

    records: list[IterationRecord] = []
    for iteration in range(max_iterations):
        threshold, epochs = _iteration_schedule(loop, iteration)
        labels = generate_pseudo_labels(current_dets, threshold)
        label_count = count_labels(labels)

        iter_dir = work / f"iter{iteration:02d}"
        labels_dir = iter_dir / "labels"
        out_dir = iter_dir / "out"
        labels_dir.mkdir(parents=True, exist_ok=True)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(labels_dir / "pseudo.txt", "w", encoding="utf-8", newline="\n") as f:
            write_pseudo_labels(labels, f)

        cmd = [
            *loop.trainer_cmd,
            "--labels",
            str(labels_dir),
            "--epochs",
            str(epochs),
            "--out",
            str(out_dir),
        ]
        env = dict(os.environ, **{ITERATION_ENV_VAR: str(iteration)})
        log.info("iteration %d: threshold=%.2f epochs=%d labels=%d", iteration, threshold, epochs, label_count)
        proc = subprocess.run(cmd, env=env)
        out_file = out_dir / TRAINER_OUTPUT_NAME
        if proc.returncode != 0 or not out_file.exists():
            records.append(
                IterationRecord(iteration, threshold, epochs, label_count, math.nan, "failed")
            )
            reason = (
                f"exit status {proc.returncode}"
                if proc.returncode != 0
                else f"missing output {out_file}"
            )
            raise TrainerError(f"trainer failed at iteration {iteration}: {reason}", records)

        with open(out_file, encoding="utf-8") as f:
            current_dets = parse_detections(f)
        score = _validation_score(current_dets, loop, gt)
        verdict = decide_stop(records, score, baseline=baseline, min_delta=loop.min_delta)
        records.append(
            IterationRecord(iteration, threshold, epochs, label_count, score, verdict)
        )
        log.info("iteration %d: score=%.4f verdict=%s", iteration, score, verdict)
        if verdict == "stop":
            break
    return baseline, records


def write_manifest(baseline: float, records: Sequence[IterationRecord], sink: IO[str]) -> None:
    """One CSV line per iteration, preceded by a baseline row."""
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["iter", "threshold", "epochs", "label_count", "score", "verdict"])
    writer.writerow(["baseline", "", "", "", f"{baseline:.4f}", ""])
    for r in records:
        score = "" if math.isnan(r.validation_score) else f"{r.validation_score:.4f}"
        writer.writerow(
            [r.iteration, f"{r.threshold:.2f}", r.epochs, r.pseudo_label_count, score, r.verdict]
        )
