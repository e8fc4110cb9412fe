"""Evaluation of stage predictions: accuracy, macro F1, confusion.

Macro F1 averages per-class F1 over *all* catalog classes, not only the
classes present in the truth sequence, so a predictor that never sees a
rare stage is penalized for it. Division-by-zero cases (a class never
predicted or never present) contribute an F1 of 0. Timeliness is
reported as the configured sliding-window size, the number of events a
predictor must accumulate before it can speak.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .errors import EmptyInput, LengthMismatch, NoOverlap
from .events import LabeledTrace, Prediction, StageCatalog

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    macro_f1: float
    confusion: tuple[tuple[int, ...], ...]  # confusion[truth][pred]
    per_class_f1: tuple[float, ...]
    n: int
    timeliness: int | None = None
    training_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "confusion": [list(row) for row in self.confusion],
            "per_class_f1": list(self.per_class_f1),
            "n": self.n,
            "timeliness": self.timeliness,
            "training_seconds": self.training_seconds,
        }

    def to_text(self) -> str:
        lines = [
            f"n {self.n}",
            f"accuracy {self.accuracy:.6f}",
            f"macro_f1 {self.macro_f1:.6f}",
        ]
        if self.timeliness is not None:
            lines.append(f"timeliness {self.timeliness}")
        lines.append(f"training_seconds {self.training_seconds:.3f}")
        for i, f1 in enumerate(self.per_class_f1):
            lines.append(f"f1_class_{i} {f1:.6f}")
        return "\n".join(lines)


def evaluate(
    predictions: list[int],
    truths: list[int],
    catalog: StageCatalog,
    timeliness: int | None = None,
    training_seconds: float = 0.0,
) -> EvalReport:
    """Score predicted stage ids against ground truth."""
    if len(predictions) != len(truths):
        raise LengthMismatch(
            f"{len(predictions)} predictions vs {len(truths)} truths"
        )
    if not predictions:
        raise EmptyInput("nothing to evaluate")
    s = len(catalog)
    for seq, what in ((predictions, "prediction"), (truths, "truth")):
        for v in seq:
            if not 0 <= v < s:
                raise ValueError(f"{what} stage id {v} outside catalog of size {s}")

    confusion = [[0] * s for _ in range(s)]
    for t, p in zip(truths, predictions):
        confusion[t][p] += 1
    n = len(truths)
    correct = sum(confusion[i][i] for i in range(s))

    per_class_f1 = []
    for c in range(s):
        tp = confusion[c][c]
        predicted = sum(confusion[t][c] for t in range(s))
        actual = sum(confusion[c])
        precision = tp / predicted if predicted else 0.0
        recall = tp / actual if actual else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class_f1.append(f1)

    return EvalReport(
        accuracy=correct / n,
        macro_f1=sum(per_class_f1) / s,
        confusion=tuple(tuple(row) for row in confusion),
        per_class_f1=tuple(per_class_f1),
        n=n,
        timeliness=timeliness,
        training_seconds=training_seconds,
    )


def align_predictions(
    predictions: list[Prediction], trace: LabeledTrace
) -> tuple[list[int], list[int]]:
    """Pair each prediction with the stage active at its timestamp.

    The truth for a prediction is the label of the latest trace event
    at or before the prediction's timestamp; predictions earlier than
    the first labeled event are dropped.
    """
    labeled = [(ev.ts, ev.label) for ev in trace.events if ev.label is not None]
    pred_ids: list[int] = []
    truth_ids: list[int] = []
    dropped = 0
    i = -1
    for pred in predictions:
        while i + 1 < len(labeled) and labeled[i + 1][0] <= pred.ts:
            i += 1
        if i < 0:
            dropped += 1
            continue
        pred_ids.append(pred.stage)
        truth_ids.append(labeled[i][1])
    if dropped:
        log.warning("dropped %d predictions before the first labeled event", dropped)
    if not pred_ids:
        raise NoOverlap("no prediction aligned with any labeled event")
    return pred_ids, truth_ids
