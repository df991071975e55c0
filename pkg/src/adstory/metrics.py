"""Evaluation metrics and report rendering.

Climax: top-k recall under 0/1/2-second error windows, matched at whole-
second granularity. Sentiment: 11-point interpolated mAP and acc@1 under
agree-with-k ground truth (k annotators must have voted for a label).
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .vocab import N_SENTIMENTS, SENTIMENTS

CLIMAX_WINDOWS = (0, 1, 2)
CLIMAX_KS = (1, 3)
AGREEMENT_LEVELS = (1, 2, 3)
RECALL_LEVELS = [i / 10 for i in range(11)]


@dataclass
class EvalReport:
    task: str
    method: str
    grid: dict = field(default_factory=dict)   # metric name -> value
    per_class_ap: dict = field(default_factory=dict)  # level -> list of 30 (or None)
    skipped_classes: dict = field(default_factory=dict)
    n_eval: dict = field(default_factory=dict)

    def to_json(self):
        return {"schema_version": 1, "task": self.task, "method": self.method,
                "grid": self.grid, "per_class_ap": self.per_class_ap,
                "skipped_classes": self.skipped_classes, "n_eval": self.n_eval}


def climax_recall(predictions, records, k, window):
    """Fraction of annotated videos recalled by the top-k predictions.

    A video counts as correct iff some prediction lands within ``window``
    whole seconds of some accepted worker mark. Videos without accepted
    marks are excluded from the denominator.
    """
    if window not in CLIMAX_WINDOWS:
        raise ValidationError(f"window must be one of {CLIMAX_WINDOWS}")
    by_id = {r.video_id: r for r in records}
    for vid in predictions:
        if vid not in by_id:
            raise ValidationError(f"prediction for unknown video {vid!r}")
    n_eval = 0
    n_correct = 0
    for rec in records:
        marks = rec.accepted_marks()
        if not marks:
            continue
        n_eval += 1
        preds = list(predictions.get(rec.video_id, ()))[:k]
        if any(abs(int(p) - int(g)) <= window for p in preds for g in marks):
            n_correct += 1
    return n_correct / n_eval if n_eval else 0.0


def agreement_labels(records, k):
    """Per video: sentiment indices with at least k votes."""
    if k not in AGREEMENT_LEVELS:
        raise ValidationError(f"agreement level must be one of {AGREEMENT_LEVELS}")
    out = {}
    for rec in records:
        out[rec.video_id] = {
            i for i, name in enumerate(SENTIMENTS)
            if rec.sentiment_votes.get(name, 0) >= k
        }
    return out


def average_precision(scores, positives):
    """11-point interpolated AP over a descending-score ranking.

    ``scores`` maps video_id -> score; ``positives`` is the set of
    positive video_ids. Score ties break by video_id lexicographically.
    """
    if not scores:
        raise ValidationError("empty score list")
    if not positives:
        raise ValidationError("average_precision needs at least one positive")
    ranking = sorted(scores, key=lambda vid: (-scores[vid], vid))
    n_pos = len(positives)
    hits = 0
    points = []  # (recall, precision) after each rank
    for rank, vid in enumerate(ranking, start=1):
        if vid in positives:
            hits += 1
            points.append((hits / n_pos, hits / rank))
    ap = 0.0
    for level in RECALL_LEVELS:
        precisions = [p for r, p in points if r >= level - 1e-12]
        ap += max(precisions) if precisions else 0.0
    return ap / len(RECALL_LEVELS)


def sentiment_metrics(scores, video_ids, records, method="lstm"):
    """Full agree-with-k grid: mAP and acc@1 for k = 1, 2, 3.

    ``scores`` is (n_videos, 30) aligned with ``video_ids``. Classes with
    no positives at a level are skipped (and listed), not averaged as 0;
    videos with an empty label set at a level are excluded from acc@1.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (len(video_ids), N_SENTIMENTS):
        raise ValidationError(f"score matrix shape {scores.shape} != "
                              f"({len(video_ids)}, {N_SENTIMENTS})")
    if not np.isfinite(scores).all():
        raise ValidationError("scores must be finite")
    records = [r for r in records if r.video_id in set(video_ids)]
    report = EvalReport(task="sentiment", method=method)
    col = {vid: i for i, vid in enumerate(video_ids)}
    argmax = scores.argmax(axis=1)
    for k in AGREEMENT_LEVELS:
        labels = agreement_labels(records, k)
        aps = []
        per_class = []
        skipped = []
        for cls in range(N_SENTIMENTS):
            positives = {vid for vid, lab in labels.items() if cls in lab}
            if not positives:
                skipped.append(SENTIMENTS[cls])
                per_class.append(None)
                continue
            class_scores = {vid: float(scores[col[vid], cls]) for vid in labels}
            ap = average_precision(class_scores, positives)
            aps.append(ap)
            per_class.append(ap)
        n_eval = sum(1 for lab in labels.values() if lab)
        correct = sum(1 for vid, lab in labels.items()
                      if lab and argmax[col[vid]] in lab)
        report.grid[f"agree{k}/mAP"] = float(np.mean(aps)) if aps else 0.0
        report.grid[f"agree{k}/acc@1"] = correct / n_eval if n_eval else 0.0
        report.per_class_ap[str(k)] = per_class
        report.skipped_classes[str(k)] = skipped
        report.n_eval[str(k)] = n_eval
    return report


def climax_report(predictions_by_method, records):
    """Recall grid (k x window) for each prediction method."""
    report = EvalReport(task="climax", method=",".join(sorted(predictions_by_method)))
    for method, preds in predictions_by_method.items():
        for k in CLIMAX_KS:
            for w in CLIMAX_WINDOWS:
                report.grid[f"{method}/top{k}/win{w}"] = climax_recall(
                    preds, records, k, w)
    return report


def render_text(report):
    """Human-readable aligned-column table for a report grid."""
    lines = [f"task: {report.task}"]
    if report.task == "climax":
        methods = sorted({key.split("/")[0] for key in report.grid})
        cols = [f"top{k}/win{w}" for k in CLIMAX_KS for w in CLIMAX_WINDOWS]
        width = max(len(m) for m in methods) + 2
        lines.append("method".ljust(width) + "  ".join(c.rjust(9) for c in cols))
        for m in methods:
            row = [f"{report.grid[f'{m}/{c}']:9.3f}" for c in cols]
            lines.append(m.ljust(width) + "  ".join(row))
    else:
        lines.append("setting".ljust(16) + "mAP".rjust(8) + "acc@1".rjust(8) +
                     "n_eval".rjust(8))
        for k in AGREEMENT_LEVELS:
            lines.append(f"agree-with-{k}".ljust(16) +
                         f"{report.grid[f'agree{k}/mAP']:8.3f}" +
                         f"{report.grid[f'agree{k}/acc@1']:8.3f}" +
                         f"{report.n_eval.get(str(k), 0):8d}")
    return "\n".join(lines) + "\n"


def emit_report(report, json_path, text_path=None):
    with open(json_path, "w") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if text_path is not None:
        with open(text_path, "w") as fh:
            fh.write(render_text(report))


def emit_plot_csv(path, audio, shots, flow, climax_prob=None):
    """Per-second series CSV (columns: second, audio, shots, flow, climax_prob)."""
    n = len(audio.values)
    if climax_prob is None:
        climax_prob = [""] * n
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["second", "audio", "shots", "flow", "climax_prob"])
        for s in range(n):
            writer.writerow([s, repr(float(audio.values[s])),
                             repr(float(shots.values[s])),
                             repr(float(flow.values[s])),
                             climax_prob[s] if climax_prob[s] == "" else repr(float(climax_prob[s]))])
