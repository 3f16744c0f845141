"""Micro-averaged metrics, probability-averaging ensembles, paired
significance testing, and report emission."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from scipy import stats

from .errors import (
    CoverageError,
    EnsembleError,
    EvaluationError,
    ReportError,
)
from .model import Prediction

SIGNIFICANCE_LEVEL = 0.05
SIGNIFICANCE_MARKERS = ("*", "†")  # second comparison gets the dagger

# How F1 pairs are formed for the significance test; recorded in every report.
PAIRING_NOTE = (
    "paired one-tailed t-test over per-fold F1 scores within each seed, "
    "paired across architectures and pooled over seeds"
)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise EvaluationError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fp + other.fp,
            self.fn + other.fn, self.tn + other.tn,
        )


def confusion_counts(golds, predicted) -> ConfusionCounts:
    if len(golds) != len(predicted):
        raise EvaluationError(
            f"gold and predicted lengths differ: {len(golds)} vs {len(predicted)}"
        )
    tp = fp = fn = tn = 0
    for g, p in zip(golds, predicted):
        if g not in (0, 1) or p not in (0, 1):
            raise EvaluationError(f"labels must be binary, got gold={g!r} pred={p!r}")
        if p == 1 and g == 1:
            tp += 1
        elif p == 1 and g == 0:
            fp += 1
        elif p == 0 and g == 1:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


def prf(counts: ConfusionCounts) -> tuple[float, float, float]:
    """Precision, recall, F1 in [0, 1]; 0 whenever a denominator is 0."""
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def micro_average(
    predictions: list[Prediction], gold: dict[str, int]
) -> tuple[float, float, float]:
    """Pool confusion counts over all folds, then compute P/R/F1 once.

    Every gold instance must be scored exactly once across the pooled
    predictions; anything else is a coverage error, not a silent skip.
    """
    seen: set[str] = set()
    for pred in predictions:
        if pred.instance_id in seen:
            raise CoverageError(f"instance {pred.instance_id!r} scored more than once")
        if pred.instance_id not in gold:
            raise CoverageError(f"instance {pred.instance_id!r} has no gold label")
        seen.add(pred.instance_id)
    missing = gold.keys() - seen
    if missing:
        raise CoverageError(
            f"{len(missing)} instances never scored, e.g. {sorted(missing)[:3]}"
        )
    golds = [gold[p.instance_id] for p in predictions]
    labels = [p.predicted_label for p in predictions]
    return prf(confusion_counts(golds, labels))


def ensemble(
    member_predictions: list[list[Prediction]], model_tag: str | None = None
) -> list[Prediction]:
    """Probability-averaging ensemble over models scoring identical instances."""
    if not member_predictions:
        raise EnsembleError("ensemble needs at least one member")
    by_member = []
    reference = None
    for member in member_predictions:
        table = {p.instance_id: p for p in member}
        if len(table) != len(member):
            raise EnsembleError("a member scored some instance twice")
        if reference is None:
            reference = set(table)
        elif set(table) != reference:
            raise EnsembleError("ensemble members scored different instance sets")
        by_member.append(table)
    n = len(by_member)
    tag = model_tag or f"ens{n}"
    combined = []
    for pred in member_predictions[0]:
        # shifted mean: identical members average to exactly their own value
        first = pred.probability
        mean_prob = first + math.fsum(
            m[pred.instance_id].probability - first for m in by_member
        ) / n
        combined.append(Prediction.from_probability(pred.instance_id, mean_prob, tag))
    return combined


@dataclass(frozen=True)
class TTestResult:
    t: float
    p_value: float
    significant: bool
    degenerate: bool = False  # zero variance of the paired differences


def paired_ttest(scores_a, scores_b, alpha: float = SIGNIFICANCE_LEVEL) -> TTestResult:
    """One-tailed paired t-test of the hypothesis mean(a - b) > 0."""
    if len(scores_a) != len(scores_b):
        raise EvaluationError("paired score lists must have equal length")
    n = len(scores_a)
    if n < 2:
        raise EvaluationError(f"need at least 2 pairs, got {n}")
    diffs = [a - b for a, b in zip(scores_a, scores_b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        if mean > 0:
            return TTestResult(math.inf, 0.0, True, degenerate=True)
        if mean < 0:
            return TTestResult(-math.inf, 1.0, False, degenerate=True)
        return TTestResult(0.0, 0.5, False, degenerate=True)
    t = mean / math.sqrt(var / n)
    p = float(stats.t.sf(t, df=n - 1))
    return TTestResult(t, p, p < alpha)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Comparison:
    baseline: str
    t: float
    p_value: float
    significant: bool

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ReportError(f"p-value {self.p_value} outside [0, 1]")


@dataclass
class RunReport:
    """Pooled metrics for one (dataset, protocol, architecture) cell.

    Metrics are percentages: per-seed values are micro-averages over the fold
    grid; mean_metrics is their arithmetic mean over seeds.
    """

    dataset: str
    protocol: str
    architecture: str
    per_seed: dict[int, tuple[float, float, float]]
    mean_metrics: tuple[float, float, float]
    comparisons: list[Comparison] = field(default_factory=list)
    ensemble_size: int | None = None
    pairing_note: str = PAIRING_NOTE

    def __post_init__(self):
        for seed, metrics in self.per_seed.items():
            for value in metrics:
                if not 0.0 <= value <= 100.0:
                    raise ReportError(f"metric {value} out of [0, 100] for seed {seed}")
        for value in self.mean_metrics:
            if not 0.0 <= value <= 100.0:
                raise ReportError(f"mean metric {value} out of [0, 100]")

    def markers(self) -> str:
        flags = ""
        for comparison, marker in zip(self.comparisons, SIGNIFICANCE_MARKERS):
            if comparison.significant:
                flags += marker
        return flags

    def table_row(self) -> str:
        p, r, f1 = self.mean_metrics
        name = self.architecture
        if self.ensemble_size:
            name = f"{name}-ens({self.ensemble_size})"
        return f"{name} {p:.1f} {r:.1f} {f1:.1f}{self.markers()}"

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "protocol": self.protocol,
            "architecture": self.architecture,
            "ensemble_size": self.ensemble_size,
            "per_seed": {str(s): list(m) for s, m in self.per_seed.items()},
            "mean_metrics": list(self.mean_metrics),
            "comparisons": [
                {"baseline": c.baseline, "t": c.t, "p_value": c.p_value,
                 "significant": c.significant}
                for c in self.comparisons
            ],
            "pairing_note": self.pairing_note,
        }


def aggregate_by_seed(
    predictions_by_seed: dict[int, list[Prediction]], gold: dict[str, int]
) -> tuple[dict[int, tuple[float, float, float]], tuple[float, float, float]]:
    """Micro-average per seed (over its pooled folds), then mean over seeds.

    Returns percentages, matching the reporting convention.
    """
    if not predictions_by_seed:
        raise EvaluationError("no predictions to aggregate")
    per_seed = {}
    for seed, preds in sorted(predictions_by_seed.items()):
        p, r, f1 = micro_average(preds, gold)
        per_seed[seed] = (100.0 * p, 100.0 * r, 100.0 * f1)
    n = len(per_seed)
    mean = tuple(sum(m[i] for m in per_seed.values()) / n for i in range(3))
    return per_seed, mean


def per_fold_f1(
    predictions_by_fold: dict[int, list[Prediction]], gold: dict[str, int]
) -> dict[int, float]:
    """F1 of each fold's own test predictions; pairing unit for the t-test."""
    scores = {}
    for fold, preds in sorted(predictions_by_fold.items()):
        golds = []
        labels = []
        for pred in preds:
            if pred.instance_id not in gold:
                raise CoverageError(f"instance {pred.instance_id!r} has no gold label")
            golds.append(gold[pred.instance_id])
            labels.append(pred.predicted_label)
        _, _, f1 = prf(confusion_counts(golds, labels))
        scores[fold] = f1
    return scores


def emit_report(report: RunReport, out_dir: str | Path) -> tuple[Path, Path]:
    """Write the machine-readable report and an aligned-text table."""
    if not report.per_seed:
        raise ReportError("refusing to emit an empty report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{report.dataset}_{report.protocol}_{report.architecture}".lower()
    if report.ensemble_size:
        stem += f"_ens{report.ensemble_size}"
    json_path = out_dir / f"{stem}.json"
    text_path = out_dir / f"{stem}.txt"
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    lines = [
        f"dataset: {report.dataset}  protocol: {report.protocol}",
        "model prec rec f1",
        report.table_row(),
    ]
    if report.comparisons:
        for comparison, marker in zip(report.comparisons, SIGNIFICANCE_MARKERS):
            verdict = "significant" if comparison.significant else "not significant"
            lines.append(
                f"{marker} vs {comparison.baseline}: t={comparison.t:.3f} "
                f"p={comparison.p_value:.4f} ({verdict})"
            )
        lines.append(f"pairing: {report.pairing_note}")
    with open(text_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return json_path, text_path


def render_table(reports: list[RunReport]) -> str:
    """One aligned table over several architectures of the same protocol."""
    if not reports:
        raise ReportError("no reports to render")
    rows = [r.table_row().split(" ") for r in reports]
    widths = [max(len(row[col]) for row in rows) for col in range(4)]
    header = ["model", "prec", "rec", "f1"]
    widths = [max(w, len(h)) for w, h in zip(widths, header)]
    out = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    for row in rows:
        out.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
    return "\n".join(out)


# ---------------------------------------------------------------------------
# Predictions files: line-delimited instance_id, gold, probability, label, tag
# ---------------------------------------------------------------------------


def save_predictions(
    predictions: list[Prediction], gold: dict[str, int], path: str | Path
) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for pred in predictions:
            if pred.instance_id not in gold:
                raise CoverageError(f"no gold label for {pred.instance_id!r}")
            fh.write(
                f"{pred.instance_id}\t{gold[pred.instance_id]}\t"
                f"{pred.probability!r}\t{pred.predicted_label}\t{pred.model_tag}\n"
            )


def load_predictions(path: str | Path) -> tuple[list[Prediction], dict[str, int]]:
    predictions = []
    gold: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise EvaluationError(f"{path}:{line_no}: expected 5 fields")
            instance_id, gold_label, prob, label, tag = parts
            predictions.append(Prediction(
                instance_id=instance_id,
                probability=float(prob),
                predicted_label=int(label),
                model_tag=tag,
            ))
            gold[instance_id] = int(gold_label)
    if not predictions:
        raise EvaluationError(f"empty predictions file: {path}")
    return predictions, gold
