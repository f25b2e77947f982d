"""Evaluation: ranked-list precision/recall/F1 at k, accuracy, per-class F1.

recall_at_k follows the dataset's published convention verbatim: when the
true set is smaller than k the denominator is k, otherwise it is the true
set size.  That differs from the usual min(k, |true|) denominator; pass
conventional=True for the usual form (off by default, cross-paper
comparison only).
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .dataset import Necessity

logger = logging.getLogger(__name__)

DEFAULT_K_SET = (3, 5, 10)


@dataclass
class MetricsReport:
    per_k: dict[int, dict[str, float]]
    accuracy: float
    f1_necessary: float
    f1_unnecessary: float
    n_requests: int
    fold_id: Optional[int] = None

    def to_payload(self) -> dict:
        return {
            "per_k": {
                str(k): {m: v for m, v in sorted(vals.items())}
                for k, vals in sorted(self.per_k.items())
            },
            "accuracy": self.accuracy,
            "f1_necessary": self.f1_necessary,
            "f1_unnecessary": self.f1_unnecessary,
            "n_requests": self.n_requests,
            "fold_id": self.fold_id,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "MetricsReport":
        return cls(
            per_k={int(k): dict(v) for k, v in payload["per_k"].items()},
            accuracy=payload["accuracy"],
            f1_necessary=payload["f1_necessary"],
            f1_unnecessary=payload["f1_unnecessary"],
            n_requests=payload["n_requests"],
            fold_id=payload.get("fold_id"),
        )


def precision_at_k(true_tags: set, predicted: Sequence, k: int) -> float:
    """Hits among the first k predictions, divided by k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    hits = len(set(predicted[:k]) & set(true_tags))
    return hits / k


def recall_at_k(
    true_tags: set, predicted: Sequence, k: int, conventional: bool = False
) -> float:
    """Hits over k when |true| < k, otherwise hits over |true| (verbatim rule)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not true_tags:
        raise ValueError("recall undefined for empty true tag set")
    hits = len(set(predicted[:k]) & set(true_tags))
    if conventional:
        return hits / min(k, len(true_tags))
    if len(true_tags) < k:
        return hits / k
    return hits / len(true_tags)


def f1_at_k(p: float, r: float) -> float:
    """Harmonic mean; 0 when both inputs are 0."""
    if p + r == 0:
        return 0.0
    return 2.0 * p * r / (p + r)


def corpus_average(values: Sequence[float]) -> float:
    if len(values) == 0:
        raise ValueError("cannot average an empty list")
    # fsum: correctly rounded, so the mean is invariant to sample order
    return math.fsum(values) / len(values)


def classification_metrics(
    gold: Sequence[Necessity], predicted: Sequence[Necessity]
) -> dict[str, float]:
    """Accuracy plus one-vs-rest F1 for each necessity class."""
    if len(gold) != len(predicted):
        raise ValueError(f"length mismatch: {len(gold)} gold vs {len(predicted)} predicted")
    if not gold:
        raise ValueError("empty inputs")
    correct = sum(1 for g, p in zip(gold, predicted) if g == p)
    out = {"accuracy": correct / len(gold)}
    for cls, name in (
        (Necessity.NECESSARY, "f1_necessary"),
        (Necessity.UNNECESSARY, "f1_unnecessary"),
    ):
        tp = sum(1 for g, p in zip(gold, predicted) if g == cls and p == cls)
        fp = sum(1 for g, p in zip(gold, predicted) if g != cls and p == cls)
        fn = sum(1 for g, p in zip(gold, predicted) if g == cls and p != cls)
        if tp + fp + fn == 0:
            logger.warning("class %s absent from gold and predictions; F1 set to 0", cls.value)
            out[name] = 0.0
            continue
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        out[name] = f1_at_k(prec, rec)
    return out


@dataclass(frozen=True)
class EvalSample:
    true_tags: frozenset
    predicted_tags: tuple
    gold_necessity: Necessity
    predicted_necessity: Necessity


def evaluate_samples(
    samples: list[EvalSample],
    k_set: Sequence[int] = DEFAULT_K_SET,
    conventional_recall: bool = False,
    fold_id: Optional[int] = None,
) -> MetricsReport:
    if not samples:
        raise ValueError("no samples to evaluate")
    per_k = {}
    for k in k_set:
        precisions = [precision_at_k(s.true_tags, s.predicted_tags, k) for s in samples]
        recalls = [
            recall_at_k(s.true_tags, s.predicted_tags, k, conventional_recall)
            for s in samples
        ]
        f1s = [f1_at_k(p, r) for p, r in zip(precisions, recalls)]
        per_k[k] = {
            "precision": corpus_average(precisions),
            "recall": corpus_average(recalls),
            "f1": corpus_average(f1s),
        }
    cls = classification_metrics(
        [s.gold_necessity for s in samples], [s.predicted_necessity for s in samples]
    )
    return MetricsReport(
        per_k=per_k,
        accuracy=cls["accuracy"],
        f1_necessary=cls["f1_necessary"],
        f1_unnecessary=cls["f1_unnecessary"],
        n_requests=len(samples),
        fold_id=fold_id,
    )


class CrossValidationError(RuntimeError):
    """A fold failed; completed fold reports are preserved on the error."""

    def __init__(self, fold_id: int, cause: Exception, partial: list[MetricsReport]):
        super().__init__(f"fold {fold_id} failed: {cause}")
        self.fold_id = fold_id
        self.partial = partial


def mean_report(reports: list[MetricsReport]) -> MetricsReport:
    """Unweighted mean across folds; request counts sum."""
    if not reports:
        raise ValueError("no reports to average")
    ks = sorted(reports[0].per_k)
    per_k = {
        k: {
            m: corpus_average([r.per_k[k][m] for r in reports])
            for m in ("precision", "recall", "f1")
        }
        for k in ks
    }
    return MetricsReport(
        per_k=per_k,
        accuracy=corpus_average([r.accuracy for r in reports]),
        f1_necessary=corpus_average([r.f1_necessary for r in reports]),
        f1_unnecessary=corpus_average([r.f1_unnecessary for r in reports]),
        n_requests=sum(r.n_requests for r in reports),
        fold_id=None,
    )


def cross_validate(
    fold_splits: list[tuple[list[int], list[int], list[int]]],
    fold_runner: Callable[[int, tuple[list[int], list[int], list[int]]], MetricsReport],
) -> tuple[list[MetricsReport], MetricsReport]:
    """Run every fold through the supplied trainer/evaluator and average."""
    reports: list[MetricsReport] = []
    for fold_id, split in enumerate(fold_splits):
        try:
            report = fold_runner(fold_id, split)
        except Exception as exc:
            raise CrossValidationError(fold_id, exc, reports) from exc
        reports.append(report)
    return reports, mean_report(reports)


def render_table(report: MetricsReport) -> str:
    """Plain-text result table (one row per k, then the necessity block)."""
    lines = ["k    precision  recall     f1"]
    for k in sorted(report.per_k):
        vals = report.per_k[k]
        lines.append(
            f"@{k:<4}{vals['precision']:<11.3f}{vals['recall']:<11.3f}{vals['f1']:.3f}"
        )
    lines.append("")
    lines.append(f"accuracy        {report.accuracy:.3f}")
    lines.append(f"f1 necessary    {report.f1_necessary:.3f}")
    lines.append(f"f1 unnecessary  {report.f1_unnecessary:.3f}")
    lines.append(f"requests        {report.n_requests}")
    return "\n".join(lines)
