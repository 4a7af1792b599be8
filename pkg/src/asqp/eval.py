"""Strict-match scoring with implicitness breakdown and error typing.

A prediction counts only when all four elements equal the gold exactly:
token-index spans, categories as strings, None matching only None. Scoring
is micro over the corpus: true-positive/predicted/gold counts are summed
across samples before the ratios are taken.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .core import Quadruple, Span
from .data import IMPLICITNESS_CLASSES

ERROR_TYPES = ("category", "aspect", "opinion", "sentiment")


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    tp: int
    n_pred: int
    n_gold: int

    @staticmethod
    def from_counts(tp: int, n_pred: int, n_gold: int) -> "Metrics":
        precision = tp / n_pred if n_pred else 0.0
        recall = tp / n_gold if n_gold else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return Metrics(precision, recall, f1, tp, n_pred, n_gold)

    def to_json(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "n_pred": self.n_pred,
            "n_gold": self.n_gold,
        }


def match_count(pred: list[Quadruple], gold: list[Quadruple]) -> int:
    """Exact-match multiset intersection; duplicate predictions cannot claim
    one gold quad twice."""
    overlap = Counter(pred) & Counter(gold)
    return sum(overlap.values())


def strict_quad_prf(pred: list[Quadruple], gold: list[Quadruple]) -> Metrics:
    return Metrics.from_counts(match_count(pred, gold), len(pred), len(gold))


def corpus_prf(
    pred_lists: list[list[Quadruple]], gold_lists: list[list[Quadruple]]
) -> Metrics:
    """Micro scores over parallel per-sample prediction/gold lists."""
    if len(pred_lists) != len(gold_lists):
        raise ValueError("prediction and gold sample counts differ")
    tp = n_pred = n_gold = 0
    for pred, gold in zip(pred_lists, gold_lists):
        tp += match_count(pred, gold)
        n_pred += len(pred)
        n_gold += len(gold)
    return Metrics.from_counts(tp, n_pred, n_gold)


@dataclass
class BreakdownReport:
    """Metrics per implicitness class; each side is bucketed by its own class."""

    per_class: dict[str, Metrics]

    def to_json(self) -> dict:
        return {cls: m.to_json() for cls, m in self.per_class.items()}


def breakdown_by_implicitness(
    pred: list[Quadruple], gold: list[Quadruple]
) -> BreakdownReport:
    return corpus_breakdown([pred], [gold])


def corpus_breakdown(
    pred_lists: list[list[Quadruple]], gold_lists: list[list[Quadruple]]
) -> BreakdownReport:
    per_class = {}
    for cls in IMPLICITNESS_CLASSES:
        per_class[cls] = corpus_prf(
            [[q for q in pred if q.implicitness == cls] for pred in pred_lists],
            [[q for q in gold if q.implicitness == cls] for gold in gold_lists],
        )
    return BreakdownReport(per_class)


@dataclass
class ErrorReport:
    """Counts of which element each wrong prediction got wrong first."""

    counts: dict[str, int] = field(default_factory=lambda: {t: 0 for t in ERROR_TYPES})
    exemplars: dict[str, list[dict]] = field(
        default_factory=lambda: {t: [] for t in ERROR_TYPES}
    )

    def total(self) -> int:
        return sum(self.counts.values())

    def percentages(self) -> dict[str, float]:
        total = self.total()
        if not total:
            return {t: 0.0 for t in ERROR_TYPES}
        return {t: 100.0 * c / total for t, c in self.counts.items()}

    def merge(self, other: "ErrorReport", exemplar_cap: int) -> None:
        for error_type in ERROR_TYPES:
            self.counts[error_type] += other.counts[error_type]
            room = exemplar_cap - len(self.exemplars[error_type])
            if room > 0:
                self.exemplars[error_type].extend(other.exemplars[error_type][:room])

    def to_json(self) -> dict:
        return {
            "counts": self.counts,
            "percentages": self.percentages(),
            "exemplars": self.exemplars,
        }


def _span_json(span: Span | None):
    return None if span is None else [span.start, span.end]


def _quad_json(quad: Quadruple) -> dict:
    return {
        "category": quad.category,
        "aspect": _span_json(quad.aspect),
        "opinion": _span_json(quad.opinion),
        "sentiment": quad.sentiment.value,
    }


def _agreement(pred: Quadruple, gold: Quadruple) -> tuple[int, bool, bool, bool]:
    aspect_eq = pred.aspect == gold.aspect
    opinion_eq = pred.opinion == gold.opinion
    category_eq = pred.category == gold.category
    sentiment_eq = pred.sentiment == gold.sentiment
    score = int(aspect_eq) + int(opinion_eq) + int(category_eq) + int(sentiment_eq)
    return score, aspect_eq, opinion_eq, category_eq


def error_analysis(
    pred: list[Quadruple], gold: list[Quadruple], exemplar_cap: int = 5
) -> ErrorReport:
    """Attribute every unmatched prediction to its first wrong element.

    The reference gold quad is the one with the most equal elements, ties
    preferring aspect match, then opinion, then category. A prediction that
    agrees with nothing is filed as an aspect error.
    """
    report = ErrorReport()
    remaining = Counter(gold)
    for quad in pred:
        if remaining[quad] > 0:
            remaining[quad] -= 1
            continue
        best = None
        best_key = None
        for candidate in gold:
            key = _agreement(quad, candidate)
            if best_key is None or key > best_key:
                best, best_key = candidate, key
        if best is None or best_key[0] == 0:
            error_type = "aspect"
            reference = None
        else:
            if quad.category != best.category:
                error_type = "category"
            elif quad.aspect != best.aspect:
                error_type = "aspect"
            elif quad.opinion != best.opinion:
                error_type = "opinion"
            else:
                error_type = "sentiment"
            reference = best
        report.counts[error_type] += 1
        if len(report.exemplars[error_type]) < exemplar_cap:
            report.exemplars[error_type].append(
                {
                    "pred": _quad_json(quad),
                    "gold": None if reference is None else _quad_json(reference),
                }
            )
    return report


def corpus_error_analysis(
    pred_lists: list[list[Quadruple]],
    gold_lists: list[list[Quadruple]],
    exemplar_cap: int = 5,
) -> ErrorReport:
    report = ErrorReport()
    for pred, gold in zip(pred_lists, gold_lists):
        report.merge(error_analysis(pred, gold, exemplar_cap), exemplar_cap)
    return report
