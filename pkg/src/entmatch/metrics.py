"""Precision/recall/F1 under the eight entity-level scoring conventions.

Prediction-side and gold-side true positives are tracked separately:
``precision = tp_pred / (tp_pred + fp)`` and ``recall = tp_gold /
(tp_gold + fn)``, with 0/0 defined as 0. A gold mention earns gold-side
credit when any of its records is credited by the convention, so a single
gold split across several accepted Type-5 predictions counts once.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Mapping

from .classifier import Decision, Verdict
from .matcher import MatchRecord, MatchReport, MismatchType


class Convention(Enum):
    EXACT = "exact"
    RELAXED = "relaxed"
    SEMEVAL_STRICT = "semeval_strict"
    SEMEVAL_EXACT_BOUNDARY = "semeval_exact_boundary"
    SEMEVAL_PARTIAL_BOUNDARY = "semeval_partial_boundary"
    SEMEVAL_TYPE = "semeval_type"
    LEARNING_BASED = "learning_based"
    HUMAN_STRICT = "human_strict"
    HUMAN_FORGIVING = "human_forgiving"


class UncoveredRecordsError(ValueError):
    """A Type-5 record lacks the decision or judgement it needs."""

    def __init__(self, record_ids: Iterable[str]):
        self.record_ids = tuple(record_ids)
        super().__init__(
            "no decision for Type-5 records: " + ", ".join(self.record_ids)
        )


@dataclass(frozen=True)
class PRF:
    convention: Convention
    tp_pred: int
    tp_gold: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(
        cls, convention: Convention, tp_pred: int, tp_gold: int, fp: int, fn: int
    ) -> "PRF":
        precision = tp_pred / (tp_pred + fp) if tp_pred + fp else 0.0
        recall = tp_gold / (tp_gold + fn) if tp_gold + fn else 0.0
        f1 = (
            2.0 * precision * recall / (precision + recall)
            if precision + recall
            else 0.0
        )
        return cls(convention, tp_pred, tp_gold, fp, fn, precision, recall, f1)


_CREDIT_KINDS: dict[Convention, frozenset[MismatchType]] = {
    Convention.EXACT: frozenset({MismatchType.EXACT_MATCH}),
    Convention.RELAXED: frozenset(
        {MismatchType.EXACT_MATCH, MismatchType.TYPE5_RIGHT_LABEL_OVERLAP}
    ),
    Convention.SEMEVAL_STRICT: frozenset({MismatchType.EXACT_MATCH}),
    Convention.SEMEVAL_EXACT_BOUNDARY: frozenset(
        {MismatchType.EXACT_MATCH, MismatchType.TYPE3_WRONG_LABEL_RIGHT_SPAN}
    ),
    Convention.SEMEVAL_PARTIAL_BOUNDARY: frozenset(
        {
            MismatchType.EXACT_MATCH,
            MismatchType.TYPE3_WRONG_LABEL_RIGHT_SPAN,
            MismatchType.TYPE4_WRONG_LABEL_OVERLAP,
            MismatchType.TYPE5_RIGHT_LABEL_OVERLAP,
        }
    ),
    Convention.SEMEVAL_TYPE: frozenset(
        {MismatchType.EXACT_MATCH, MismatchType.TYPE5_RIGHT_LABEL_OVERLAP}
    ),
}

# Label-blind conventions get no per-label breakdown.
_OVERALL_ONLY = frozenset({Convention.SEMEVAL_PARTIAL_BOUNDARY})

_Credit = Callable[[MatchRecord], bool]


def _kind_credit(kinds: frozenset[MismatchType]) -> _Credit:
    return lambda r: r.kind in kinds


def _accepted_credit(accepted: frozenset[str]) -> _Credit:
    def credit(r: MatchRecord) -> bool:
        if r.kind is MismatchType.EXACT_MATCH:
            return True
        return (
            r.kind is MismatchType.TYPE5_RIGHT_LABEL_OVERLAP
            and r.record_id in accepted
        )

    return credit


def _score(report: MatchReport, convention: Convention, credit: _Credit) -> PRF:
    tp_pred = sum(1 for r in report.records if r.pred is not None and credit(r))
    tp_gold = sum(
        1 for group in report.gold_groups().values() if any(credit(r) for r in group)
    )
    fp = report.pred_total - tp_pred
    fn = report.gold_total - tp_gold
    return PRF.from_counts(convention, tp_pred, tp_gold, fp, fn)


def _score_per_label(
    report: MatchReport, convention: Convention, credit: _Credit
) -> dict[str, PRF]:
    tp_pred: Counter[str] = Counter(
        r.pred.label for r in report.records if r.pred is not None and credit(r)
    )
    tp_gold: Counter[str] = Counter()
    for group in report.gold_groups().values():
        if any(credit(r) for r in group):
            tp_gold[group[0].gold.label] += 1  # type: ignore[union-attr]
    result: dict[str, PRF] = {}
    for label in report.labels():
        result[label] = PRF.from_counts(
            convention,
            tp_pred[label],
            tp_gold[label],
            report.pred_by_label.get(label, 0) - tp_pred[label],
            report.gold_by_label.get(label, 0) - tp_gold[label],
        )
    return result


def exact_f(report: MatchReport) -> PRF:
    """Credit only span-and-label identical pairs."""
    return _score(report, Convention.EXACT, _kind_credit(_CREDIT_KINDS[Convention.EXACT]))


def relaxed_f(report: MatchReport) -> PRF:
    """Credit exact matches plus every Type-5 (same-label overlap) record."""
    return _score(
        report, Convention.RELAXED, _kind_credit(_CREDIT_KINDS[Convention.RELAXED])
    )


def semeval_modes(report: MatchReport) -> dict[Convention, PRF]:
    """The four SemEval-style conventions.

    Strict coincides with the exact convention and type-match with the
    relaxed one; exact-boundary credits span-identical pairs regardless of
    label and partial-boundary credits any overlapping pair.
    """
    return {
        conv: _score(report, conv, _kind_credit(_CREDIT_KINDS[conv]))
        for conv in (
            Convention.SEMEVAL_STRICT,
            Convention.SEMEVAL_EXACT_BOUNDARY,
            Convention.SEMEVAL_PARTIAL_BOUNDARY,
            Convention.SEMEVAL_TYPE,
        )
    }


def _type5_ids(report: MatchReport) -> list[str]:
    return [r.record_id for r in report.type5_records()]


def accepted_ids_from_decisions(
    report: MatchReport, decisions: Mapping[str, Decision]
) -> frozenset[str]:
    """Validate coverage and reduce decisions to the accepted id set."""
    ids = _type5_ids(report)
    missing = sorted(set(ids) - set(decisions))
    if missing:
        raise UncoveredRecordsError(missing)
    return frozenset(
        rid for rid in ids if decisions[rid].verdict is Verdict.ACCEPT
    )


def refined_f(
    report: MatchReport,
    accepted: frozenset[str] | set[str],
    convention: Convention = Convention.LEARNING_BASED,
) -> PRF:
    """Score with exact matches plus only the accepted Type-5 records.

    Rejected Type-5 predictions count as false positives; a gold covered
    only by rejected Type-5 records counts as a false negative.
    """
    return _score(report, convention, _accepted_credit(frozenset(accepted)))


def learning_based_f(
    report: MatchReport, decisions: Mapping[str, Decision]
) -> PRF:
    """Score with classifier decisions; requires a decision per Type-5 record."""
    accepted = accepted_ids_from_decisions(report, decisions)
    return refined_f(report, accepted, Convention.LEARNING_BASED)


@dataclass
class MetricSuite:
    """Overall and per-label scores, one entry per computed convention."""

    overall: dict[Convention, PRF]
    per_label: dict[Convention, dict[str, PRF]]


def metric_suite(
    report: MatchReport, decisions: Mapping[str, Decision] | None = None
) -> MetricSuite:
    credits: dict[Convention, _Credit] = {
        conv: _kind_credit(kinds) for conv, kinds in _CREDIT_KINDS.items()
    }
    if decisions is not None:
        accepted = accepted_ids_from_decisions(report, decisions)
        credits[Convention.LEARNING_BASED] = _accepted_credit(accepted)
    overall = {
        conv: _score(report, conv, credit) for conv, credit in credits.items()
    }
    per_label = {
        conv: _score_per_label(report, conv, credit)
        for conv, credit in credits.items()
        if conv not in _OVERALL_ONLY
    }
    return MetricSuite(overall, per_label)


def macro_average(per_label: Mapping[str, PRF]) -> tuple[float, float, float]:
    """Unweighted mean precision/recall/F1 over labels; informational only."""
    if not per_label:
        return (0.0, 0.0, 0.0)
    n = len(per_label)
    return (
        sum(p.precision for p in per_label.values()) / n,
        sum(p.recall for p in per_label.values()) / n,
        sum(p.f1 for p in per_label.values()) / n,
    )
