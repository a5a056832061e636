"""Deterministic staged matching of predicted against gold mentions.

Every prediction ends up in exactly one record; a gold mention may anchor
several overlap records without being consumed. Stages run in a fixed
priority order:

1. identical span and label        -> exact match, both sides consumed
2. identical span, different label -> Type 3, both sides consumed
3. same-label overlap              -> Type 5, anchored to the gold with the
   largest token overlap (ties: leftmost start, then longest gold); the
   prediction is consumed, the anchor is marked covered but stays
   available as an anchor for further predictions
4. different-label overlap         -> Type 4, same anchoring rule
5. leftover predictions            -> Type 1; untouched golds -> Type 2

Overlap is measured in whole tokens, minimum one. Within one document,
consumed golds (stages 1-2) remain eligible anchors for stages 3-4.
"""

from __future__ import annotations

import json
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Corpus, EntityMention, ParseError, Source


class MismatchType(Enum):
    EXACT_MATCH = "exact_match"
    TYPE1_FALSE_POSITIVE = "type1"
    TYPE2_FALSE_NEGATIVE = "type2"
    TYPE3_WRONG_LABEL_RIGHT_SPAN = "type3"
    TYPE4_WRONG_LABEL_OVERLAP = "type4"
    TYPE5_RIGHT_LABEL_OVERLAP = "type5"


ERROR_TYPES: tuple[MismatchType, ...] = tuple(
    k for k in MismatchType if k is not MismatchType.EXACT_MATCH
)

# (doc_id, start, end): unique per gold mention because gold spans are flat.
GoldKey = tuple[str, int, int]


@dataclass(frozen=True)
class MatchRecord:
    record_id: str
    doc_id: str
    kind: MismatchType
    pred: EntityMention | None
    gold: EntityMention | None
    overlap_tokens: int

    def gold_key(self) -> GoldKey | None:
        if self.gold is None:
            return None
        return (self.doc_id, self.gold.start, self.gold.end)


def token_overlap(a: EntityMention, b: EntityMention) -> int:
    return max(0, min(a.end, b.end) - max(b.start, a.start))


def _require_flat(mentions: Sequence[EntityMention], side: str) -> None:
    ordered = sorted(mentions, key=lambda m: (m.start, m.end))
    for a, b in zip(ordered, ordered[1:]):
        if b.start < a.end:
            raise ValueError(
                f"{side} mentions overlap: [{a.start},{a.end}) and "
                f"[{b.start},{b.end}) in document {a.doc_id!r}"
            )


def classify_document(
    gold: Sequence[EntityMention], pred: Sequence[EntityMention]
) -> list[MatchRecord]:
    """Classify one document's predictions against its gold mentions.

    Returns records sorted by prediction start, then gold start (records
    without a prediction sort last), with ids ``<doc_id>:<ordinal>``.
    """
    golds = sorted(gold, key=lambda m: m.start)
    preds = sorted(pred, key=lambda m: m.start)
    _require_flat(golds, "gold")
    _require_flat(preds, "predicted")
    doc_ids = {m.doc_id for m in list(golds) + list(preds)}
    if len(doc_ids) > 1:
        raise ValueError(f"mentions from multiple documents: {sorted(doc_ids)}")
    if not doc_ids:
        return []
    doc_id = doc_ids.pop()

    staged: list[tuple[MismatchType, EntityMention | None, EntityMention | None]] = []
    consumed_gold: set[tuple[int, int]] = set()
    covered_gold: set[tuple[int, int]] = set()

    # Stages 1-2: span-identical pairing is unique within flat lists, so a
    # single pass settles both stages without interference.
    gold_by_span = {(g.start, g.end): g for g in golds}
    residual: list[EntityMention] = []
    for p in preds:
        g = gold_by_span.get((p.start, p.end))
        if g is None:
            residual.append(p)
            continue
        consumed_gold.add(g.span)
        if g.label == p.label:
            staged.append((MismatchType.EXACT_MATCH, p, g))
        else:
            staged.append((MismatchType.TYPE3_WRONG_LABEL_RIGHT_SPAN, p, g))

    # Stages 3-4: anchor choice never consumes golds, so per-prediction
    # evaluation is order-independent and equivalent to running stage 3 to
    # completion before stage 4.
    starts = [g.start for g in golds]
    for p in residual:
        best_same: tuple[tuple[int, int, int], EntityMention] | None = None
        best_diff: tuple[tuple[int, int, int], EntityMention] | None = None
        j = bisect_left(starts, p.end) - 1
        while j >= 0 and golds[j].end > p.start:
            g = golds[j]
            rank = (token_overlap(p, g), -g.start, g.end - g.start)
            if g.label == p.label:
                if best_same is None or rank > best_same[0]:
                    best_same = (rank, g)
            elif best_diff is None or rank > best_diff[0]:
                best_diff = (rank, g)
            j -= 1
        if best_same is not None:
            anchor = best_same[1]
            staged.append((MismatchType.TYPE5_RIGHT_LABEL_OVERLAP, p, anchor))
            covered_gold.add(anchor.span)
        elif best_diff is not None:
            anchor = best_diff[1]
            staged.append((MismatchType.TYPE4_WRONG_LABEL_OVERLAP, p, anchor))
            covered_gold.add(anchor.span)
        else:
            staged.append((MismatchType.TYPE1_FALSE_POSITIVE, p, None))

    # Stage 5 remainder: golds never consumed, paired, or covered.
    for g in golds:
        if g.span not in consumed_gold and g.span not in covered_gold:
            staged.append((MismatchType.TYPE2_FALSE_NEGATIVE, None, g))

    big = 1 << 62
    staged.sort(
        key=lambda e: (
            e[1].start if e[1] else big,
            e[1].end if e[1] else big,
            e[2].start if e[2] else big,
            e[2].end if e[2] else big,
        )
    )
    return [
        MatchRecord(
            f"{doc_id}:{i}",
            doc_id,
            kind,
            p,
            g,
            token_overlap(p, g) if p and g else 0,
        )
        for i, (kind, p, g) in enumerate(staged)
    ]


@dataclass
class MatchReport:
    """All match records of a corpus plus derived totals.

    Totals are reconstructed from the records themselves: every prediction
    appears in exactly one record and every gold mention in at least one,
    so a report round-trips losslessly through the record ledger.
    Per-label counts tally each record under its gold label when a gold
    side is present, otherwise under its prediction label.
    """

    records: list[MatchRecord]
    counts: dict[MismatchType, int]
    per_label_counts: dict[str, dict[MismatchType, int]]
    gold_total: int
    pred_total: int
    gold_by_label: dict[str, int]
    pred_by_label: dict[str, int]

    @classmethod
    def from_records(cls, records: Iterable[MatchRecord]) -> "MatchReport":
        recs = list(records)
        counts = {k: 0 for k in MismatchType}
        per_label: dict[str, dict[MismatchType, int]] = {}
        gold_labels: dict[GoldKey, str] = {}
        pred_total = 0
        pred_by_label: Counter[str] = Counter()
        for r in recs:
            counts[r.kind] += 1
            label = r.gold.label if r.gold is not None else r.pred.label  # type: ignore[union-attr]
            per_label.setdefault(label, {k: 0 for k in MismatchType})[r.kind] += 1
            if r.pred is not None:
                pred_total += 1
                pred_by_label[r.pred.label] += 1
            key = r.gold_key()
            if key is not None:
                gold_labels[key] = r.gold.label  # type: ignore[union-attr]
        gold_by_label = Counter(gold_labels.values())
        return cls(
            recs,
            counts,
            per_label,
            len(gold_labels),
            pred_total,
            dict(sorted(gold_by_label.items())),
            dict(sorted(pred_by_label.items())),
        )

    def error_total(self) -> int:
        return sum(self.counts[k] for k in ERROR_TYPES)

    def type5_records(self) -> list[MatchRecord]:
        return [r for r in self.records if r.kind is MismatchType.TYPE5_RIGHT_LABEL_OVERLAP]

    def gold_groups(self) -> dict[GoldKey, list[MatchRecord]]:
        """Records grouped by the gold mention they reference."""
        groups: dict[GoldKey, list[MatchRecord]] = {}
        for r in self.records:
            key = r.gold_key()
            if key is not None:
                groups.setdefault(key, []).append(r)
        return groups

    def labels(self) -> list[str]:
        return sorted(set(self.gold_by_label) | set(self.pred_by_label))


def classify_corpus(corpus: Corpus) -> MatchReport:
    """Classify every document of an aligned corpus; records sort by doc id."""
    records: list[MatchRecord] = []
    for doc in sorted(corpus.documents, key=lambda d: d.doc_id):
        records.extend(classify_document(doc.gold_entities, doc.pred_entities))
    return MatchReport.from_records(records)


# ---------------------------------------------------------------------------
# record ledger (line-delimited JSON)


def _mention_to_obj(m: EntityMention | None) -> dict | None:
    if m is None:
        return None
    return {"span": [m.start, m.end], "label": m.label, "text": m.text}


def _mention_from_obj(
    obj: dict | None, doc_id: str, source: Source, line_no: int
) -> EntityMention | None:
    if obj is None:
        return None
    try:
        start, end = obj["span"]
        label = obj["label"]
        text = obj["text"]
    except (KeyError, TypeError, ValueError):
        raise ParseError("malformed mention object", line_no) from None
    if not isinstance(start, int) or not isinstance(end, int):
        raise ParseError("mention span indices must be integers", line_no)
    try:
        return EntityMention(doc_id, start, end, label, text, source)
    except ValueError as exc:
        raise ParseError(str(exc), line_no) from None


_SIDES_BY_KIND = {
    MismatchType.EXACT_MATCH: (True, True),
    MismatchType.TYPE1_FALSE_POSITIVE: (True, False),
    MismatchType.TYPE2_FALSE_NEGATIVE: (False, True),
    MismatchType.TYPE3_WRONG_LABEL_RIGHT_SPAN: (True, True),
    MismatchType.TYPE4_WRONG_LABEL_OVERLAP: (True, True),
    MismatchType.TYPE5_RIGHT_LABEL_OVERLAP: (True, True),
}


def write_ledger(report: MatchReport, path: str | Path) -> None:
    """Write the record ledger, one JSON object per record."""
    with open(path, "w", encoding="utf-8") as fh:
        for r in report.records:
            obj = {
                "record_id": r.record_id,
                "doc_id": r.doc_id,
                "kind": r.kind.value,
                "pred": _mention_to_obj(r.pred),
                "gold": _mention_to_obj(r.gold),
                "overlap_tokens": r.overlap_tokens,
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def read_ledger(path: str | Path) -> MatchReport:
    """Reconstruct a full match report from a record ledger file."""
    try:
        text = Path(path).read_bytes()
    except IsADirectoryError:
        raise ParseError(f"{path} is a directory") from None
    try:
        decoded = text.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"ledger is not valid UTF-8: {exc}") from None
    records: list[MatchRecord] = []
    seen_ids: set[str] = set()
    for line_no, line in enumerate(decoded.split("\n"), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line_no) from None
        if not isinstance(obj, dict):
            raise ParseError("record entry must be a JSON object", line_no)
        record_id = obj.get("record_id")
        doc_id = obj.get("doc_id")
        if not isinstance(record_id, str) or not isinstance(doc_id, str):
            raise ParseError("missing 'record_id' or 'doc_id'", line_no)
        if record_id in seen_ids:
            raise ParseError(f"duplicate record id {record_id!r}", line_no)
        seen_ids.add(record_id)
        try:
            kind = MismatchType(obj.get("kind"))
        except ValueError:
            raise ParseError(f"unknown record kind {obj.get('kind')!r}", line_no) from None
        pred = _mention_from_obj(obj.get("pred"), doc_id, Source.PREDICTED, line_no)
        gold = _mention_from_obj(obj.get("gold"), doc_id, Source.GOLD, line_no)
        want_pred, want_gold = _SIDES_BY_KIND[kind]
        if (pred is not None) != want_pred or (gold is not None) != want_gold:
            raise ParseError(
                f"record kind {kind.value!r} has the wrong mention sides", line_no
            )
        overlap = obj.get("overlap_tokens")
        if not isinstance(overlap, int) or isinstance(overlap, bool) or overlap < 0:
            raise ParseError("invalid 'overlap_tokens'", line_no)
        records.append(MatchRecord(record_id, doc_id, kind, pred, gold, overlap))
    return MatchReport.from_records(records)
