"""Readers and writers for gold and predicted entity annotations.

Two ingestion formats are supported: token-per-line IOB files (IOB2 or
IOB1 tag schemes) and line-delimited JSON standoff files. Independently
parsed gold and prediction corpora are paired into a single aligned
corpus before matching.

Token indices are the canonical coordinate system throughout; character
offsets are derived by joining tokens with single spaces and carry no
semantics of their own.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

_IOB_TAG_RE = re.compile(r"([BI])-(.*)\Z", re.DOTALL)


class ParseError(ValueError):
    """Malformed annotation input; carries a 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class AlignmentError(ValueError):
    """Gold and prediction corpora do not describe the same documents."""


class Source(Enum):
    GOLD = "gold"
    PREDICTED = "predicted"


class TagScheme(Enum):
    IOB2 = "iob2"
    IOB1 = "iob1"


@dataclass(frozen=True)
class Token:
    text: str
    doc_id: str
    sent_index: int
    token_index: int
    char_start: int
    char_end: int

    def __post_init__(self):
        if not self.text:
            raise ValueError("token text must be non-empty")
        if self.char_start >= self.char_end:
            raise ValueError("token character span must be non-empty")


@dataclass(frozen=True)
class EntityMention:
    """A labelled token span; ``start``/``end`` are half-open token indices."""

    doc_id: str
    start: int
    end: int
    label: str
    text: str
    source: Source

    def __post_init__(self):
        if self.start < 0 or self.start >= self.end:
            raise ValueError(f"invalid span [{self.start}, {self.end})")
        if not self.label or self.label == "O":
            raise ValueError(f"invalid entity label {self.label!r}")

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    def length(self) -> int:
        return self.end - self.start


@dataclass
class Document:
    doc_id: str
    tokens: list[Token]
    gold_entities: list[EntityMention]
    pred_entities: list[EntityMention]

    def entities(self, source: Source) -> list[EntityMention]:
        return self.gold_entities if source is Source.GOLD else self.pred_entities


@dataclass
class Corpus:
    documents: list[Document]
    label_set: tuple[str, ...]

    @classmethod
    def from_documents(cls, documents: Iterable[Document]) -> "Corpus":
        docs = list(documents)
        seen: set[str] = set()
        for doc in docs:
            if doc.doc_id in seen:
                raise ParseError(f"duplicate document id {doc.doc_id!r}")
            seen.add(doc.doc_id)
        labels = sorted(
            {m.label for d in docs for m in d.gold_entities + d.pred_entities}
        )
        return cls(docs, tuple(labels))

    def total_entities(self, source: Source) -> int:
        return sum(len(d.entities(source)) for d in self.documents)


# ---------------------------------------------------------------------------
# document assembly helpers


def _make_tokens(doc_id: str, sentences: Sequence[Sequence[str]]) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    index = 0
    for sent_i, sent in enumerate(sentences):
        for text in sent:
            start = pos if index == 0 else pos + 1
            tokens.append(
                Token(text, doc_id, sent_i, index, start, start + len(text))
            )
            pos = start + len(text)
            index += 1
    return tokens


def mention_from_tokens(
    doc_id: str,
    tokens: Sequence[Token],
    start: int,
    end: int,
    label: str,
    source: Source,
) -> EntityMention:
    """Build a mention whose surface text is the space-joined covered tokens."""
    if start < 0 or end > len(tokens) or start >= end:
        raise ParseError(
            f"span [{start}, {end}) outside document {doc_id!r} "
            f"bounds [0, {len(tokens)})"
        )
    text = " ".join(t.text for t in tokens[start:end])
    return EntityMention(doc_id, start, end, label.strip(), text, source)


def _check_flat(doc_id: str, mentions: Sequence[EntityMention], source: Source) -> None:
    ordered = sorted(mentions, key=lambda m: (m.start, m.end))
    for a, b in zip(ordered, ordered[1:]):
        if b.start < a.end:
            raise ParseError(
                f"overlapping {source.value} spans [{a.start},{a.end}) and "
                f"[{b.start},{b.end}) in document {doc_id!r}"
            )


def build_document(
    doc_id: str,
    sentences: Sequence[Sequence[str]],
    gold: Iterable[tuple[int, int, str]] = (),
    pred: Iterable[tuple[int, int, str]] = (),
) -> Document:
    """Construct a document from sentence token texts and (start, end, label) spans."""
    tokens = _make_tokens(doc_id, sentences)
    gold_mentions = [
        mention_from_tokens(doc_id, tokens, s, e, lab, Source.GOLD)
        for s, e, lab in gold
    ]
    pred_mentions = [
        mention_from_tokens(doc_id, tokens, s, e, lab, Source.PREDICTED)
        for s, e, lab in pred
    ]
    _check_flat(doc_id, gold_mentions, Source.GOLD)
    _check_flat(doc_id, pred_mentions, Source.PREDICTED)
    gold_mentions.sort(key=lambda m: m.start)
    pred_mentions.sort(key=lambda m: m.start)
    return Document(doc_id, tokens, gold_mentions, pred_mentions)


def _decode_bytes(content: bytes | str) -> str:
    if isinstance(content, str):
        return content
    try:
        return content.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"input is not valid UTF-8: {exc}") from None


# ---------------------------------------------------------------------------
# IOB parsing

# A raw token is (text, tag, line number); sentences group them.
_RawSentence = list[tuple[str, str, int]]


def parse_iob(
    content: bytes | str,
    scheme: TagScheme = TagScheme.IOB2,
    source: Source = Source.GOLD,
) -> Corpus:
    """Parse a token-per-line IOB file into a corpus.

    Lines hold ``token<TAB>tag`` (or single-space separated); blank lines
    separate sentences; ``-DOCSTART- <doc_id>`` starts a new document.
    Files without any ``-DOCSTART-`` marker become a single document
    ``doc0``. Orphan ``I-`` tags under IOB2 are repaired to ``B-`` with a
    logged warning; under IOB1 a fresh ``I-`` legitimately opens an entity.
    """
    text = _decode_bytes(content)
    raw_docs: list[tuple[str, list[_RawSentence]]] = []
    seen_ids: set[str] = set()
    sentences: list[_RawSentence] = []
    sentence: _RawSentence = []
    pending_id = "doc0"
    explicit = False

    def flush_sentence() -> None:
        nonlocal sentence
        if sentence:
            sentences.append(sentence)
            sentence = []

    def flush_document(line_no: int | None) -> None:
        nonlocal sentences, explicit
        flush_sentence()
        if sentences or explicit:
            if pending_id in seen_ids:
                raise ParseError(f"duplicate document id {pending_id!r}", line_no)
            seen_ids.add(pending_id)
            raw_docs.append((pending_id, sentences))
        sentences = []
        explicit = False

    for line_no, line in enumerate(text.split("\n"), 1):
        stripped = line.strip()
        if not stripped:
            flush_sentence()
            continue
        if stripped.startswith("-DOCSTART-"):
            flush_document(line_no)
            rest = stripped[len("-DOCSTART-"):].strip()
            pending_id = rest if rest else f"doc{len(raw_docs)}"
            explicit = True
            continue
        if "\t" in line:
            parts = [p.strip() for p in line.split("\t")]
        else:
            parts = stripped.split()
        if len(parts) != 2 or not all(parts):
            raise ParseError(
                f"expected 2 columns (token and tag), got {len(parts)}", line_no
            )
        token_text, tag = parts
        if tag != "O" and not _valid_iob_tag(tag):
            raise ParseError(f"malformed tag {tag!r}", line_no)
        sentence.append((token_text, tag, line_no))
    flush_document(None)

    documents = [
        _document_from_iob(doc_id, doc_sentences, scheme, source)
        for doc_id, doc_sentences in raw_docs
    ]
    return Corpus.from_documents(documents)


def _valid_iob_tag(tag: str) -> bool:
    m = _IOB_TAG_RE.fullmatch(tag)
    return m is not None and bool(m.group(2).strip())


def _document_from_iob(
    doc_id: str,
    sentences: list[_RawSentence],
    scheme: TagScheme,
    source: Source,
) -> Document:
    tokens = _make_tokens(doc_id, [[t for t, _, _ in s] for s in sentences])
    spans = _decode_tag_spans(sentences, scheme)
    mentions = [
        mention_from_tokens(doc_id, tokens, s, e, lab, source) for s, e, lab in spans
    ]
    gold = mentions if source is Source.GOLD else []
    pred = mentions if source is Source.PREDICTED else []
    return Document(doc_id, tokens, gold, pred)


def _decode_tag_spans(
    sentences: list[_RawSentence], scheme: TagScheme
) -> list[tuple[int, int, str]]:
    """Decode IOB tags into (start, end, label) spans over global token indices.

    Entity state resets at sentence boundaries. ``B-`` always opens an
    entity; ``I-`` extends an open same-label entity and otherwise opens
    one (a repair under IOB2, the normal opening form under IOB1).
    """
    spans: list[tuple[int, int, str]] = []
    index = 0
    for sent in sentences:
        open_start: int | None = None
        open_label = ""

        def close(upto: int) -> None:
            nonlocal open_start
            if open_start is not None:
                spans.append((open_start, upto, open_label))
                open_start = None

        for token_text, tag, line_no in sent:
            if tag == "O":
                close(index)
            else:
                marker, label = tag.split("-", 1)
                label = label.strip()
                if marker == "B" or label != open_label or open_start is None:
                    if marker == "I" and scheme is TagScheme.IOB2:
                        log.warning(
                            "line %d: orphan tag I-%s repaired to B-%s",
                            line_no,
                            label,
                            label,
                        )
                    close(index)
                    open_start = index
                    open_label = label
            index += 1
        close(index)
    return spans


def iob2_tags(document: Document, source: Source) -> list[str]:
    """Encode one side of a document back into an IOB2 tag sequence."""
    tags = ["O"] * len(document.tokens)
    for m in document.entities(source):
        tags[m.start] = f"B-{m.label}"
        for i in range(m.start + 1, m.end):
            tags[i] = f"I-{m.label}"
    return tags


# ---------------------------------------------------------------------------
# standoff parsing and serialization


def parse_standoff(content: bytes | str) -> Corpus:
    """Parse a line-delimited JSON standoff file into a corpus.

    Each line is one document object with ``doc_id``, ``tokens`` and
    ``entities`` (token-index half-open spans, explicit per-entity
    ``source``). An optional ``sentence_starts`` field preserves sentence
    structure; without it the document is a single sentence.
    """
    text = _decode_bytes(content)
    documents: list[Document] = []
    for line_no, line in enumerate(text.split("\n"), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line_no) from None
        documents.append(_document_from_standoff(obj, line_no))
    return Corpus.from_documents(documents)


def _document_from_standoff(obj: object, line_no: int) -> Document:
    if not isinstance(obj, dict):
        raise ParseError("document entry must be a JSON object", line_no)
    doc_id = obj.get("doc_id")
    if not isinstance(doc_id, str) or not doc_id:
        raise ParseError("missing or invalid 'doc_id'", line_no)
    token_texts = obj.get("tokens")
    if not isinstance(token_texts, list) or any(
        not isinstance(t, str) or not t for t in token_texts
    ):
        raise ParseError("'tokens' must be a list of non-empty strings", line_no)
    starts = obj.get("sentence_starts", [0] if token_texts else [])
    if (
        not isinstance(starts, list)
        or any(not isinstance(s, int) or isinstance(s, bool) for s in starts)
        or starts != sorted(set(starts))
        or (token_texts and (not starts or starts[0] != 0))
        or any(s >= len(token_texts) for s in starts)
    ):
        raise ParseError("invalid 'sentence_starts'", line_no)
    bounds = starts + [len(token_texts)]
    sentences = [token_texts[a:b] for a, b in zip(bounds, bounds[1:])]
    tokens = _make_tokens(doc_id, sentences)

    raw_entities = obj.get("entities")
    if not isinstance(raw_entities, list):
        raise ParseError("'entities' must be a list", line_no)
    gold: list[EntityMention] = []
    pred: list[EntityMention] = []
    for ent in raw_entities:
        if not isinstance(ent, dict):
            raise ParseError("entity entry must be a JSON object", line_no)
        try:
            start, end = ent["start"], ent["end"]
            label = ent["label"]
            source_value = ent["source"]
        except KeyError as exc:
            raise ParseError(f"entity missing field {exc.args[0]!r}", line_no) from None
        if not isinstance(start, int) or not isinstance(end, int):
            raise ParseError("entity span indices must be integers", line_no)
        if end <= start:
            raise ParseError(f"empty or inverted span [{start}, {end})", line_no)
        if start < 0 or end > len(tokens):
            raise ParseError(
                f"span [{start}, {end}) outside document bounds "
                f"[0, {len(tokens)})",
                line_no,
            )
        if not isinstance(label, str) or not label.strip() or label.strip() == "O":
            raise ParseError(f"invalid entity label {label!r}", line_no)
        try:
            source = Source(source_value)
        except ValueError:
            raise ParseError(f"invalid entity source {source_value!r}", line_no) from None
        target = gold if source is Source.GOLD else pred
        target.append(mention_from_tokens(doc_id, tokens, start, end, label, source))
    try:
        _check_flat(doc_id, gold, Source.GOLD)
        _check_flat(doc_id, pred, Source.PREDICTED)
    except ParseError as exc:
        raise ParseError(str(exc), line_no) from None
    gold.sort(key=lambda m: m.start)
    pred.sort(key=lambda m: m.start)
    return Document(doc_id, tokens, gold, pred)


def serialize_standoff(corpus: Corpus) -> str:
    """Serialize a corpus to line-delimited JSON standoff, one document per line."""
    lines = []
    for doc in corpus.documents:
        starts = [
            t.token_index
            for prev, t in zip([None] + doc.tokens[:-1], doc.tokens)
            if prev is None or t.sent_index != prev.sent_index
        ]
        entities = [
            {"start": m.start, "end": m.end, "label": m.label, "source": m.source.value}
            for m in doc.gold_entities + doc.pred_entities
        ]
        obj = {
            "doc_id": doc.doc_id,
            "tokens": [t.text for t in doc.tokens],
            "sentence_starts": starts,
            "entities": entities,
        }
        lines.append(json.dumps(obj, ensure_ascii=False))
    return "".join(line + "\n" for line in lines)


# ---------------------------------------------------------------------------
# pairing


def pair_corpora(gold: Corpus, pred: Corpus) -> Corpus:
    """Merge independently parsed gold and prediction corpora.

    Documents are matched by ``doc_id`` and token texts must be identical
    position-by-position (case-sensitive). Every mention from the gold
    corpus becomes a gold mention and every mention from the prediction
    corpus a predicted one, whatever source its file declared.
    """
    pred_map = {d.doc_id: d for d in pred.documents}
    gold_ids = {d.doc_id for d in gold.documents}
    only_gold = sorted(gold_ids - set(pred_map))
    only_pred = sorted(set(pred_map) - gold_ids)
    if only_gold or only_pred:
        parts = []
        if only_gold:
            parts.append(f"only in gold: {', '.join(only_gold)}")
        if only_pred:
            parts.append(f"only in prediction: {', '.join(only_pred)}")
        raise AlignmentError("document sets differ; " + "; ".join(parts))

    merged: list[Document] = []
    for gdoc in gold.documents:
        pdoc = pred_map[gdoc.doc_id]
        if len(gdoc.tokens) != len(pdoc.tokens):
            raise AlignmentError(
                f"document {gdoc.doc_id!r}: token count differs "
                f"({len(gdoc.tokens)} vs {len(pdoc.tokens)})"
            )
        for i, (a, b) in enumerate(zip(gdoc.tokens, pdoc.tokens)):
            if a.text != b.text:
                raise AlignmentError(
                    f"document {gdoc.doc_id!r}: token mismatch at index {i}: "
                    f"{a.text!r} != {b.text!r}"
                )
        gold_mentions = sorted(
            (
                replace(m, source=Source.GOLD)
                for m in gdoc.gold_entities + gdoc.pred_entities
            ),
            key=lambda m: m.start,
        )
        pred_mentions = sorted(
            (
                replace(m, source=Source.PREDICTED)
                for m in pdoc.gold_entities + pdoc.pred_entities
            ),
            key=lambda m: m.start,
        )
        _check_flat(gdoc.doc_id, gold_mentions, Source.GOLD)
        _check_flat(gdoc.doc_id, pred_mentions, Source.PREDICTED)
        merged.append(
            Document(gdoc.doc_id, gdoc.tokens, gold_mentions, pred_mentions)
        )
    return Corpus.from_documents(merged)
