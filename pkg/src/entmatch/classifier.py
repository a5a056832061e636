"""Trainable entity-text classifier used to refine Type-5 mismatches.

The built-in model is multinomial logistic regression over hashed
character n-grams (n = 3..5) and lowercased word unigrams, trained by
seeded SGD. It maps an entity's surface text to a label from the tag set
plus ``other``; a Type-5 prediction is accepted when the classifier
reproduces the record's own label. An external classifier can stand in
through a line-delimited request/response file protocol.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from random import Random
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import ParseError
from .matcher import MatchReport, MatchRecord

_MAGIC = b"ENTMATCH-CLS1"
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class Verdict(Enum):
    ACCEPT = "accept"
    REJECT = "reject"


@dataclass(frozen=True)
class Decision:
    """Accept/reject verdict for one Type-5 record.

    ``predicted_label`` and ``confidence`` are set when the verdict comes
    from a classifier; verdicts derived from expert scores leave them None.
    """

    record_id: str
    verdict: Verdict
    predicted_label: str | None = None
    confidence: float | None = None


@dataclass(frozen=True)
class Prediction:
    label: str
    confidence: float
    distribution: dict[str, float]


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    epochs: int = 5
    learning_rate: float = 0.5
    buckets: int = 1 << 20

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.buckets < 2:
            raise ValueError("bucket count must be >= 2")


def _hash64(feature: str) -> int:
    """FNV-1a over UTF-8 bytes; stable across runs and platforms."""
    h = _FNV_OFFSET
    for byte in feature.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def _featurize(text: str, buckets: int) -> dict[int, float]:
    lowered = text.lower()
    counts: dict[int, float] = {}
    for n in (3, 4, 5):
        for i in range(len(lowered) - n + 1):
            bucket = _hash64(f"c{n}|{lowered[i:i + n]}") % buckets
            counts[bucket] = counts.get(bucket, 0.0) + 1.0
    for word in lowered.split():
        bucket = _hash64(f"w|{word}") % buckets
        counts[bucket] = counts.get(bucket, 0.0) + 1.0
    return counts


@dataclass
class ClassifierModel:
    """Linear model state plus the hyperparameters it was trained with."""

    labels: tuple[str, ...]
    buckets: int
    weights: np.ndarray  # (buckets, n_labels) float64
    bias: np.ndarray  # (n_labels,) float64
    config: TrainConfig
    format_version: int = 1

    def to_bytes(self) -> bytes:
        header = {
            "format_version": self.format_version,
            "labels": list(self.labels),
            "buckets": self.buckets,
            "seed": self.config.seed,
            "epochs": self.config.epochs,
            "learning_rate": self.config.learning_rate,
            "dtype": "<f8",
        }
        return b"".join(
            [
                _MAGIC,
                b"\n",
                json.dumps(header, sort_keys=True).encode("utf-8"),
                b"\n",
                np.ascontiguousarray(self.weights, dtype="<f8").tobytes(),
                np.ascontiguousarray(self.bias, dtype="<f8").tobytes(),
            ]
        )

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ClassifierModel":
        prefix = _MAGIC + b"\n"
        if not blob.startswith(prefix):
            raise ValueError("not a serialized classifier model")
        newline = blob.index(b"\n", len(prefix))
        header = json.loads(blob[len(prefix):newline].decode("utf-8"))
        labels = tuple(header["labels"])
        buckets = int(header["buckets"])
        body = blob[newline + 1:]
        expected = (buckets * len(labels) + len(labels)) * 8
        if len(body) != expected:
            raise ValueError(
                f"model payload is {len(body)} bytes, expected {expected}"
            )
        weights = np.frombuffer(
            body[: buckets * len(labels) * 8], dtype="<f8"
        ).reshape(buckets, len(labels))
        bias = np.frombuffer(body[buckets * len(labels) * 8:], dtype="<f8")
        config = TrainConfig(
            seed=int(header["seed"]),
            epochs=int(header["epochs"]),
            learning_rate=float(header["learning_rate"]),
            buckets=buckets,
        )
        return cls(
            labels,
            buckets,
            weights.copy(),
            bias.copy(),
            config,
            int(header["format_version"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "ClassifierModel":
        return cls.from_bytes(Path(path).read_bytes())


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def train(pairs: Sequence, config: TrainConfig = TrainConfig()) -> ClassifierModel:
    """Train the built-in model on (text, label) pairs.

    Accepts any objects with ``text`` and ``label`` attributes. Examples
    are shuffled once per epoch with a generator seeded from the config,
    so identical inputs and config reproduce the model byte for byte.
    """
    if not pairs:
        raise ValueError("training set is empty")
    labels = sorted({p.label for p in pairs})
    if len(labels) < 2:
        raise ValueError(f"need at least 2 distinct labels, got {labels}")
    label_index = {lab: i for i, lab in enumerate(labels)}

    examples: list[tuple[np.ndarray, np.ndarray, int]] = []
    for p in pairs:
        if not p.text.strip():
            raise ValueError("training pair with empty text")
        feats = _featurize(p.text, config.buckets)
        idx = np.fromiter(feats.keys(), dtype=np.int64, count=len(feats))
        val = np.fromiter(feats.values(), dtype=np.float64, count=len(feats))
        examples.append((idx, val, label_index[p.label]))

    weights = np.zeros((config.buckets, len(labels)), dtype=np.float64)
    bias = np.zeros(len(labels), dtype=np.float64)
    rng = Random(config.seed)
    order = list(range(len(examples)))
    lr = config.learning_rate
    for _ in range(config.epochs):
        rng.shuffle(order)
        for i in order:
            idx, val, y = examples[i]
            probs = _softmax(bias + val @ weights[idx])
            probs[y] -= 1.0
            weights[idx] -= lr * val[:, None] * probs
            bias -= lr * probs
    return ClassifierModel(tuple(labels), config.buckets, weights, bias, config)


def predict(model: ClassifierModel, text: str) -> Prediction:
    """Score one text; ties go to the earliest label in the model's label set."""
    if not text.strip():
        raise ValueError("cannot classify empty text")
    feats = _featurize(text, model.buckets)
    idx = np.fromiter(feats.keys(), dtype=np.int64, count=len(feats))
    val = np.fromiter(feats.values(), dtype=np.float64, count=len(feats))
    probs = _softmax(model.bias + val @ model.weights[idx])
    best = int(np.argmax(probs))
    distribution = {lab: float(p) for lab, p in zip(model.labels, probs)}
    return Prediction(model.labels[best], float(probs[best]), distribution)


def training_accuracy(model: ClassifierModel, pairs: Sequence) -> float:
    hits = sum(1 for p in pairs if predict(model, p.text).label == p.label)
    return hits / len(pairs)


def decide_type5(model: ClassifierModel, report: MatchReport) -> dict[str, Decision]:
    """Accept a Type-5 record iff the model reproduces its label.

    The confidence is reported alongside but never changes the verdict; a
    predicted ``other`` can never equal an entity label, hence rejects.
    """
    decisions: dict[str, Decision] = {}
    for record in report.type5_records():
        assert record.pred is not None
        prediction = predict(model, record.pred.text)
        verdict = (
            Verdict.ACCEPT
            if prediction.label == record.pred.label
            else Verdict.REJECT
        )
        decisions[record.record_id] = Decision(
            record.record_id, verdict, prediction.label, prediction.confidence
        )
    return decisions


# ---------------------------------------------------------------------------
# external classifier protocol


def write_classifier_requests(report: MatchReport, path: str | Path) -> None:
    """Write one ``{"id", "text"}`` request per Type-5 record."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in report.type5_records():
            assert record.pred is not None
            obj = {"id": record.record_id, "text": record.pred.text}
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def load_external_decisions(
    report: MatchReport,
    path: str | Path,
    label_set: Iterable[str] | None = None,
) -> dict[str, Decision]:
    """Validate an external response file and convert it to decisions.

    Response ids must be exactly the report's Type-5 record ids; labels
    must come from the given label set (default: labels present in the
    report) plus ``other``; confidences must lie in [0, 1].
    """
    from .metrics import UncoveredRecordsError

    records = {r.record_id: r for r in report.type5_records()}
    allowed = set(label_set) if label_set is not None else set(report.labels())
    allowed.add("other")

    responses: dict[str, tuple[str, float]] = {}
    text = Path(path).read_bytes()
    try:
        decoded = text.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"response file is not valid UTF-8: {exc}") from None
    for line_no, line in enumerate(decoded.split("\n"), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line_no) from None
        if not isinstance(obj, dict):
            raise ParseError("response entry must be a JSON object", line_no)
        rid = obj.get("id")
        label = obj.get("label")
        confidence = obj.get("confidence")
        if not isinstance(rid, str):
            raise ParseError("response missing string 'id'", line_no)
        if rid not in records:
            raise ParseError(f"unknown Type-5 record id {rid!r}", line_no)
        if rid in responses:
            raise ParseError(f"duplicate response for record {rid!r}", line_no)
        if not isinstance(label, str) or label not in allowed:
            raise ParseError(
                f"label {label!r} not in the allowed label set", line_no
            )
        if (
            not isinstance(confidence, (int, float))
            or isinstance(confidence, bool)
            or math.isnan(confidence)
            or not 0.0 <= confidence <= 1.0
        ):
            raise ParseError(f"confidence {confidence!r} outside [0, 1]", line_no)
        responses[rid] = (label, float(confidence))

    missing = sorted(set(records) - set(responses))
    if missing:
        raise UncoveredRecordsError(missing)

    decisions: dict[str, Decision] = {}
    for rid, record in records.items():
        label, confidence = responses[rid]
        assert record.pred is not None
        verdict = Verdict.ACCEPT if label == record.pred.label else Verdict.REJECT
        decisions[rid] = Decision(rid, verdict, label, confidence)
    return decisions


def run_external_classifier(
    report: MatchReport,
    request_path: str | Path,
    response_path: str | Path,
    label_set: Iterable[str] | None = None,
) -> dict[str, Decision]:
    """Write the request file, then validate and convert the response file."""
    write_classifier_requests(report, request_path)
    return load_external_decisions(report, response_path, label_set)


# ---------------------------------------------------------------------------
# decision files


def write_decisions(decisions: Mapping[str, Decision], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rid in sorted(decisions):
            d = decisions[rid]
            obj = {
                "record_id": d.record_id,
                "verdict": d.verdict.value,
                "predicted_label": d.predicted_label,
                "confidence": d.confidence,
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def read_decisions(path: str | Path) -> dict[str, Decision]:
    decisions: dict[str, Decision] = {}
    decoded = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(decoded.split("\n"), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line_no) from None
        try:
            rid = obj["record_id"]
            verdict = Verdict(obj["verdict"])
        except (KeyError, TypeError, ValueError):
            raise ParseError("malformed decision entry", line_no) from None
        if rid in decisions:
            raise ParseError(f"duplicate decision for record {rid!r}", line_no)
        confidence = obj.get("confidence")
        if confidence is not None and (
            not isinstance(confidence, (int, float)) or isinstance(confidence, bool)
        ):
            raise ParseError(f"invalid confidence {confidence!r}", line_no)
        decisions[rid] = Decision(
            rid,
            verdict,
            obj.get("predicted_label"),
            None if confidence is None else float(confidence),
        )
    return decisions
