from __future__ import annotations

import pytest

from entmatch.corpus import Corpus, build_document
from entmatch.matcher import MatchReport, classify_corpus


@pytest.fixture
def liver_corpus() -> Corpus:
    """Single gold mention split by the system into two same-label fragments."""
    tokens = "1cm cyst in the right lobe of the liver".split()
    doc = build_document(
        "radiology-1",
        [tokens],
        gold=[(0, 9, "problem")],
        pred=[(0, 6, "problem"), (8, 9, "problem")],
    )
    return Corpus.from_documents([doc])


@pytest.fixture
def liver_report(liver_corpus) -> MatchReport:
    return classify_corpus(liver_corpus)
