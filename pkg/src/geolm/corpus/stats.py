"""Corpus-level statistics over normalized documents.

Per-document partials merge associatively, so documents can be counted in
any grouping (the reduce is commutative).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from ..model.tokenizer import START_MARKERS
from .blocks import NormalizedDocument


@dataclass
class CorpusStats:
    documents: int = 0
    tokens: int = 0
    per_source: dict[str, int] = field(default_factory=dict)
    marker_counts: dict[str, int] = field(default_factory=dict)
    unresolved_citations: int = 0

    def add(self, doc: NormalizedDocument) -> None:
        self.documents += 1
        self.tokens += doc.token_estimate
        self.per_source[doc.source] = self.per_source.get(doc.source, 0) + 1
        for kind, literal in START_MARKERS.items():
            count = doc.text.count(literal)
            if count:
                self.marker_counts[kind] = self.marker_counts.get(kind, 0) + count
        self.unresolved_citations += doc.unresolved_citations

    def merge(self, other: "CorpusStats") -> "CorpusStats":
        merged = CorpusStats(
            documents=self.documents + other.documents,
            tokens=self.tokens + other.tokens,
            unresolved_citations=self.unresolved_citations + other.unresolved_citations,
        )
        for src in (self.per_source, other.per_source):
            for key, value in src.items():
                merged.per_source[key] = merged.per_source.get(key, 0) + value
        for src in (self.marker_counts, other.marker_counts):
            for key, value in src.items():
                merged.marker_counts[key] = merged.marker_counts.get(key, 0) + value
        return merged

    def to_dict(self) -> dict:
        return {
            "documents": self.documents,
            "tokens": self.tokens,
            "per_source": dict(sorted(self.per_source.items())),
            "marker_counts": dict(sorted(self.marker_counts.items())),
            "unresolved_citations": self.unresolved_citations,
        }


def corpus_stats(docs: Iterable[NormalizedDocument]) -> CorpusStats:
    stats = CorpusStats()
    for doc in docs:
        stats.add(doc)
    return stats
