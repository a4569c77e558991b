"""Structured-document types and JSONL input/output.

A raw document is an ordered list of typed blocks extracted upstream
(paragraphs, figure captions, tables, citation spans, formulas). Input JSONL
carries one document per line with a ``kind`` discriminator per block.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Union

SOURCES = ("paper", "paper_metadata", "wiki")


class MalformedBlock(ValueError):
    """A block violates its structural contract (e.g. ragged table grid)."""

    def __init__(self, message: str, doc_id: str = "", block_index: int = -1):
        super().__init__(message)
        self.doc_id = doc_id
        self.block_index = block_index


@dataclass
class Paragraph:
    text: str

    kind = "paragraph"


@dataclass
class FigureCaption:
    text: str

    kind = "figure_caption"


@dataclass
class Table:
    cells: list[list[str]]
    header_rows: int = 0

    kind = "table"

    def check(self) -> None:
        widths = {len(row) for row in self.cells}
        if len(widths) > 1:
            raise MalformedBlock("ragged table grid")
        if self.header_rows < 0 or self.header_rows > len(self.cells):
            raise MalformedBlock("header_rows out of range")


@dataclass
class CitationSpan:
    marker_text: str
    resolved_title: str | None = None

    kind = "citation"


@dataclass
class Formula:
    text: str

    kind = "formula"


RawBlock = Union[Paragraph, FigureCaption, Table, CitationSpan, Formula]

_BLOCK_KINDS = {cls.kind: cls for cls in (Paragraph, FigureCaption, Table, CitationSpan, Formula)}


@dataclass
class RawDocument:
    doc_id: str
    source: str
    blocks: list[RawBlock] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise MalformedBlock("doc_id must be nonempty")
        if self.source not in SOURCES:
            raise MalformedBlock(f"unknown source {self.source!r}", doc_id=self.doc_id)


@dataclass
class NormalizedDocument:
    doc_id: str
    source: str
    text: str
    token_estimate: int = 0
    unresolved_citations: int = 0


def block_to_dict(block: RawBlock) -> dict:
    if isinstance(block, Paragraph):
        return {"kind": "paragraph", "text": block.text}
    if isinstance(block, FigureCaption):
        return {"kind": "figure_caption", "text": block.text}
    if isinstance(block, Table):
        return {"kind": "table", "cells": block.cells, "header_rows": block.header_rows}
    if isinstance(block, CitationSpan):
        return {
            "kind": "citation",
            "marker_text": block.marker_text,
            "resolved_title": block.resolved_title,
        }
    return {"kind": "formula", "text": block.text}


def block_from_dict(data: dict) -> RawBlock:
    kind = data.get("kind")
    if kind == "paragraph":
        return Paragraph(text=data["text"])
    if kind == "figure_caption":
        return FigureCaption(text=data["text"])
    if kind == "table":
        return Table(cells=[list(r) for r in data["cells"]], header_rows=data.get("header_rows", 0))
    if kind == "citation":
        return CitationSpan(
            marker_text=data.get("marker_text", ""),
            resolved_title=data.get("resolved_title"),
        )
    if kind == "formula":
        return Formula(text=data["text"])
    raise MalformedBlock(f"unknown block kind {kind!r}")


def document_to_dict(doc: RawDocument) -> dict:
    return {
        "doc_id": doc.doc_id,
        "source": doc.source,
        "blocks": [block_to_dict(b) for b in doc.blocks],
    }


def document_from_dict(data: dict) -> RawDocument:
    return RawDocument(
        doc_id=data["doc_id"],
        source=data["source"],
        blocks=[block_from_dict(b) for b in data.get("blocks", [])],
    )


def read_documents(path: str | Path) -> Iterator[RawDocument]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield document_from_dict(json.loads(line))


def write_documents(path: str | Path, docs: Iterable[RawDocument]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(document_to_dict(doc), ensure_ascii=False) + "\n")
            count += 1
    return count


def write_normalized(path: str | Path, docs: Iterable[NormalizedDocument]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            record = {"doc_id": doc.doc_id, "source": doc.source, "text": doc.text}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    return count


def read_normalized(path: str | Path) -> Iterator[NormalizedDocument]:
    from ..model.tokenizer import TOKENIZER

    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            yield NormalizedDocument(
                doc_id=data["doc_id"],
                source=data.get("source", "paper"),
                text=data["text"],
                token_estimate=TOKENIZER.count(data["text"]),
            )
