"""Render structured documents into marker-annotated markdown text.

Block rendering rules:
  * paragraphs pass through the cleaning rule set (only paragraphs do);
  * figure captions are wrapped in [START_FIGURE]...[END_FIGURE];
  * tables become pipe tables inside [START_TABLE]...[END_TABLE];
  * citations with a resolved title become [START_REF]title[END_REF],
    unresolved ones are dropped and counted;
  * formulas are cleaned (unbalanced braces to spaces, whitespace collapsed)
    and wrapped in [START_FORMULA]...[END_FORMULA].

Rendered blocks are joined by exactly one blank line, so identical input
always yields byte-identical output.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Iterable

from ..model.tokenizer import DOC_BOUNDARY, END_MARKERS, START_MARKERS, TOKENIZER
from .blocks import (
    CitationSpan,
    FigureCaption,
    Formula,
    MalformedBlock,
    NormalizedDocument,
    Paragraph,
    RawDocument,
    Table,
)
from .cleaning import CleaningRuleSet, sanitize_text
from .markers import strip_reserved_literals

_WS_RUN_RE = re.compile(r"\s+")


def _scrub(text: str) -> str:
    """Sanitize raw field text: no control chars, no injected marker literals."""
    return strip_reserved_literals(sanitize_text(text))


def _cell_text(text: str) -> str:
    # Cells must stay on one line; newlines/tabs collapse to single spaces.
    return re.sub(r"[\n\t]+", " ", _scrub(text))


_DASH_ONLY_RE = re.compile(r"\s*-{3,}\s*")

_ESCAPABLE = ("\\", "|", "-")


def escape_cell(text: str) -> str:
    escaped = text.replace("\\", "\\\\").replace("|", "\\|")
    # A dash-only cell would be indistinguishable from the header separator
    # row, so its first dash gets escaped too.
    if _DASH_ONLY_RE.fullmatch(escaped):
        escaped = escaped.replace("-", "\\-", 1)
    return escaped


def unescape_cell(text: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(text):
        if text[i] == "\\" and i + 1 < len(text) and text[i + 1] in _ESCAPABLE:
            out.append(text[i + 1])
            i += 2
        else:
            out.append(text[i])
            i += 1
    return "".join(out)


def render_table(table: Table) -> str:
    table.check()
    if not table.cells:
        return ""
    lines = []
    width = len(table.cells[0])
    for row_index, row in enumerate(table.cells):
        lines.append("| " + " | ".join(escape_cell(_cell_text(c)) for c in row) + " |")
        if table.header_rows and row_index == table.header_rows - 1:
            lines.append("| " + " | ".join(["---"] * width) + " |")
    body = "\n".join(lines)
    return f"{START_MARKERS['TABLE']}\n{body}\n{END_MARKERS['TABLE']}"


_SEPARATOR_ROW_RE = re.compile(r"^\|(\s*-{3,}\s*\|)+$")


def parse_pipe_table(rendered: str) -> tuple[list[list[str]], int]:
    """Invert :func:`render_table`; returns (cells, header_rows)."""
    prefix = START_MARKERS["TABLE"] + "\n"
    suffix = "\n" + END_MARKERS["TABLE"]
    if not rendered.startswith(prefix) or not rendered.endswith(suffix):
        raise ValueError("not a rendered table")
    body = rendered[len(prefix) : -len(suffix)]
    cells: list[list[str]] = []
    header_rows = 0
    for line in body.split("\n"):
        if _SEPARATOR_ROW_RE.match(line):
            header_rows = len(cells)
            continue
        if not (line.startswith("| ") and line.endswith(" |")):
            raise ValueError(f"bad table row: {line!r}")
        inner = line[2:-2]
        row: list[str] = []
        current: list[str] = []
        i = 0
        while i < len(inner):
            ch = inner[i]
            if ch == "\\" and i + 1 < len(inner) and inner[i + 1] in _ESCAPABLE:
                current.append(inner[i + 1])
                i += 2
            elif inner.startswith(" | ", i):
                row.append("".join(current))
                current = []
                i += 3
            else:
                current.append(ch)
                i += 1
        row.append("".join(current))
        cells.append(row)
    return cells, header_rows


def render_citation(citation: CitationSpan) -> str:
    if citation.resolved_title is None:
        return ""
    title = _WS_RUN_RE.sub(" ", _scrub(citation.resolved_title)).strip()
    return f"{START_MARKERS['REF']}{title}{END_MARKERS['REF']}"


def clean_formula(text: str) -> str:
    """Blank out unmatched braces, then collapse whitespace runs."""
    chars = list(text)
    stack: list[int] = []
    for i, ch in enumerate(chars):
        if ch == "{":
            stack.append(i)
        elif ch == "}":
            if stack:
                stack.pop()
            else:
                chars[i] = " "
    for i in stack:
        chars[i] = " "
    return _WS_RUN_RE.sub(" ", "".join(chars)).strip()


def render_formula(formula: Formula) -> str:
    cleaned = clean_formula(_scrub(formula.text))
    if not cleaned:
        return ""
    return f"{START_MARKERS['FORMULA']}{cleaned}{END_MARKERS['FORMULA']}"


def render_caption(caption: FigureCaption) -> str:
    text = _scrub(caption.text)
    if not text:
        return ""
    return f"{START_MARKERS['FIGURE']}{text}{END_MARKERS['FIGURE']}"


def normalize_document(
    doc: RawDocument, rules: CleaningRuleSet | None = None
) -> NormalizedDocument:
    """Render every block of ``doc`` and join the survivors with blank lines."""
    rules = rules or CleaningRuleSet()
    rendered: list[str] = []
    unresolved = 0
    for index, block in enumerate(doc.blocks):
        if isinstance(block, Paragraph):
            cleaned = rules.clean_paragraph(strip_reserved_literals(block.text))
            piece = cleaned or ""
        elif isinstance(block, FigureCaption):
            piece = render_caption(block)
        elif isinstance(block, Table):
            try:
                piece = render_table(block)
            except MalformedBlock as exc:
                raise MalformedBlock(str(exc), doc_id=doc.doc_id, block_index=index) from exc
        elif isinstance(block, CitationSpan):
            if block.resolved_title is None:
                unresolved += 1
            piece = render_citation(block)
        elif isinstance(block, Formula):
            piece = render_formula(block)
        else:
            raise MalformedBlock(
                f"unknown block type {type(block).__name__}", doc_id=doc.doc_id, block_index=index
            )
        if piece:
            rendered.append(piece)
    text = "\n\n".join(rendered)
    return NormalizedDocument(
        doc_id=doc.doc_id,
        source=doc.source,
        text=text,
        token_estimate=TOKENIZER.count(text),
        unresolved_citations=unresolved,
    )


def write_corpus_text(path: str | Path, docs: Iterable[NormalizedDocument]) -> int:
    """Concatenate document texts with a <|doc|> boundary line between them."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            if count:
                fh.write(f"\n{DOC_BOUNDARY}\n")
            fh.write(doc.text)
            count += 1
        if count:
            fh.write("\n")
    return count


def read_corpus_text(path: str | Path) -> list[str]:
    """Split a concatenated corpus file back into per-document texts."""
    raw = Path(path).read_text(encoding="utf-8")
    if raw.endswith("\n"):
        raw = raw[:-1]
    if not raw:
        return []
    return raw.split(f"\n{DOC_BOUNDARY}\n")
