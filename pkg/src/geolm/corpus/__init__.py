"""Document normalization: structured extracts to marker-annotated text."""

from .blocks import (
    CitationSpan,
    FigureCaption,
    Formula,
    MalformedBlock,
    NormalizedDocument,
    Paragraph,
    RawDocument,
    Table,
    read_documents,
    read_normalized,
    write_documents,
    write_normalized,
)
from .cleaning import CleaningRule, CleaningRuleSet, RuleSetError, load_rules
from .markers import ValidationReport, validate_markers
from .normalize import (
    normalize_document,
    parse_pipe_table,
    read_corpus_text,
    render_citation,
    render_formula,
    render_table,
    write_corpus_text,
)
from .stats import CorpusStats, corpus_stats

__all__ = [
    "CitationSpan",
    "CleaningRule",
    "CleaningRuleSet",
    "CorpusStats",
    "FigureCaption",
    "Formula",
    "MalformedBlock",
    "NormalizedDocument",
    "Paragraph",
    "RawDocument",
    "RuleSetError",
    "Table",
    "ValidationReport",
    "corpus_stats",
    "load_rules",
    "normalize_document",
    "parse_pipe_table",
    "read_corpus_text",
    "read_documents",
    "read_normalized",
    "render_citation",
    "render_formula",
    "render_table",
    "validate_markers",
    "write_corpus_text",
    "write_documents",
    "write_normalized",
]
