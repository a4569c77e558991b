"""Restructure typed signals into instruction-tuning records.

Every restructurer is a pure function from one source record to one or more
instruction records. Outputs are verbatim projections of record fields
(modulo whitespace trim); the only synthesized text is the statement
negation used by fact verification, which follows a single-edit rule with an
explicit reject path. Records that fail a precondition raise a typed error,
which the stream dispatcher converts into a reject entry.
"""

from __future__ import annotations

import re
from typing import Iterable

from ..model.tokenizer import END_MARKERS, START_MARKERS
from .records import (
    CaptionRecord,
    CategoryLabel,
    EntityMentions,
    FactStatement,
    InstructionRecord,
    KeyValueRecord,
    PaperContent,
    QAPair,
    ReferencePair,
    RejectRecord,
    RelationRecord,
    SourceRecord,
    TaxonomyRecord,
    WordDescription,
)
from .templates import TemplateSet

# Default label sets; the 18 geoscience disciplines and the 8 dictionary
# fields used to categorize terms.
DISCIPLINES_18 = (
    "Geology",
    "Geophysics",
    "Geochemistry",
    "Paleontology",
    "Mineralogy",
    "Petrology",
    "Seismology",
    "Volcanology",
    "Hydrology",
    "Oceanography",
    "Meteorology",
    "Climatology",
    "Glaciology",
    "Geomorphology",
    "Stratigraphy",
    "Sedimentology",
    "Tectonics",
    "Geodesy",
)

TERM_FIELDS_8 = (
    "Rock",
    "Mineral",
    "Fossil",
    "Structure",
    "Process",
    "Time",
    "Place",
    "Instrument",
)

DEFAULT_LABEL_SETS: dict[str, tuple[str, ...]] = {
    "disciplines-18": DISCIPLINES_18,
    "fields-8": TERM_FIELDS_8,
}


class RestructureError(ValueError):
    reason = "restructure_error"


class EmptyField(RestructureError):
    reason = "empty_field"


class EntityNotInParagraph(RestructureError):
    reason = "entity_not_in_paragraph"


class NoNegationSite(RestructureError):
    reason = "no_negation_site"


class UnknownLabel(RestructureError):
    reason = "unknown_label"


def _require(value: str, name: str) -> str:
    if not value or not value.strip():
        raise EmptyField(f"{name} must be nonempty")
    return value.strip()


def _provenance(record: SourceRecord) -> dict[str, str]:
    return {"source_kind": record.signal, "source_id": record.record_id}


def restructure_explanation(record: WordDescription, templates: TemplateSet) -> InstructionRecord:
    term = _require(record.term, "term")
    definition = _require(record.definition, "definition")
    instruction, input_text = templates.render("explanation", record.record_id, term=term)
    return InstructionRecord(
        task="explanation",
        instruction=instruction,
        input=input_text,
        output=definition,
        provenance=_provenance(record),
    )


def restructure_ner(record: EntityMentions, templates: TemplateSet) -> InstructionRecord:
    paragraph = _require(record.paragraph, "paragraph")
    if not record.entities:
        raise EmptyField("entities must be nonempty")
    lowered = paragraph.lower()
    positions = []
    for index, entity in enumerate(record.entities):
        entity = _require(entity, "entity")
        at = lowered.find(entity.lower())
        if at < 0:
            raise EntityNotInParagraph(f"entity {entity!r} not found in paragraph")
        positions.append((at, index, entity))
    ordered = [entity for _, _, entity in sorted(positions)]
    instruction, input_text = templates.render("ner", record.record_id, paragraph=paragraph)
    return InstructionRecord(
        task="ner",
        instruction=instruction,
        input=input_text,
        output=", ".join(ordered),
        provenance=_provenance(record),
    )


def restructure_reasoning(record: RelationRecord, templates: TemplateSet) -> InstructionRecord:
    concept_a = _require(record.concept_a, "concept_a")
    concept_b = _require(record.concept_b, "concept_b")
    if concept_a == concept_b:
        raise EmptyField("concepts must be distinct")
    instruction, input_text = templates.render(
        "reasoning",
        record.record_id,
        concept_a=concept_a,
        concept_b=concept_b,
        paragraph_a=_require(record.paragraph_a, "paragraph_a"),
        paragraph_b=_require(record.paragraph_b, "paragraph_b"),
    )
    return InstructionRecord(
        task="reasoning",
        instruction=instruction,
        input=input_text,
        output="Yes" if record.relation_exists else "No",
        provenance=_provenance(record),
    )


_NEGATION_RE = re.compile(r"\b(is|are|was|were|has|have|can|does|do)\b")

_NEGATION_EDITS = {
    "is": "is not",
    "are": "are not",
    "was": "was not",
    "were": "were not",
    "can": "can not",
    "has": "does not have",
    "have": "do not have",
    "does": "does not",
    "do": "do not",
}


def negate_statement(statement: str) -> str:
    """Negate a declarative sentence with exactly one copula/auxiliary edit."""
    match = _NEGATION_RE.search(statement)
    if match is None:
        raise NoNegationSite(f"no copula or auxiliary in {statement!r}")
    replacement = _NEGATION_EDITS[match.group(1)]
    return statement[: match.start()] + replacement + statement[match.end() :]


def restructure_fact_verification(
    record: FactStatement, templates: TemplateSet
) -> list[InstructionRecord]:
    statement = _require(record.statement, "statement")
    true_label, false_label = ("True", "False") if record.is_true else ("False", "True")

    def build(text: str, label: str) -> InstructionRecord:
        instruction, input_text = templates.render(
            "fact_verification", record.record_id, statement=text
        )
        return InstructionRecord(
            task="fact_verification",
            instruction=instruction,
            input=input_text,
            output=label,
            provenance=_provenance(record),
        )

    records = [build(statement, true_label)]
    try:
        records.append(build(negate_statement(statement), false_label))
    except NoNegationSite:
        pass
    return records


def restructure_summarization(
    record: PaperContent | ReferencePair, templates: TemplateSet
) -> InstructionRecord:
    if isinstance(record, PaperContent):
        title = _require(record.title, "title")
        abstract = _require(record.abstract, "abstract")
        instruction, input_text = templates.render(
            "summarization.title", record.record_id, abstract=abstract
        )
        output = title
    else:
        context = _require(record.citing_context, "citing_context")
        output = _require(record.cited_title, "cited_title")
        instruction, input_text = templates.render(
            "summarization.reference", record.record_id, citing_context=context
        )
    return InstructionRecord(
        task="summarization",
        instruction=instruction,
        input=input_text,
        output=output,
        provenance=_provenance(record),
    )


def restructure_classification(
    record: CategoryLabel,
    templates: TemplateSet,
    label_sets: dict[str, tuple[str, ...]] | None = None,
) -> InstructionRecord:
    sets = label_sets if label_sets is not None else DEFAULT_LABEL_SETS
    labels = sets.get(record.label_set_id)
    if labels is None:
        raise UnknownLabel(f"unknown label set {record.label_set_id!r}")
    label = _require(record.label, "label")
    if label not in labels:
        raise UnknownLabel(f"label {label!r} not in set {record.label_set_id!r}")
    instruction, input_text = templates.render(
        "classification",
        record.record_id,
        subject_text=_require(record.subject_text, "subject_text"),
        labels=", ".join(labels),
    )
    return InstructionRecord(
        task="classification",
        instruction=instruction,
        input=input_text,
        output=label,
        provenance=_provenance(record),
    )


_RELATION_KINDS = (("synonyms", "synonyms"), ("hypernyms", "hypernyms"), ("hyponyms", "hyponyms"))


def restructure_word_semantics(
    record: TaxonomyRecord, templates: TemplateSet
) -> list[InstructionRecord]:
    term = _require(record.term, "term")
    out: list[InstructionRecord] = []
    for attr, relation in _RELATION_KINDS:
        values = [v.strip() for v in getattr(record, attr) if v and v.strip()]
        if not values:
            continue
        instruction, input_text = templates.render(
            "word_semantics", record.record_id, term=term, relation=relation
        )
        out.append(
            InstructionRecord(
                task="word_semantics",
                instruction=instruction,
                input=input_text,
                output=", ".join(values),
                provenance=_provenance(record),
            )
        )
    if not out:
        raise EmptyField("all relation lists empty")
    return out


def restructure_qa(
    record: QAPair | KeyValueRecord | CaptionRecord, templates: TemplateSet
) -> list[InstructionRecord]:
    provenance = _provenance(record)
    if isinstance(record, QAPair):
        question = _require(record.question, "question")
        answer = _require(record.answer, "answer")
        instruction, input_text = templates.render("qa.pair", record.record_id, question=question)
        return [
            InstructionRecord(
                task="qa",
                instruction=instruction,
                input=input_text,
                output=answer,
                provenance=provenance,
            )
        ]
    if isinstance(record, KeyValueRecord):
        entity = _require(record.entity_name, "entity_name")
        if not record.pairs:
            raise EmptyField("pairs must be nonempty")
        out = []
        for key, value in record.pairs:
            question = f"What is the {_require(key, 'key')} of {entity}?"
            instruction, input_text = templates.render(
                "qa.kv", f"{record.record_id}:{key}", question=question
            )
            out.append(
                InstructionRecord(
                    task="qa",
                    instruction=instruction,
                    input=input_text,
                    output=_require(value, "value"),
                    provenance=provenance,
                )
            )
        return out
    caption = _require(record.caption, "caption")
    mention = _require(record.surrounding_mention, "surrounding_mention")
    kind = "FIGURE" if record.caption_kind == "figure" else "TABLE"
    marked = f"{START_MARKERS[kind]}{caption}{END_MARKERS[kind]}"
    instruction, input_text = templates.render(
        "qa.caption",
        record.record_id,
        marked_caption=marked,
        caption_kind=record.caption_kind,
    )
    return [
        InstructionRecord(
            task="qa",
            instruction=instruction,
            input=input_text,
            output=mention,
            provenance=provenance,
        )
    ]


def restructure_record(
    record: SourceRecord,
    templates: TemplateSet,
    label_sets: dict[str, tuple[str, ...]] | None = None,
) -> list[InstructionRecord]:
    if isinstance(record, WordDescription):
        return [restructure_explanation(record, templates)]
    if isinstance(record, EntityMentions):
        return [restructure_ner(record, templates)]
    if isinstance(record, RelationRecord):
        return [restructure_reasoning(record, templates)]
    if isinstance(record, FactStatement):
        return restructure_fact_verification(record, templates)
    if isinstance(record, (PaperContent, ReferencePair)):
        return [restructure_summarization(record, templates)]
    if isinstance(record, CategoryLabel):
        return [restructure_classification(record, templates, label_sets)]
    if isinstance(record, TaxonomyRecord):
        return restructure_word_semantics(record, templates)
    if isinstance(record, (QAPair, KeyValueRecord, CaptionRecord)):
        return restructure_qa(record, templates)
    raise RestructureError(f"unhandled record type {type(record).__name__}")


def restructure_stream(
    records: Iterable[SourceRecord],
    templates: TemplateSet,
    label_sets: dict[str, tuple[str, ...]] | None = None,
) -> tuple[list[InstructionRecord], list[RejectRecord]]:
    """Restructure a stream, routing precondition failures to a reject list."""
    accepted: list[InstructionRecord] = []
    rejects: list[RejectRecord] = []
    for record in records:
        try:
            accepted.extend(restructure_record(record, templates, label_sets))
        except RestructureError as exc:
            rejects.append(
                RejectRecord(
                    reason=exc.reason,
                    signal=record.signal,
                    source_id=record.record_id,
                    detail=str(exc),
                )
            )
    return accepted, rejects
