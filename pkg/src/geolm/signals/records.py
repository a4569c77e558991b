"""Typed knowledge signals and the instruction records forged from them.

Input JSONL carries one source record per line with a ``signal``
discriminator (g1..g10, kv). Output records are (task, instruction, input,
output) tuples with provenance back to the source record.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Union

TASKS = (
    "explanation",
    "ner",
    "reasoning",
    "fact_verification",
    "summarization",
    "classification",
    "word_semantics",
    "qa",
)


@dataclass
class PaperContent:  # g1
    title: str
    abstract: str
    fulltext: str | None = None
    record_id: str = ""

    signal = "g1"


@dataclass
class CategoryLabel:  # g2
    subject_text: str
    label: str
    label_set_id: str
    record_id: str = ""

    signal = "g2"


@dataclass
class ReferencePair:  # g3
    citing_context: str
    cited_title: str
    record_id: str = ""

    signal = "g3"


@dataclass
class CaptionRecord:  # g4
    caption_kind: str  # "figure" | "table"
    caption: str
    surrounding_mention: str
    record_id: str = ""

    signal = "g4"


@dataclass
class EntityMentions:  # g5
    paragraph: str
    entities: list[str] = field(default_factory=list)
    record_id: str = ""

    signal = "g5"


@dataclass
class RelationRecord:  # g6
    concept_a: str
    concept_b: str
    paragraph_a: str
    paragraph_b: str
    relation_exists: bool
    record_id: str = ""

    signal = "g6"


@dataclass
class WordDescription:  # g7
    term: str
    definition: str
    record_id: str = ""

    signal = "g7"


@dataclass
class TaxonomyRecord:  # g8
    term: str
    synonyms: list[str] = field(default_factory=list)
    hypernyms: list[str] = field(default_factory=list)
    hyponyms: list[str] = field(default_factory=list)
    record_id: str = ""

    signal = "g8"


@dataclass
class QAPair:  # g9
    question: str
    answer: str
    record_id: str = ""

    signal = "g9"


@dataclass
class FactStatement:  # g10
    statement: str
    is_true: bool = True
    record_id: str = ""

    signal = "g10"


@dataclass
class KeyValueRecord:  # g10, website form
    entity_name: str
    pairs: list[tuple[str, str]] = field(default_factory=list)
    record_id: str = ""

    signal = "kv"


SourceRecord = Union[
    PaperContent,
    CategoryLabel,
    ReferencePair,
    CaptionRecord,
    EntityMentions,
    RelationRecord,
    WordDescription,
    TaxonomyRecord,
    QAPair,
    FactStatement,
    KeyValueRecord,
]

_SIGNAL_TYPES = {
    cls.signal: cls
    for cls in (
        PaperContent,
        CategoryLabel,
        ReferencePair,
        CaptionRecord,
        EntityMentions,
        RelationRecord,
        WordDescription,
        TaxonomyRecord,
        QAPair,
        FactStatement,
        KeyValueRecord,
    )
}


@dataclass
class InstructionRecord:
    task: str
    instruction: str
    input: str
    output: str
    provenance: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "instruction": self.instruction,
            "input": self.input,
            "output": self.output,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "InstructionRecord":
        return cls(
            task=data["task"],
            instruction=data["instruction"],
            input=data.get("input", ""),
            output=data["output"],
            provenance=dict(data.get("provenance", {})),
        )


@dataclass
class RejectRecord:
    reason: str
    signal: str
    source_id: str
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "reason": self.reason,
            "signal": self.signal,
            "source_id": self.source_id,
            "detail": self.detail,
        }


def source_record_from_dict(data: dict, fallback_id: str = "") -> SourceRecord:
    signal = data.get("signal")
    cls = _SIGNAL_TYPES.get(signal)
    if cls is None:
        raise ValueError(f"unknown signal {signal!r}")
    record_id = data.get("id") or fallback_id
    if cls is KeyValueRecord:
        return KeyValueRecord(
            entity_name=data["entity_name"],
            pairs=[(str(k), str(v)) for k, v in data.get("pairs", [])],
            record_id=record_id,
        )
    kwargs = {k: v for k, v in data.items() if k not in ("signal", "id")}
    return cls(record_id=record_id, **kwargs)


def source_record_to_dict(record: SourceRecord) -> dict:
    data = {"signal": record.signal, "id": record.record_id}
    for key, value in record.__dict__.items():
        if key == "record_id":
            continue
        if isinstance(value, tuple):
            value = list(value)
        data[key] = value
    if isinstance(record, KeyValueRecord):
        data["pairs"] = [[k, v] for k, v in record.pairs]
    return data


def read_source_records(path: str | Path) -> Iterator[SourceRecord]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            fallback = f"{data.get('signal', 'rec')}-{lineno:06d}"
            yield source_record_from_dict(data, fallback_id=fallback)


def write_source_records(path: str | Path, records: Iterable[SourceRecord]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(source_record_to_dict(record), ensure_ascii=False) + "\n")
            count += 1
    return count


def read_instruction_records(path: str | Path) -> list[InstructionRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(InstructionRecord.from_dict(json.loads(line)))
    return records


def write_instruction_records(path: str | Path, records: Iterable[InstructionRecord]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")
            count += 1
    return count


def write_rejects(path: str | Path, rejects: Iterable[RejectRecord]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for reject in rejects:
            fh.write(json.dumps(reject.to_dict(), ensure_ascii=False) + "\n")
            count += 1
    return count


def validate_instruction_record(record: InstructionRecord) -> list[str]:
    """Return schema problems for the record's task (empty list when valid)."""
    problems: list[str] = []
    if record.task not in TASKS:
        problems.append(f"unknown task {record.task!r}")
        return problems
    if not record.instruction.strip():
        problems.append("empty instruction")
    if not record.output:
        problems.append("empty output")
    if record.task == "reasoning" and record.output not in ("Yes", "No"):
        problems.append(f"reasoning output must be Yes/No, got {record.output!r}")
    if record.task == "fact_verification" and record.output not in ("True", "False"):
        problems.append(f"fact_verification output must be True/False, got {record.output!r}")
    if record.task in ("ner", "word_semantics"):
        if any(not part.strip() for part in record.output.split(", ")):
            problems.append("list output contains empty element")
    if record.task in ("ner", "reasoning", "fact_verification", "summarization", "classification"):
        if not record.input:
            problems.append(f"{record.task} requires nonempty input")
    if not record.provenance.get("source_kind") or not record.provenance.get("source_id"):
        problems.append("missing provenance")
    return problems
