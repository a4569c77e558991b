"""Benchmark item types and JSONL loading.

Objective records carry a ``choices`` map with labels contiguous from A;
subjective records carry a reference answer. One file may mix both kinds;
the presence of ``choices`` discriminates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

CHOICE_LABELS = ("A", "B", "C", "D", "E")
SUBSETS = ("npee", "aptest", "custom")
SUBJECTIVE_KINDS = ("fill_blank", "word_explanation", "essay")


class BadItem(ValueError):
    pass


@dataclass
class ObjectiveItem:
    id: str
    question: str
    choices: dict[str, str]
    answer: str
    subset: str = "custom"

    def __post_init__(self) -> None:
        labels = tuple(self.choices)
        if len(labels) < 2:
            raise BadItem(f"{self.id}: need at least two choices")
        if labels != CHOICE_LABELS[: len(labels)]:
            raise BadItem(f"{self.id}: labels must be contiguous from A, got {labels}")
        if self.answer not in self.choices:
            raise BadItem(f"{self.id}: answer {self.answer!r} not among choices")
        if self.subset not in SUBSETS:
            raise BadItem(f"{self.id}: unknown subset {self.subset!r}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "question": self.question,
            "choices": self.choices,
            "answer": self.answer,
            "subset": self.subset,
        }


@dataclass
class SubjectiveItem:
    id: str
    question: str
    reference_answer: str
    kind: str = "word_explanation"

    def __post_init__(self) -> None:
        if not self.question or not self.reference_answer:
            raise BadItem(f"{self.id}: question and reference_answer must be nonempty")
        if self.kind not in SUBJECTIVE_KINDS:
            raise BadItem(f"{self.id}: unknown kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "question": self.question,
            "reference_answer": self.reference_answer,
            "kind": self.kind,
        }


@dataclass
class HumanEvalRecord:
    """Schema for manually entered panel scores (no automation)."""

    item_id: str
    rationality: int
    correctness: int
    consistency: int
    rater: str = ""

    def __post_init__(self) -> None:
        for name in ("rationality", "correctness", "consistency"):
            value = getattr(self, name)
            if not 1 <= value <= 3:
                raise BadItem(f"{self.item_id}: {name} must be in 1..3, got {value}")


def load_benchmark(path: str | Path) -> tuple[list[ObjectiveItem], list[SubjectiveItem]]:
    objective: list[ObjectiveItem] = []
    subjective: list[SubjectiveItem] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            if "choices" in data:
                objective.append(
                    ObjectiveItem(
                        id=str(data["id"]),
                        question=data["question"],
                        choices={str(k): str(v) for k, v in data["choices"].items()},
                        answer=str(data["answer"]),
                        subset=data.get("subset", "custom"),
                    )
                )
            else:
                subjective.append(
                    SubjectiveItem(
                        id=str(data["id"]),
                        question=data["question"],
                        reference_answer=data["reference_answer"],
                        kind=data.get("kind", "word_explanation"),
                    )
                )
    return objective, subjective


def write_benchmark(
    path: str | Path,
    objective: Iterable[ObjectiveItem],
    subjective: Iterable[SubjectiveItem] = (),
) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for item in objective:
            fh.write(json.dumps(item.to_dict(), ensure_ascii=False) + "\n")
            count += 1
        for item in subjective:
            fh.write(json.dumps(item.to_dict(), ensure_ascii=False) + "\n")
            count += 1
    return count
