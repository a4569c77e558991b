"""Instruction templates with deterministic per-record selection.

Each template key maps to a list of (instruction, input) patterns with named
slots. Selection hashes (seed, key, record id) so a record always draws the
same template, while different records spread across the list.
"""

from __future__ import annotations

import hashlib
import json
import string
from dataclasses import dataclass, field
from pathlib import Path

TEMPLATE_VERSION = "t1"

#: Slots each template key may reference; linted at load time.
TEMPLATE_SLOTS = {
    "explanation": {"term"},
    "ner": {"paragraph"},
    "reasoning": {"concept_a", "concept_b", "paragraph_a", "paragraph_b"},
    "fact_verification": {"statement"},
    "summarization.title": {"abstract"},
    "summarization.reference": {"citing_context"},
    "classification": {"subject_text", "labels"},
    "word_semantics": {"term", "relation"},
    "qa.pair": {"question"},
    "qa.kv": {"question"},
    "qa.caption": {"marked_caption", "caption_kind"},
}

DEFAULT_TEMPLATES: dict[str, list[dict[str, str]]] = {
    "explanation": [
        {"instruction": "What is {term} in geoscience?", "input": ""},
        {"instruction": "Explain the following geoscience term.", "input": "{term}"},
        {"instruction": "Give the definition of the geoscience term {term}.", "input": ""},
    ],
    "ner": [
        {
            "instruction": "List the geoscience entities mentioned in the paragraph, separated by commas.",
            "input": "{paragraph}",
        },
        {
            "instruction": "Extract every geoscience entity from the following text, in order of appearance.",
            "input": "{paragraph}",
        },
        {
            "instruction": "Which geoscience entities occur in this paragraph? Answer with a comma-separated list.",
            "input": "{paragraph}",
        },
    ],
    "reasoning": [
        {
            "instruction": "Do the two geoscience concepts below stand in a meaningful relation? Answer Yes or No.",
            "input": "Concept A: {concept_a}\nParagraph A: {paragraph_a}\nConcept B: {concept_b}\nParagraph B: {paragraph_b}",
        },
        {
            "instruction": "Given each concept with a paragraph describing it, decide whether a relation exists between them. Answer Yes or No.",
            "input": "Concept A: {concept_a}\nParagraph A: {paragraph_a}\nConcept B: {concept_b}\nParagraph B: {paragraph_b}",
        },
        {
            "instruction": "Based on the two descriptions, is there a relation between the concepts? Reply Yes or No.",
            "input": "Concept A: {concept_a}\nParagraph A: {paragraph_a}\nConcept B: {concept_b}\nParagraph B: {paragraph_b}",
        },
    ],
    "fact_verification": [
        {
            "instruction": "Is the following geoscience statement true or false? Answer True or False.",
            "input": "{statement}",
        },
        {
            "instruction": "Verify this statement about geoscience. Answer with True or False.",
            "input": "{statement}",
        },
        {
            "instruction": "Decide whether the statement below is factually correct. Respond True or False.",
            "input": "{statement}",
        },
    ],
    "summarization.title": [
        {"instruction": "Write a title for the paper with this abstract.", "input": "{abstract}"},
        {
            "instruction": "Suggest a suitable title for a geoscience paper given its abstract.",
            "input": "{abstract}",
        },
        {
            "instruction": "Summarize the abstract below into a paper title.",
            "input": "{abstract}",
        },
    ],
    "summarization.reference": [
        {
            "instruction": "Which paper does this passage refer to? Give its title.",
            "input": "{citing_context}",
        },
        {
            "instruction": "Name the work summarized by the following citing sentence.",
            "input": "{citing_context}",
        },
        {
            "instruction": "Provide the title of the referenced paper described below.",
            "input": "{citing_context}",
        },
    ],
    "classification": [
        {
            "instruction": "Classify the subject into one of the following categories: {labels}.",
            "input": "{subject_text}",
        },
        {
            "instruction": "Which of these categories does the text belong to? Options: {labels}.",
            "input": "{subject_text}",
        },
        {
            "instruction": "Assign the most fitting category. Choose from: {labels}.",
            "input": "{subject_text}",
        },
    ],
    "word_semantics": [
        {
            "instruction": "List the {relation} of the geoscience term, separated by commas.",
            "input": "{term}",
        },
        {
            "instruction": "Give the {relation} of the following term.",
            "input": "{term}",
        },
        {
            "instruction": "What are the {relation} of this geoscience term?",
            "input": "{term}",
        },
    ],
    "qa.pair": [
        {"instruction": "Answer the following geoscience question.", "input": "{question}"},
        {"instruction": "Provide an answer to this question about geoscience.", "input": "{question}"},
        {"instruction": "Answer concisely.", "input": "{question}"},
    ],
    "qa.kv": [
        {"instruction": "Answer the following geoscience question.", "input": "{question}"},
        {"instruction": "Use the record to answer.", "input": "{question}"},
        {"instruction": "Answer from the database entry.", "input": "{question}"},
    ],
    "qa.caption": [
        {
            "instruction": "Explain what the paper says about the {caption_kind} with this caption.",
            "input": "{marked_caption}",
        },
        {
            "instruction": "Describe how the passage discusses the {caption_kind} captioned below.",
            "input": "{marked_caption}",
        },
        {
            "instruction": "What does the surrounding text say about this {caption_kind}?",
            "input": "{marked_caption}",
        },
    ],
}


class TemplateError(ValueError):
    pass


@dataclass
class TemplateSet:
    templates: dict[str, list[dict[str, str]]] = field(
        default_factory=lambda: {k: list(v) for k, v in DEFAULT_TEMPLATES.items()}
    )
    version: str = TEMPLATE_VERSION
    seed: int = 0

    def __post_init__(self) -> None:
        formatter = string.Formatter()
        for key, entries in self.templates.items():
            allowed = TEMPLATE_SLOTS.get(key)
            if allowed is None:
                raise TemplateError(f"unknown template key {key!r}")
            if not entries:
                raise TemplateError(f"no templates for key {key!r}")
            for entry in entries:
                for text in (entry.get("instruction", ""), entry.get("input", "")):
                    for _, slot, _, _ in formatter.parse(text):
                        if slot is not None and slot not in allowed:
                            raise TemplateError(f"slot {slot!r} not allowed for {key!r}")

    def pick(self, key: str, record_id: str) -> dict[str, str]:
        entries = self.templates[key]
        digest = hashlib.sha256(f"{self.seed}:{key}:{record_id}".encode("utf-8")).digest()
        return entries[int.from_bytes(digest[:8], "little") % len(entries)]

    def render(self, key: str, record_id: str, **slots: str) -> tuple[str, str]:
        entry = self.pick(key, record_id)
        return entry["instruction"].format(**slots), entry.get("input", "").format(**slots)


def load_templates(path: str | Path, seed: int = 0) -> TemplateSet:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return TemplateSet(
        templates=data["templates"], version=data.get("version", TEMPLATE_VERSION), seed=seed
    )


def save_templates(path: str | Path, templates: TemplateSet) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {"version": templates.version, "templates": templates.templates},
            fh,
            ensure_ascii=False,
            indent=2,
        )
        fh.write("\n")
