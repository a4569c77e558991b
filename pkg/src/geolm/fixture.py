"""Seeded toy fixture: a coherent micro-world for end-to-end runs.

Generates a synthetic mineral world and writes every input the pipeline
needs: raw documents (facts, exam drills, tables, captions, citations,
formulas), typed signals for all ten kinds, templates, a sampling plan,
cleaning rules, a general-instruction dataset, a 40-item benchmark whose
answers are facts stated in the corpus, and a pipeline config wiring it all
together. Everything is a pure function of the seed.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from .bench.items import ObjectiveItem, SubjectiveItem, write_benchmark
from .bench.metrics import format_choice_prompt
from .corpus.blocks import (
    CitationSpan,
    FigureCaption,
    Formula,
    Paragraph,
    RawDocument,
    Table,
    write_documents,
)
from .signals.records import (
    CaptionRecord,
    CategoryLabel,
    EntityMentions,
    FactStatement,
    InstructionRecord,
    KeyValueRecord,
    PaperContent,
    QAPair,
    ReferencePair,
    RelationRecord,
    SourceRecord,
    TaxonomyRecord,
    WordDescription,
    write_instruction_records,
    write_source_records,
)
from .signals.restructure import DISCIPLINES_18
from .signals.sampling import SamplingPlan, save_plan
from .signals.templates import TemplateSet, save_templates

_SYLLABLES = ("bar", "kel", "dor", "mal", "tir", "ves", "lin", "sor", "pel", "gran", "tho", "zan")
_SUFFIXES = ("ite", "ine", "ase")

_PROPERTIES = {
    "hardness": [str(n) for n in range(1, 10)],
    "color": ["green", "blue", "black", "white", "red", "amber", "violet", "gray"],
    "crystal system": ["cubic", "hexagonal", "tetragonal", "monoclinic", "triclinic", "trigonal"],
    "host rock": ["basalt", "granite", "limestone", "shale", "gneiss", "sandstone"],
}

_RULES_TOML = """\
min_paragraph_chars = 20
max_nonword_ratio = 0.5

[[rule]]
pattern = "Downloaded from [^\\\\s]+"
action = "drop_span"

[[rule]]
pattern = "ALL RIGHTS RESERVED"
action = "drop_block"
"""


def _mineral_names(rng: random.Random, count: int) -> list[str]:
    names: list[str] = []
    seen = set()
    while len(names) < count:
        name = rng.choice(_SYLLABLES) + rng.choice(_SYLLABLES) + rng.choice(_SUFFIXES)
        if name not in seen:
            seen.add(name)
            names.append(name)
    return names


def _fact_sentence(mineral: str, prop: str, value: str) -> str:
    if prop == "hardness":
        return f"The hardness of {mineral} is {value} on the Mohs scale."
    if prop == "color":
        return f"Crystals of {mineral} are typically {value} in hand specimen."
    if prop == "crystal system":
        return f"{mineral.capitalize()} crystallizes in the {value} system."
    return f"{mineral.capitalize()} occurs mainly in {value} outcrops."


def _question(mineral: str, prop: str) -> str:
    if prop == "hardness":
        return f"What is the Mohs hardness of {mineral}?"
    if prop == "color":
        return f"What color is {mineral} in hand specimen?"
    if prop == "crystal system":
        return f"In which crystal system does {mineral} crystallize?"
    return f"In which host rock does {mineral} mainly occur?"


def _build_world(rng: random.Random, n_minerals: int) -> list[dict]:
    minerals = _mineral_names(rng, n_minerals)
    props = list(_PROPERTIES)
    world = []
    for index, mineral in enumerate(minerals):
        prop = props[index % len(props)]
        value = rng.choice(_PROPERTIES[prop])
        world.append({"mineral": mineral, "prop": prop, "value": value})
    return world


def _build_benchmark(
    rng: random.Random, world: list[dict], count: int
) -> tuple[list[ObjectiveItem], list[SubjectiveItem]]:
    labels = ("A", "B", "C", "D")
    items: list[ObjectiveItem] = []
    # Cycle answer positions so labels stay exactly balanced.
    for index, fact in enumerate(world[:count]):
        pool = [v for v in _PROPERTIES[fact["prop"]] if v != fact["value"]]
        distractors = rng.sample(pool, 3)
        answer_pos = index % len(labels)
        values = list(distractors)
        values.insert(answer_pos, fact["value"])
        items.append(
            ObjectiveItem(
                id=f"obj-{index:03d}",
                question=_question(fact["mineral"], fact["prop"]),
                choices=dict(zip(labels, values)),
                answer=labels[answer_pos],
                subset="npee" if index % 2 == 0 else "aptest",
            )
        )
    subjective = [
        SubjectiveItem(
            id=f"subj-{i:02d}",
            question=f"What is {fact['mineral']} in geoscience?",
            reference_answer=_fact_sentence(fact["mineral"], fact["prop"], fact["value"]),
            kind=("word_explanation", "fill_blank", "essay")[i % 3],
        )
        for i, fact in enumerate(world[count : count + 6])
    ]
    return items, subjective


def _drill_documents(items: list[ObjectiveItem], copies: int) -> list[RawDocument]:
    docs = []
    for copy in range(copies):
        for item in items:
            text = format_choice_prompt(item) + " " + item.answer
            docs.append(
                RawDocument(
                    doc_id=f"drill-{item.id}-{copy}",
                    source="paper",
                    blocks=[Paragraph(text)],
                )
            )
    return docs


def _background_documents(rng: random.Random, world: list[dict]) -> list[RawDocument]:
    docs: list[RawDocument] = []
    for i, fact in enumerate(world):
        sentence = _fact_sentence(fact["mineral"], fact["prop"], fact["value"])
        filler = rng.choice(
            (
                "Field relations suggest a slow cooling history.",
                "Thin sections show clear zoning under crossed polars.",
                "Samples were collected during the regional mapping survey.",
                "The assemblage records low-grade regional metamorphism.",
            )
        )
        docs.append(
            RawDocument(
                doc_id=f"fact-{i:03d}",
                source="wiki" if i % 3 == 0 else "paper",
                blocks=[Paragraph(f"{sentence} {filler}")],
            )
        )
    for i in range(20):
        sample = rng.sample(world, 3)
        table = Table(
            cells=[["mineral", "property", "value"]]
            + [[f["mineral"], f["prop"], f["value"]] for f in sample],
            header_rows=1,
        )
        caption = FigureCaption(f"Measured properties of {sample[0]['mineral']} and relatives.")
        docs.append(
            RawDocument(
                doc_id=f"table-{i:03d}",
                source="paper",
                blocks=[
                    Paragraph(
                        f"We compile measurements for {sample[0]['mineral']} and related phases."
                    ),
                    table,
                    caption,
                ],
            )
        )
    for i in range(20):
        fact = rng.choice(world)
        resolved = rng.random() < 0.7
        docs.append(
            RawDocument(
                doc_id=f"cite-{i:03d}",
                source="paper_metadata",
                blocks=[
                    Paragraph(
                        f"Earlier work described the {fact['prop']} of {fact['mineral']} in detail."
                    ),
                    CitationSpan(
                        marker_text=f"[{i + 1}]",
                        resolved_title=(
                            f"A survey of {fact['mineral']} {fact['prop']}" if resolved else None
                        ),
                    ),
                    Formula(f"H_{i} = {rng.randint(2, 9)} + d/2"),
                ],
            )
        )
    return docs


def _build_signals(
    rng: random.Random, world: list[dict], items: list[ObjectiveItem]
) -> list[SourceRecord]:
    signals: list[SourceRecord] = []
    counter = 0

    def nid(prefix: str) -> str:
        nonlocal counter
        counter += 1
        return f"{prefix}-{counter:05d}"

    for fact in world:
        mineral, prop, value = fact["mineral"], fact["prop"], fact["value"]
        sentence = _fact_sentence(mineral, prop, value)
        signals.append(
            WordDescription(term=mineral, definition=sentence, record_id=nid("g7"))
        )
        signals.append(
            QAPair(question=_question(mineral, prop), answer=value, record_id=nid("g9"))
        )
        signals.append(FactStatement(statement=sentence, is_true=True, record_id=nid("g10")))
        other = rng.choice([w for w in world if w["mineral"] != mineral])
        signals.append(
            EntityMentions(
                paragraph=f"Veins of {mineral} crosscut {other['mineral']} in the core samples.",
                entities=[mineral, other["mineral"]],
                record_id=nid("g5"),
            )
        )
        signals.append(
            PaperContent(
                title=f"On the {prop} of {mineral}",
                abstract=f"{sentence} We report new measurements and a short discussion.",
                record_id=nid("g1"),
            )
        )
        signals.append(
            ReferencePair(
                citing_context=f"A recent survey measured the {prop} of {mineral} systematically.",
                cited_title=f"A survey of {mineral} {prop}",
                record_id=nid("g3"),
            )
        )
        signals.append(
            CategoryLabel(
                subject_text=f"{mineral} {prop} measurements",
                label=rng.choice(DISCIPLINES_18),
                label_set_id="disciplines-18",
                record_id=nid("g2"),
            )
        )
        signals.append(
            KeyValueRecord(
                entity_name=f"{mineral.capitalize()} (sample {counter:04d})",
                pairs=[("Name", mineral), (prop, value)],
                record_id=nid("kv"),
            )
        )
    for index in range(0, len(world) - 1, 2):
        a, b = world[index], world[index + 1]
        signals.append(
            RelationRecord(
                concept_a=a["mineral"],
                concept_b=b["mineral"],
                paragraph_a=_fact_sentence(a["mineral"], a["prop"], a["value"]),
                paragraph_b=_fact_sentence(b["mineral"], b["prop"], b["value"]),
                relation_exists=index % 4 == 0,
                record_id=nid("g6"),
            )
        )
        signals.append(
            TaxonomyRecord(
                term=a["mineral"],
                synonyms=[f"{a['mineral']} ore"] if index % 3 == 0 else [],
                hypernyms=["mineral"],
                hyponyms=[b["mineral"]] if index % 3 == 1 else [],
                record_id=nid("g8"),
            )
        )
    for i, fact in enumerate(rng.sample(world, 30)):
        signals.append(
            CaptionRecord(
                caption_kind="figure" if i % 2 == 0 else "table",
                caption=f"Distribution of {fact['mineral']} across the study area.",
                surrounding_mention=(
                    f"The {'figure' if i % 2 == 0 else 'table'} shows where {fact['mineral']}"
                    f" was sampled."
                ),
                record_id=nid("g4"),
            )
        )
    # Exam-format drills teach the choice layout during expert tuning.
    for copy in range(2):
        for item in items:
            signals.append(
                QAPair(
                    question=format_choice_prompt(item),
                    answer=item.answer,
                    record_id=nid("g9"),
                )
            )
    return signals


def _general_instructions(rng: random.Random, count: int) -> list[InstructionRecord]:
    words = ["basin", "fault", "strata", "magma", "drift", "shale", "flint", "karst"]
    records = []
    for i in range(count):
        word = rng.choice(words)
        kind = i % 3
        if kind == 0:
            records.append(
                InstructionRecord(
                    task="qa",
                    instruction="Repeat the input word exactly.",
                    input=word,
                    output=word,
                    provenance={"source_kind": "general", "source_id": f"gen-{i:04d}"},
                )
            )
        elif kind == 1:
            records.append(
                InstructionRecord(
                    task="qa",
                    instruction="Write the input word in uppercase.",
                    input=word,
                    output=word.upper(),
                    provenance={"source_kind": "general", "source_id": f"gen-{i:04d}"},
                )
            )
        else:
            records.append(
                InstructionRecord(
                    task="qa",
                    instruction=f"Answer with the first letter of the word {word}.",
                    input="",
                    output=word[0],
                    provenance={"source_kind": "general", "source_id": f"gen-{i:04d}"},
                )
            )
    return records


def build_fixture(out_dir: str | Path, seed: int = 2024) -> dict[str, Path]:
    """Write the complete toy fixture; returns the path of every file."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)

    world = _build_world(rng, 60)
    items, subjective = _build_benchmark(rng, world, 40)

    documents = (
        _drill_documents(items, copies=2)
        + _background_documents(rng, world)
    )
    signals = _build_signals(rng, world, items)
    general = _general_instructions(rng, 60)

    paths = {
        "raw_documents": out / "raw_documents.jsonl",
        "signals": out / "signals.jsonl",
        "templates": out / "templates.json",
        "plan": out / "plan.json",
        "rules": out / "rules.toml",
        "general_instructions": out / "general_instructions.jsonl",
        "benchmark": out / "bench.jsonl",
        "config": out / "config.json",
    }
    write_documents(paths["raw_documents"], documents)
    write_source_records(paths["signals"], signals)
    save_templates(paths["templates"], TemplateSet())
    save_plan(
        paths["plan"],
        SamplingPlan(
            targets={
                "explanation": 60,
                "ner": 60,
                "reasoning": 30,
                "fact_verification": 120,
                "summarization": 100,
                "classification": 60,
                "word_semantics": 40,
                "qa": 400,
            },
            seed=seed,
        ),
    )
    paths["rules"].write_text(_RULES_TOML, encoding="utf-8")
    write_instruction_records(paths["general_instructions"], general)
    write_benchmark(paths["benchmark"], items, subjective)

    config = {
        "seeds": {"forge": seed + 1, "pretrain": seed + 2, "tune": seed + 3, "eval": seed + 4},
        "paths": {
            "raw_documents": "raw_documents.jsonl",
            "signals": "signals.jsonl",
            "templates": "templates.json",
            "sampling_plan": "plan.json",
            "cleaning_rules": "rules.toml",
            "general_instructions": "general_instructions.jsonl",
            "benchmark": "bench.jsonl",
            "out_root": "run",
        },
        "model": {"d_model": 128, "n_layers": 4, "n_heads": 4, "context_len": 256},
        "pretrain": {
            "total_steps": 300,
            "learning_rate": 0.001,
            "global_batch": 16,
            "micro_batch": 8,
            "warmup_steps": 20,
            "checkpoint_every": 100,
        },
        "tune": {
            "mode": "sequential",
            "lora": {"r": 8, "alpha": 16, "targets": ["q_proj", "k_proj", "v_proj"]},
            "stages": [
                {
                    "name": "general",
                    "dataset": "general",
                    "epochs": 2,
                    "lr": 0.0001,
                    "global_batch": 8,
                    "micro_batch": 8,
                },
                {
                    "name": "expert",
                    "dataset": "expert",
                    "epochs": 2,
                    "lr": 0.0001,
                    "global_batch": 8,
                    "micro_batch": 8,
                },
            ],
        },
        "eval": {"ablation": True, "max_new": 32},
    }
    with open(paths["config"], "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2)
        fh.write("\n")
    return paths
