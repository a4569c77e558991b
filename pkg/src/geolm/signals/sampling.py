"""Deterministic dedup and per-task sampling of instruction records.

Exact dedup on (task, input, output) hashes, then uniform sampling without
replacement per task from a seed. Sampled count is always
min(target, available); shortfalls are reported, never padded.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .records import TASKS, InstructionRecord

#: Default per-task targets of the shipped sampling plan.
DEFAULT_TARGETS = {
    "ner": 2400,
    "reasoning": 600,
    "fact_verification": 8000,
    "summarization": 800,
    "classification": 2000,
    "word_semantics": 6400,
    "explanation": 4200,
    "qa": 15349,
}


@dataclass
class SamplingPlan:
    targets: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_TARGETS))
    seed: int = 0
    dedup: bool = True

    def __post_init__(self) -> None:
        for task, target in self.targets.items():
            if task not in TASKS:
                raise ValueError(f"unknown task {task!r} in plan")
            if target < 0:
                raise ValueError(f"negative target for {task!r}")


@dataclass
class TaskStats:
    task: str
    available_raw: int
    available: int
    target: int
    sampled: int

    @property
    def shortfall(self) -> int:
        return max(0, self.target - self.sampled)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "available_raw": self.available_raw,
            "available": self.available,
            "target": self.target,
            "sampled": self.sampled,
            "shortfall": self.shortfall,
        }


@dataclass
class SignalDataset:
    records: list[InstructionRecord]
    stats: list[TaskStats]

    def stats_dict(self) -> dict:
        return {
            "tasks": [s.to_dict() for s in self.stats],
            "total_sampled": sum(s.sampled for s in self.stats),
            "total_available": sum(s.available for s in self.stats),
        }


def record_key(record: InstructionRecord) -> str:
    payload = "\x00".join((record.task, record.input, record.output))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _task_seed(seed: int, task: str) -> int:
    digest = hashlib.sha256(f"{seed}:{task}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def sample_and_clean(records: Iterable[InstructionRecord], plan: SamplingPlan) -> SignalDataset:
    by_task: dict[str, list[InstructionRecord]] = {task: [] for task in TASKS}
    raw_counts = {task: 0 for task in TASKS}
    seen: set[str] = set()
    for record in records:
        if record.task not in by_task:
            raise ValueError(f"record with unknown task {record.task!r}")
        raw_counts[record.task] += 1
        if plan.dedup:
            key = record_key(record)
            if key in seen:
                continue
            seen.add(key)
        by_task[record.task].append(record)

    sampled_records: list[InstructionRecord] = []
    stats: list[TaskStats] = []
    for task in TASKS:
        pool = by_task[task]
        available = len(pool)
        # Tasks absent from the plan pass through unsampled.
        target = plan.targets.get(task, available)
        take = min(target, available)
        if take < available:
            rng = random.Random(_task_seed(plan.seed, task))
            chosen = sorted(rng.sample(range(available), take))
            picked = [pool[i] for i in chosen]
        else:
            picked = list(pool)
        sampled_records.extend(picked)
        stats.append(
            TaskStats(
                task=task,
                available_raw=raw_counts[task],
                available=available,
                target=target,
                sampled=len(picked),
            )
        )
    return SignalDataset(records=sampled_records, stats=stats)


def load_plan(path: str | Path) -> SamplingPlan:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return SamplingPlan(
        targets=dict(data.get("targets", DEFAULT_TARGETS)),
        seed=int(data.get("seed", 0)),
        dedup=bool(data.get("dedup", True)),
    )


def save_plan(path: str | Path, plan: SamplingPlan) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {"targets": plan.targets, "seed": plan.seed, "dedup": plan.dedup},
            fh,
            indent=2,
        )
        fh.write("\n")
