"""Evaluation reports: per-run summaries, checkpoint curves, ablation rows."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .items import ObjectiveItem, SubjectiveItem
from .metrics import (
    PROMPT_VERSION,
    AccuracyResult,
    SubjectiveScore,
    accuracy,
    evaluate_subjective,
)
from .scorers import Scorer


class DuplicateStep(ValueError):
    pass


@dataclass
class EvalReport:
    accuracy: float
    correct: int
    total: int
    per_subset: dict[str, float]
    items: list[dict]
    subjective: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "correct": self.correct,
            "total": self.total,
            "per_subset": self.per_subset,
            "items": self.items,
            "subjective": self.subjective,
            "metadata": self.metadata,
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, ensure_ascii=False, indent=2, sort_keys=True)
            fh.write("\n")


def _result_to_report(
    result: AccuracyResult,
    subjective: Sequence[SubjectiveScore],
    metadata: dict,
) -> EvalReport:
    return EvalReport(
        accuracy=result.accuracy,
        correct=result.correct,
        total=result.total,
        per_subset=result.subset_accuracy(),
        items=[
            {
                "id": s.item_id,
                "subset": s.subset,
                "predicted": s.predicted,
                "answer": s.answer,
                "correct": s.correct,
                "probabilities": {k: round(v, 10) for k, v in s.probabilities.items()},
            }
            for s in result.scores
        ],
        subjective=[
            {
                "id": s.item_id,
                "kind": s.kind,
                "generated": s.generated,
                "perplexity": s.perplexity,
                "gptscore": s.gptscore,
            }
            for s in subjective
        ],
        metadata=metadata,
    )


def evaluate(
    scorer: Scorer,
    objective: Sequence[ObjectiveItem],
    subjective: Sequence[SubjectiveItem] = (),
    *,
    evaluator: Scorer | None = None,
    seed: int = 0,
    max_new: int = 64,
) -> EvalReport:
    """Full benchmark pass: objective accuracy plus subjective scoring."""
    result = accuracy(scorer, objective)
    subjective_scores = (
        evaluate_subjective(scorer, evaluator or scorer, subjective, max_new=max_new)
        if subjective
        else []
    )
    metadata = {
        "scorer": scorer.scorer_id,
        "evaluator": (evaluator or scorer).scorer_id if subjective else None,
        "seed": seed,
        "prompt_version": PROMPT_VERSION,
    }
    return _result_to_report(result, subjective_scores, metadata)


@dataclass
class CurvePoint:
    step: int
    accuracy: float
    per_subset: dict[str, float]


@dataclass
class CurveReport:
    points: list[CurvePoint]

    def to_csv(self) -> str:
        lines = ["step,accuracy"]
        lines.extend(f"{p.step},{p.accuracy:.6f}" for p in self.points)
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "points": [
                {"step": p.step, "accuracy": p.accuracy, "per_subset": p.per_subset}
                for p in self.points
            ]
        }


def checkpoint_curve(
    checkpoints: Sequence[tuple[int, Scorer]], items: Sequence[ObjectiveItem]
) -> CurveReport:
    """Accuracy at each (step, scorer), ordered by step."""
    if len(checkpoints) < 2:
        raise ValueError("need at least two checkpoints for a curve")
    steps = [step for step, _ in checkpoints]
    if len(set(steps)) != len(steps):
        raise DuplicateStep(f"duplicate step values in {sorted(steps)}")
    points = []
    for step, scorer in sorted(checkpoints, key=lambda pair: pair[0]):
        result = accuracy(scorer, items)
        points.append(
            CurvePoint(step=step, accuracy=result.accuracy, per_subset=result.subset_accuracy())
        )
    return CurveReport(points=points)


def ablation_matrix(
    arms: dict[str, Scorer], items: Sequence[ObjectiveItem]
) -> list[dict]:
    """One row per arm, deterministic row order by arm name."""
    if not arms:
        raise ValueError("no ablation arms given")
    rows = []
    for name in sorted(arms):
        result = accuracy(arms[name], items)
        row = {"arm": name, "accuracy": result.accuracy}
        row.update(result.subset_accuracy())
        rows.append(row)
    return rows
