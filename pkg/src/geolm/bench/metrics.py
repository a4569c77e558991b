"""Evaluation metrics: choice-label accuracy, perplexity, generation score.

Objective items are scored by restricting next-token log-likelihoods to the
label tokens after the cue line and softmaxing over exactly those; the
prompt layout is byte-exact and versioned. Perplexity is
exp(mean NLL, natural log) over every token after the first; the generation
score is the mean token log-likelihood of the generated text under the
evaluator (negative loss, higher is better).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from ..model.tokenizer import TOKENIZER
from .items import ObjectiveItem, SubjectiveItem
from .scorers import Scorer

PROMPT_VERSION = "choice-v1"


class TooShort(ValueError):
    pass


class MultiTokenLabel(ValueError):
    pass


def format_choice_prompt(item: ObjectiveItem) -> str:
    """Question, enumerated choices, and the exact terminal cue line."""
    lines = [item.question, "Choose from:"]
    lines.extend(f"{label}. {text}" for label, text in item.choices.items())
    lines.append("The answer is:")
    return "\n".join(lines)


@dataclass
class ChoiceScore:
    item_id: str
    probabilities: dict[str, float]
    predicted: str
    answer: str
    subset: str

    @property
    def correct(self) -> bool:
        return self.predicted == self.answer


def score_choices(scorer: Scorer, item: ObjectiveItem) -> ChoiceScore:
    """Softmax over the label-token log-likelihoods; argmax predicts.

    The label letter is scored as the single token following the prompt plus
    one deterministic space. Ties break to the alphabetically first label.
    """
    prompt = format_choice_prompt(item) + " "
    labels = list(item.choices)
    label_ids = []
    for label in labels:
        ids = TOKENIZER.encode(label)
        if len(ids) != 1:
            raise MultiTokenLabel(f"label {label!r} is not a single token")
        label_ids.append(ids[0])
    row_fn = getattr(scorer, "next_token_logprobs", None)
    if row_fn is not None:
        # One forward covers every label; values match per-label calls exactly.
        row = row_fn(prompt)
        logprobs = [float(row[tid]) for tid in label_ids]
    else:
        logprobs = []
        for label in labels:
            values = scorer.token_logprobs(prompt, label)
            if len(values) != 1:
                raise MultiTokenLabel(f"expected one logprob for label {label!r}")
            logprobs.append(values[0])
    peak = max(logprobs)
    weights = [math.exp(lp - peak) for lp in logprobs]
    total = sum(weights)
    probabilities = {label: w / total for label, w in zip(labels, weights)}
    best = max(range(len(labels)), key=lambda i: (weights[i], -i))
    # max() keeps the first of equal weights; labels are already sorted A..E.
    predicted = labels[best]
    return ChoiceScore(
        item_id=item.id,
        probabilities=probabilities,
        predicted=predicted,
        answer=item.answer,
        subset=item.subset,
    )


@dataclass
class AccuracyResult:
    correct: int
    total: int
    per_subset: dict[str, tuple[int, int]] = field(default_factory=dict)
    scores: list[ChoiceScore] = field(default_factory=list)

    @property
    def accuracy(self) -> float:
        return self.correct / self.total

    def subset_accuracy(self) -> dict[str, float]:
        return {name: c / t for name, (c, t) in sorted(self.per_subset.items())}


def accuracy(scorer: Scorer, items: Sequence[ObjectiveItem]) -> AccuracyResult:
    if not items:
        raise ValueError("no objective items to score")
    result = AccuracyResult(correct=0, total=len(items))
    for item in items:
        score = score_choices(scorer, item)
        result.scores.append(score)
        sub_correct, sub_total = result.per_subset.get(item.subset, (0, 0))
        result.per_subset[item.subset] = (sub_correct + int(score.correct), sub_total + 1)
        result.correct += int(score.correct)
    return result


def perplexity(scorer: Scorer, text: str) -> float:
    """exp of the mean NLL over all tokens after the first."""
    if len(TOKENIZER.encode(text)) < 2:
        raise TooShort("text must tokenize to at least two tokens")
    logprobs = scorer.token_logprobs(text)
    if not logprobs:
        raise TooShort("scorer returned no logprobs")
    mean_nll = -sum(logprobs) / len(logprobs)
    return math.exp(mean_nll)


def gptscore(scorer: Scorer, instruction: str, generated: str) -> float:
    """Mean token log-likelihood of ``generated`` conditioned on ``instruction``."""
    if not generated:
        raise TooShort("generated text is empty")
    logprobs = scorer.token_logprobs(instruction, generated)
    if not logprobs:
        raise TooShort("generated text has no tokens")
    return sum(logprobs) / len(logprobs)


@dataclass
class SubjectiveScore:
    item_id: str
    kind: str
    generated: str
    perplexity: float | None
    gptscore: float | None


def evaluate_subjective(
    scorer: Scorer,
    evaluator: Scorer,
    items: Sequence[SubjectiveItem],
    *,
    max_new: int = 64,
) -> list[SubjectiveScore]:
    """Generate an answer per item, then score fluency and likelihood."""
    out: list[SubjectiveScore] = []
    for item in items:
        generated = scorer.generate(item.question, max_new=max_new)
        try:
            ppl = perplexity(evaluator, generated)
        except TooShort:
            ppl = None
        try:
            score = gptscore(evaluator, item.question, generated)
        except TooShort:
            score = None
        out.append(
            SubjectiveScore(
                item_id=item.id,
                kind=item.kind,
                generated=generated,
                perplexity=ppl,
                gptscore=score,
            )
        )
    return out
