"""Benchmark items, scorers, metrics, and evaluation reports."""

from .items import (
    CHOICE_LABELS,
    BadItem,
    HumanEvalRecord,
    ObjectiveItem,
    SubjectiveItem,
    load_benchmark,
    write_benchmark,
)
from .metrics import (
    PROMPT_VERSION,
    AccuracyResult,
    ChoiceScore,
    MultiTokenLabel,
    SubjectiveScore,
    TooShort,
    accuracy,
    evaluate_subjective,
    format_choice_prompt,
    gptscore,
    perplexity,
    score_choices,
)
from .protocol import RemoteScorer, ScoringServer, handle_line, serve_stdio, serve_tcp
from .reports import (
    CurveReport,
    DuplicateStep,
    EvalReport,
    ablation_matrix,
    checkpoint_curve,
    evaluate,
)
from .scorers import LocalScorer, Scorer, ScorerUnavailable, load_local_scorer, parse_scorer_spec

__all__ = [
    "CHOICE_LABELS",
    "PROMPT_VERSION",
    "AccuracyResult",
    "BadItem",
    "ChoiceScore",
    "CurveReport",
    "DuplicateStep",
    "EvalReport",
    "HumanEvalRecord",
    "LocalScorer",
    "MultiTokenLabel",
    "ObjectiveItem",
    "RemoteScorer",
    "Scorer",
    "ScorerUnavailable",
    "ScoringServer",
    "SubjectiveItem",
    "SubjectiveScore",
    "TooShort",
    "ablation_matrix",
    "accuracy",
    "checkpoint_curve",
    "evaluate",
    "evaluate_subjective",
    "format_choice_prompt",
    "gptscore",
    "handle_line",
    "load_benchmark",
    "load_local_scorer",
    "parse_scorer_spec",
    "perplexity",
    "score_choices",
    "serve_stdio",
    "serve_tcp",
    "write_benchmark",
]
