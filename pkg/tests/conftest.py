from __future__ import annotations

import json
from pathlib import Path

import pytest

from geolm.fixture import build_fixture

SMALL_PLAN = {
    "targets": {
        "explanation": 10,
        "ner": 10,
        "reasoning": 8,
        "fact_verification": 20,
        "summarization": 10,
        "classification": 10,
        "word_semantics": 10,
        "qa": 60,
    },
    "seed": 77,
    "dedup": True,
}

SMALL_PRETRAIN = {
    "total_steps": 10,
    "learning_rate": 0.001,
    "global_batch": 4,
    "micro_batch": 4,
    "warmup_steps": 2,
    "checkpoint_every": 5,
}


@pytest.fixture(scope="session")
def world_dir(tmp_path_factory) -> Path:
    """The toy fixture, built once per session."""
    path = tmp_path_factory.mktemp("world")
    build_fixture(path, seed=2024)
    plan_small = path / "plan_small.json"
    plan_small.write_text(json.dumps(SMALL_PLAN, indent=2) + "\n", encoding="utf-8")
    return path


def write_small_config(
    world: Path,
    target: Path,
    *,
    out_root: str = "run",
    ablation: bool = False,
    stage_epochs: int = 1,
) -> Path:
    """A reduced pipeline config wired to the session fixture files."""
    config = {
        "seeds": {"forge": 5, "pretrain": 6, "tune": 7, "eval": 8},
        "paths": {
            "raw_documents": str(world / "raw_documents.jsonl"),
            "signals": str(world / "signals.jsonl"),
            "templates": str(world / "templates.json"),
            "sampling_plan": str(world / "plan_small.json"),
            "cleaning_rules": str(world / "rules.toml"),
            "general_instructions": str(world / "general_instructions.jsonl"),
            "benchmark": str(world / "bench.jsonl"),
            "out_root": out_root,
        },
        "model": {"d_model": 64, "n_layers": 2, "n_heads": 2, "context_len": 256},
        "pretrain": dict(SMALL_PRETRAIN),
        "tune": {
            "mode": "sequential",
            "lora": {"r": 4, "alpha": 8},
            "stages": [
                {
                    "name": "general",
                    "dataset": "general",
                    "epochs": stage_epochs,
                    "lr": 0.0001,
                    "global_batch": 8,
                    "micro_batch": 8,
                },
                {
                    "name": "expert",
                    "dataset": "expert",
                    "epochs": stage_epochs,
                    "lr": 0.0001,
                    "global_batch": 8,
                    "micro_batch": 8,
                },
            ],
        },
        "eval": {"ablation": ablation, "max_new": 8},
    }
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    return target
