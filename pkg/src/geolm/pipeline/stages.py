"""Stage implementations: ingest, forge, pretrain, tune, evaluate.

Each stage reads files, writes files under the run root, and returns a
label->path map of its outputs; the runner handles hashing, timing, and
skip-if-current logic. Stage outputs carry no wall-clock content, so reruns
are byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..adapters.lora import attach, save_adapter_file
from ..adapters.sft import StagePlan, StageSpec, run_recipe
from ..bench.items import load_benchmark
from ..bench.reports import ablation_matrix, checkpoint_curve, evaluate
from ..bench.scorers import LocalScorer
from ..corpus.blocks import read_documents, read_normalized, write_normalized
from ..corpus.cleaning import CleaningRuleSet, load_rules
from ..corpus.normalize import normalize_document, read_corpus_text, write_corpus_text
from ..corpus.stats import corpus_stats
from ..model.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from ..model.network import init_params
from ..model.tokenizer import TOKENIZER
from ..model.train import train
from ..signals.records import (
    read_instruction_records,
    read_source_records,
    write_instruction_records,
    write_rejects,
)
from ..signals.restructure import restructure_stream
from ..signals.sampling import load_plan, sample_and_clean
from ..signals.templates import TemplateSet, load_templates
from .config import PipelineConfig


class StageFailed(RuntimeError):
    def __init__(self, stage: str, cause: str):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def _write_json(path: Path, data: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


def stage_ingest(config: PipelineConfig) -> dict[str, Path]:
    rules = load_rules(config.cleaning_rules) if config.cleaning_rules else CleaningRuleSet()
    normalized = [
        normalize_document(doc, rules) for doc in read_documents(config.raw_documents)
    ]
    out_jsonl = config.artifact("corpus.jsonl")
    out_text = config.artifact("corpus.txt")
    out_stats = config.artifact("corpus_stats.json")
    write_normalized(out_jsonl, normalized)
    write_corpus_text(out_text, normalized)
    _write_json(out_stats, corpus_stats(normalized).to_dict())
    return {"corpus.jsonl": out_jsonl, "corpus.txt": out_text, "corpus_stats.json": out_stats}


def stage_forge(config: PipelineConfig) -> dict[str, Path]:
    if config.templates:
        templates = load_templates(config.templates, seed=config.seeds["forge"])
    else:
        templates = TemplateSet(seed=config.seeds["forge"])
    plan = load_plan(config.sampling_plan)
    records, rejects = restructure_stream(read_source_records(config.signals), templates)
    dataset = sample_and_clean(records, plan)
    out_data = config.artifact("expert.jsonl")
    out_rejects = config.artifact("rejects.jsonl")
    out_stats = config.artifact("forge_stats.json")
    write_instruction_records(out_data, dataset.records)
    write_rejects(out_rejects, rejects)
    stats = dataset.stats_dict()
    stats["rejects"] = len(rejects)
    stats["template_version"] = templates.version
    _write_json(out_stats, stats)
    return {"expert.jsonl": out_data, "rejects.jsonl": out_rejects, "forge_stats.json": out_stats}


def _checkpoint_name(step: int) -> str:
    return f"ckpt-{step:06d}.tlm"


def stage_pretrain(config: PipelineConfig) -> dict[str, Path]:
    corpus_path = config.artifact("corpus.txt")
    if not corpus_path.exists():
        raise StageFailed("pretrain", f"missing corpus {corpus_path}")
    documents = [TOKENIZER.encode(text) for text in read_corpus_text(corpus_path)]
    seed = config.seeds["pretrain"]
    ckpt = Checkpoint(
        config=config.model,
        tensors=init_params(config.model, seed=seed),
        step=0,
        rng_state=seed,
    )
    outputs: dict[str, Path] = {}
    init_path = config.artifact(_checkpoint_name(0))
    save_checkpoint(init_path, ckpt)
    outputs[_checkpoint_name(0)] = init_path

    def save_snapshot(step: int, snapshot: Checkpoint) -> None:
        path = config.artifact(_checkpoint_name(step))
        save_checkpoint(path, snapshot)
        outputs[_checkpoint_name(step)] = path

    log_path = config.artifact("loss_log.csv")
    train(ckpt, documents, config.pretrain, log_path=log_path, on_checkpoint=save_snapshot)
    outputs["loss_log.csv"] = log_path
    return outputs


def _final_pretrain_checkpoint(config: PipelineConfig) -> Path:
    candidates = sorted(config.out_root.glob("ckpt-*.tlm"))
    if not candidates:
        raise StageFailed("tune", f"no pretrain checkpoints under {config.out_root}")
    return candidates[-1]


def _resolve_datasets(config: PipelineConfig) -> dict[str, list]:
    datasets = {}
    datasets["general"] = read_instruction_records(config.general_instructions)
    expert_path = config.artifact("expert.jsonl")
    if expert_path.exists():
        datasets["expert"] = read_instruction_records(expert_path)
    return datasets


def ablation_plans(plan: StagePlan) -> dict[str, StagePlan]:
    """The comparison arms: each stage alone, the full sequence, and mixed."""
    arms: dict[str, StagePlan] = {}
    for stage in plan.stages:
        arms[f"{stage.name}_only"] = StagePlan(
            stages=[stage], mode="sequential", seed=plan.seed, lora=plan.lora
        )
    arms["sequential"] = StagePlan(
        stages=list(plan.stages), mode="sequential", seed=plan.seed, lora=plan.lora
    )
    arms["mixed"] = StagePlan(
        stages=list(plan.stages), mode="mixed", seed=plan.seed, lora=plan.lora
    )
    return arms


def stage_tune(config: PipelineConfig) -> dict[str, Path]:
    base_path = _final_pretrain_checkpoint(config)
    base = load_checkpoint(base_path)
    datasets = _resolve_datasets(config)
    for stage in config.tune_plan.stages:
        if stage.dataset not in datasets and not Path(stage.dataset).exists():
            raise StageFailed("tune", f"stage {stage.name!r}: unknown dataset {stage.dataset!r}")

    outputs: dict[str, Path] = {}
    result = run_recipe(base, config.tune_plan, datasets=datasets)
    adapter_path = config.artifact("adapters.tla")
    save_adapter_file(adapter_path, result.adapters, config.tune_plan.lora)
    outputs["adapters.tla"] = adapter_path
    for name, snapshot in result.stage_snapshots:
        path = config.artifact(f"stage-{name}.tla")
        save_adapter_file(path, snapshot, config.tune_plan.lora)
        outputs[f"stage-{name}.tla"] = path

    summary = {
        "base_checkpoint": base_path.name,
        "mode": config.tune_plan.mode,
        "stages": [
            {
                "name": s.name,
                "steps": s.steps,
                "mean_loss": round(s.mean_loss, 6),
                "records_touched": s.records_touched,
            }
            for s in result.stages
        ],
        "arms": [],
    }

    if config.ablation:
        for arm_name, arm_plan in ablation_plans(config.tune_plan).items():
            if arm_name == "sequential":
                arm_adapters = result.adapters
            else:
                arm_adapters = run_recipe(base, arm_plan, datasets=datasets).adapters
            arm_path = config.artifact(f"arm-{arm_name}.tla")
            save_adapter_file(arm_path, arm_adapters, arm_plan.lora)
            outputs[f"arm-{arm_name}.tla"] = arm_path
            summary["arms"].append(arm_name)

    summary_path = config.artifact("tune_summary.json")
    _write_json(summary_path, summary)
    outputs["tune_summary.json"] = summary_path
    return outputs


def stage_eval(config: PipelineConfig) -> dict[str, Path]:
    if not config.benchmark.exists():
        raise StageFailed("eval", f"missing benchmark {config.benchmark}")
    objective, subjective = load_benchmark(config.benchmark)
    if not objective:
        raise StageFailed("eval", "benchmark has no objective items")

    checkpoint_paths = sorted(config.out_root.glob("ckpt-*.tlm"))
    if not checkpoint_paths:
        raise StageFailed("eval", f"no checkpoints under {config.out_root}")
    adapter_path = config.artifact("adapters.tla")
    if not adapter_path.exists():
        raise StageFailed("eval", f"missing adapters {adapter_path}")

    from ..adapters.lora import load_adapter_file

    points = []
    for path in checkpoint_paths:
        ckpt = load_checkpoint(path)
        points.append((ckpt.step, LocalScorer(ckpt, scorer_id=f"local:{path.name}")))
    curve = checkpoint_curve(points, objective) if len(points) >= 2 else None

    final_ckpt = load_checkpoint(checkpoint_paths[-1])
    adapters, _ = load_adapter_file(adapter_path)
    tuned = LocalScorer(final_ckpt, adapters, scorer_id=f"local:{checkpoint_paths[-1].name}+tuned")
    final_report = evaluate(
        tuned,
        objective,
        subjective,
        seed=config.seeds["eval"],
        max_new=config.eval_max_new,
    )

    ablation_rows = None
    arm_paths = sorted(config.out_root.glob("arm-*.tla"))
    if arm_paths:
        arms = {}
        for path in arm_paths:
            arm_adapters, _ = load_adapter_file(path)
            arms[path.stem.removeprefix("arm-")] = LocalScorer(
                final_ckpt, arm_adapters, scorer_id=f"local:{path.name}"
            )
        ablation_rows = ablation_matrix(arms, objective)

    report = {
        "final": final_report.to_dict(),
        "curve": curve.to_dict() if curve else None,
        "baseline_step0_accuracy": curve.points[0].accuracy if curve else None,
        "pretrained_accuracy": curve.points[-1].accuracy if curve else None,
        "tuned_accuracy": final_report.accuracy,
        "accuracy_gain_over_step0": (
            final_report.accuracy - curve.points[0].accuracy if curve else None
        ),
        "ablation": ablation_rows,
    }
    report_path = config.artifact("report.json")
    _write_json(report_path, report)
    curve_path = config.artifact("curve.csv")
    curve_path.write_text(curve.to_csv() if curve else "step,accuracy\n", encoding="utf-8")
    return {"report.json": report_path, "curve.csv": curve_path}
