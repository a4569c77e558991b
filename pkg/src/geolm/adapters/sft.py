"""Staged supervised fine-tuning through low-rank adapters.

Instruction records are rendered into one fixed prompt layout (versioned;
the input block is omitted when empty) and trained with the loss masked to
response tokens by default. A stage plan runs stages sequentially, each
resuming the previous stage's adapter state, or interleaves all stage data
in one seeded shuffle (mixed mode) for the ablation arm.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..model.checkpoint import Checkpoint
from ..model.network import AllMasked, LoraPair, loss_and_grads, pad_batch
from ..model.optim import Adam
from ..model.tokenizer import TOKENIZER
from ..signals.records import InstructionRecord, read_instruction_records
from .lora import LoraConfig, attach, copy_adapters, save_adapter_file, trainable_view

PROMPT_LAYOUT_VERSION = "sft-v1"


class EmptyDataset(ValueError):
    pass


def render_prompt(instruction: str, input_text: str) -> str:
    """The conditioning half of the fixed SFT layout."""
    if input_text:
        return f"Instruction:\n{instruction}\n\nInput:\n{input_text}\n\nResponse:\n"
    return f"Instruction:\n{instruction}\n\nResponse:\n"


def conditioned_tokens(
    context: str, continuation: str, *, append_eos: bool
) -> tuple[list[int], list[float]]:
    """BOS + context + continuation token ids, mask covering the continuation."""
    context_ids = [TOKENIZER.bos_id] + TOKENIZER.encode(context)
    continuation_ids = TOKENIZER.encode(continuation)
    if append_eos:
        continuation_ids = continuation_ids + [TOKENIZER.eos_id]
    ids = context_ids + continuation_ids
    mask = [0.0] * len(context_ids) + [1.0] * len(continuation_ids)
    return ids, mask


def build_example(
    record: InstructionRecord, *, loss_masking: str = "output_only", context_len: int
) -> tuple[list[int], list[float]]:
    prompt = render_prompt(record.instruction, record.input)
    ids, mask = conditioned_tokens(prompt, record.output, append_eos=True)
    if loss_masking == "full":
        mask = [0.0] + [1.0] * (len(ids) - 1)
    elif loss_masking != "output_only":
        raise ValueError(f"unknown loss_masking {loss_masking!r}")
    # Long examples are truncated from the left of the prompt so the
    # response tokens (the supervised part) survive.
    if len(ids) > context_len:
        overflow = len(ids) - context_len
        ids = [ids[0]] + ids[1 + overflow :]
        mask = [0.0] + mask[1 + overflow :]
    return ids, mask


@dataclass
class StageSpec:
    name: str
    dataset: str
    epochs: int = 1
    lr: float = 1e-3
    loss_masking: str = "output_only"
    global_batch: int = 8
    micro_batch: int = 8

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dataset": self.dataset,
            "epochs": self.epochs,
            "lr": self.lr,
            "loss_masking": self.loss_masking,
            "global_batch": self.global_batch,
            "micro_batch": self.micro_batch,
        }


@dataclass
class StagePlan:
    stages: list[StageSpec]
    mode: str = "sequential"
    seed: int = 0
    lora: LoraConfig = field(default_factory=LoraConfig)
    reinit_between_stages: bool = False

    def __post_init__(self) -> None:
        if self.mode not in ("sequential", "mixed"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "reinit_between_stages": self.reinit_between_stages,
            "lora": {
                "r": self.lora.r,
                "alpha": self.lora.alpha,
                "targets": list(self.lora.targets),
                "seed": self.lora.seed,
            },
            "stages": [s.to_dict() for s in self.stages],
        }


def load_stage_plan(path: str | Path) -> StagePlan:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    lora_data = data.get("lora", {})
    return StagePlan(
        stages=[
            StageSpec(**{k: v for k, v in s.items() if k in StageSpec.__dataclass_fields__})
            for s in data["stages"]
        ],
        mode=data.get("mode", "sequential"),
        seed=int(data.get("seed", 0)),
        lora=LoraConfig(
            r=int(lora_data.get("r", 8)),
            alpha=float(lora_data.get("alpha", 16.0)),
            targets=tuple(lora_data.get("targets", ("q_proj", "k_proj", "v_proj"))),
            seed=int(lora_data.get("seed", 0)),
        ),
        reinit_between_stages=bool(data.get("reinit_between_stages", False)),
    )


def save_stage_plan(path: str | Path, plan: StagePlan) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(plan.to_dict(), fh, indent=2)
        fh.write("\n")


@dataclass
class StageResult:
    name: str
    steps: int
    mean_loss: float
    records_touched: int


@dataclass
class RecipeResult:
    adapters: dict[str, LoraPair]
    stages: list[StageResult]
    stage_snapshots: list[tuple[str, dict[str, LoraPair]]]

    @property
    def touched_total(self) -> int:
        return sum(s.records_touched for s in self.stages)


def _epoch_order(n: int, seed: int, tag: str, epoch: int) -> list[int]:
    digest = hashlib.sha256(f"{seed}:{tag}:{epoch}".encode("utf-8")).digest()
    order = list(range(n))
    random.Random(int.from_bytes(digest[:8], "little")).shuffle(order)
    return order


def tune_stage(
    ckpt: Checkpoint,
    adapters: dict[str, LoraPair],
    stage: StageSpec,
    records: Sequence[InstructionRecord],
    *,
    seed: int = 0,
    epoch_checkpoint_dir: str | Path | None = None,
    lora_config: LoraConfig | None = None,
) -> StageResult:
    """Run one SFT stage; only adapter tensors are updated, in place."""
    if not records:
        raise EmptyDataset(f"stage {stage.name!r} has no records")
    examples = [
        build_example(r, loss_masking=stage.loss_masking, context_len=ckpt.config.context_len)
        for r in records
    ]
    optimizer = Adam()
    view = trainable_view(adapters)
    steps = 0
    loss_total = 0.0
    count_total = 0.0
    for epoch in range(stage.epochs):
        order = _epoch_order(len(examples), seed, stage.name, epoch)
        for start in range(0, len(order), stage.global_batch):
            chosen = order[start : start + stage.global_batch]
            grad_sum: dict[str, np.ndarray] = {}
            nll_sum = 0.0
            count_sum = 0.0
            for micro_start in range(0, len(chosen), stage.micro_batch):
                micro = [examples[i] for i in chosen[micro_start : micro_start + stage.micro_batch]]
                ids, mask = pad_batch([s for s, _ in micro], [m for _, m in micro], TOKENIZER.pad_id)
                nll, count, grads = loss_and_grads(
                    ckpt.config, ckpt.tensors, ids, mask, adapters,
                    train_base=False, train_adapters=True,
                )
                nll_sum += nll
                count_sum += count
                for name, grad in grads.items():
                    if name in grad_sum:
                        grad_sum[name] += grad
                    else:
                        grad_sum[name] = grad
            if count_sum <= 0:
                raise AllMasked(f"stage {stage.name!r}: batch with no targets")
            for name in grad_sum:
                grad_sum[name] = (grad_sum[name] / count_sum).astype(np.float32)
            optimizer.step(view, grad_sum, stage.lr)
            steps += 1
            loss_total += nll_sum
            count_total += count_sum
        if epoch_checkpoint_dir is not None and lora_config is not None:
            path = Path(epoch_checkpoint_dir) / f"{stage.name}-epoch{epoch + 1}.tla"
            save_adapter_file(path, adapters, lora_config)
    return StageResult(
        name=stage.name,
        steps=steps,
        mean_loss=loss_total / count_total if count_total else 0.0,
        records_touched=len(records) * stage.epochs,
    )


def _load_stage_records(
    stage: StageSpec, datasets: dict[str, list[InstructionRecord]] | None
) -> list[InstructionRecord]:
    if datasets is not None and stage.dataset in datasets:
        return list(datasets[stage.dataset])
    return read_instruction_records(stage.dataset)


def run_recipe(
    ckpt: Checkpoint,
    plan: StagePlan,
    *,
    datasets: dict[str, list[InstructionRecord]] | None = None,
    adapters: dict[str, LoraPair] | None = None,
    epoch_checkpoint_dir: str | Path | None = None,
) -> RecipeResult:
    """Execute a stage plan against a frozen base checkpoint.

    ``datasets`` may pre-resolve stage dataset names to records; otherwise
    each stage's ``dataset`` field is read as a JSONL path. With zero stages
    the adapters come back unchanged.
    """
    if adapters is None:
        adapters = attach(ckpt, plan.lora)
    results: list[StageResult] = []
    snapshots: list[tuple[str, dict[str, LoraPair]]] = []

    if plan.mode == "mixed":
        if plan.stages:
            combined: list[InstructionRecord] = []
            for stage in plan.stages:
                combined.extend(_load_stage_records(stage, datasets) * stage.epochs)
            order = _epoch_order(len(combined), plan.seed, "mixed", 0)
            mixed_records = [combined[i] for i in order]
            first = plan.stages[0]
            mixed_stage = StageSpec(
                name="mixed",
                dataset="<union>",
                epochs=1,
                lr=first.lr,
                loss_masking=first.loss_masking,
                global_batch=first.global_batch,
                micro_batch=first.micro_batch,
            )
            results.append(
                tune_stage(
                    ckpt, adapters, mixed_stage, mixed_records,
                    seed=plan.seed,
                    epoch_checkpoint_dir=epoch_checkpoint_dir,
                    lora_config=plan.lora,
                )
            )
            snapshots.append(("mixed", copy_adapters(adapters)))
        return RecipeResult(adapters=adapters, stages=results, stage_snapshots=snapshots)

    for stage in plan.stages:
        if plan.reinit_between_stages and results:
            adapters = attach(ckpt, plan.lora)
        records = _load_stage_records(stage, datasets)
        results.append(
            tune_stage(
                ckpt, adapters, stage, records,
                seed=plan.seed,
                epoch_checkpoint_dir=epoch_checkpoint_dir,
                lora_config=plan.lora,
            )
        )
        snapshots.append((stage.name, copy_adapters(adapters)))
    return RecipeResult(adapters=adapters, stages=results, stage_snapshots=snapshots)
