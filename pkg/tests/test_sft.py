from __future__ import annotations

import numpy as np
import pytest

from geolm.adapters.lora import LoraConfig, attach
from geolm.adapters.sft import (
    EmptyDataset,
    StagePlan,
    StageSpec,
    build_example,
    conditioned_tokens,
    render_prompt,
    run_recipe,
    tune_stage,
)
from geolm.model.checkpoint import Checkpoint
from geolm.model.config import ModelConfig
from geolm.model.network import init_params
from geolm.model.tokenizer import TOKENIZER
from geolm.signals.records import InstructionRecord

CFG = ModelConfig(d_model=32, n_layers=2, n_heads=2, context_len=96)


def _ckpt() -> Checkpoint:
    return Checkpoint(config=CFG, tensors=init_params(CFG, seed=1))


def _records(n: int) -> list[InstructionRecord]:
    return [
        InstructionRecord(
            task="qa",
            instruction="Repeat the word.",
            input=f"word{i}",
            output=f"word{i}",
            provenance={"source_kind": "test", "source_id": f"r{i}"},
        )
        for i in range(n)
    ]


def test_render_prompt_with_input_block() -> None:
    assert render_prompt("Do it.", "on this") == "Instruction:\nDo it.\n\nInput:\non this\n\nResponse:\n"


def test_render_prompt_omits_empty_input() -> None:
    assert render_prompt("Do it.", "") == "Instruction:\nDo it.\n\nResponse:\n"


def test_conditioned_tokens_layout() -> None:
    ids, mask = conditioned_tokens("ab", "cd", append_eos=True)
    assert ids[0] == TOKENIZER.bos_id
    assert ids[-1] == TOKENIZER.eos_id
    assert mask == [0.0, 0.0, 0.0, 1.0, 1.0, 1.0]
    assert TOKENIZER.decode(ids) == "abcd"


def test_build_example_masks_prompt_only() -> None:
    record = _records(1)[0]
    ids, mask = build_example(record, context_len=CFG.context_len)
    prompt_len = len(TOKENIZER.encode(render_prompt(record.instruction, record.input))) + 1
    assert all(m == 0.0 for m in mask[:prompt_len])
    assert all(m == 1.0 for m in mask[prompt_len:])
    assert ids[-1] == TOKENIZER.eos_id


def test_build_example_full_masking() -> None:
    record = _records(1)[0]
    ids, mask = build_example(record, loss_masking="full", context_len=CFG.context_len)
    assert mask[0] == 0.0
    assert all(m == 1.0 for m in mask[1:])


def test_build_example_truncates_long_prompt_from_left() -> None:
    record = InstructionRecord(
        task="qa",
        instruction="x" * 500,
        input="",
        output="yes",
        provenance={"source_kind": "t", "source_id": "0"},
    )
    ids, mask = build_example(record, context_len=64)
    assert len(ids) == 64
    assert ids[0] == TOKENIZER.bos_id
    assert sum(mask) == len(TOKENIZER.encode("yes")) + 1  # output + EOS survive


def test_tune_stage_requires_records() -> None:
    ckpt = _ckpt()
    adapters = attach(ckpt, LoraConfig(r=2, seed=0))
    with pytest.raises(EmptyDataset):
        tune_stage(ckpt, adapters, StageSpec(name="s", dataset="d"), [])


def test_tune_stage_step_count() -> None:
    ckpt = _ckpt()
    adapters = attach(ckpt, LoraConfig(r=2, seed=0))
    stage = StageSpec(name="s", dataset="d", epochs=1, lr=1e-3, global_batch=2, micro_batch=2)
    result = tune_stage(ckpt, adapters, stage, _records(10))
    assert result.steps == 5
    assert result.records_touched == 10


def test_tune_stage_only_updates_adapters() -> None:
    ckpt = _ckpt()
    before = ckpt.checksum()
    adapters = attach(ckpt, LoraConfig(r=2, seed=0))
    a_before = {name: pair.A.copy() for name, pair in adapters.items()}
    stage = StageSpec(name="s", dataset="d", epochs=1, lr=1e-2, global_batch=4, micro_batch=4)
    tune_stage(ckpt, adapters, stage, _records(8))
    assert ckpt.checksum() == before
    changed = any(
        not np.array_equal(adapters[name].A, a_before[name]) or np.any(adapters[name].B != 0)
        for name in adapters
    )
    assert changed


def test_run_recipe_zero_stages_returns_adapters_unchanged() -> None:
    ckpt = _ckpt()
    plan = StagePlan(stages=[], mode="sequential", seed=0, lora=LoraConfig(r=2, seed=0))
    result = run_recipe(ckpt, plan)
    fresh = attach(ckpt, plan.lora)
    for name in fresh:
        assert np.array_equal(result.adapters[name].A, fresh[name].A)
        assert np.array_equal(result.adapters[name].B, fresh[name].B)


def test_sequential_and_mixed_touch_identical_multisets() -> None:
    ckpt = _ckpt()
    datasets = {"a": _records(6), "b": _records(4)}
    stages = [
        StageSpec(name="a", dataset="a", epochs=2, lr=1e-3, global_batch=2, micro_batch=2),
        StageSpec(name="b", dataset="b", epochs=1, lr=1e-3, global_batch=2, micro_batch=2),
    ]
    lora = LoraConfig(r=2, seed=0)
    seq = run_recipe(
        ckpt, StagePlan(stages=stages, mode="sequential", seed=5, lora=lora), datasets=datasets
    )
    mixed = run_recipe(
        ckpt, StagePlan(stages=stages, mode="mixed", seed=5, lora=lora), datasets=datasets
    )
    assert seq.touched_total == mixed.touched_total == 6 * 2 + 4 * 1
    assert [s.name for s in seq.stages] == ["a", "b"]
    assert [s.name for s in mixed.stages] == ["mixed"]


def test_sequential_resumes_adapters_between_stages() -> None:
    ckpt = _ckpt()
    datasets = {"a": _records(4), "b": _records(4)}
    stages = [
        StageSpec(name="a", dataset="a", epochs=1, lr=1e-2, global_batch=4, micro_batch=4),
        StageSpec(name="b", dataset="b", epochs=1, lr=1e-2, global_batch=4, micro_batch=4),
    ]
    lora = LoraConfig(r=2, seed=0)
    result = run_recipe(
        ckpt, StagePlan(stages=stages, mode="sequential", seed=1, lora=lora), datasets=datasets
    )
    snap_a = dict(result.stage_snapshots)["a"]
    snap_b = dict(result.stage_snapshots)["b"]
    name = next(iter(snap_a))
    # stage b started from stage a's state, so its end state differs from a's
    assert not np.array_equal(snap_a[name].B, snap_b[name].B)
    # and the final adapters equal stage b's snapshot
    assert np.array_equal(result.adapters[name].B, snap_b[name].B)


def test_reinit_between_stages_flag() -> None:
    ckpt = _ckpt()
    datasets = {"a": _records(4), "b": _records(4)}
    stages = [
        StageSpec(name="a", dataset="a", epochs=1, lr=5e-2, global_batch=4, micro_batch=4),
        StageSpec(name="b", dataset="b", epochs=0, lr=5e-2, global_batch=4, micro_batch=4),
    ]
    lora = LoraConfig(r=2, seed=0)
    reinit = run_recipe(
        ckpt,
        StagePlan(stages=stages, mode="sequential", seed=1, lora=lora, reinit_between_stages=True),
        datasets=datasets,
    )
    # stage b ran zero epochs after reinit, so final adapters equal a fresh attach
    fresh = attach(ckpt, lora)
    name = next(iter(fresh))
    assert np.array_equal(reinit.adapters[name].B, fresh[name].B)


def test_recipe_is_seed_deterministic() -> None:
    ckpt = _ckpt()
    datasets = {"a": _records(6)}
    stages = [StageSpec(name="a", dataset="a", epochs=2, lr=1e-3, global_batch=2, micro_batch=2)]
    lora = LoraConfig(r=2, seed=3)
    one = run_recipe(ckpt.copy(), StagePlan(stages=stages, seed=9, lora=lora), datasets=datasets)
    two = run_recipe(ckpt.copy(), StagePlan(stages=stages, seed=9, lora=lora), datasets=datasets)
    for name in one.adapters:
        assert np.array_equal(one.adapters[name].A, two.adapters[name].A)
        assert np.array_equal(one.adapters[name].B, two.adapters[name].B)
