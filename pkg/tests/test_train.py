from __future__ import annotations

import numpy as np
import pytest

from geolm.model.checkpoint import Checkpoint
from geolm.model.config import ModelConfig
from geolm.model.network import init_params
from geolm.model.optim import warmup_lr
from geolm.model.tokenizer import TOKENIZER
from geolm.model.train import TrainSchedule, pack_documents, train

CFG = ModelConfig(d_model=32, n_layers=2, n_heads=2, context_len=64)


def _ckpt(seed: int = 0) -> Checkpoint:
    return Checkpoint(config=CFG, tensors=init_params(CFG, seed=seed), step=0, rng_state=seed)


def test_schedule_validation() -> None:
    with pytest.raises(ValueError):
        TrainSchedule(total_steps=10, global_batch=2, micro_batch=4)
    with pytest.raises(ValueError):
        TrainSchedule(total_steps=10, warmup_steps=20)
    with pytest.raises(ValueError):
        TrainSchedule(total_steps=0)


def test_schedule_warmup_default_is_one_thirtieth() -> None:
    schedule = TrainSchedule(total_steps=3000)
    assert schedule.warmup_steps == 100


def test_warmup_lr_linear_then_constant() -> None:
    assert warmup_lr(1, 0.3, 10) == pytest.approx(0.03)
    assert warmup_lr(10, 0.3, 10) == pytest.approx(0.3)
    assert warmup_lr(999, 0.3, 10) == pytest.approx(0.3)


def test_pack_documents_prefixes_bos_and_chunks() -> None:
    sequences = pack_documents([[1, 2, 3], list(range(200))], context_len=64, bos_id=TOKENIZER.bos_id)
    assert sequences[0] == [TOKENIZER.bos_id, 1, 2, 3]
    assert all(len(s) <= 64 for s in sequences)
    assert sum(len(s) for s in sequences) == 4 + 201


def test_empty_corpus_rejected() -> None:
    with pytest.raises(ValueError):
        train(_ckpt(), [], TrainSchedule(total_steps=1, global_batch=1, micro_batch=1))


def test_checkpoint_cadence_includes_final_step() -> None:
    schedule = TrainSchedule(
        total_steps=12, global_batch=1, micro_batch=1, checkpoint_every=5, warmup_steps=1, seed=0
    )
    saved = train(_ckpt(), [[1, 2, 3, 4]], schedule)
    assert [step for step, _ in saved] == [5, 10, 12]


def test_equal_seeds_give_bit_identical_checkpoints() -> None:
    corpus = [list(range(40)), list(range(50, 90))]
    schedule = TrainSchedule(
        total_steps=20, global_batch=2, micro_batch=1, checkpoint_every=10, warmup_steps=2, seed=7
    )
    first = train(_ckpt(seed=1), corpus, schedule)
    second = train(_ckpt(seed=1), corpus, schedule)
    for (step_a, ckpt_a), (step_b, ckpt_b) in zip(first, second):
        assert step_a == step_b
        assert ckpt_a.checksum() == ckpt_b.checksum()
        for name in ckpt_a.tensors:
            assert np.array_equal(ckpt_a.tensors[name], ckpt_b.tensors[name])


def test_different_seed_changes_training() -> None:
    corpus = [list(range(i * 30, i * 30 + 25)) for i in range(6)]
    base = dict(total_steps=15, global_batch=2, micro_batch=1, checkpoint_every=15, warmup_steps=2)
    a = train(_ckpt(seed=1), corpus, TrainSchedule(seed=1, **base))
    b = train(_ckpt(seed=1), corpus, TrainSchedule(seed=2, **base))
    assert a[-1][1].checksum() != b[-1][1].checksum()


def test_loss_log_format(tmp_path) -> None:
    log = tmp_path / "loss.csv"
    schedule = TrainSchedule(
        total_steps=4, global_batch=1, micro_batch=1, checkpoint_every=4, warmup_steps=2, seed=0
    )
    train(_ckpt(), [[1, 2, 3, 4, 5]], schedule, log_path=log)
    lines = log.read_text().strip().splitlines()
    assert lines[0] == "step,loss,lr,tokens_seen"
    assert len(lines) == 5
    step, loss, lr, tokens = lines[1].split(",")
    assert int(step) == 1
    assert float(loss) > 0
    assert float(lr) == pytest.approx(schedule.learning_rate / 2)
    assert int(tokens) == 6  # BOS + 5 tokens


def test_overfit_single_batch_drives_loss_down() -> None:
    rng = np.random.default_rng(0)
    doc = rng.integers(0, 268, size=63).tolist()  # BOS brings it to 64 tokens
    schedule = TrainSchedule(
        total_steps=500,
        learning_rate=1e-3,
        global_batch=1,
        micro_batch=1,
        warmup_steps=10,
        checkpoint_every=500,
        seed=0,
    )
    log = []

    ckpt = _ckpt(seed=4)
    saved = train(ckpt, [doc], schedule)
    # recompute final loss directly from the log-free path: one more forward
    from geolm.model.network import loss_and_grads
    from geolm.model.train import pack_documents

    sequences = pack_documents([doc], CFG.context_len, TOKENIZER.bos_id)
    ids = np.array(sequences)
    mask = np.ones_like(ids, dtype=np.float64)
    mask[:, 0] = 0.0
    nll, count, _ = loss_and_grads(CFG, saved[-1][1].tensors, ids, mask, train_base=False)
    assert nll / count < 0.1
