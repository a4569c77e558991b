"""Further pre-training loop: gradient accumulation, warmup, checkpoints.

Documents are packed one per sequence (BOS-prefixed, chunked to the context
length) and shuffled per epoch from the schedule seed, so runs with equal
seeds are bit-identical. Loss is accumulated in float64 across micro-batches
and a CSV log row (step, loss, lr, tokens_seen) is emitted per step.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .checkpoint import Checkpoint
from .network import loss_and_grads, pad_batch
from .optim import Adam, warmup_lr
from .tokenizer import TOKENIZER


@dataclass
class TrainSchedule:
    total_steps: int
    learning_rate: float = 3e-4
    global_batch: int = 128
    micro_batch: int = 2
    warmup_steps: int | None = None
    checkpoint_every: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.total_steps <= 0:
            raise ValueError("total_steps must be positive")
        if self.micro_batch > self.global_batch:
            raise ValueError("micro_batch must not exceed global_batch")
        if self.warmup_steps is None:
            self.warmup_steps = max(1, self.total_steps // 30)
        if self.warmup_steps > self.total_steps:
            raise ValueError("warmup_steps must not exceed total_steps")
        if self.checkpoint_every is None:
            self.checkpoint_every = self.total_steps

    def to_dict(self) -> dict:
        return {
            "total_steps": self.total_steps,
            "learning_rate": self.learning_rate,
            "global_batch": self.global_batch,
            "micro_batch": self.micro_batch,
            "warmup_steps": self.warmup_steps,
            "checkpoint_every": self.checkpoint_every,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainSchedule":
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})


def pack_documents(
    documents: Iterable[Sequence[int]], context_len: int, bos_id: int
) -> list[list[int]]:
    """One BOS-prefixed sequence per document, long documents chunked."""
    sequences: list[list[int]] = []
    for doc in documents:
        ids = [bos_id] + list(doc)
        for start in range(0, len(ids), context_len):
            chunk = ids[start : start + context_len]
            if len(chunk) >= 2:
                sequences.append(chunk)
    return sequences


def _epoch_order(n: int, seed: int, epoch: int) -> list[int]:
    digest = hashlib.sha256(f"{seed}:{epoch}".encode("utf-8")).digest()
    order = list(range(n))
    random.Random(int.from_bytes(digest[:8], "little")).shuffle(order)
    return order


class _SequenceCycler:
    def __init__(self, sequences: list[list[int]], seed: int):
        self.sequences = sequences
        self.seed = seed
        self.epoch = 0
        self.order = _epoch_order(len(sequences), seed, 0)
        self.cursor = 0

    def take(self, count: int) -> list[list[int]]:
        out = []
        while len(out) < count:
            if self.cursor >= len(self.order):
                self.epoch += 1
                self.order = _epoch_order(len(self.sequences), self.seed, self.epoch)
                self.cursor = 0
            out.append(self.sequences[self.order[self.cursor]])
            self.cursor += 1
        return out


def train(
    ckpt: Checkpoint,
    corpus: Iterable[Sequence[int]],
    schedule: TrainSchedule,
    *,
    log_path: str | Path | None = None,
    on_checkpoint: Callable[[int, Checkpoint], None] | None = None,
) -> list[tuple[int, Checkpoint]]:
    """Train in place on a corpus of token-id documents.

    Returns (step, checkpoint-copy) pairs at every ``checkpoint_every``
    boundary plus the final step.
    """
    sequences = pack_documents(corpus, ckpt.config.context_len, TOKENIZER.bos_id)
    if not sequences:
        raise ValueError("corpus is empty")
    cycler = _SequenceCycler(sequences, schedule.seed)
    optimizer = Adam()
    saved: list[tuple[int, Checkpoint]] = []
    tokens_seen = 0
    log_lines = ["step,loss,lr,tokens_seen"]

    for step in range(1, schedule.total_steps + 1):
        batch = cycler.take(schedule.global_batch)
        grad_sum: dict[str, np.ndarray] = {}
        nll_sum = 0.0
        count_sum = 0.0
        for offset in range(0, len(batch), schedule.micro_batch):
            micro = batch[offset : offset + schedule.micro_batch]
            ids, mask = pad_batch(
                micro, [[0.0] + [1.0] * (len(s) - 1) for s in micro], TOKENIZER.pad_id
            )
            nll, count, grads = loss_and_grads(ckpt.config, ckpt.tensors, ids, mask)
            nll_sum += nll
            count_sum += count
            tokens_seen += int(sum(len(s) for s in micro))
            for name, grad in grads.items():
                if name in grad_sum:
                    grad_sum[name] += grad
                else:
                    grad_sum[name] = grad
        for name in grad_sum:
            grad_sum[name] = (grad_sum[name] / count_sum).astype(np.float32)
        lr = warmup_lr(step, schedule.learning_rate, schedule.warmup_steps)
        optimizer.step(ckpt.tensors, grad_sum, lr)
        ckpt.step = step
        loss = nll_sum / count_sum
        log_lines.append(f"{step},{loss:.6f},{lr:.8g},{tokens_seen}")
        if step % schedule.checkpoint_every == 0 or step == schedule.total_steps:
            snapshot = ckpt.copy()
            saved.append((step, snapshot))
            if on_checkpoint is not None:
                on_checkpoint(step, snapshot)

    if log_path is not None:
        Path(log_path).write_text("\n".join(log_lines) + "\n", encoding="utf-8")
    return saved
