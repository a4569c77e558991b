"""Scorer abstraction over the local model and remote endpoints.

A scorer exposes two capabilities: per-token natural-log likelihoods and
generation. ``token_logprobs(text, continuation)`` scores the continuation
conditioned on BOS + text; with the continuation omitted it scores the text
against itself (each token after the first, no BOS), which is what
perplexity needs.
"""

from __future__ import annotations

from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from ..adapters.lora import load_adapter_file
from ..model.checkpoint import Checkpoint, load_checkpoint
from ..model.network import LoraPair, forward, generate
from ..model.tokenizer import TOKENIZER


class ScorerUnavailable(RuntimeError):
    pass


class Scorer(Protocol):
    scorer_id: str

    def token_logprobs(self, text: str, continuation: str | None = None) -> list[float]:
        ...

    def generate(
        self, prompt: str, max_new: int = 64, mode: str = "greedy",
        temperature: float = 1.0, seed: int = 0,
    ) -> str:
        ...


def _log_softmax_at(logits: np.ndarray, token_id: int) -> float:
    row = logits.astype(np.float64)
    peak = row.max()
    return float(row[token_id] - peak - np.log(np.exp(row - peak).sum()))


class LocalScorer:
    """Scores with an in-process checkpoint plus optional adapters."""

    def __init__(
        self,
        ckpt: Checkpoint,
        adapters: dict[str, LoraPair] | None = None,
        scorer_id: str | None = None,
    ):
        self.ckpt = ckpt
        self.adapters = adapters
        self.scorer_id = scorer_id or f"local:step{ckpt.step}"

    def _logits(self, ids: Sequence[int]) -> np.ndarray:
        return forward(self.ckpt.config, self.ckpt.tensors, ids, self.adapters)

    def _clamp_context(self, ids: list[int], reserve: int) -> list[int]:
        # Conditioning longer than the window is trimmed from the left,
        # keeping BOS, so the scored continuation always fits.
        limit = self.ckpt.config.context_len - reserve
        if len(ids) <= limit:
            return ids
        return [ids[0]] + ids[len(ids) - limit + 1 :]

    def token_logprobs(self, text: str, continuation: str | None = None) -> list[float]:
        if continuation is None:
            ids = TOKENIZER.encode(text)
            if len(ids) < 2:
                return []
            logits = self._logits(ids)
            return [_log_softmax_at(logits[i - 1], ids[i]) for i in range(1, len(ids))]
        cont = TOKENIZER.encode(continuation)
        if not cont:
            return []
        context = self._clamp_context(
            [TOKENIZER.bos_id] + TOKENIZER.encode(text), reserve=len(cont)
        )
        logits = self._logits(context + cont)
        offset = len(context) - 1
        return [_log_softmax_at(logits[offset + i], cont[i]) for i in range(len(cont))]

    def next_token_logprobs(self, text: str) -> np.ndarray:
        """Full log-softmax row for the token after BOS + text.

        Same values as one-token ``token_logprobs`` calls, in one forward.
        """
        context = self._clamp_context([TOKENIZER.bos_id] + TOKENIZER.encode(text), reserve=1)
        row = self._logits(context)[-1].astype(np.float64)
        peak = row.max()
        return row - peak - np.log(np.exp(row - peak).sum())

    def generate(
        self, prompt: str, max_new: int = 64, mode: str = "greedy",
        temperature: float = 1.0, seed: int = 0,
    ) -> str:
        ids = self._clamp_context([TOKENIZER.bos_id] + TOKENIZER.encode(prompt), reserve=1)
        out = generate(
            self.ckpt.config, self.ckpt.tensors, ids, max_new, self.adapters,
            eos_id=TOKENIZER.eos_id, mode=mode, temperature=temperature, seed=seed,
        )
        return TOKENIZER.decode(out)


def load_local_scorer(spec: str) -> LocalScorer:
    """``path.tlm`` or ``path.tlm+adapters.tla``."""
    if "+" in spec:
        ckpt_path, adapter_path = spec.split("+", 1)
        adapters, _ = load_adapter_file(adapter_path)
    else:
        ckpt_path, adapters = spec, None
    ckpt = load_checkpoint(ckpt_path)
    return LocalScorer(ckpt, adapters, scorer_id=f"local:{Path(ckpt_path).name}:step{ckpt.step}")


def parse_scorer_spec(spec: str) -> Scorer:
    """Build a scorer from ``local:<ckpt>[+<adapters>]`` or ``remote:<host>:<port>``."""
    kind, _, rest = spec.partition(":")
    if kind == "local" and rest:
        return load_local_scorer(rest)
    if kind == "remote" and rest:
        from .protocol import RemoteScorer

        host, _, port = rest.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"remote spec must be remote:host:port, got {spec!r}")
        return RemoteScorer(host, int(port))
    raise ValueError(f"unknown scorer spec {spec!r}")
