"""Low-rank adapters: attach, factored forward, merge, serialization.

An adapter replaces a frozen projection W0 (d x k) with
``h = W0 x + (alpha / r) * B (A x)`` where A is r x k and B is d x r. B
starts at zero so attaching is an exact identity, and r << min(d, k) keeps
the trainable count at r * (d + k) per target.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..model.checkpoint import AdapterCheckpoint, Checkpoint, load_adapters, save_adapters
from ..model.network import LoraPair

DEFAULT_TARGETS = ("q_proj", "k_proj", "v_proj")


class UnknownTarget(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class LoraConfig:
    r: int = 8
    alpha: float = 16.0
    targets: tuple[str, ...] = DEFAULT_TARGETS
    seed: int = 0

    def __post_init__(self) -> None:
        if self.r <= 0:
            raise ValueError("rank must be positive")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not self.targets:
            raise ValueError("at least one target required")

    @property
    def scale(self) -> float:
        return self.alpha / self.r


def _tensor_seed(seed: int, name: str) -> int:
    digest = hashlib.sha256(f"{seed}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def attach(ckpt: Checkpoint, config: LoraConfig) -> dict[str, LoraPair]:
    """Create zero-delta adapters for every targeted projection of every layer."""
    adapters: dict[str, LoraPair] = {}
    for layer in range(ckpt.config.n_layers):
        for target in config.targets:
            name = f"layers.{layer}.{target}"
            weight = ckpt.tensors.get(name)
            if weight is None or weight.ndim != 2:
                raise UnknownTarget(f"no projection tensor named {name!r}")
            d, k = weight.shape
            if config.r >= min(d, k):
                raise ValueError(f"rank {config.r} not << min{(d, k)} for {name}")
            rng = np.random.Generator(np.random.PCG64(_tensor_seed(config.seed, name)))
            bound = 1.0 / np.sqrt(k)
            A = rng.uniform(-bound, bound, size=(config.r, k)).astype(np.float32)
            B = np.zeros((d, config.r), dtype=np.float32)
            adapters[name] = LoraPair(A=A, B=B, scale=config.scale)
    return adapters


def adapted_forward(
    W0: np.ndarray, A: np.ndarray, B: np.ndarray, scale: float, x: np.ndarray
) -> np.ndarray:
    """h = W0 x + scale * B (A x), as two low-rank multiplies."""
    d, k = W0.shape
    if A.shape[1] != k or B.shape[0] != d or A.shape[0] != B.shape[1]:
        raise ShapeMismatch(f"incompatible shapes W0{W0.shape} A{A.shape} B{B.shape}")
    if np.shape(x)[0] != k:
        raise ShapeMismatch(f"input of length {np.shape(x)[0]} against k={k}")
    return W0 @ x + scale * (B @ (A @ x))


def merge(W0: np.ndarray, A: np.ndarray, B: np.ndarray, scale: float) -> np.ndarray:
    """Fold the adapter into a dense weight: W0 + scale * B A."""
    d, k = W0.shape
    if A.shape[1] != k or B.shape[0] != d or A.shape[0] != B.shape[1]:
        raise ShapeMismatch(f"incompatible shapes W0{W0.shape} A{A.shape} B{B.shape}")
    return W0 + scale * (B @ A)


def adapter_param_count(adapters: dict[str, LoraPair]) -> int:
    return sum(pair.A.size + pair.B.size for pair in adapters.values())


def copy_adapters(adapters: dict[str, LoraPair]) -> dict[str, LoraPair]:
    return {
        name: LoraPair(pair.A.copy(), pair.B.copy(), pair.scale)
        for name, pair in adapters.items()
    }


def trainable_view(adapters: dict[str, LoraPair]) -> dict[str, np.ndarray]:
    """Flat name->array view sharing storage, for in-place optimizer updates."""
    view: dict[str, np.ndarray] = {}
    for name, pair in adapters.items():
        view[f"{name}.lora_A"] = pair.A
        view[f"{name}.lora_B"] = pair.B
    return view


def save_adapter_file(
    path: str | Path, adapters: dict[str, LoraPair], config: LoraConfig
) -> None:
    tensors: dict[str, np.ndarray] = {}
    for name in sorted(adapters):
        tensors[f"{name}.A"] = adapters[name].A
        tensors[f"{name}.B"] = adapters[name].B
    save_adapters(
        path,
        AdapterCheckpoint(
            r=config.r,
            alpha=config.alpha,
            seed=config.seed,
            targets=config.targets,
            tensors=tensors,
        ),
    )


def load_adapter_file(path: str | Path) -> tuple[dict[str, LoraPair], LoraConfig]:
    stored = load_adapters(path)
    config = LoraConfig(r=stored.r, alpha=stored.alpha, targets=stored.targets, seed=stored.seed)
    adapters: dict[str, LoraPair] = {}
    names = {name.rsplit(".", 1)[0] for name in stored.tensors}
    for name in sorted(names):
        adapters[name] = LoraPair(
            A=stored.tensors[f"{name}.A"],
            B=stored.tensors[f"{name}.B"],
            scale=config.scale,
        )
    return adapters, config
