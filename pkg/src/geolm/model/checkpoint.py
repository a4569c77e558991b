"""Binary checkpoint files for model weights and adapter weights.

Model file (magic ``TLM1``): config as fixed-order little-endian int32
(d_model, n_layers, n_heads, context_len, vocab_size, rng_state), a uint32
tensor count, per-tensor records, a uint64 step, and a trailing CRC32 of all
preceding bytes. A tensor record is uint32 name length, the UTF-8 name,
uint32 rank, uint32 dims, then row-major little-endian float32 data.

Adapter file (magic ``TLA1``): int32 rank, float32 alpha, int32 seed, the
target projection names, then A/B tensors in the same record format, and the
same trailing CRC32.
"""

from __future__ import annotations

import io
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ModelConfig

MODEL_MAGIC = b"TLM1"
ADAPTER_MAGIC = b"TLA1"


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: ModelConfig
    tensors: dict[str, np.ndarray]
    step: int = 0
    rng_state: int = 0

    def copy(self) -> "Checkpoint":
        return Checkpoint(
            config=self.config,
            tensors={k: v.copy() for k, v in self.tensors.items()},
            step=self.step,
            rng_state=self.rng_state,
        )

    def checksum(self) -> str:
        crc = 0
        for name in sorted(self.tensors):
            crc = zlib.crc32(name.encode("utf-8"), crc)
            crc = zlib.crc32(np.ascontiguousarray(self.tensors[name], dtype="<f4").tobytes(), crc)
        return f"{crc:08x}"


def _write_tensor(buf: io.BytesIO, name: str, array: np.ndarray) -> None:
    data = np.ascontiguousarray(array, dtype="<f4")
    encoded = name.encode("utf-8")
    buf.write(struct.pack("<I", len(encoded)))
    buf.write(encoded)
    buf.write(struct.pack("<I", data.ndim))
    buf.write(struct.pack(f"<{data.ndim}I", *data.shape))
    buf.write(data.tobytes())


def _read_tensor(buf: io.BytesIO) -> tuple[str, np.ndarray]:
    (name_len,) = struct.unpack("<I", buf.read(4))
    name = buf.read(name_len).decode("utf-8")
    (rank,) = struct.unpack("<I", buf.read(4))
    dims = struct.unpack(f"<{rank}I", buf.read(4 * rank))
    size = int(np.prod(dims)) if dims else 1
    raw = buf.read(4 * size)
    array = np.frombuffer(raw, dtype="<f4").reshape(dims).astype(np.float32)
    return name, array


def _finish(path: str | Path, buf: io.BytesIO) -> None:
    payload = buf.getvalue()
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(struct.pack("<I", crc))


def _read_payload(path: str | Path, magic: bytes) -> io.BytesIO:
    raw = Path(path).read_bytes()
    if len(raw) < len(magic) + 4:
        raise CheckpointError(f"{path}: truncated file")
    payload, stored = raw[:-4], struct.unpack("<I", raw[-4:])[0]
    if zlib.crc32(payload) & 0xFFFFFFFF != stored:
        raise CheckpointError(f"{path}: CRC mismatch")
    if not payload.startswith(magic):
        raise CheckpointError(f"{path}: bad magic {payload[:4]!r}")
    buf = io.BytesIO(payload)
    buf.read(len(magic))
    return buf


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    buf = io.BytesIO()
    buf.write(MODEL_MAGIC)
    cfg = ckpt.config
    buf.write(
        struct.pack(
            "<6i",
            cfg.d_model,
            cfg.n_layers,
            cfg.n_heads,
            cfg.context_len,
            cfg.vocab_size,
            ckpt.rng_state,
        )
    )
    buf.write(struct.pack("<I", len(ckpt.tensors)))
    for name, array in ckpt.tensors.items():
        _write_tensor(buf, name, array)
    buf.write(struct.pack("<Q", ckpt.step))
    _finish(path, buf)


def load_checkpoint(path: str | Path) -> Checkpoint:
    buf = _read_payload(path, MODEL_MAGIC)
    d_model, n_layers, n_heads, context_len, vocab_size, rng_state = struct.unpack(
        "<6i", buf.read(24)
    )
    config = ModelConfig(
        d_model=d_model,
        n_layers=n_layers,
        n_heads=n_heads,
        context_len=context_len,
        vocab_size=vocab_size,
    )
    (count,) = struct.unpack("<I", buf.read(4))
    tensors = {}
    for _ in range(count):
        name, array = _read_tensor(buf)
        tensors[name] = array
    (step,) = struct.unpack("<Q", buf.read(8))
    return Checkpoint(config=config, tensors=tensors, step=step, rng_state=rng_state)


@dataclass
class AdapterCheckpoint:
    r: int
    alpha: float
    seed: int
    targets: tuple[str, ...]
    tensors: dict[str, np.ndarray] = field(default_factory=dict)


def save_adapters(path: str | Path, adapter: AdapterCheckpoint) -> None:
    buf = io.BytesIO()
    buf.write(ADAPTER_MAGIC)
    buf.write(struct.pack("<ifi", adapter.r, adapter.alpha, adapter.seed))
    buf.write(struct.pack("<I", len(adapter.targets)))
    for target in adapter.targets:
        encoded = target.encode("utf-8")
        buf.write(struct.pack("<I", len(encoded)))
        buf.write(encoded)
    buf.write(struct.pack("<I", len(adapter.tensors)))
    for name, array in adapter.tensors.items():
        _write_tensor(buf, name, array)
    _finish(path, buf)


def load_adapters(path: str | Path) -> AdapterCheckpoint:
    buf = _read_payload(path, ADAPTER_MAGIC)
    r, alpha, seed = struct.unpack("<ifi", buf.read(12))
    (n_targets,) = struct.unpack("<I", buf.read(4))
    targets = []
    for _ in range(n_targets):
        (length,) = struct.unpack("<I", buf.read(4))
        targets.append(buf.read(length).decode("utf-8"))
    (count,) = struct.unpack("<I", buf.read(4))
    tensors = {}
    for _ in range(count):
        name, array = _read_tensor(buf)
        tensors[name] = array
    return AdapterCheckpoint(r=r, alpha=alpha, seed=seed, targets=tuple(targets), tensors=tensors)
