from __future__ import annotations

import struct

import numpy as np
import pytest

from geolm.adapters.lora import LoraConfig, attach, load_adapter_file, save_adapter_file
from geolm.model.checkpoint import (
    Checkpoint,
    CheckpointError,
    load_checkpoint,
    save_checkpoint,
)
from geolm.model.config import ModelConfig
from geolm.model.network import init_params

CFG = ModelConfig(d_model=16, n_layers=2, n_heads=2, context_len=8)


def _checkpoint() -> Checkpoint:
    return Checkpoint(config=CFG, tensors=init_params(CFG, seed=9), step=123, rng_state=9)


def test_round_trip_preserves_everything(tmp_path) -> None:
    ckpt = _checkpoint()
    path = tmp_path / "model.tlm"
    save_checkpoint(path, ckpt)
    loaded = load_checkpoint(path)
    assert loaded.config == ckpt.config
    assert loaded.step == 123
    assert loaded.rng_state == 9
    assert set(loaded.tensors) == set(ckpt.tensors)
    for name, tensor in ckpt.tensors.items():
        assert np.array_equal(loaded.tensors[name], tensor)
        assert loaded.tensors[name].dtype == np.float32


def test_file_starts_with_magic(tmp_path) -> None:
    path = tmp_path / "model.tlm"
    save_checkpoint(path, _checkpoint())
    assert path.read_bytes()[:4] == b"TLM1"


def test_crc_detects_corruption(tmp_path) -> None:
    path = tmp_path / "model.tlm"
    save_checkpoint(path, _checkpoint())
    raw = bytearray(path.read_bytes())
    raw[100] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError, match="CRC"):
        load_checkpoint(path)


def test_truncated_file_rejected(tmp_path) -> None:
    path = tmp_path / "model.tlm"
    path.write_bytes(b"TL")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_bad_magic_rejected(tmp_path) -> None:
    path = tmp_path / "model.tlm"
    save_checkpoint(path, _checkpoint())
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    # fix up the CRC so only the magic check trips
    import zlib

    payload = bytes(raw[:-4])
    raw[-4:] = struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_save_is_byte_deterministic(tmp_path) -> None:
    a, b = tmp_path / "a.tlm", tmp_path / "b.tlm"
    save_checkpoint(a, _checkpoint())
    save_checkpoint(b, _checkpoint())
    assert a.read_bytes() == b.read_bytes()


def test_checksum_stable_and_sensitive() -> None:
    ckpt = _checkpoint()
    before = ckpt.checksum()
    assert before == _checkpoint().checksum()
    ckpt.tensors["lm_head"][0, 0] += 1.0
    assert ckpt.checksum() != before


def test_adapter_file_round_trip(tmp_path) -> None:
    ckpt = _checkpoint()
    config = LoraConfig(r=4, alpha=8.0, seed=3)
    adapters = attach(ckpt, config)
    for pair in adapters.values():
        pair.B[...] += 0.25  # make B nonzero so the round trip is meaningful
    path = tmp_path / "adapters.tla"
    save_adapter_file(path, adapters, config)
    assert path.read_bytes()[:4] == b"TLA1"
    loaded, loaded_config = load_adapter_file(path)
    assert loaded_config.r == 4
    assert loaded_config.alpha == 8.0
    assert loaded_config.targets == config.targets
    assert set(loaded) == set(adapters)
    for name, pair in adapters.items():
        assert np.array_equal(loaded[name].A, pair.A)
        assert np.array_equal(loaded[name].B, pair.B)
        assert loaded[name].scale == pair.scale
