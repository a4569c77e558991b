from __future__ import annotations

import math

import numpy as np
import pytest

from geolm.model.config import ModelConfig
from geolm.model.network import (
    AllMasked,
    SequenceTooLong,
    _softmax,
    forward,
    init_params,
    loss_and_grads,
    mean_loss,
    pad_batch,
)
from geolm.model.tokenizer import PAD_ID, VOCAB_SIZE

CFG = ModelConfig(d_model=32, n_layers=2, n_heads=2, context_len=24)


@pytest.fixture(scope="module")
def params():
    return init_params(CFG, seed=5)


def test_config_rejects_indivisible_heads() -> None:
    with pytest.raises(ValueError):
        ModelConfig(d_model=10, n_heads=3)


def test_forward_shape(params) -> None:
    logits = forward(CFG, params, [1, 2, 3])
    assert logits.shape == (3, VOCAB_SIZE)
    assert np.all(np.isfinite(logits))


def test_forward_rejects_long_sequence(params) -> None:
    with pytest.raises(SequenceTooLong):
        forward(CFG, params, list(range(CFG.context_len + 1)))


def test_softmax_rows_sum_to_one(params) -> None:
    logits = forward(CFG, params, [5, 6, 7, 8])
    probs = _softmax(logits.astype(np.float64))
    assert np.allclose(probs.sum(axis=-1), 1.0, atol=1e-6)


def test_appending_token_preserves_prefix_logits(params) -> None:
    short = forward(CFG, params, [9, 10, 11])
    longer = forward(CFG, params, [9, 10, 11, 12])
    assert np.allclose(short, longer[:3], atol=1e-5)


def test_causality_perturbing_future_token(params) -> None:
    base = forward(CFG, params, [1, 2, 3, 4, 5])
    perturbed = forward(CFG, params, [1, 2, 3, 99, 5])
    assert np.allclose(base[:3], perturbed[:3], atol=1e-6)
    assert not np.allclose(base[3:], perturbed[3:], atol=1e-6)


def test_zero_init_gives_identical_logit_rows() -> None:
    params = {k: np.zeros_like(v) for k, v in init_params(CFG, 0).items()}
    logits = forward(CFG, params, [3, 1, 4, 1, 5])
    assert np.allclose(logits, logits[0][None, :])


def test_forward_deterministic(params) -> None:
    a = forward(CFG, params, [7, 7, 7])
    b = forward(CFG, params, [7, 7, 7])
    assert np.array_equal(a, b)


def test_uniform_logits_loss_is_log_vocab() -> None:
    params = {k: np.zeros_like(v) for k, v in init_params(CFG, 0).items()}
    ids = np.array([[1, 2, 3, 4, 5]])
    mask = np.array([[0.0, 1.0, 1.0, 1.0, 1.0]])
    nll, count, _ = loss_and_grads(CFG, params, ids, mask, train_base=False)
    assert count == 4.0
    assert nll / count == pytest.approx(math.log(VOCAB_SIZE), abs=1e-9)


def test_mask_single_position_equals_that_nll(params) -> None:
    ids = [4, 9, 2, 7]
    logits = forward(CFG, params, ids).astype(np.float64)
    # independent oracle: log-softmax at position 1 predicting token ids[2]
    row = logits[1]
    expected = -(row[ids[2]] - row.max() - math.log(np.exp(row - row.max()).sum()))
    mask = np.array([[0.0, 0.0, 1.0, 0.0]])
    nll, count, _ = loss_and_grads(CFG, params, np.array([ids]), mask, train_base=False)
    assert count == 1.0
    assert nll == pytest.approx(expected, rel=1e-5)


def test_all_masked_raises(params) -> None:
    ids = np.array([[1, 2, 3]])
    mask = np.zeros((1, 3))
    with pytest.raises(AllMasked):
        loss_and_grads(CFG, params, ids, mask)


def test_mask_shape_mismatch_rejected(params) -> None:
    with pytest.raises(ValueError):
        loss_and_grads(CFG, params, np.array([[1, 2, 3]]), np.zeros((1, 2)))


def test_pad_batch_pads_with_zero_mask() -> None:
    ids, mask = pad_batch([[1, 2, 3], [4]], [[0, 1, 1], [0]], PAD_ID)
    assert ids.shape == (2, 3)
    assert ids[1, 1] == PAD_ID
    assert mask[1, 1] == 0.0


def test_mean_loss_matches_manual_division(params) -> None:
    batch = [([1, 2, 3, 4], [0.0, 1.0, 1.0, 1.0]), ([5, 6], [0.0, 1.0])]
    mean, grads = mean_loss(CFG, params, batch, pad_id=PAD_ID)
    ids, mask = pad_batch([b[0] for b in batch], [b[1] for b in batch], PAD_ID)
    nll, count, raw = loss_and_grads(CFG, params, ids, mask)
    assert mean == pytest.approx(nll / count)
    for key in raw:
        assert np.allclose(grads[key], raw[key] / count)


def test_padded_batch_loss_matches_separate_sequences(params) -> None:
    # padding must not leak into the loss of other rows
    a = ([3, 1, 4, 1, 5], [0.0, 1.0, 1.0, 1.0, 1.0])
    b = ([2, 7], [0.0, 1.0])
    ids, mask = pad_batch([a[0], b[0]], [a[1], b[1]], PAD_ID)
    nll_joint, count_joint, _ = loss_and_grads(CFG, params, ids, mask, train_base=False)
    nll_a, count_a, _ = loss_and_grads(
        CFG, params, np.array([a[0]]), np.array([a[1]]), train_base=False
    )
    nll_b, count_b, _ = loss_and_grads(
        CFG, params, np.array([b[0]]), np.array([b[1]]), train_base=False
    )
    assert count_joint == count_a + count_b
    assert nll_joint == pytest.approx(nll_a + nll_b, rel=1e-5)
