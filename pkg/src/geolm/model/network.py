"""Decoder-only transformer in plain numpy with hand-written backprop.

Parameters live in a flat name->array dict (row-major float32 on disk; the
math follows whatever dtype the arrays carry, so tests can run the identical
code in float64 for finite-difference checks). Projection weights use the
(out_features, in_features) convention: y = x @ W.T.

Low-rank adapters hook into any projection by tensor name: when a name is
present in the adapter map, the projection computes
``x @ W.T + scale * (x @ A.T) @ B.T`` without ever materializing the dense
delta. Gradients flow to A/B only when adapters are marked trainable, and to
base tensors only when base training is on, so the frozen-base contract is
structural.
"""

from __future__ import annotations

from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .config import ModelConfig

Params = dict[str, np.ndarray]


class SequenceTooLong(ValueError):
    pass


class AllMasked(ValueError):
    pass


class LoraPair(NamedTuple):
    """One adapted projection: A (r x in), B (out x r), scale = alpha / r."""

    A: np.ndarray
    B: np.ndarray
    scale: float


Adapters = Mapping[str, LoraPair]

_LN_EPS = 1e-5

#: Per-layer projection tensors eligible as adapter targets.
LAYER_PROJECTIONS = ("q_proj", "k_proj", "v_proj", "o_proj", "mlp_in", "mlp_out")


def layer_tensor(layer: int, name: str) -> str:
    return f"layers.{layer}.{name}"


def init_params(config: ModelConfig, seed: int = 0) -> Params:
    """Seeded initialization; insertion order fixes iteration order everywhere."""
    rng = np.random.Generator(np.random.PCG64(seed))
    d, v = config.d_model, config.vocab_size

    def normal(*shape: int) -> np.ndarray:
        return (rng.standard_normal(shape) * 0.02).astype(np.float32)

    params: Params = {
        "tok_emb": normal(v, d),
        "pos_emb": normal(config.context_len, d),
    }
    for i in range(config.n_layers):
        params[layer_tensor(i, "ln1.scale")] = np.ones(d, dtype=np.float32)
        params[layer_tensor(i, "ln1.bias")] = np.zeros(d, dtype=np.float32)
        params[layer_tensor(i, "q_proj")] = normal(d, d)
        params[layer_tensor(i, "k_proj")] = normal(d, d)
        params[layer_tensor(i, "v_proj")] = normal(d, d)
        params[layer_tensor(i, "o_proj")] = normal(d, d)
        params[layer_tensor(i, "ln2.scale")] = np.ones(d, dtype=np.float32)
        params[layer_tensor(i, "ln2.bias")] = np.zeros(d, dtype=np.float32)
        params[layer_tensor(i, "mlp_in")] = normal(config.mlp_dim, d)
        params[layer_tensor(i, "mlp_out")] = normal(d, config.mlp_dim)
    params["final_norm.scale"] = np.ones(d, dtype=np.float32)
    params["final_norm.bias"] = np.zeros(d, dtype=np.float32)
    params["lm_head"] = normal(v, d)
    return params


def _linear(x: np.ndarray, weight: np.ndarray, lora: LoraPair | None):
    y = x @ weight.T
    u = None
    if lora is not None:
        u = x @ lora.A.T
        y = y + lora.scale * (u @ lora.B.T)
    return y, u


def _layernorm(x: np.ndarray, scale: np.ndarray, bias: np.ndarray):
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (x - mean) * inv_std
    return xhat * scale + bias, (xhat, inv_std)


def _layernorm_backward(dy, cache, scale):
    xhat, inv_std = cache
    width = dy.shape[-1]
    flat_dy = dy.reshape(-1, width)
    dg = (flat_dy * xhat.reshape(-1, width)).sum(axis=0)
    db = flat_dy.sum(axis=0)
    dxhat = dy * scale
    mean1 = dxhat.mean(axis=-1, keepdims=True)
    mean2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = (dxhat - mean1 - xhat * mean2) * inv_std
    return dx, dg, db


def _silu(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sig = 1.0 / (1.0 + np.exp(-z))
    return z * sig, sig


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_batch(config: ModelConfig, params: Params, ids: np.ndarray, adapters: Adapters | None):
    """Run the network over (B, T) token ids; returns logits and a tape."""
    B, T = ids.shape
    if T > config.context_len:
        raise SequenceTooLong(f"sequence length {T} exceeds context {config.context_len}")
    H, hd = config.n_heads, config.head_dim
    adapters = adapters or {}

    h = params["tok_emb"][ids] + params["pos_emb"][:T][None, :, :]
    causal = np.tril(np.ones((T, T), dtype=bool))
    tape: list[dict] = []
    for i in range(config.n_layers):
        entry: dict = {"h_in": h}
        a, entry["ln1"] = _layernorm(
            h, params[layer_tensor(i, "ln1.scale")], params[layer_tensor(i, "ln1.bias")]
        )
        entry["a"] = a
        qkv = {}
        for proj in ("q_proj", "k_proj", "v_proj"):
            name = layer_tensor(i, proj)
            qkv[proj], entry[f"u.{proj}"] = _linear(a, params[name], adapters.get(name))
        q = qkv["q_proj"].reshape(B, T, H, hd).transpose(0, 2, 1, 3)
        k = qkv["k_proj"].reshape(B, T, H, hd).transpose(0, 2, 1, 3)
        v = qkv["v_proj"].reshape(B, T, H, hd).transpose(0, 2, 1, 3)
        scores = (q @ k.transpose(0, 1, 3, 2)) / np.sqrt(np.asarray(hd, dtype=h.dtype))
        scores = np.where(causal, scores, -np.inf)
        probs = _softmax(scores)
        context = (probs @ v).transpose(0, 2, 1, 3).reshape(B, T, H * hd)
        entry.update(q=q, k=k, v=v, probs=probs, context=context)
        o_name = layer_tensor(i, "o_proj")
        o, entry["u.o_proj"] = _linear(context, params[o_name], adapters.get(o_name))
        h = h + o
        entry["h_mid"] = h
        m, entry["ln2"] = _layernorm(
            h, params[layer_tensor(i, "ln2.scale")], params[layer_tensor(i, "ln2.bias")]
        )
        entry["m"] = m
        in_name = layer_tensor(i, "mlp_in")
        z, entry["u.mlp_in"] = _linear(m, params[in_name], adapters.get(in_name))
        f, sig = _silu(z)
        entry.update(z=z, sig=sig, f=f)
        out_name = layer_tensor(i, "mlp_out")
        y, entry["u.mlp_out"] = _linear(f, params[out_name], adapters.get(out_name))
        h = h + y
        tape.append(entry)

    g, final_cache = _layernorm(h, params["final_norm.scale"], params["final_norm.bias"])
    logits = g @ params["lm_head"].T
    return logits, {"tape": tape, "g": g, "final": final_cache, "ids": ids, "causal": causal}


def forward(
    config: ModelConfig,
    params: Params,
    tokens: Sequence[int],
    adapters: Adapters | None = None,
) -> np.ndarray:
    """Logits (positions x vocab) for one token sequence."""
    ids = np.asarray(tokens, dtype=np.int64)[None, :]
    if ids.shape[1] == 0:
        return np.zeros((0, config.vocab_size), dtype=np.float32)
    logits, _ = _forward_batch(config, params, ids, adapters)
    return logits[0]


def _flat_outer(dy: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Weight gradient for y = x @ W.T: sum of outer products, via one gemm."""
    return dy.reshape(-1, dy.shape[-1]).T @ x.reshape(-1, x.shape[-1])


def _linear_backward(dy, x, weight, lora: LoraPair | None, u, grads, name, train_base, train_adapters):
    dx = dy @ weight
    if train_base:
        grads[name] = _flat_outer(dy, x)
    if lora is not None:
        du = lora.scale * (dy @ lora.B)
        dx = dx + du @ lora.A
        if train_adapters:
            grads[f"{name}.lora_A"] = _flat_outer(du, x)
            grads[f"{name}.lora_B"] = lora.scale * _flat_outer(dy, u)
    return dx


def loss_and_grads(
    config: ModelConfig,
    params: Params,
    ids: np.ndarray,
    loss_mask: np.ndarray,
    adapters: Adapters | None = None,
    *,
    train_base: bool = True,
    train_adapters: bool = False,
) -> tuple[float, float, dict[str, np.ndarray]]:
    """Summed next-token NLL over masked targets, plus gradients of that sum.

    ``loss_mask[b, t]`` weights token ``t`` as a prediction target (position
    ``t-1`` predicts it); index 0 is never a target. Returns
    (nll_sum, target_count, grads); callers divide by the count for a mean.
    """
    ids = np.asarray(ids, dtype=np.int64)
    mask = np.asarray(loss_mask, dtype=np.float64)
    if ids.shape != mask.shape:
        raise ValueError("loss mask shape must match token shape")
    weights = mask[:, 1:]
    count = float(weights.sum())
    if count <= 0.0:
        raise AllMasked("no unmasked prediction targets in batch")

    logits, cache = _forward_batch(config, params, ids, adapters)
    pred = logits[:, :-1, :]
    targets = ids[:, 1:]

    peak = pred.max(axis=-1, keepdims=True)
    shifted = pred - peak
    exp = np.exp(shifted)
    denom = exp.sum(axis=-1)
    b_idx, t_idx = np.indices(targets.shape)
    target_shift = shifted[b_idx, t_idx, targets]
    nll = np.log(denom.astype(np.float64)) - target_shift.astype(np.float64)
    nll_sum = float((nll * weights).sum())

    probs = exp / denom[..., None]
    dpred = probs * weights[..., None].astype(probs.dtype)
    dpred[b_idx, t_idx, targets] -= weights.astype(probs.dtype)
    dlogits = np.concatenate(
        [dpred, np.zeros_like(logits[:, :1, :])], axis=1
    )

    grads: dict[str, np.ndarray] = {}
    adapters = adapters or {}

    g = cache["g"]
    if train_base:
        grads["lm_head"] = _flat_outer(dlogits, g)
    dg = dlogits @ params["lm_head"]
    dh, dg_scale, dg_bias = _layernorm_backward(dg, cache["final"], params["final_norm.scale"])
    if train_base:
        grads["final_norm.scale"] = dg_scale
        grads["final_norm.bias"] = dg_bias

    B, T = ids.shape
    H, hd = config.n_heads, config.head_dim
    for i in reversed(range(config.n_layers)):
        entry = cache["tape"][i]
        # MLP block: h_out = h_mid + mlp_out(silu(mlp_in(ln2(h_mid))))
        out_name = layer_tensor(i, "mlp_out")
        df = _linear_backward(
            dh, entry["f"], params[out_name], adapters.get(out_name), entry["u.mlp_out"],
            grads, out_name, train_base, train_adapters,
        )
        sig, z = entry["sig"], entry["z"]
        dz = df * (sig * (1.0 + z * (1.0 - sig)))
        in_name = layer_tensor(i, "mlp_in")
        dm = _linear_backward(
            dz, entry["m"], params[in_name], adapters.get(in_name), entry["u.mlp_in"],
            grads, in_name, train_base, train_adapters,
        )
        dh_mid, dg2, db2 = _layernorm_backward(
            dm, entry["ln2"], params[layer_tensor(i, "ln2.scale")]
        )
        if train_base:
            grads[layer_tensor(i, "ln2.scale")] = dg2
            grads[layer_tensor(i, "ln2.bias")] = db2
        dh = dh + dh_mid

        # Attention block: h_mid = h_in + o_proj(attn(ln1(h_in)))
        o_name = layer_tensor(i, "o_proj")
        dcontext = _linear_backward(
            dh, entry["context"], params[o_name], adapters.get(o_name), entry["u.o_proj"],
            grads, o_name, train_base, train_adapters,
        )
        dctx = dcontext.reshape(B, T, H, hd).transpose(0, 2, 1, 3)
        probs, q, k, v = entry["probs"], entry["q"], entry["k"], entry["v"]
        dprobs = dctx @ v.transpose(0, 1, 3, 2)
        dv = probs.transpose(0, 1, 3, 2) @ dctx
        dscores = probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))
        dscores = dscores / np.sqrt(np.asarray(hd, dtype=dh.dtype))
        dq = dscores @ k
        dk = dscores.transpose(0, 1, 3, 2) @ q

        da = np.zeros_like(entry["a"])
        for proj, dhead in (("q_proj", dq), ("k_proj", dk), ("v_proj", dv)):
            dflat = dhead.transpose(0, 2, 1, 3).reshape(B, T, H * hd)
            name = layer_tensor(i, proj)
            da = da + _linear_backward(
                dflat, entry["a"], params[name], adapters.get(name), entry[f"u.{proj}"],
                grads, name, train_base, train_adapters,
            )
        dh_in, dg1, db1 = _layernorm_backward(
            da, entry["ln1"], params[layer_tensor(i, "ln1.scale")]
        )
        if train_base:
            grads[layer_tensor(i, "ln1.scale")] = dg1
            grads[layer_tensor(i, "ln1.bias")] = db1
        dh = dh + dh_in

    if train_base:
        # Scatter-add via one-hot gemm: deterministic and much faster than ufunc.at.
        flat_ids = cache["ids"].reshape(-1)
        flat_dh = dh.reshape(-1, dh.shape[-1])
        onehot = np.zeros((flat_ids.size, params["tok_emb"].shape[0]), dtype=dh.dtype)
        onehot[np.arange(flat_ids.size), flat_ids] = 1.0
        grads["tok_emb"] = onehot.T @ flat_dh
        d_pos = np.zeros_like(params["pos_emb"])
        d_pos[:T] = dh.sum(axis=0)
        grads["pos_emb"] = d_pos

    return nll_sum, count, grads


def pad_batch(
    sequences: Iterable[Sequence[int]],
    masks: Iterable[Sequence[float]],
    pad_id: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad sequences to a rectangular batch; pads carry zero mask."""
    seqs = [list(s) for s in sequences]
    msks = [list(m) for m in masks]
    if not seqs:
        raise ValueError("empty batch")
    width = max(len(s) for s in seqs)
    ids = np.full((len(seqs), width), pad_id, dtype=np.int64)
    mask = np.zeros((len(seqs), width), dtype=np.float64)
    for row, (s, m) in enumerate(zip(seqs, msks)):
        if len(s) != len(m):
            raise ValueError("mask length must equal token length")
        ids[row, : len(s)] = s
        mask[row, : len(s)] = m
    return ids, mask


def mean_loss(
    config: ModelConfig,
    params: Params,
    batch: list[tuple[Sequence[int], Sequence[float]]],
    adapters: Adapters | None = None,
    *,
    train_base: bool = True,
    train_adapters: bool = False,
    pad_id: int,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean masked NLL over a ragged batch, with gradients of the mean."""
    ids, mask = pad_batch([s for s, _ in batch], [m for _, m in batch], pad_id)
    nll_sum, count, grads = loss_and_grads(
        config, params, ids, mask, adapters,
        train_base=train_base, train_adapters=train_adapters,
    )
    for key in grads:
        grads[key] = grads[key] / count
    return nll_sum / count, grads


def generate(
    config: ModelConfig,
    params: Params,
    prompt_ids: Sequence[int],
    max_new: int,
    adapters: Adapters | None = None,
    *,
    eos_id: int,
    mode: str = "greedy",
    temperature: float = 1.0,
    seed: int = 0,
) -> list[int]:
    """Autoregressive continuation; greedy is deterministic, stops at EOS."""
    if mode not in ("greedy", "sample"):
        raise ValueError(f"unknown mode {mode!r}")
    ids = list(prompt_ids)
    if len(ids) > config.context_len:
        raise SequenceTooLong(f"prompt length {len(ids)} exceeds context {config.context_len}")
    rng = np.random.Generator(np.random.PCG64(seed))
    out: list[int] = []
    for _ in range(max_new):
        if len(ids) >= config.context_len:
            break
        logits = forward(config, params, ids, adapters)[-1]
        if mode == "greedy":
            next_id = int(np.argmax(logits))
        else:
            probs = _softmax(logits.astype(np.float64) / max(temperature, 1e-6))
            next_id = int(rng.choice(len(probs), p=probs / probs.sum()))
        if next_id == eos_id:
            break
        out.append(next_id)
        ids.append(next_id)
    return out
