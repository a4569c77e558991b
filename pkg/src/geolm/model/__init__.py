"""Tiny decoder-only language model: tokenizer, network, training, checkpoints."""
