"""A tiny fixed-seed bidirectional masked language model.

Never trained; its contracts are determinism and schema compliance. Every
position's output depends on the whole input sequence through one
attention-style mixing layer, so remasking any position moves the scores
everywhere, which is what the decoding engine needs to exercise guidance.
"""

from __future__ import annotations

import numpy as np


class ToyMaskedLM:
    def __init__(
        self,
        vocab_size: int = 64,
        mask_id: int | None = None,
        max_len: int = 256,
        hidden: int = 32,
        weight_seed: int = 1234,
    ):
        self.vocab_size = vocab_size
        self.mask_id = vocab_size - 1 if mask_id is None else mask_id
        self.max_len = max_len
        self.hidden = hidden
        self.name = f"toy-mlm-v{vocab_size}-h{hidden}-s{weight_seed}"
        rng = np.random.default_rng(weight_seed)
        scale = 1.0 / np.sqrt(hidden)
        self.embed = rng.normal(0, 1.0, size=(vocab_size, hidden))
        self.pos = rng.normal(0, 0.5, size=(max_len, hidden))
        self.w_in = rng.normal(0, scale, size=(hidden, hidden))
        self.w_out = rng.normal(0, scale, size=(hidden, vocab_size))

    def log_probs(self, tokens: list[int]) -> np.ndarray:
        """(len(tokens), vocab_size) float64 log-probabilities."""
        idx = np.asarray(tokens, dtype=np.int64)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("tokens must be a non-empty 1-d sequence")
        if idx.size > self.max_len:
            raise ValueError(f"sequence longer than max_len {self.max_len}")
        if np.any(idx < 0) or np.any(idx >= self.vocab_size):
            raise ValueError("token id outside vocabulary")
        h = np.tanh((self.embed[idx] + self.pos[: idx.size]) @ self.w_in)
        att = h @ h.T / np.sqrt(self.hidden)
        att -= att.max(axis=1, keepdims=True)
        weights = np.exp(att)
        weights /= weights.sum(axis=1, keepdims=True)
        mixed = np.tanh(h + weights @ h)
        logits = mixed @ self.w_out
        logits -= logits.max(axis=1, keepdims=True)
        return logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
