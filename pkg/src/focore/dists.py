"""Categorical distribution primitives: softmax, entropy, divergences, top-k.

Everything works on plain float64 numpy vectors over a token vocabulary.
Natural log throughout; 0*log(0) is treated as 0 so sparse distributions
never produce NaNs, and no epsilon smoothing is applied anywhere (zero
entries stay exactly zero, which keeps the oracle identities exact).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

LOG_TWO = math.log(2.0)


@dataclass(frozen=True)
class Vocab:
    """Token id space with a designated absorbing-state (mask) id."""

    size: int
    mask_id: int

    def __post_init__(self) -> None:
        if self.size < 2:
            raise InvalidInputError(f"vocab size must be >= 2, got {self.size}")
        if not 0 <= self.mask_id < self.size:
            raise InvalidInputError(
                f"mask_id {self.mask_id} outside [0, {self.size})"
            )


def softmax(scores: np.ndarray, temperature: float) -> np.ndarray:
    """Temperature softmax; temperature 0 is a one-hot at the argmax.

    Ties at temperature 0 resolve to the lowest index. Computed with
    max-subtraction so large scores cannot overflow.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise InvalidInputError("softmax requires finite scores")
    if temperature < 0:
        raise InvalidInputError(f"temperature must be >= 0, got {temperature}")
    if temperature == 0:
        out = np.zeros_like(scores)
        out[int(np.argmax(scores))] = 1.0
        return out
    shifted = (scores - scores.max()) / temperature
    e = np.exp(shifted)
    return e / e.sum()


def entropy(p: np.ndarray) -> float:
    """Shannon entropy in nats; zero-mass entries contribute nothing."""
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p || q) in nats; +inf sentinel when support(p) is not within support(q)."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    mask = p > 0
    if np.any(q[mask] == 0):
        return math.inf
    return float((p[mask] * np.log(p[mask] / q[mask])).sum())


def js_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Jensen-Shannon divergence in nats, bounded by log 2."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m = 0.5 * (p + q)
    return 0.5 * kl_divergence(p, m) + 0.5 * kl_divergence(q, m)


def top_k_indices(p: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest entries, ties broken toward lower index.

    Returned in descending-probability order (stable), so the first entry
    is always the argmax.
    """
    p = np.asarray(p, dtype=np.float64)
    if not 1 <= k <= p.shape[0]:
        raise InvalidInputError(f"k={k} outside [1, {p.shape[0]}]")
    order = np.argsort(-p, kind="stable")
    return order[:k]


def check_distribution(p: np.ndarray, tol: float = 1e-9) -> None:
    """Raise unless p is a valid probability vector (unit mass within tol)."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0) or np.any(p > 1):
        raise InvalidInputError("probabilities must lie in [0, 1]")
    if abs(float(p.sum()) - 1.0) > tol:
        raise InvalidInputError(f"probabilities sum to {p.sum()!r}, not 1")


def check_logits(scores: np.ndarray) -> None:
    """Raise unless every score is finite."""
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise InvalidInputError("logits must be finite")
