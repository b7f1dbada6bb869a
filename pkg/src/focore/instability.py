"""Per-position distribution-shift scoring for high-density token detection.

A position's step divergence is a truncated Jensen-Shannon divergence
between its belief at consecutive steps, restricted to the most probable
tokens of the current step; an exponential moving average turns the noisy
step values into a cumulative instability score.
"""

from __future__ import annotations

import math

import numpy as np

from .dists import top_k_indices
from .errors import InvalidInputError

# Width of the uniform tie-breaking noise added to scores during selection.
TIE_EPSILON = 1e-8


def truncated_js(p_now: np.ndarray, p_prev: np.ndarray, k: int) -> float:
    """JS divergence summed over the k most probable tokens of ``p_now``.

    Each element contributes
    0.5*p_now*log(p_now/m) + 0.5*p_prev*log(p_prev/m) with
    m = (p_now+p_prev)/2, which is non-negative elementwise, so the result
    grows monotonically with k and never exceeds the full JS divergence.
    """
    idx = top_k_indices(p_now, k)
    a = np.asarray(p_now, dtype=np.float64)[idx]
    b = np.asarray(p_prev, dtype=np.float64)[idx]
    m = 0.5 * (a + b)
    total = 0.0
    az = a > 0
    bz = b > 0
    total += 0.5 * float((a[az] * np.log(a[az] / m[az])).sum())
    total += 0.5 * float((b[bz] * np.log(b[bz] / m[bz])).sum())
    # rounding can leave an epsilon-negative residue on near-equal inputs
    return max(total, 0.0)


def ema_update(old: float, d: float, decay: float) -> float:
    """One smoothing step: decay*old + (1-decay)*d."""
    if d < 0:
        raise InvalidInputError(f"step divergence must be >= 0, got {d}")
    return decay * old + (1.0 - decay) * d


class InstabilityTracker:
    """EMA instability scores plus the previous-step distribution cache.

    One tracker belongs to one decode job. Scores default to zero and live
    for the whole job; cached distributions are evicted when a block
    finishes so memory stays bounded by the active block.
    """

    def __init__(self, ema_decay: float, js_top_k: int):
        if not 0 <= ema_decay < 1:
            raise InvalidInputError(f"ema_decay must be in [0, 1), got {ema_decay}")
        if js_top_k < 1:
            raise InvalidInputError("js_top_k must be positive")
        self.ema_decay = ema_decay
        self.js_top_k = js_top_k
        self._scores: dict[int, float] = {}
        self._prev: dict[int, np.ndarray] = {}

    def score(self, position: int) -> float:
        return self._scores.get(position, 0.0)

    def observe(self, position: int, p_now: np.ndarray) -> float | None:
        """Feed this step's belief at ``position``; return the step divergence.

        The first observation only primes the cache (there is no previous
        distribution to diverge from) and leaves the score untouched.
        """
        p_now = np.asarray(p_now, dtype=np.float64)
        prev = self._prev.get(position)
        self._prev[position] = p_now
        if prev is None:
            return None
        k = min(self.js_top_k, p_now.shape[0])
        d = truncated_js(p_now, prev, k)
        self._scores[position] = ema_update(self.score(position), d, self.ema_decay)
        return d

    def has_observation(self, position: int) -> bool:
        return position in self._prev

    def select_hd_set(
        self, candidates: list[int], size: int, rng: np.random.Generator
    ) -> list[int]:
        """The min(size, len(candidates)) candidates of highest score.

        Uniform noise in [0, TIE_EPSILON) breaks ties, so equal-score
        candidates are chosen uniformly at random while any score gap
        larger than the noise width is always respected.
        """
        if not candidates or size <= 0:
            return []
        eps = rng.uniform(0.0, TIE_EPSILON, size=len(candidates))
        keyed = sorted(
            range(len(candidates)),
            key=lambda i: -(self.score(candidates[i]) + eps[i]),
        )
        chosen = [candidates[i] for i in keyed[: min(size, len(candidates))]]
        return sorted(chosen)

    def mean_score(self, positions: list[int]) -> float:
        """Mean score over ``positions``; +inf for an empty set so that an
        empty population can never look converged."""
        if not positions:
            return math.inf
        return sum(self.score(p) for p in positions) / len(positions)

    def evict(self, positions: list[int]) -> None:
        """Drop cached distributions (scores persist)."""
        for p in positions:
            self._prev.pop(p, None)

    def snapshot(self) -> list[tuple[int, float]]:
        """(position, score) pairs for every position ever scored, sorted."""
        return sorted(self._scores.items())
