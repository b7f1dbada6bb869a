"""Negative-sample construction and self-contrast logit combination.

The guided logits extrapolate away from a "negative" forward pass in which
the most unstable decoded tokens were re-masked; a guidance scale of zero
must reproduce the conditional logits bit for bit, since several collapse
guarantees depend on it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class GuidanceConfig:
    """Knobs of the self-contrast mechanism."""

    omega: float = 0.3
    hd_set_size: int = 8
    js_top_k: int = 256
    ema_decay: float = 0.9

    def __post_init__(self) -> None:
        if self.omega < 0:
            raise InvalidInputError(f"omega must be >= 0, got {self.omega}")
        if self.hd_set_size < 1:
            raise InvalidInputError("hd_set_size must be positive")
        if self.js_top_k < 1:
            raise InvalidInputError("js_top_k must be positive")
        if not 0 <= self.ema_decay < 1:
            raise InvalidInputError("ema_decay must be in [0, 1)")


def build_negative_sample(
    tokens: np.ndarray, hd_set: Iterable[int], mask_id: int
) -> np.ndarray:
    """Copy of ``tokens`` with exactly the hd_set positions re-masked.

    Every hd_set position must currently hold a real token; candidates are
    drawn from decoded positions only, so a masked member signals a caller
    bug rather than a boundary case.
    """
    out = np.array(tokens, dtype=np.int64, copy=True)
    for p in hd_set:
        if out[p] == mask_id:
            raise InvalidInputError(f"hd_set position {p} is already masked")
        out[p] = mask_id
    return out


def self_contrast_logits(
    l_cond: np.ndarray, l_uncond: np.ndarray, omega: float
) -> np.ndarray:
    """l_uncond + (omega+1) * (l_cond - l_uncond), rowwise.

    omega = 0 returns the conditional logits exactly (not just up to
    rounding), which keeps zero-guidance decode traces identical to the
    unguided baseline.
    """
    l_cond = np.asarray(l_cond, dtype=np.float64)
    l_uncond = np.asarray(l_uncond, dtype=np.float64)
    if l_cond.shape != l_uncond.shape:
        raise InvalidInputError("logit arrays must have identical shapes")
    if not (np.all(np.isfinite(l_cond)) and np.all(np.isfinite(l_uncond))):
        raise InvalidInputError("guidance requires finite logits")
    if omega == 0:
        return l_cond.copy()
    return l_uncond + (omega + 1.0) * (l_cond - l_uncond)


def mask_prompt(
    tokens: np.ndarray, prompt_span: tuple[int, int], mask_id: int
) -> np.ndarray:
    """Copy of ``tokens`` with the whole prompt span masked (standard CFG
    unconditional input); the generation region is untouched."""
    start, stop = prompt_span
    out = np.array(tokens, dtype=np.int64, copy=True)
    out[start:stop] = mask_id
    return out


_SENTENCE_ENDS = (".", "!", "?")


def heuristic_hd_tag(
    token_texts: Sequence[str], keywords: frozenset[str] = frozenset()
) -> list[bool]:
    """Cheap text-level tagger for analysis baselines (never on the decode
    path): digits, mid-sentence capitalized words, and listed keywords are
    flagged as high-density."""
    out = []
    sentence_start = True
    for text in token_texts:
        stripped = text.strip()
        hd = False
        if any(c.isdigit() for c in stripped):
            hd = True
        elif stripped in keywords:
            hd = True
        elif (
            not sentence_start
            and stripped[:1].isalpha()
            and stripped[:1].isupper()
        ):
            hd = True
        out.append(hd)
        if stripped:
            sentence_start = stripped.endswith(_SENTENCE_ENDS)
    return out


def load_keywords(path: str) -> frozenset[str]:
    """One term per line; blank lines ignored."""
    with open(path, "r", encoding="utf-8") as fh:
        return frozenset(line.strip() for line in fh if line.strip())
