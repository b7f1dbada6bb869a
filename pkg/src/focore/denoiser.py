"""The denoiser boundary: anything that maps a partially masked token
sequence to per-position logits.

Implementations must be deterministic (identical input -> identical logits)
and read-only after construction so decode jobs can share them freely.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Sequence

import numpy as np

from .dists import Vocab


class Denoiser(ABC):
    """Per-position belief model over a fixed vocabulary.

    ``forward`` returns one logit row per input position. Masked positions
    carry ``vocab().mask_id``; every other id is treated as evidence.
    """

    @abstractmethod
    def forward(self, tokens: Sequence[int]) -> np.ndarray:
        """Return an (len(tokens), vocab size) float64 logit matrix."""

    @abstractmethod
    def vocab(self) -> Vocab:
        """The token id space this model scores."""

    @abstractmethod
    def max_len(self) -> int:
        """Longest sequence ``forward`` accepts."""

    def required_len(self) -> int | None:
        """Exact sequence length if the model is fixed-width, else None."""
        return None
