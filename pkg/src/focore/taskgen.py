"""Constructions of small oracle joints with known structure.

These families drive the verification suite and the demo assets:

* dense random tables - enumerable joints for the mutual-information
  identity checks;
* dominant-sequence Markov chains - a single sequence carries more than
  half the mass, so confidence-style decoding must recover it exactly;
* coupled-pair tables - one generation position copies a later-revealed
  neighbour, planting a known instability spike for detector checks;
* anchored tables - generation positions split into prompt-coupled anchors
  and independent fillers, giving ground-truth labels for the sensitivity
  and decode-order analyses.
"""

from __future__ import annotations

import itertools

import numpy as np

from .dists import Vocab
from .oracle import MarkovOracle, TableOracle


def random_joint_table(
    rng: np.random.Generator, data_vocab: int = 3, seq_len: int = 4
) -> TableOracle:
    """Dense random joint over every sequence of data tokens."""
    vocab = Vocab(size=data_vocab + 1, mask_id=data_vocab)
    rows = np.array(
        list(itertools.product(range(data_vocab), repeat=seq_len)), dtype=np.int64
    )
    probs = rng.gamma(1.0, 1.0, size=rows.shape[0])
    probs /= probs.sum()
    return TableOracle(vocab, seq_len, rows, probs)


def markov_with_dominant(
    rng: np.random.Generator,
    data_vocab: int = 6,
    seq_len: int = 36,
    mass_range: tuple[float, float] = (0.55, 0.85),
) -> MarkovOracle:
    """Chain whose mode is a planted sequence of joint mass above 1/2.

    The planted sequence follows a functional successor map, so each state
    row can give its successor the same per-step probability q with
    q**seq_len equal to the target mass.
    """
    vocab = Vocab(size=data_vocab + 1, mask_id=data_vocab)
    target = rng.uniform(*mass_range)
    q = target ** (1.0 / seq_len)
    spread = (1.0 - q) / (data_vocab - 1)

    successor = rng.integers(0, data_vocab, size=data_vocab)
    start = int(rng.integers(0, data_vocab))

    initial = np.zeros(vocab.size)
    initial[:data_vocab] = spread
    initial[start] = q

    transition = np.zeros((vocab.size, vocab.size))
    for u in range(data_vocab):
        transition[u, :data_vocab] = spread
        transition[u, successor[u]] = q
    transition[vocab.mask_id, :data_vocab] = 1.0 / data_vocab

    return MarkovOracle(vocab, seq_len, initial, transition)


def coupled_pair_table(
    rng: np.random.Generator,
) -> tuple[TableOracle, dict]:
    """Joint with a planted instability spike at one generation position.

    Layout: one prompt token, then [b0, b1, c, d, f0, f1]. The pair (c, d)
    always agrees, with a value distribution whose top probability strictly
    exceeds the fillers' uniform 1/4; b0/b1 are near-deterministic; f0/f1
    are uniform and independent. Under confidence order with lowest-index
    tie-breaking, c commits while d is still masked, so c's belief jumps to
    a point mass when d lands - the only position with a real shift.
    """
    data = 4
    vocab = Vocab(size=data + 1, mask_id=data)
    prompt_tok = int(rng.integers(0, data))

    def sharp(top: float, peak: int) -> np.ndarray:
        p = np.full(data, (1.0 - top) / (data - 1))
        p[peak] = top
        return p

    b0 = sharp(rng.uniform(0.86, 0.92), int(rng.integers(0, data)))
    b1 = sharp(rng.uniform(0.93, 0.97), int(rng.integers(0, data)))
    pair = sharp(rng.uniform(0.28, 0.34), int(rng.integers(0, data)))
    uniform = np.full(data, 1.0 / data)

    rows = []
    probs = []
    for vb0, vb1, vp, vf0, vf1 in itertools.product(range(data), repeat=5):
        rows.append([prompt_tok, vb0, vb1, vp, vp, vf0, vf1])
        probs.append(b0[vb0] * b1[vb1] * pair[vp] * uniform[vf0] * uniform[vf1])
    rows_arr = np.array(rows, dtype=np.int64)
    probs_arr = np.array(probs, dtype=np.float64)
    probs_arr /= probs_arr.sum()
    seq_len = rows_arr.shape[1]

    model = TableOracle(vocab, seq_len, rows_arr, probs_arr)
    info = {
        "prompt": [prompt_tok],
        "gen_length": seq_len - 1,
        "coupled_position": 3,  # "c": copies the later-revealed position 4
        "source_position": 4,
        "background_positions": [1, 2],
        "filler_positions": [5, 6],
    }
    return model, info


def anchored_table(
    rng: np.random.Generator,
) -> tuple[TableOracle, dict]:
    """Joint separating prompt-coupled anchors from independent fillers.

    Five prompt positions each take one of two values uniformly. Two
    generation anchors copy specific prompt positions (with small error
    mass on a disjoint alternative); three fillers are uniform and
    independent of everything. Anchors therefore hold sharp beliefs only
    while their prompt partner is visible, and fillers never react to the
    prompt at all.
    """
    data = 4
    vocab = Vocab(size=data + 1, mask_id=data)
    prompt_len = 5
    partners = {5: 1, 6: 3}
    w = {5: rng.uniform(0.88, 0.94), 6: rng.uniform(0.88, 0.94)}

    primary = [int(rng.integers(0, data)) for _ in range(prompt_len)]
    secondary = [(a + 2) % data for a in primary]

    rows = []
    probs = []
    prompt_choices = list(itertools.product([0, 1], repeat=prompt_len))
    for choice in prompt_choices:
        prompt_vals = [
            primary[j] if c == 0 else secondary[j] for j, c in enumerate(choice)
        ]
        p_prompt = 0.5**prompt_len
        anchor_opts = []
        for pos in (5, 6):
            v = prompt_vals[partners[pos]]
            anchor_opts.append([(v, w[pos]), ((v + 1) % data, 1.0 - w[pos])])
        for (a0, pa0), (a1, pa1) in itertools.product(*anchor_opts):
            for f in itertools.product(range(data), repeat=3):
                rows.append(prompt_vals + [a0, a1, *f])
                probs.append(p_prompt * pa0 * pa1 * (1.0 / data) ** 3)
    rows_arr = np.array(rows, dtype=np.int64)
    probs_arr = np.array(probs, dtype=np.float64)
    probs_arr /= probs_arr.sum()

    model = TableOracle(vocab, rows_arr.shape[1], rows_arr, probs_arr)
    info = {
        "prompt": primary,
        "gen_length": 5,
        "anchor_positions": [5, 6],
        "filler_positions": [7, 8, 9],
        "partners": partners,
    }
    return model, info
