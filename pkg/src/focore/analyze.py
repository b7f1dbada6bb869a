"""Exploratory analyses: context-sensitivity grids and decode-order curves.

Both analyses work against any denoiser. The sensitivity grid perturbs the
prompt at increasing mask ratios and records how much each generated
token's probability drops; the order analysis decodes repeatedly and
tracks how early high-density positions commit relative to the rest.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .decoding import TaskSpec, run_job, subseed
from .denoiser import Denoiser
from .dists import entropy, softmax
from .errors import ValidationError
from .guidance import heuristic_hd_tag
from .oracle import OracleModel

DELTA_FIELDS = ["mask_ratio", "position", "mean_delta", "hd"]
ORDER_FIELDS = ["step", "hd_cum", "ld_cum"]


def reference_sequence(denoiser: Denoiser, task: TaskSpec) -> np.ndarray:
    """Full-length reference: the joint's most likely completion when the
    denoiser is an exact oracle, otherwise a confidence decode."""
    prompt = np.asarray(task.prompt, dtype=np.int64)
    if isinstance(denoiser, OracleModel):
        masked = np.concatenate(
            [
                prompt,
                np.full(
                    task.config.gen_length, denoiser.vocab().mask_id, dtype=np.int64
                ),
            ]
        )
        return denoiser.mode_completion(masked)
    cfg = replace(task.config, strategy="confidence")
    return run_job(task.prompt, denoiser, cfg).tokens


def _confidences(
    denoiser: Denoiser, tokens: np.ndarray, reference: np.ndarray, positions: range
) -> np.ndarray:
    logits = denoiser.forward(tokens)
    return np.array(
        [softmax(logits[p], 1.0)[reference[p]] for p in positions], dtype=np.float64
    )


def initial_entropy_labels(
    denoiser: Denoiser, task: TaskSpec, threshold: float | None = None
) -> tuple[dict[int, bool], float]:
    """HD labels from the model's beliefs given the prompt alone.

    Positions whose initial conditional entropy falls strictly below the
    threshold (default: the median entropy) count as high-density. They are
    the prompt-anchored positions that confidence-style decoding commits
    first.
    """
    prompt = list(task.prompt)
    mask_id = denoiser.vocab().mask_id
    tokens = np.array(
        prompt + [mask_id] * task.config.gen_length, dtype=np.int64
    )
    logits = denoiser.forward(tokens)
    gen = range(len(prompt), len(tokens))
    ents = {p: entropy(softmax(logits[p], 1.0)) for p in gen}
    if threshold is None:
        threshold = float(np.median(list(ents.values())))
    return {p: ents[p] < threshold for p in gen}, threshold


def heuristic_labels(
    task: TaskSpec, token_texts: list[str], keywords: frozenset[str]
) -> dict[int, bool]:
    """HD labels from the text-level tagger; one string per generated token."""
    if len(token_texts) != task.config.gen_length:
        raise ValidationError(
            f"{len(token_texts)} token strings for {task.config.gen_length} "
            "generated positions"
        )
    flags = heuristic_hd_tag(token_texts, keywords)
    start = len(task.prompt)
    return {start + i: flag for i, flag in enumerate(flags)}


def delta_confidence_grid(
    denoiser: Denoiser,
    task: TaskSpec,
    mask_ratios: list[float],
    n_seeds: int,
    base_seed: int,
    labels: dict[int, bool] | None = None,
) -> list[dict]:
    """Mean per-position confidence drop under prompt masking.

    For each ratio and seed, ceil(ratio * prompt_len) prompt positions are
    masked uniformly at random and one forward pass on the reference
    sequence records (confidence_masked - confidence_unmasked) per
    generated position.
    """
    for r in mask_ratios:
        if not 0.0 <= r <= 1.0:
            raise ValidationError(f"mask ratio {r} outside [0, 1]")
    prompt_len = len(task.prompt)
    if prompt_len == 0:
        raise ValidationError("sensitivity analysis needs a non-empty prompt")
    reference = reference_sequence(denoiser, task)
    gen = range(prompt_len, prompt_len + task.config.gen_length)
    base_conf = _confidences(denoiser, reference, reference, gen)
    if labels is None:
        labels, _ = initial_entropy_labels(denoiser, task)

    mask_id = denoiser.vocab().mask_id
    rows = []
    for ratio in mask_ratios:
        n_mask = math.ceil(ratio * prompt_len)
        acc = np.zeros(len(base_conf))
        for s in range(n_seeds):
            rng = np.random.default_rng(subseed(base_seed, s))
            perturbed = reference.copy()
            if n_mask:
                chosen = rng.choice(prompt_len, size=n_mask, replace=False)
                perturbed[chosen] = mask_id
            acc += _confidences(denoiser, perturbed, reference, gen) - base_conf
        mean = acc / n_seeds
        for i, p in enumerate(gen):
            rows.append(
                {
                    "mask_ratio": ratio,
                    "position": int(p),
                    "mean_delta": float(mean[i]),
                    "hd": bool(labels.get(p, False)),
                }
            )
    return rows


def decoding_order_curves(
    denoiser: Denoiser,
    task: TaskSpec,
    n_seeds: int,
    base_seed: int,
    labels: dict[int, bool],
) -> list[dict]:
    """Cumulative fraction of HD- and LD-labeled positions decoded by each
    step, averaged over seeds. If a class is empty its curve falls back to
    the overall curve, so degenerate labelings yield two identical lines."""
    gen = list(
        range(len(task.prompt), len(task.prompt) + task.config.gen_length)
    )
    hd_pos = [p for p in gen if labels.get(p, False)]
    ld_pos = [p for p in gen if not labels.get(p, False)]

    per_step_hd: list[list[float]] = []
    per_step_ld: list[list[float]] = []
    for s in range(n_seeds):
        cfg = replace(task.config, seed=subseed(base_seed, s))
        result = run_job(task.prompt, denoiser, cfg)
        decoded: set[int] = set()
        hd_curve = []
        ld_curve = []
        for rec in result.trace:
            decoded.update(u["position"] for u in rec.unmasked_positions)
            overall = len(decoded) / len(gen)
            hd_curve.append(
                len(decoded & set(hd_pos)) / len(hd_pos) if hd_pos else overall
            )
            ld_curve.append(
                len(decoded & set(ld_pos)) / len(ld_pos) if ld_pos else overall
            )
        per_step_hd.append(hd_curve)
        per_step_ld.append(ld_curve)

    n_steps = max(len(c) for c in per_step_hd)
    rows = []
    for step in range(n_steps):
        hd_vals = [c[step] if step < len(c) else 1.0 for c in per_step_hd]
        ld_vals = [c[step] if step < len(c) else 1.0 for c in per_step_ld]
        rows.append(
            {
                "step": step + 1,
                "hd_cum": float(np.mean(hd_vals)),
                "ld_cum": float(np.mean(ld_vals)),
            }
        )
    return rows


def median_step_gap(rows: list[dict]) -> float:
    """hd_cum - ld_cum at the median decode step (positive = HD leads)."""
    steps = sorted({r["step"] for r in rows})
    median = steps[(len(steps) - 1) // 2]
    for r in rows:
        if r["step"] == median:
            return r["hd_cum"] - r["ld_cum"]
    raise ValueError("median step missing from rows")
