"""Strategy comparison harness: steps, forward-pass counts, speedups.

Every (task, repeat) pair gets one derived seed shared by all strategies so
speedups compare like against like. Accuracy is exact match against the
oracle's dominant sequence and stays empty when no dominant sequence
exists; it is never fabricated.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .decoding import (
    GUIDED_STRATEGIES,
    STRATEGIES,
    DecodeResult,
    TaskSpec,
    run_job,
)
from .denoiser import Denoiser
from .errors import EngineError, ValidationError
from .oracle import OracleModel

BENCH_FIELDS = [
    "strategy",
    "task",
    "repeat",
    "seed",
    "exact_match",
    "steps_used",
    "nfe",
    "steps_speedup",
    "nfe_ratio",
    "wall_time_s",
]


def check_nfe_law(strategy: str, result: DecodeResult) -> None:
    """Forward-call accounting is exact: two per step under guidance, one
    otherwise. A violation is an engine bug, not a data point."""
    expected = (2 if strategy in GUIDED_STRATEGIES else 1) * result.metrics.steps_used
    if result.metrics.model_forward_calls != expected:
        raise EngineError(
            f"NFE accounting violated for {strategy}: "
            f"{result.metrics.model_forward_calls} calls over "
            f"{result.metrics.steps_used} steps"
        )


def _accuracy(denoiser: Denoiser, task: TaskSpec, result: DecodeResult) -> int | str:
    if not isinstance(denoiser, OracleModel):
        return ""
    dominant = denoiser.dominant_sequence()
    if dominant is None:
        return ""
    prompt_len = len(task.prompt)
    if list(dominant[:prompt_len]) != list(task.prompt):
        return ""
    return int(result.generated == [int(t) for t in dominant[prompt_len:]])


def run_bench(
    tasks: list[tuple[str, Denoiser, TaskSpec]],
    strategies: list[str],
    reference: str,
    repeats: int,
    base_seed: int,
    include_timing: bool = False,
) -> list[dict]:
    """One row per (strategy, task, repeat), plus per-strategy aggregates."""
    for s in strategies + [reference]:
        if s not in STRATEGIES:
            raise ValidationError(
                f"unknown strategy '{s}'; valid: {', '.join(STRATEGIES)}"
            )
    if reference not in strategies:
        strategies = [reference] + list(strategies)

    # Reference steps per (task, repeat), filled on the reference pass.
    ref_steps: dict[tuple[int, int], int] = {}
    ref_nfe: dict[tuple[int, int], int] = {}
    rows: list[dict] = []
    ordered = [reference] + [s for s in strategies if s != reference]
    by_strategy: dict[str, list[dict]] = {s: [] for s in ordered}

    for strategy in ordered:
        for t_idx, (name, denoiser, task) in enumerate(tasks):
            for rep in range(repeats):
                seed = int(
                    np.random.SeedSequence([base_seed, t_idx, rep]).generate_state(
                        1, np.uint64
                    )[0]
                )
                cfg = replace(task.config, strategy=strategy, seed=seed)
                result = run_job(task.prompt, denoiser, cfg)
                check_nfe_law(strategy, result)
                key = (t_idx, rep)
                if strategy == reference:
                    ref_steps[key] = result.metrics.steps_used
                    ref_nfe[key] = result.metrics.model_forward_calls
                row = {
                    "strategy": strategy,
                    "task": name,
                    "repeat": rep,
                    "seed": seed,
                    "exact_match": _accuracy(denoiser, task, result),
                    "steps_used": result.metrics.steps_used,
                    "nfe": result.metrics.model_forward_calls,
                    "steps_speedup": ref_steps[key] / result.metrics.steps_used,
                    "nfe_ratio": ref_nfe[key] / result.metrics.model_forward_calls,
                    "wall_time_s": result.metrics.wall_time_s
                    if include_timing
                    else "",
                }
                by_strategy[strategy].append(row)

    for strategy in ordered:
        rows.extend(by_strategy[strategy])
    for strategy in ordered:
        group = by_strategy[strategy]
        acc = [r["exact_match"] for r in group if r["exact_match"] != ""]
        rows.append(
            {
                "strategy": strategy,
                "task": "ALL",
                "repeat": "mean",
                "seed": "",
                "exact_match": float(np.mean(acc)) if acc else "",
                "steps_used": float(np.mean([r["steps_used"] for r in group])),
                "nfe": float(np.mean([r["nfe"] for r in group])),
                "steps_speedup": float(
                    np.mean([r["steps_speedup"] for r in group])
                ),
                "nfe_ratio": float(np.mean([r["nfe_ratio"] for r in group])),
                "wall_time_s": float(
                    np.mean([r["wall_time_s"] for r in group])
                )
                if include_timing
                else "",
            }
        )
    return rows
