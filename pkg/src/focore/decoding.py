"""Block-wise iterative unmasking with six decode strategies.

The generation region is split into fixed blocks decoded left to right; each
block gets an even share of the step budget, and every step commits a
planned number of masked positions chosen by the active strategy. Guidance
strategies run two denoiser passes per step (conditional + negative) and
extrapolate the logits before committing.

A decode job is strictly sequential and owns all of its mutable state
(tracker, rngs); denoisers are shared read-only.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .denoiser import Denoiser
from .dists import softmax
from .errors import ValidationError
from .guidance import (
    GuidanceConfig,
    build_negative_sample,
    mask_prompt,
    self_contrast_logits,
)
from .instability import InstabilityTracker

STRATEGIES = ("random", "greedy", "confidence", "std_cfg", "focore", "focore_a")
GUIDED_STRATEGIES = ("std_cfg", "focore", "focore_a")


@dataclass(frozen=True)
class AccelConfig:
    """Early-exit parallel decoding knobs (focore_a only).

    ``strict_break`` reproduces the literal one-shot early exit that stops
    the block after a single widened step, possibly leaving masks behind;
    the default latches instead and widens every remaining step so blocks
    always complete.
    """

    tau: float = 0.01
    parallel_extra: int = 5
    strict_break: bool = False

    def __post_init__(self) -> None:
        if self.tau < 0:
            raise ValidationError(f"tau must be >= 0, got {self.tau}")
        if not 1 <= self.parallel_extra <= 10:
            raise ValidationError(
                f"parallel_extra must be in [1, 10], got {self.parallel_extra}"
            )


@dataclass(frozen=True)
class DecodeConfig:
    gen_length: int
    block_length: int = 32
    total_steps: int | None = None
    temperature: float = 0.0
    strategy: str = "confidence"
    seed: int = 0
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    accel: AccelConfig | None = None

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValidationError(
                f"unknown strategy '{self.strategy}'; valid: {', '.join(STRATEGIES)}"
            )
        if self.gen_length < 1:
            raise ValidationError("gen_length must be positive")
        if self.block_length < 1:
            raise ValidationError("block_length must be positive")
        if self.gen_length % self.block_length != 0:
            raise ValidationError(
                f"block_length {self.block_length} must divide "
                f"gen_length {self.gen_length}"
            )
        if self.temperature < 0:
            raise ValidationError("temperature must be >= 0")
        total = self.gen_length if self.total_steps is None else self.total_steps
        num_blocks = self.gen_length // self.block_length
        if total % num_blocks != 0:
            raise ValidationError(
                f"total_steps {total} must split evenly over {num_blocks} blocks"
            )
        per_block = total // num_blocks
        if per_block < 1:
            raise ValidationError("per-block steps must be >= 1")
        if per_block > self.block_length:
            raise ValidationError(
                f"per-block steps {per_block} exceed block_length "
                f"{self.block_length}: cannot schedule below one token per step"
            )
        if self.strategy == "focore_a" and self.accel is None:
            object.__setattr__(self, "accel", AccelConfig())

    @property
    def num_blocks(self) -> int:
        return self.gen_length // self.block_length

    @property
    def steps_per_block(self) -> int:
        total = self.gen_length if self.total_steps is None else self.total_steps
        return total // self.num_blocks


def plan_block(block_length: int, steps: int) -> list[int]:
    """Per-step unmask counts: the first (B mod T) steps carry the extra
    token, every count differs by at most one, and they sum to B."""
    if not 1 <= steps <= block_length:
        raise ValidationError(
            f"steps {steps} outside [1, block_length={block_length}]"
        )
    base, extra = divmod(block_length, steps)
    return [base + 1] * extra + [base] * (steps - extra)


@dataclass
class Metrics:
    steps_used: int = 0
    model_forward_calls: int = 0
    wall_time_s: float = 0.0
    early_exit_steps: int = 0
    tokens_decoded_in_parallel: dict[int, int] = field(default_factory=dict)
    incomplete_blocks: int = 0

    def record_step(self, n_tokens: int, latched: bool) -> None:
        self.steps_used += 1
        if latched:
            self.early_exit_steps += 1
        self.tokens_decoded_in_parallel[n_tokens] = (
            self.tokens_decoded_in_parallel.get(n_tokens, 0) + 1
        )

    def to_json_dict(self, include_timing: bool = False) -> dict:
        doc = {
            "steps_used": self.steps_used,
            "model_forward_calls": self.model_forward_calls,
            "early_exit_steps": self.early_exit_steps,
            "tokens_decoded_in_parallel": {
                str(k): v for k, v in sorted(self.tokens_decoded_in_parallel.items())
            },
            "incomplete_blocks": self.incomplete_blocks,
        }
        if include_timing:
            doc["wall_time_s"] = self.wall_time_s
        return doc


@dataclass
class TraceRecord:
    step: int
    block: int
    unmasked_positions: list[dict]
    hd_set: list[int]
    ema_snapshot: list[dict]
    mean_instability: float | None
    early_exit_triggered: bool

    def to_json_dict(self) -> dict:
        return {
            "step": self.step,
            "block": self.block,
            "unmasked_positions": self.unmasked_positions,
            "hd_set": self.hd_set,
            "ema_snapshot": self.ema_snapshot,
            "mean_instability": self.mean_instability,
            "early_exit_triggered": self.early_exit_triggered,
        }


@dataclass
class DecodeResult:
    tokens: np.ndarray
    prompt_len: int
    metrics: Metrics
    trace: list[TraceRecord]

    @property
    def generated(self) -> list[int]:
        return [int(t) for t in self.tokens[self.prompt_len :]]

    def commits(self) -> list[tuple[int, int, float]]:
        """Flat (position, token, confidence) tuples in commit order."""
        out = []
        for rec in self.trace:
            for u in rec.unmasked_positions:
                out.append((u["position"], u["token"], u["confidence"]))
        return out


def job_rngs(seed: int) -> tuple[np.random.Generator, ...]:
    """Token-sampling, position-choice, and tie-break streams, all fanned
    out from one seed so a job is reproducible end to end."""
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.Generator(np.random.PCG64(c)) for c in children)


def subseed(seed: int, index: int) -> int:
    """Counter-style derivation of a per-job seed from a base seed."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def _candidate(
    row: np.ndarray,
    temperature: float,
    rng: np.random.Generator,
    force_argmax: bool = False,
) -> tuple[int, float]:
    """Candidate token and its confidence for one masked position.

    The token is the argmax at temperature 0 (or always, for greedy),
    otherwise a draw from the tempered softmax; the confidence is the
    candidate's probability under the untempered distribution.
    """
    probs = softmax(row, 1.0)
    if force_argmax or temperature == 0:
        tok = int(np.argmax(row))
    else:
        tok = int(rng.choice(row.shape[0], p=softmax(row, temperature)))
    return tok, float(probs[tok])


def confidence_unmask(
    tokens: np.ndarray,
    masked_positions: list[int],
    logits: np.ndarray,
    count: int,
    temperature: float,
    rng: np.random.Generator,
    force_argmax: bool = False,
) -> list[tuple[int, int, float]]:
    """Commit the ``count`` highest-confidence masked positions.

    Candidates are evaluated for every masked position (ascending order, so
    rng consumption is deterministic); ties in confidence resolve toward the
    lower position index. ``count`` is clamped to the masked set.
    """
    cands = []
    for p in masked_positions:
        tok, conf = _candidate(logits[p], temperature, rng, force_argmax)
        cands.append((p, tok, conf))
    cands.sort(key=lambda c: (-c[2], c[0]))
    chosen = sorted(cands[: min(count, len(cands))])
    for p, tok, _ in chosen:
        tokens[p] = tok
    return chosen


def _block_masked(tokens: np.ndarray, start: int, stop: int, mask_id: int) -> list[int]:
    return [p for p in range(start, stop) if tokens[p] == mask_id]


def _commit_dicts(commits: list[tuple[int, int, float]]) -> list[dict]:
    return [
        {"position": int(p), "token": int(t), "confidence": float(c)}
        for p, t, c in commits
    ]


def _decode_simple(
    tokens: np.ndarray,
    prompt_len: int,
    denoiser: Denoiser,
    cfg: DecodeConfig,
) -> DecodeResult:
    mask_id = denoiser.vocab().mask_id
    rng_tok, rng_pos, _ = job_rngs(cfg.seed)
    metrics = Metrics()
    trace: list[TraceRecord] = []
    step_idx = 0
    for b in range(cfg.num_blocks):
        start = prompt_len + b * cfg.block_length
        stop = start + cfg.block_length
        for scheduled in plan_block(cfg.block_length, cfg.steps_per_block):
            logits = denoiser.forward(tokens)
            metrics.model_forward_calls += 1
            masked = _block_masked(tokens, start, stop, mask_id)
            n = min(scheduled, len(masked))
            if cfg.strategy == "random":
                picks = sorted(
                    int(p) for p in rng_pos.choice(masked, size=n, replace=False)
                )
                draw_t = cfg.temperature if cfg.temperature > 0 else 1.0
                commits = []
                for p in picks:
                    probs = softmax(logits[p], 1.0)
                    tok = int(rng_tok.choice(logits.shape[1], p=softmax(logits[p], draw_t)))
                    tokens[p] = tok
                    commits.append((p, tok, float(probs[tok])))
            else:
                commits = confidence_unmask(
                    tokens,
                    masked,
                    logits,
                    n,
                    cfg.temperature,
                    rng_tok,
                    force_argmax=(cfg.strategy == "greedy"),
                )
            metrics.record_step(len(commits), latched=False)
            trace.append(
                TraceRecord(
                    step=step_idx,
                    block=b,
                    unmasked_positions=_commit_dicts(commits),
                    hd_set=[],
                    ema_snapshot=[],
                    mean_instability=None,
                    early_exit_triggered=False,
                )
            )
            step_idx += 1
            if not _block_masked(tokens, start, stop, mask_id):
                break
    return DecodeResult(tokens, prompt_len, metrics, trace)


def _decode_guided(
    tokens: np.ndarray,
    prompt_len: int,
    denoiser: Denoiser,
    cfg: DecodeConfig,
) -> DecodeResult:
    mask_id = denoiser.vocab().mask_id
    vocab_size = denoiser.vocab().size
    rng_tok, _, rng_tie = job_rngs(cfg.seed)
    g = cfg.guidance
    tracker = InstabilityTracker(g.ema_decay, min(g.js_top_k, vocab_size))
    accelerated = cfg.strategy == "focore_a"
    metrics = Metrics()
    trace: list[TraceRecord] = []
    step_idx = 0
    gen_start = prompt_len
    gen_stop = prompt_len + cfg.gen_length

    for b in range(cfg.num_blocks):
        start = prompt_len + b * cfg.block_length
        stop = start + cfg.block_length
        latched = False
        for scheduled in plan_block(cfg.block_length, cfg.steps_per_block):
            l_cond = denoiser.forward(tokens)
            metrics.model_forward_calls += 1

            mean_inst: float | None = None
            if cfg.strategy == "std_cfg":
                negative = mask_prompt(tokens, (0, prompt_len), mask_id)
                hd_set: list[int] = []
            else:
                cur_decoded = [
                    p for p in range(start, stop) if tokens[p] != mask_id
                ]
                for p in cur_decoded:
                    tracker.observe(p, softmax(l_cond[p], 1.0))
                m = tracker.mean_score(cur_decoded)
                mean_inst = m if np.isfinite(m) else None
                if accelerated and not latched and m < cfg.accel.tau:
                    latched = True
                all_decoded = [
                    p for p in range(gen_start, gen_stop) if tokens[p] != mask_id
                ]
                hd_set = tracker.select_hd_set(all_decoded, g.hd_set_size, rng_tie)
                negative = build_negative_sample(tokens, hd_set, mask_id)

            l_uncond = denoiser.forward(negative)
            metrics.model_forward_calls += 1
            guided = self_contrast_logits(l_cond, l_uncond, g.omega)

            masked = _block_masked(tokens, start, stop, mask_id)
            count = scheduled + (cfg.accel.parallel_extra if latched else 0)
            commits = confidence_unmask(
                tokens, masked, guided, min(count, len(masked)),
                cfg.temperature, rng_tok,
            )
            metrics.record_step(len(commits), latched=latched)
            trace.append(
                TraceRecord(
                    step=step_idx,
                    block=b,
                    unmasked_positions=_commit_dicts(commits),
                    hd_set=[int(p) for p in hd_set],
                    ema_snapshot=[
                        {"position": int(p), "ema": float(s)}
                        for p, s in tracker.snapshot()
                    ],
                    mean_instability=mean_inst,
                    early_exit_triggered=latched,
                )
            )
            step_idx += 1
            if not _block_masked(tokens, start, stop, mask_id):
                break
            if accelerated and cfg.accel.strict_break and latched:
                break
        if _block_masked(tokens, start, stop, mask_id):
            metrics.incomplete_blocks += 1
        tracker.evict(list(range(start, stop)))
    return DecodeResult(tokens, prompt_len, metrics, trace)


def validate_job(prompt: Sequence[int], denoiser: Denoiser, cfg: DecodeConfig) -> None:
    """Reject config/denoiser mismatches before any forward pass."""
    vocab = denoiser.vocab()
    for i, t in enumerate(prompt):
        if not 0 <= int(t) < vocab.size:
            raise ValidationError(f"prompt token {t} at index {i} outside vocabulary")
        if int(t) == vocab.mask_id:
            raise ValidationError(f"prompt contains the mask id at index {i}")
    total_len = len(prompt) + cfg.gen_length
    required = denoiser.required_len()
    if required is not None and total_len != required:
        raise ValidationError(
            f"prompt+gen_length = {total_len} but the model requires "
            f"sequences of length {required}"
        )
    if total_len > denoiser.max_len():
        raise ValidationError(
            f"prompt+gen_length = {total_len} exceeds model max_len "
            f"{denoiser.max_len()}"
        )


def run_job(
    prompt: Sequence[int], denoiser: Denoiser, cfg: DecodeConfig
) -> DecodeResult:
    """Decode one task; deterministic for fixed (prompt, config, denoiser)."""
    validate_job(prompt, denoiser, cfg)
    mask_id = denoiser.vocab().mask_id
    prompt_len = len(prompt)
    tokens = np.concatenate(
        [
            np.asarray(list(prompt), dtype=np.int64),
            np.full(cfg.gen_length, mask_id, dtype=np.int64),
        ]
    )
    t0 = time.perf_counter()
    if cfg.strategy in GUIDED_STRATEGIES:
        result = _decode_guided(tokens, prompt_len, denoiser, cfg)
    else:
        result = _decode_simple(tokens, prompt_len, denoiser, cfg)
    result.metrics.wall_time_s = time.perf_counter() - t0
    return result


# ---------------------------------------------------------------------------
# Task files and output artifacts
# ---------------------------------------------------------------------------

_TASK_FIELDS = {
    "prompt", "gen_length", "block_length", "total_steps",
    "strategy", "temperature", "seed", "guidance", "accel",
}
_GUIDANCE_FIELDS = {"omega", "hd_set_size", "js_top_k", "ema_decay"}
_ACCEL_FIELDS = {"tau", "m", "strict_break"}


@dataclass(frozen=True)
class TaskSpec:
    prompt: tuple[int, ...]
    config: DecodeConfig

    def to_json_dict(self) -> dict:
        cfg = self.config
        doc: dict = {
            "prompt": list(self.prompt),
            "gen_length": cfg.gen_length,
            "block_length": cfg.block_length,
            "total_steps": cfg.total_steps
            if cfg.total_steps is not None
            else cfg.gen_length,
            "strategy": cfg.strategy,
            "temperature": cfg.temperature,
            "seed": cfg.seed,
            "guidance": {
                "omega": cfg.guidance.omega,
                "hd_set_size": cfg.guidance.hd_set_size,
                "js_top_k": cfg.guidance.js_top_k,
                "ema_decay": cfg.guidance.ema_decay,
            },
        }
        if cfg.accel is not None:
            doc["accel"] = {
                "tau": cfg.accel.tau,
                "m": cfg.accel.parallel_extra,
                "strict_break": cfg.accel.strict_break,
            }
        return doc


def task_from_json_dict(doc: dict, seed_override: int | None = None) -> TaskSpec:
    if not isinstance(doc, dict):
        raise ValidationError("task file must hold a JSON object")
    unknown = set(doc) - _TASK_FIELDS
    if unknown:
        raise ValidationError(f"unknown task fields: {sorted(unknown)}")
    for req in ("prompt", "gen_length", "strategy"):
        if req not in doc:
            raise ValidationError(f"task file missing field '{req}'")
    if not isinstance(doc["prompt"], list):
        raise ValidationError("task 'prompt' must be a list of token ids")

    gdoc = doc.get("guidance", {})
    if not isinstance(gdoc, dict) or set(gdoc) - _GUIDANCE_FIELDS:
        raise ValidationError("invalid 'guidance' block in task file")
    guidance = GuidanceConfig(
        omega=float(gdoc.get("omega", 0.3)),
        hd_set_size=int(gdoc.get("hd_set_size", 8)),
        js_top_k=int(gdoc.get("js_top_k", 256)),
        ema_decay=float(gdoc.get("ema_decay", 0.9)),
    )
    accel = None
    if "accel" in doc or doc["strategy"] == "focore_a":
        adoc = doc.get("accel", {})
        if not isinstance(adoc, dict) or set(adoc) - _ACCEL_FIELDS:
            raise ValidationError("invalid 'accel' block in task file")
        accel = AccelConfig(
            tau=float(adoc.get("tau", 0.01)),
            parallel_extra=int(adoc.get("m", 5)),
            strict_break=bool(adoc.get("strict_break", False)),
        )
    seed = int(doc.get("seed", 0))
    if seed_override is not None:
        seed = seed_override
    cfg = DecodeConfig(
        gen_length=int(doc["gen_length"]),
        block_length=int(doc.get("block_length", 32)),
        total_steps=int(doc["total_steps"]) if "total_steps" in doc else None,
        temperature=float(doc.get("temperature", 0.0)),
        strategy=str(doc["strategy"]),
        seed=seed,
        guidance=guidance,
        accel=accel,
    )
    return TaskSpec(prompt=tuple(int(t) for t in doc["prompt"]), config=cfg)


def load_task(path: str, seed_override: int | None = None) -> TaskSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read task file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"task file {path} is not valid JSON: {exc}") from exc
    return task_from_json_dict(doc, seed_override)


def save_task(task: TaskSpec, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(task.to_json_dict(), fh, indent=2)
        fh.write("\n")


def sequence_json_dict(result: DecodeResult) -> dict:
    return {
        "tokens": [int(t) for t in result.tokens],
        "prompt_length": result.prompt_len,
        "generated": result.generated,
    }


def write_decode_outputs(
    result: DecodeResult, out_dir: str, include_timing: bool = False
) -> dict[str, str]:
    """Write sequence.json / metrics.json / trace.jsonl; byte-stable for
    identical inputs unless timing is requested."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "sequence": os.path.join(out_dir, "sequence.json"),
        "metrics": os.path.join(out_dir, "metrics.json"),
        "trace": os.path.join(out_dir, "trace.jsonl"),
    }
    with open(paths["sequence"], "w", encoding="utf-8", newline="\n") as fh:
        json.dump(sequence_json_dict(result), fh, indent=2)
        fh.write("\n")
    with open(paths["metrics"], "w", encoding="utf-8", newline="\n") as fh:
        json.dump(result.metrics.to_json_dict(include_timing), fh, indent=2)
        fh.write("\n")
    with open(paths["trace"], "w", encoding="utf-8", newline="\n") as fh:
        for rec in result.trace:
            fh.write(json.dumps(rec.to_json_dict(), separators=(",", ":")))
            fh.write("\n")
    return paths
