"""Decode-loop behavior: schedules, strategies, accounting, determinism."""

import json

import numpy as np
import pytest

from focore.decoding import (
    AccelConfig,
    DecodeConfig,
    TaskSpec,
    confidence_unmask,
    load_task,
    plan_block,
    run_job,
    save_task,
    task_from_json_dict,
    write_decode_outputs,
)
from focore.errors import ValidationError
from focore.guidance import GuidanceConfig
from focore.taskgen import coupled_pair_table, markov_with_dominant


@pytest.fixture(scope="module")
def dominant_setup():
    rng = np.random.default_rng(42)
    model = markov_with_dominant(rng, data_vocab=6, seq_len=36)
    dom = model.dominant_sequence()
    prompt = tuple(int(t) for t in dom[:4])
    return model, prompt, [int(t) for t in dom[4:]]


def _cfg(**kw):
    base = dict(gen_length=32, block_length=32, strategy="confidence", seed=3)
    base.update(kw)
    return DecodeConfig(**base)


class TestPlanBlock:
    def test_one_per_step(self):
        assert plan_block(32, 32) == [1] * 32

    def test_even_split(self):
        assert plan_block(32, 8) == [4] * 8

    def test_remainder_first(self):
        assert plan_block(10, 4) == [3, 3, 2, 2]

    def test_sums_and_spread(self):
        for b in range(1, 40):
            for t in range(1, b + 1):
                plan = plan_block(b, t)
                assert sum(plan) == b and len(plan) == t
                assert max(plan) - min(plan) <= 1

    def test_rejects_more_steps_than_tokens(self):
        with pytest.raises(ValidationError):
            plan_block(4, 5)


class TestConfigValidation:
    def test_block_must_divide(self):
        with pytest.raises(ValidationError, match="divide"):
            DecodeConfig(gen_length=30, block_length=32)

    def test_steps_split_evenly(self):
        with pytest.raises(ValidationError):
            DecodeConfig(gen_length=64, block_length=32, total_steps=33)

    def test_steps_capped_by_block(self):
        with pytest.raises(ValidationError):
            DecodeConfig(gen_length=8, block_length=8, total_steps=9)

    def test_unknown_strategy_lists_valid_names(self):
        with pytest.raises(ValidationError, match="focore_a"):
            DecodeConfig(gen_length=8, block_length=8, strategy="beam")

    def test_accel_defaults_injected_for_accelerated_strategy(self):
        cfg = DecodeConfig(gen_length=8, block_length=8, strategy="focore_a")
        assert cfg.accel is not None and cfg.accel.tau == 0.01

    def test_parallel_extra_range(self):
        with pytest.raises(ValidationError):
            AccelConfig(parallel_extra=11)

    def test_prompt_mask_id_rejected(self, dominant_setup):
        model, _, _ = dominant_setup
        with pytest.raises(ValidationError, match="mask"):
            run_job((model.vocab().mask_id,) + (0,) * 3, model, _cfg())

    def test_length_mismatch_rejected(self, dominant_setup):
        model, prompt, _ = dominant_setup
        with pytest.raises(ValidationError, match="length"):
            run_job(prompt[:2], model, _cfg())


class TestConfidenceUnmask:
    def test_single_forced(self):
        tokens = np.array([0, 9])
        logits = np.array([[0.0, 0.0], [3.0, 0.0]])
        commits = confidence_unmask(
            tokens, [1], logits, 1, 0.0, np.random.default_rng(0)
        )
        assert commits == [(1, 0, pytest.approx(softmax_ref(3.0)))]
        assert tokens[1] == 0

    def test_highest_confidence_wins(self):
        tokens = np.array([9, 9])
        logits = np.array([[5.0, 0.0], [1.0, 0.0]])
        commits = confidence_unmask(
            tokens, [0, 1], logits, 1, 0.0, np.random.default_rng(0)
        )
        assert [c[0] for c in commits] == [0]
        assert tokens[1] == 9

    def test_tie_takes_lower_position(self):
        tokens = np.array([9, 9])
        logits = np.array([[2.0, 0.0], [2.0, 0.0]])
        commits = confidence_unmask(
            tokens, [0, 1], logits, 1, 0.0, np.random.default_rng(0)
        )
        assert [c[0] for c in commits] == [0]

    def test_count_clamped(self):
        tokens = np.array([9])
        logits = np.array([[1.0, 0.0]])
        commits = confidence_unmask(
            tokens, [0], logits, 5, 0.0, np.random.default_rng(0)
        )
        assert len(commits) == 1


def softmax_ref(margin):
    import math

    return math.exp(margin) / (math.exp(margin) + 1.0)


class TestStrategies:
    def test_random_is_seed_deterministic(self, dominant_setup):
        model, prompt, _ = dominant_setup
        a = run_job(prompt, model, _cfg(strategy="random", seed=5))
        b = run_job(prompt, model, _cfg(strategy="random", seed=5))
        c = run_job(prompt, model, _cfg(strategy="random", seed=6))
        assert a.commits() == b.commits()
        assert a.commits() != c.commits()

    def test_greedy_recovers_dominant(self, dominant_setup):
        model, prompt, want = dominant_setup
        result = run_job(prompt, model, _cfg(strategy="greedy"))
        assert result.generated == want
        assert result.metrics.steps_used == 32
        assert result.metrics.model_forward_calls == 32

    def test_all_strategies_complete(self, dominant_setup):
        model, prompt, _ = dominant_setup
        mask = model.vocab().mask_id
        for strategy in ("random", "greedy", "confidence", "std_cfg", "focore", "focore_a"):
            result = run_job(prompt, model, _cfg(strategy=strategy))
            assert all(t != mask for t in result.generated), strategy
            assert list(result.tokens[:4]) == list(prompt), strategy

    def test_decoded_positions_never_change(self, dominant_setup):
        model, prompt, _ = dominant_setup
        result = run_job(prompt, model, _cfg(strategy="focore"))
        committed = {}
        for pos, tok, _ in result.commits():
            assert pos not in committed
            committed[pos] = tok
        for pos, tok in committed.items():
            assert result.tokens[pos] == tok

    def test_std_cfg_with_empty_prompt_matches_confidence(self):
        rng = np.random.default_rng(11)
        model = markov_with_dominant(rng, data_vocab=6, seq_len=32)
        base = run_job((), model, _cfg(strategy="confidence", guidance=GuidanceConfig(omega=0.7)))
        cfg = _cfg(strategy="std_cfg", guidance=GuidanceConfig(omega=0.7))
        guided = run_job((), model, cfg)
        assert guided.commits() == base.commits()
        assert guided.metrics.model_forward_calls == 64

    def test_omega_zero_collapse(self, dominant_setup):
        model, prompt, _ = dominant_setup
        zero = GuidanceConfig(omega=0.0)
        base = run_job(prompt, model, _cfg())
        for strategy in ("focore", "std_cfg"):
            guided = run_job(prompt, model, _cfg(strategy=strategy, guidance=zero))
            assert guided.commits() == base.commits(), strategy

    def test_nfe_accounting(self, dominant_setup):
        model, prompt, _ = dominant_setup
        for strategy, factor in [
            ("random", 1),
            ("greedy", 1),
            ("confidence", 1),
            ("std_cfg", 2),
            ("focore", 2),
            ("focore_a", 2),
        ]:
            m = run_job(prompt, model, _cfg(strategy=strategy)).metrics
            assert m.model_forward_calls == factor * m.steps_used, strategy


class TestAcceleration:
    def test_trigger_always_accounting(self, dominant_setup):
        model, prompt, _ = dominant_setup
        cfg = _cfg(
            strategy="focore_a",
            accel=AccelConfig(tau=1e18, parallel_extra=7),
        )
        result = run_job(prompt, model, cfg)
        assert result.metrics.steps_used == 5  # 1 + ceil(31/8)
        assert result.metrics.model_forward_calls == 10
        assert result.metrics.early_exit_steps == 4
        assert result.metrics.tokens_decoded_in_parallel == {1: 1, 8: 3, 7: 1}

    def test_tau_zero_matches_plain(self, dominant_setup):
        model, prompt, _ = dominant_setup
        plain = run_job(prompt, model, _cfg(strategy="focore"))
        frozen = run_job(
            prompt,
            model,
            _cfg(strategy="focore_a", accel=AccelConfig(tau=0.0, parallel_extra=7)),
        )
        assert frozen.commits() == plain.commits()
        assert frozen.metrics.steps_used == plain.metrics.steps_used
        assert frozen.metrics.early_exit_steps == 0

    def test_never_slower_than_plain(self, dominant_setup):
        model, prompt, _ = dominant_setup
        plain = run_job(prompt, model, _cfg(strategy="focore")).metrics.steps_used
        for tau in (0.0, 0.005, 0.01, 0.05):
            for m in (1, 5, 10):
                cfg = _cfg(
                    strategy="focore_a",
                    accel=AccelConfig(tau=tau, parallel_extra=m),
                )
                assert run_job(prompt, model, cfg).metrics.steps_used <= plain

    def test_strict_break_stops_block_early(self, dominant_setup):
        model, prompt, _ = dominant_setup
        cfg = _cfg(
            strategy="focore_a",
            accel=AccelConfig(tau=1e18, parallel_extra=2, strict_break=True),
        )
        result = run_job(prompt, model, cfg)
        # one scheduled step, one widened step (1+2 tokens), then the break
        assert result.metrics.steps_used == 2
        assert result.metrics.incomplete_blocks == 1
        mask = model.vocab().mask_id
        assert sum(1 for t in result.generated if t == mask) == 32 - 4

    def test_latch_persists_for_block_remainder(self, dominant_setup):
        model, prompt, _ = dominant_setup
        cfg = _cfg(strategy="focore_a", accel=AccelConfig(tau=1e18, parallel_extra=1))
        result = run_job(prompt, model, cfg)
        latched = [r.early_exit_triggered for r in result.trace]
        assert latched[0] is False
        assert all(latched[1:])


class TestHDDetection:
    def test_coupled_position_tops_ema(self):
        hits = 0
        for i in range(30):
            model, info = coupled_pair_table(np.random.default_rng(100 + i))
            cfg = DecodeConfig(
                gen_length=info["gen_length"],
                block_length=info["gen_length"],
                strategy="focore",
                seed=i,
            )
            result = run_job(tuple(info["prompt"]), model, cfg)
            scores = {e["position"]: e["ema"] for e in result.trace[-1].ema_snapshot}
            top = max(scores, key=lambda p: scores[p])
            hits += top == info["coupled_position"] and scores[top] > 0
        assert hits == 30

    def test_hd_set_saturates_to_all_decoded(self):
        model, info = coupled_pair_table(np.random.default_rng(0))
        cfg = DecodeConfig(
            gen_length=info["gen_length"],
            block_length=info["gen_length"],
            strategy="focore",
            seed=0,
        )
        result = run_job(tuple(info["prompt"]), model, cfg)
        decoded = set()
        for rec in result.trace:
            assert set(rec.hd_set) == decoded  # K=8 exceeds every candidate set
            decoded.update(u["position"] for u in rec.unmasked_positions)


class TestTraceAndOutputs:
    def test_block_discipline_two_blocks(self):
        rng = np.random.default_rng(21)
        model = markov_with_dominant(rng, data_vocab=6, seq_len=64)
        cfg = DecodeConfig(gen_length=64, block_length=32, strategy="focore", seed=1)
        result = run_job((), model, cfg)
        blocks = [rec.block for rec in result.trace]
        assert blocks == sorted(blocks)
        assert set(blocks) == {0, 1}
        first_block_positions = {
            u["position"] for rec in result.trace if rec.block == 0
            for u in rec.unmasked_positions
        }
        assert first_block_positions == set(range(0, 32))

    def test_every_step_commits_something(self, dominant_setup):
        model, prompt, _ = dominant_setup
        for strategy in ("random", "confidence", "focore_a"):
            result = run_job(prompt, model, _cfg(strategy=strategy))
            assert all(rec.unmasked_positions for rec in result.trace)

    def test_output_files_byte_stable(self, dominant_setup, tmp_path):
        model, prompt, _ = dominant_setup
        cfg = _cfg(strategy="focore_a")
        p1 = write_decode_outputs(run_job(prompt, model, cfg), str(tmp_path / "a"))
        p2 = write_decode_outputs(run_job(prompt, model, cfg), str(tmp_path / "b"))
        for key in p1:
            assert open(p1[key], "rb").read() == open(p2[key], "rb").read()

    def test_trace_lines_are_json(self, dominant_setup, tmp_path):
        model, prompt, _ = dominant_setup
        paths = write_decode_outputs(
            run_job(prompt, model, _cfg(strategy="focore")), str(tmp_path)
        )
        with open(paths["trace"], encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        assert len(lines) == 32
        rec = json.loads(lines[5])
        assert set(rec) == {
            "step",
            "block",
            "unmasked_positions",
            "hd_set",
            "ema_snapshot",
            "mean_instability",
            "early_exit_triggered",
        }

    def test_timing_only_when_requested(self, dominant_setup, tmp_path):
        model, prompt, _ = dominant_setup
        result = run_job(prompt, model, _cfg())
        write_decode_outputs(result, str(tmp_path / "plain"))
        write_decode_outputs(result, str(tmp_path / "timed"), include_timing=True)
        plain = json.load(open(tmp_path / "plain" / "metrics.json"))
        timed = json.load(open(tmp_path / "timed" / "metrics.json"))
        assert "wall_time_s" not in plain
        assert timed["wall_time_s"] > 0


class TestTaskFiles:
    def test_round_trip(self, tmp_path):
        task = TaskSpec(
            prompt=(1, 2),
            config=DecodeConfig(
                gen_length=8,
                block_length=8,
                strategy="focore_a",
                seed=5,
                accel=AccelConfig(tau=0.02, parallel_extra=3),
            ),
        )
        path = tmp_path / "t.json"
        save_task(task, str(path))
        again = load_task(str(path))
        assert again.prompt == (1, 2)
        assert again.config.accel.parallel_extra == 3

    def test_defaults_applied(self):
        task = task_from_json_dict(
            {"prompt": [], "gen_length": 32, "strategy": "confidence"}
        )
        assert task.config.block_length == 32
        assert task.config.steps_per_block == 32
        assert task.config.temperature == 0.0

    def test_unknown_field_rejected(self):
        with pytest.raises(ValidationError, match="unknown"):
            task_from_json_dict(
                {"prompt": [], "gen_length": 8, "strategy": "greedy", "beam": 3}
            )

    def test_seed_override(self, tmp_path):
        path = tmp_path / "t.json"
        save_task(
            TaskSpec(prompt=(), config=DecodeConfig(gen_length=8, block_length=8)),
            str(path),
        )
        assert load_task(str(path), seed_override=99).config.seed == 99

    def test_missing_required_field(self):
        with pytest.raises(ValidationError, match="gen_length"):
            task_from_json_dict({"prompt": [], "strategy": "greedy"})


class TestTemperatureSampling:
    def test_positive_temperature_still_completes(self, dominant_setup):
        model, prompt, _ = dominant_setup
        mask = model.vocab().mask_id
        for strategy in ("random", "confidence", "focore"):
            result = run_job(
                prompt, model, _cfg(strategy=strategy, temperature=0.8, seed=9)
            )
            assert all(t != mask for t in result.generated)

    def test_greedy_ignores_temperature(self, dominant_setup):
        model, prompt, want = dominant_setup
        result = run_job(prompt, model, _cfg(strategy="greedy", temperature=2.0))
        assert result.generated == want
