"""Instability scoring tests: truncated divergence, smoothing, selection."""

import math

import numpy as np
import pytest

from focore.dists import LOG_TWO, js_divergence
from focore.errors import InvalidInputError
from focore.instability import (
    TIE_EPSILON,
    InstabilityTracker,
    ema_update,
    truncated_js,
)


class TestTruncatedJS:
    def test_identity_zero(self):
        p = np.array([0.5, 0.3, 0.2])
        assert truncated_js(p, p, 2) == 0.0

    def test_full_width_equals_untruncated(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            p = rng.gamma(0.5, 1, 12)
            q = rng.gamma(0.5, 1, 12)
            p, q = p / p.sum(), q / q.sum()
            assert truncated_js(p, q, 12) == pytest.approx(
                js_divergence(p, q), abs=1e-12
            )

    def test_hand_evaluated_example(self):
        # frozen: element 0 gives (0.7*ln1.75 + 0.1*ln0.25)/2, element 1 gives 0
        d = truncated_js(
            np.array([0.7, 0.2, 0.1]), np.array([0.1, 0.2, 0.7]), 2
        )
        assert d == pytest.approx(0.12655, abs=1e-4)

    def test_monotone_in_k(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            p = rng.gamma(0.5, 1, 10)
            q = rng.gamma(0.5, 1, 10)
            p, q = p / p.sum(), q / q.sum()
            vals = [truncated_js(p, q, k) for k in range(1, 11)]
            assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))

    def test_tail_mass_bound(self):
        rng = np.random.default_rng(2)
        for _ in range(500):
            p = rng.gamma(0.4, 1, 20)
            q = rng.gamma(0.4, 1, 20)
            p, q = p / p.sum(), q / q.sum()
            full = js_divergence(p, q)
            order = np.argsort(-p, kind="stable")
            for k in (1, 3, 7, 20):
                gap = full - truncated_js(p, q, k)
                eps_k = 1.0 - (0.5 * (p + q))[order[:k]].sum()
                assert -1e-12 <= gap <= LOG_TWO * eps_k + 1e-12

    def test_k_out_of_range(self):
        p = np.full(4, 0.25)
        with pytest.raises(InvalidInputError):
            truncated_js(p, p, 5)


class TestEmaUpdate:
    def test_arithmetic(self):
        assert ema_update(0.0, 0.1, 0.9) == pytest.approx(0.01, abs=1e-15)

    def test_no_memory_at_zero_decay(self):
        assert ema_update(0.7, 0.2, 0.0) == 0.2

    def test_fixed_point(self):
        assert ema_update(0.37, 0.37, 0.9) == pytest.approx(0.37, abs=1e-15)

    def test_bounded_by_input_range(self):
        rng = np.random.default_rng(3)
        s = 0.0
        for _ in range(5000):
            s = ema_update(s, rng.uniform(0, LOG_TWO), 0.9)
            assert 0.0 <= s <= LOG_TWO

    def test_swapped_coefficients_absorb_too_fast(self):
        # canary for the smoothing orientation: weighting the new
        # observation by the decay factor absorbs it almost immediately
        def flipped(old, d, decay):
            return (1 - decay) * old + decay * d

        s_good, s_bad = 0.0, 0.0
        for _ in range(3):
            s_good = ema_update(s_good, 0.5, 0.9)
            s_bad = flipped(s_bad, 0.5, 0.9)
        assert s_good == pytest.approx(0.5 * (1 - 0.9**3), abs=1e-12)
        assert s_good < 0.2 < s_bad

    def test_negative_divergence_rejected(self):
        with pytest.raises(InvalidInputError):
            ema_update(0.0, -0.1, 0.9)


class TestTracker:
    def test_first_observation_primes_only(self):
        tr = InstabilityTracker(0.9, 3)
        assert tr.observe(0, np.array([0.5, 0.3, 0.2])) is None
        assert tr.score(0) == 0.0
        assert tr.has_observation(0)

    def test_identical_second_observation_decays(self):
        tr = InstabilityTracker(0.9, 3)
        tr._scores[0] = 0.5
        p = np.array([0.5, 0.3, 0.2])
        tr.observe(0, p)
        d = tr.observe(0, p)
        assert d == 0.0
        assert tr.score(0) == pytest.approx(0.45, abs=1e-12)

    def test_derived_composition(self):
        # two observations of the hand-evaluated pair at decay 0.9
        tr = InstabilityTracker(0.9, 2)
        tr.observe(0, np.array([0.1, 0.2, 0.7]))
        tr.observe(0, np.array([0.7, 0.2, 0.1]))
        assert tr.score(0) == pytest.approx(0.012655, abs=1e-5)

    def test_eviction_drops_cache_keeps_score(self):
        tr = InstabilityTracker(0.9, 2)
        tr.observe(0, np.array([0.1, 0.9]))
        tr.observe(0, np.array([0.9, 0.1]))
        score = tr.score(0)
        tr.evict([0])
        assert not tr.has_observation(0)
        assert tr.score(0) == score
        # next observation re-primes instead of diverging against stale data
        assert tr.observe(0, np.array([0.5, 0.5])) is None

    def test_clamps_k_to_vocab(self):
        tr = InstabilityTracker(0.9, 256)
        tr.observe(0, np.array([0.5, 0.5]))
        assert tr.observe(0, np.array([0.9, 0.1])) is not None


class TestSelection:
    def test_margin_respected(self):
        tr = InstabilityTracker(0.9, 2)
        tr._scores = {0: 0.5, 1: 0.1, 2: 0.3}
        rng = np.random.default_rng(4)
        for _ in range(100):
            assert tr.select_hd_set([0, 1, 2], 2, rng) == [0, 2]

    def test_saturation_returns_all(self):
        tr = InstabilityTracker(0.9, 2)
        rng = np.random.default_rng(5)
        assert tr.select_hd_set([3, 1, 2], 10, rng) == [1, 2, 3]

    def test_empty_candidates(self):
        tr = InstabilityTracker(0.9, 2)
        assert tr.select_hd_set([], 4, np.random.default_rng(0)) == []

    def test_all_equal_scores_tie_break_uniformly(self):
        tr = InstabilityTracker(0.9, 2)
        rng = np.random.default_rng(6)
        counts = {0: 0, 1: 0, 2: 0}
        n = 10_000
        for _ in range(n):
            (pick,) = tr.select_hd_set([0, 1, 2], 1, rng)
            counts[pick] += 1
        for c in counts.values():
            assert abs(c / n - 1 / 3) <= 0.02

    def test_scores_above_noise_never_flip(self):
        tr = InstabilityTracker(0.9, 2)
        tr._scores = {0: 2 * TIE_EPSILON, 1: 0.0}
        rng = np.random.default_rng(7)
        for _ in range(2000):
            assert tr.select_hd_set([0, 1], 1, rng) == [0]


class TestMeanScore:
    def test_arithmetic(self):
        tr = InstabilityTracker(0.9, 2)
        tr._scores = {0: 0.02, 1: 0.04}
        assert tr.mean_score([0, 1]) == pytest.approx(0.03, abs=1e-15)

    def test_all_zero(self):
        tr = InstabilityTracker(0.9, 2)
        assert tr.mean_score([0, 1, 2]) == 0.0

    def test_empty_is_infinite(self):
        tr = InstabilityTracker(0.9, 2)
        assert tr.mean_score([]) == math.inf

    def test_singleton_exact(self):
        tr = InstabilityTracker(0.9, 2)
        tr._scores = {5: 0.123456}
        assert tr.mean_score([5]) == 0.123456
