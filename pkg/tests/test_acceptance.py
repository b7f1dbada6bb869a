"""Acceptance gate: one test per primary criterion, at pinned tolerances.

Each test prints a single PASS/FAIL line (run with ``pytest -s`` to see
them) and asserts both the property and its runtime budget. The same
checks back the ``focore verify`` command; this module is the canonical
exit criterion for the engine.
"""

import time

import pytest

from focore.verify import (
    VerifyContext,
    check_accel_accounting,
    check_decode_determinism,
    check_decode_order_direction,
    check_delta_confidence_direction,
    check_dominant_recovery,
    check_guided_combination_equivalence,
    check_hd_detection,
    check_mi_identity,
    check_nfe_accounting,
    check_omega_zero_collapse,
    check_step_dominance,
    check_truncation_bound,
    check_truncation_monotone,
    check_uniform_negative_sharpening,
)


@pytest.fixture(scope="module")
def ctx():
    # one shared context so the final accounting audit sees every decode
    return VerifyContext(seed=0)


def _run(ctx, check, budget_s):
    start = time.perf_counter()
    result = check(ctx)
    elapsed = time.perf_counter() - start
    status = "PASS" if result.passed else "FAIL"
    print(f"[acceptance] {status} {result.name} ({elapsed:.2f}s) - {result.detail}")
    assert result.passed, f"{result.name}: {result.detail}"
    assert elapsed < budget_s, f"{result.name} took {elapsed:.1f}s (budget {budget_s}s)"


def test_guided_combination_equivalence(ctx):
    """Both guided-logit forms agree within 1e-12 over 1e4 pairs (vocab 128)."""
    _run(ctx, check_guided_combination_equivalence, budget_s=1.0)


def test_omega_zero_collapse(ctx):
    """Zero guidance reproduces the confidence baseline token-for-token on
    20 seeded oracle tasks (32 tokens, one 32-step block)."""
    _run(ctx, check_omega_zero_collapse, budget_s=10.0)


def test_truncation_bound(ctx):
    """0 <= full - truncated <= ln2 * tail mass + 1e-12 over 1e4 pairs x k."""
    _run(ctx, check_truncation_bound, budget_s=30.0)


def test_truncation_monotone(ctx):
    """Truncated divergence never decreases as k grows."""
    _run(ctx, check_truncation_monotone, budget_s=30.0)


def test_mi_identity(ctx):
    """Conditional MI equals expected posterior KL within 1e-9 on 50
    enumerable joints (3 tokens, length 4)."""
    _run(ctx, check_mi_identity, budget_s=60.0)


def test_dominant_recovery(ctx):
    """Greedy and confidence recover a majority-mass sequence 100/100."""
    _run(ctx, check_dominant_recovery, budget_s=30.0)


def test_hd_detection(ctx):
    """The coupled position tops cumulative instability in >= 95/100 seeds."""
    _run(ctx, check_hd_detection, budget_s=60.0)


def test_accel_accounting(ctx):
    """Trigger-always early exit: exactly 5 steps and 10 forward calls per
    32-step block with m=7; tau=0 leaves the trace untouched. 10 tasks."""
    _run(ctx, check_accel_accounting, budget_s=10.0)


def test_step_dominance(ctx):
    """Accelerated decoding never uses more steps, across the (tau, m) grid."""
    _run(ctx, check_step_dominance, budget_s=60.0)


def test_uniform_negative_sharpening(ctx):
    """Flat negatives cannot raise entropy or move the argmax (1e3 x 3 scales)."""
    _run(ctx, check_uniform_negative_sharpening, budget_s=10.0)


def test_decode_determinism(ctx):
    """Two identical decode runs produce byte-identical output files."""
    _run(ctx, check_decode_determinism, budget_s=10.0)


def test_delta_confidence_direction(ctx):
    """Coupled positions lose more confidence than fillers at ratios
    0.2/0.4/0.6, averaged over 20 mask draws."""
    _run(ctx, check_delta_confidence_direction, budget_s=30.0)


def test_decode_order_direction(ctx):
    """HD cumulative decoding leads LD at the median step in >= 80% of 50
    seeds under confidence decoding."""
    _run(ctx, check_decode_order_direction, budget_s=60.0)


def test_nfe_accounting_last(ctx):
    """Every decode this module executed obeyed the forward-call law:
    steps for single-pass strategies, 2x steps under guidance. Runs last."""
    assert len(ctx.ledger) > 100, "accounting audit needs the earlier decodes"
    _run(ctx, check_nfe_accounting, budget_s=5.0)
