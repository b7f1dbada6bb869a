"""Verify-harness self-checks: injected bugs must be caught by name."""

import pytest

from focore.verify import (
    VerifyContext,
    check_ema_bounded,
    check_guided_combination_equivalence,
    check_nfe_accounting,
    hard_failures,
    run_verify,
)


class TestMutationCanaries:
    def test_flipped_ema_coefficients_fail_by_name(self):
        """Swapping the smoothing coefficients must trip the bounded /
        fixed-point property."""

        def flipped(old, d, decay):
            return (1.0 - decay) * old + decay * d

        result = check_ema_bounded(VerifyContext(0), update=flipped)
        assert result.name == "ema_bounded_and_fixed_point"
        assert not result.passed

    def test_correct_ema_passes(self):
        assert check_ema_bounded(VerifyContext(0)).passed


class TestLedgerAudit:
    def test_tampered_ledger_fails(self):
        ctx = VerifyContext(0)
        ctx.ledger.append(("focore", 10, 19))  # guided but not 2x steps
        result = check_nfe_accounting(ctx)
        assert not result.passed

    def test_clean_ledger_passes(self):
        ctx = VerifyContext(0)
        ctx.ledger.append(("confidence", 10, 10))
        ctx.ledger.append(("focore", 10, 20))
        assert check_nfe_accounting(ctx).passed


class TestHarness:
    def test_single_check_result_shape(self):
        result = check_guided_combination_equivalence(VerifyContext(3))
        assert result.passed and result.margin is not None
        row = result.to_row()
        assert set(row) == {"name", "passed", "margin", "detail", "informational"}

    def test_hard_failures_ignores_informational(self):
        from focore.verify import PropertyResult

        results = [
            PropertyResult("a", True, None, ""),
            PropertyResult("b", False, None, "", informational=True),
            PropertyResult("c", False, None, ""),
        ]
        assert [r.name for r in hard_failures(results)] == ["c"]

    def test_full_run_all_hard_properties_pass(self):
        results = run_verify(seed=0)
        assert not hard_failures(results)
        names = {r.name for r in results}
        # the acceptance-facing properties are all present
        for expected in (
            "guided_combination_equivalence",
            "omega_zero_collapse",
            "truncation_bound",
            "mi_expected_kl_identity",
            "dominant_sequence_recovery",
            "hd_detection_coupled_pair",
            "accel_accounting",
            "nfe_accounting",
            "step_dominance",
            "uniform_negative_sharpening",
            "decode_determinism",
            "delta_confidence_direction",
            "decode_order_direction",
        ):
            assert expected in names
        info = [r for r in results if r.informational]
        assert all(r.passed for r in info)


@pytest.mark.parametrize("seed", [0, 1, 17])
def test_verify_is_seed_stable(seed):
    """Different verify seeds must not flip any hard property."""
    results = run_verify(seed=seed)
    assert not hard_failures(results)
