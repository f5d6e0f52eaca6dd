"""Standardness rules, dust, MRF, and the profile duality property."""

import pytest
from hypothesis import given, strategies as st

from testnetcc import txmodel as txm
from testnetcc.relaypolicy import (
    MAINNET, TESTNET, Violation, check, mrf, profile_by_name,
)


def _spend(value=10_000, tag=0x10):
    return txm.TxOutput(value, txm.spend_script(bytes([tag]) * 20))


def _tx(outputs):
    return txm.Transaction([txm.make_input(txm.OutPoint(b"\x01" * 32, 0))], outputs)


def _carrier_tx(n, extra=None):
    outs = [txm.TxOutput(0, txm.build_data_carrier_script(b"\x5a" * n))]
    if extra:
        outs += extra
    return _tx(outs)


def test_mrf_is_virtual_size_at_unit_rate():
    tx = _tx([_spend()])
    assert mrf(tx, MAINNET) == tx.size_profile().virtual_size
    assert mrf(tx, TESTNET) == mrf(tx, MAINNET)


def test_oversize_carrier_flagged_on_both_but_relayed_on_testnet():
    tx = _carrier_tx(100, [_spend()])
    fee = mrf(tx, MAINNET)
    main = check(tx, fee, MAINNET)
    test = check(tx, fee, TESTNET)
    assert main.violations == (Violation.DATA_CARRIER_SIZE,)
    assert not main.relayable and not main.standard
    # same classification, different tolerance
    assert test.violations == (Violation.DATA_CARRIER_SIZE,)
    assert test.relayable and not test.standard


def test_carrier_at_baseline_cap_is_standard():
    tx = _carrier_tx(80, [_spend()])
    verdict = check(tx, mrf(tx, MAINNET), MAINNET)
    assert verdict.standard and verdict.relayable


def test_multiple_carriers():
    tx = _tx([txm.TxOutput(0, txm.build_data_carrier_script(b"a")),
              txm.TxOutput(0, txm.build_data_carrier_script(b"b")),
              _spend()])
    verdict = check(tx, mrf(tx, MAINNET), MAINNET)
    assert verdict.violations == (Violation.MULTIPLE_DATA_CARRIERS,)
    assert check(tx, mrf(tx, TESTNET), TESTNET).relayable


def test_repeated_outputs():
    tx = _tx([_spend(1_000, 0x22), _spend(2_000, 0x22)])
    verdict = check(tx, mrf(tx, MAINNET), MAINNET)
    assert verdict.violations == (Violation.REPEATED_OUTPUT,)
    assert check(tx, mrf(tx, TESTNET), TESTNET).relayable


def test_dust_rule_spendables_only():
    dusty = _tx([_spend(100)])
    verdict = check(dusty, mrf(dusty, MAINNET), MAINNET)
    assert verdict.violations == (Violation.DUST_OUTPUT,)
    assert not verdict.relayable
    # zero-value spendable is fine on testnet
    zero = _tx([_spend(0)])
    assert check(zero, mrf(zero, TESTNET), TESTNET).relayable
    # a zero-value data carrier is not dust anywhere
    carrier = _carrier_tx(10, [_spend()])
    assert check(carrier, mrf(carrier, MAINNET), MAINNET).standard


def test_dust_boundary():
    at_limit = _tx([_spend(546)])
    assert check(at_limit, mrf(at_limit, MAINNET), MAINNET).standard
    below = _tx([_spend(545)])
    assert Violation.DUST_OUTPUT in check(below, mrf(below, MAINNET), MAINNET).violations


def test_oversize_tx():
    tx = _carrier_tx(120_000, [_spend()])
    assert tx.size_profile().total_size > 100_000
    verdict = check(tx, mrf(tx, MAINNET), MAINNET)
    assert Violation.OVERSIZE_TX in verdict.violations
    assert Violation.DATA_CARRIER_SIZE in verdict.violations
    assert check(tx, mrf(tx, TESTNET), TESTNET).relayable


def test_fee_below_minimum_blocks_everywhere():
    tx = _tx([_spend()])
    fee = mrf(tx, TESTNET) - 1
    for profile in (MAINNET, TESTNET):
        verdict = check(tx, fee, profile)
        assert Violation.FEE_BELOW_MINIMUM in verdict.violations
        assert not verdict.relayable


def test_violations_enumerated_not_short_circuited():
    tx = _tx([txm.TxOutput(0, txm.build_data_carrier_script(b"\x00" * 90)),
              txm.TxOutput(0, txm.build_data_carrier_script(b"\x00" * 90)),
              _spend(1, 0x33), _spend(1, 0x33)])
    verdict = check(tx, 0, MAINNET)
    assert set(verdict.violations) == {
        Violation.DATA_CARRIER_SIZE, Violation.MULTIPLE_DATA_CARRIERS,
        Violation.REPEATED_OUTPUT, Violation.DUST_OUTPUT,
        Violation.FEE_BELOW_MINIMUM}


def test_profile_lookup():
    assert profile_by_name("Mainnet") is MAINNET
    assert profile_by_name("testnet") is TESTNET
    with pytest.raises(ValueError):
        profile_by_name("regtest")


def test_mrf_monotone_in_carrier_size():
    fees = [mrf(_carrier_tx(n, [_spend()]), TESTNET) for n in range(0, 600, 7)]
    assert fees == sorted(fees)


@given(st.integers(0, 2000), st.integers(546, 10_000), st.booleans())
def test_mainnet_relayable_implies_testnet_relayable(n, value, extra_out):
    outs = [txm.TxOutput(0, txm.build_data_carrier_script(b"\x11" * n)),
            _spend(value, 0x44)]
    if extra_out:
        outs.append(_spend(value + 1, 0x55))
    tx = _tx(outs)
    fee = mrf(tx, MAINNET)
    if check(tx, fee, MAINNET).relayable:
        assert check(tx, fee, TESTNET).relayable
