"""Acceptance checks for the published reference numbers and the
end-to-end behavior of the toolkit.

Run with `pytest tests/test_acceptance.py -v` to get one pass/fail
line per criterion. Point comparisons against the reference fee
schedule use a +/-15% tolerance; campaign arithmetic is exact once
fees are pinned to the published constants.
"""

import time
from random import Random

import pytest

from testnetcc import costmodel as cm
from testnetcc import cryptoenvelope as ce
from testnetcc import forensics as fx
from testnetcc import scenario as sce
from testnetcc import txmodel as txm
from testnetcc import wireformat as wf
from testnetcc.relaypolicy import MAINNET, TESTNET, check
from testnetcc.txmodel import (
    OutPoint, Transaction, TxOutput, Utxo, make_input, script_to_address,
    spend_script,
)

TOLERANCE = 0.15

# published fee schedule this implementation is measured against
REFERENCE_FEES = {
    "quota-batch": (454, 454),
    "registration": (373, 373),
    "funding": (166, 166),
    "hardcoded-command": (161, 161),
    "shell-command": (133, 230),
    # the script-command padding decision is allowed to diverge from
    # the published 197; the padded envelope still lands inside +/-15%
    "script-command": (197, 197),
    "script-transaction": (231, 51_349),
    "response": (133, 51_349),
}


def within(actual: int, expected: int, tol: float = TOLERANCE) -> bool:
    return abs(actual - expected) <= tol * expected


@pytest.fixture(scope="module")
def e2e_run():
    """Shared by criteria 7 and 8: ten bots, one published script,
    one scr command, ten maximum-size responses."""
    return sce.run_scenario(sce.load_bundled("e2e_script"))


def test_criterion_1_fee_schedule_within_15_percent():
    start = time.perf_counter()
    table = cm.fee_table(TESTNET)
    for kind, (ref_low, ref_high) in REFERENCE_FEES.items():
        row = table.row(kind)
        assert within(row.fee_low, ref_low), \
            f"{kind} low: {row.fee_low} vs {ref_low}"
        assert within(row.fee_high, ref_high), \
            f"{kind} high: {row.fee_high} vs {ref_high}"
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, f"fee schedule took {elapsed:.2f}s"


def test_criterion_2_campaign_arithmetic_exact_with_pinned_fees():
    assert cm.campaign_registration_cost(
        1000, batch_fee=454, quota_value=373) == 418_400
    assert cm.campaign_funding_cost(1000, 10_000, fee=166) == 10_166_000


def test_criterion_3_daily_throughput_identity():
    assert cm.daily_throughput(10_000_000) == 10_000_000


def test_criterion_4_registration_liveness_under_contention():
    # 100 bots join within the first simulated minute against 10-quota
    # batches with replenishment; the day-long run must leave every
    # bot active and every quota spent at most once
    start = time.perf_counter()
    result = sce.run_scenario(sce.load_bundled("contention"))
    elapsed = time.perf_counter() - start

    scenario = result.scenario
    assert scenario.bots == 100
    last_join = scenario.bot_join_start + \
        (scenario.bots - 1) * scenario.bot_join_interval
    assert last_join <= scenario.bot_join_start + 60
    assert scenario.duration <= 86_400

    assert sum(1 for b in result.bots if b.phase.value == "active") == 100

    view = fx.parse_dump(result.chain_dump())
    registrations = [e for e in view.entries
                     if wf.classify(e.tx) is wf.TxKind.REGISTRATION]
    assert len(registrations) == 100
    spent_quotas = [e.tx.inputs[0].prevout for e in registrations]
    assert len(set(spent_quotas)) == 100, "a quota funded two registrations"

    assert elapsed < 30.0, f"contention run took {elapsed:.1f}s"


def _random_standardish_tx(rng: Random):
    """Arbitrary transaction plus a fee, spanning standard and
    nonstandard shapes."""
    inputs = [make_input(OutPoint(rng.randbytes(32), rng.randrange(4)))
              for _ in range(rng.randint(1, 3))]
    outputs = []
    for _ in range(rng.randint(1, 3)):
        if rng.random() < 0.25:
            size = rng.choice([1, 16, 79, 80, 81, 120])
            outputs.append(TxOutput(0, txm.build_data_carrier_script(
                rng.randbytes(size))))
        else:
            value = rng.choice([0, 1, 545, 546, 547, 10_000, 5_000_000])
            outputs.append(TxOutput(value, spend_script(rng.randbytes(20))))
    tx = Transaction(inputs, outputs)
    vsize = tx.size_profile().virtual_size
    fee = rng.choice([0, vsize - 1, vsize, vsize + 1, 10 * vsize])
    return tx, fee


def test_criterion_5_policy_duality_over_randomized_transactions():
    rng = Random(0x7e57)
    mainnet_relayable = 0
    for _ in range(10_000):
        tx, fee = _random_standardish_tx(rng)
        if check(tx, fee, MAINNET).relayable:
            mainnet_relayable += 1
            assert check(tx, fee, TESTNET).relayable, \
                "mainnet-relayable tx refused on testnet at equal fee"
    # the sample must actually exercise the standard region
    assert mainnet_relayable >= 1_000

    def funded(value):
        return Utxo(OutPoint(rng.randbytes(32), 0), value,
                    spend_script(rng.randbytes(20)))

    protocol_txs = []
    for _ in range(200):
        protocol_txs.append(wf.build_quota_batch(
            funded(5_000_000), spend_script(rng.randbytes(20)),
            spend_script(rng.randbytes(20)), TESTNET))
        protocol_txs.append(wf.build_registration(
            funded(wf.registration_fee(TESTNET)), rng.randbytes(ce.RSA_BYTES),
            TESTNET))
        protocol_txs.append(wf.build_message(
            funded(200_000), rng.randbytes(rng.randint(80, 3_000)),
            spend_script(rng.randbytes(20)), TESTNET))
    for built in protocol_txs:
        assert not check(built.tx, built.fee, MAINNET).relayable, \
            f"{built.kind} slipped past the strict profile"
        assert check(built.tx, built.fee, TESTNET).relayable, \
            f"{built.kind} refused by the permissive profile"


def test_criterion_6_envelope_round_trips_and_tamper_rejection():
    rng = Random(0xc0ffee)
    keys = ce.BotmasterKeys.generate(rng)
    botnet_key = ce.BotnetKey.generate(rng)
    bot_key = ce.BotKey.generate(rng)

    # signed downlink: round trip, then one random bit flip anywhere
    # in the wire must break the signature
    for i in range(1_000):
        size = rng.randint(1, 2_048) if i % 50 else 51_200
        payload = rng.randbytes(size)
        env = ce.downlink_seal(payload, botnet_key, keys, rng, sign=True)
        assert ce.downlink_open(env, botnet_key, keys.public) == payload

        wire = bytearray(env.wire())
        wire[rng.randrange(len(wire))] ^= 1 << rng.randrange(8)
        tampered = ce.parse_symmetric_wire(bytes(wire),
                                           ce.EnvelopeForm.DOWNLINK,
                                           signed=True)
        with pytest.raises(ce.EnvelopeError):
            ce.downlink_open(tampered, botnet_key, keys.public)

    # uplink: round trip (the form carries no authenticator; integrity
    # for uplinks comes from the signed downlink challenge structure)
    for i in range(1_000):
        size = rng.randint(1, 2_048) if i % 50 else 51_200
        payload = rng.randbytes(size)
        env = ce.uplink_seal(payload, bot_key, rng)
        assert ce.uplink_open(env, bot_key) == payload

    # registration: round trip and guaranteed tamper rejection from
    # the OAEP integrity check
    for _ in range(1_000):
        address = bytes(rng.choices(range(33, 127),
                                    k=rng.randint(1, 182)))
        fresh = ce.BotKey.generate(rng)
        env = ce.registration_seal(address, fresh, keys.public, rng)
        got_address, got_key = ce.registration_open(env, keys)
        assert got_address == address.decode("ascii")
        assert got_key == fresh

        body = bytearray(env.body)
        body[rng.randrange(len(body))] ^= 1 << rng.randrange(8)
        with pytest.raises(ce.EnvelopeError):
            ce.registration_open(
                ce.Envelope(ce.EnvelopeForm.REGISTRATION, bytes(body)), keys)

    # capacity boundary: 182-byte address + 32-byte key = 214 seals;
    # one more byte does not
    assert ce.MAX_OAEP_PAYLOAD == 214
    ce.registration_seal(b"a" * 182, bot_key, keys.public, rng)
    with pytest.raises(ce.PayloadTooLarge):
        ce.registration_seal(b"a" * 183, bot_key, keys.public, rng)


def test_criterion_7_end_to_end_command_cycle_fees(e2e_run):
    result = e2e_run
    assert sum(1 for b in result.bots if b.phase.value == "active") == 10

    ledger = result.ledger
    assert ledger.count("response") == 10
    expected_responses = 10 * 51_349
    assert within(ledger.total("response"), expected_responses), \
        f"responses cost {ledger.total('response')} vs {expected_responses}"

    assert ledger.count("script-storage") == 1
    storage_fee = ledger.total("script-storage")
    assert within(storage_fee, 242), f"script tx fee {storage_fee} vs 242"


def test_criterion_8_forensics_recall_on_the_e2e_chain(e2e_run):
    result = e2e_run
    view = fx.parse_dump(result.chain_dump())
    flagged = {f.txid for f in fx.scan(view) if f.flagged}

    must_flag = []
    for entry in view.entries:
        kind = wf.classify(entry.tx)
        if kind in (wf.TxKind.QUOTA_BATCH, wf.TxKind.REGISTRATION):
            must_flag.append(entry.txid)
        elif kind in (wf.TxKind.MESSAGE, wf.TxKind.SCRIPT_STORAGE) and any(
                len(o.carrier_data()) >= 80
                for o in entry.tx.carrier_outputs()):
            must_flag.append(entry.txid)
    assert must_flag and all(txid in flagged for txid in must_flag), \
        "scan missed protocol traffic"

    address = script_to_address(result.botmaster.shared_script)
    assert fx.estimate_botnet_size(view, address) == 10

    bm = result.botmaster
    recovered = fx.decrypt_downlink(view, bm.botnet_key, bm.keys.public)
    assert [cmd for _, cmd in recovered] == bm.command_log


def test_criterion_9_bundled_scenarios_are_deterministic():
    for name in sce.list_bundled():
        first = sce.run_scenario(sce.load_bundled(name))
        second = sce.run_scenario(sce.load_bundled(name))
        assert first.event_log() == second.event_log(), name
        assert first.chain_dump() == second.chain_dump(), name
