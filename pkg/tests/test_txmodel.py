"""Serialization, size, txid, script, and address tests.

The serialization fixtures are assembled by hand, byte by byte, so they
are independent of the code under test.
"""

import hashlib
import struct

import pytest
from hypothesis import given, strategies as st

from testnetcc import txmodel as txm


def _hand_serialize_base(version, inputs, outputs, locktime):
    # independent reference encoder, no witness
    out = [struct.pack("<i", version), bytes([len(inputs)])]
    for (txid, vout, script_sig, seq) in inputs:
        out += [txid, struct.pack("<I", vout),
                bytes([len(script_sig)]), script_sig, struct.pack("<I", seq)]
    out.append(bytes([len(outputs)]))
    for (value, script) in outputs:
        out += [struct.pack("<Q", value), bytes([len(script)]), script]
    out.append(struct.pack("<I", locktime))
    return b"".join(out)


def test_base_serialization_matches_hand_assembled_bytes():
    prev = bytes(range(32))
    spend = txm.spend_script(b"\xab" * 20)
    tx = txm.Transaction(
        [txm.TxInput(txm.OutPoint(prev, 1), sequence=0xFFFFFFFE)],
        [txm.TxOutput(50_000, spend)],
        version=2, locktime=77)
    expected = _hand_serialize_base(
        2, [(prev, 1, b"", 0xFFFFFFFE)], [(50_000, spend)], 77)
    assert tx.serialize(include_witness=False) == expected
    # no witness data: both serializations coincide
    assert tx.serialize(include_witness=True) == expected


def test_witness_serialization_layout():
    prev = b"\x11" * 32
    tx = txm.Transaction(
        [txm.make_input(txm.OutPoint(prev, 0))],
        [txm.TxOutput(1_000, txm.spend_script(b"\x22" * 20))])
    raw = tx.serialize(include_witness=True)
    # version, then the 0x00 0x01 marker pair
    assert raw[:6] == struct.pack("<i", 2) + b"\x00\x01"
    sig, pub = txm.PLACEHOLDER_WITNESS
    # witness block: count 2, then len-prefixed items, before locktime
    expected_tail = (b"\x02" + bytes([len(sig)]) + sig
                     + bytes([len(pub)]) + pub + struct.pack("<I", 0))
    assert raw.endswith(expected_tail)
    base = tx.serialize(include_witness=False)
    assert len(raw) == len(base) + 2 + 1 + 1 + len(sig) + 1 + len(pub)


def test_txid_is_double_sha256_of_base_serialization():
    tx = txm.Transaction(
        [txm.make_input(txm.OutPoint(b"\x33" * 32, 5))],
        [txm.TxOutput(9_999, txm.spend_script(b"\x44" * 20))])
    base = tx.serialize(include_witness=False)
    assert tx.txid() == hashlib.sha256(hashlib.sha256(base).digest()).digest()
    # witness content must not affect the txid
    stripped = txm.Transaction(
        [txm.TxInput(txm.OutPoint(b"\x33" * 32, 5))],
        [txm.TxOutput(9_999, txm.spend_script(b"\x44" * 20))])
    assert stripped.txid() == tx.txid()


@pytest.mark.parametrize("n, header", [
    (0, 2), (1, 2), (75, 2),      # direct push: opcode + length byte
    (76, 3), (255, 3),            # one-byte extended push
    (256, 4), (65535, 4),         # two-byte extended push
])
def test_data_carrier_push_encoding_breakpoints(n, header):
    script = txm.build_data_carrier_script(b"\x5a" * n)
    assert len(script) == header + n
    assert txm.parse_data_carrier_script(script) == b"\x5a" * n


def test_data_carrier_rejects_malformed_scripts():
    with pytest.raises(txm.TxFormatError):
        txm.parse_data_carrier_script(b"\x51\x01\x00")  # wrong opcode
    with pytest.raises(txm.TxFormatError):
        txm.parse_data_carrier_script(bytes([txm.OP_RETURN, 5, 1, 2]))  # short
    with pytest.raises(txm.TxFormatError):
        txm.parse_data_carrier_script(bytes([txm.OP_RETURN, 1, 1, 2]))  # long


def test_varint_widths():
    assert txm.encode_varint(0) == b"\x00"
    assert txm.encode_varint(252) == b"\xfc"
    assert txm.encode_varint(253) == b"\xfd\xfd\x00"
    assert txm.encode_varint(65535) == b"\xfd\xff\xff"
    assert txm.encode_varint(65536) == b"\xfe\x00\x00\x01\x00"
    assert txm.encode_varint(2**32) == b"\xff" + (2**32).to_bytes(8, "little")


def test_virtual_size_formula():
    assert txm.virtual_size(160, 100) == 115
    # non-witness transaction: v == s == w
    assert txm.virtual_size(200, 200) == 200
    # rounding is upward
    assert txm.virtual_size(101, 100) == 101  # (101+300)/4 = 100.25 -> 101


def test_size_profile_of_witness_transaction():
    tx = txm.Transaction(
        [txm.make_input(txm.OutPoint(b"\x55" * 32, 0))],
        [txm.TxOutput(1_000, txm.spend_script(b"\x66" * 20))])
    prof = tx.size_profile()
    assert prof.total_size == len(tx.serialize(True))
    assert prof.base_size == len(tx.serialize(False))
    assert prof.virtual_size == -((prof.total_size + 3 * prof.base_size) // -4)
    # 1-in 1-out spendable: base 10+41+32 = 83, witness adds 2+108
    assert prof.base_size == 83
    assert prof.total_size == 193
    assert prof.virtual_size == 111


def test_size_profile_without_witness_collapses():
    tx = txm.coinbase_transaction(b"x", [txm.TxOutput(5, txm.spend_script(b"\x01" * 20))])
    prof = tx.size_profile()
    assert prof.total_size == prof.base_size == prof.virtual_size


@st.composite
def transactions(draw):
    n_in = draw(st.integers(1, 4))
    n_out = draw(st.integers(1, 6))
    inputs = []
    for _ in range(n_in):
        prev = txm.OutPoint(draw(st.binary(min_size=32, max_size=32)),
                            draw(st.integers(0, 2**32 - 1)))
        if draw(st.booleans()):
            inputs.append(txm.make_input(prev))
        else:
            inputs.append(txm.TxInput(prev, script_sig=draw(st.binary(max_size=40))))
    outputs = []
    for _ in range(n_out):
        if draw(st.booleans()):
            script = txm.spend_script(draw(st.binary(min_size=20, max_size=20)))
        else:
            script = txm.build_data_carrier_script(draw(st.binary(max_size=300)))
        outputs.append(txm.TxOutput(draw(st.integers(0, 2**50)), script))
    return txm.Transaction(inputs, outputs,
                           version=draw(st.integers(1, 2)),
                           locktime=draw(st.integers(0, 2**32 - 1)))


@given(transactions())
def test_serialize_deserialize_round_trip(tx):
    assert txm.deserialize(tx.serialize(True)) == tx
    # base layout parses back to the witness-stripped transaction
    stripped = txm.Transaction(
        [txm.TxInput(i.prevout, i.script_sig, i.sequence) for i in tx.inputs],
        tx.outputs, version=tx.version, locktime=tx.locktime)
    assert txm.deserialize(tx.serialize(False)) == stripped


@given(transactions())
def test_hex_round_trip(tx):
    assert txm.tx_from_hex(txm.tx_to_hex(tx)) == tx


def test_deserialize_rejects_garbage():
    with pytest.raises(txm.TxFormatError):
        txm.deserialize(b"\x01\x02\x03")
    tx = txm.Transaction(
        [txm.make_input(txm.OutPoint(b"\x77" * 32, 0))],
        [txm.TxOutput(1, txm.spend_script(b"\x00" * 20))])
    with pytest.raises(txm.TxFormatError):
        txm.deserialize(tx.serialize(True) + b"\x00")


@given(st.binary(min_size=20, max_size=20))
def test_address_round_trip(program):
    addr = txm.program_to_address(program)
    assert len(addr) == 36
    assert addr.startswith(txm.ADDRESS_TAG)
    assert txm.address_to_program(addr) == program
    assert txm.script_to_address(txm.address_to_script(addr)) == addr


def test_spend_script_shape():
    script = txm.spend_script(b"\x0f" * 20)
    assert len(script) == txm.SPEND_SCRIPT_LEN == 23
    assert txm.script_program(script) == b"\x0f" * 20
    with pytest.raises(txm.TxFormatError):
        txm.script_program(b"\x00" * 23)


def test_coinbase_transaction_identity():
    tx = txm.coinbase_transaction(b"grant-1", [txm.TxOutput(10, txm.spend_script(b"\xaa" * 20))])
    assert tx.is_coinbase()
    other = txm.coinbase_transaction(b"grant-2", [txm.TxOutput(10, txm.spend_script(b"\xaa" * 20))])
    assert tx.txid() != other.txid()
