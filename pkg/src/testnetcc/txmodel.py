"""Transaction data model: serialization, sizes, ids, scripts, addresses.

The model is intentionally self-contained: it never talks to a real
network, so scripts are fixed-shape templates and witnesses are
constant-size placeholders instead of real signatures.  Sizes and ids
are nevertheless computed from genuine byte serializations so that all
fee arithmetic downstream is exact.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import NamedTuple

OP_RETURN = 0x6A
OP_PUSHDATA1 = 0x4C
OP_PUSHDATA2 = 0x4D
OP_PUSHDATA4 = 0x4E

# Spendable outputs use a fixed 23-byte script-hash style script
# (OP_HASH160 <20-byte program> OP_EQUAL).  Inputs spend with an empty
# script_sig plus a fixed placeholder witness of a 72-byte signature and
# a 33-byte public key.
SPEND_SCRIPT_LEN = 23
WITNESS_SIG_LEN = 72
WITNESS_PUBKEY_LEN = 33
PLACEHOLDER_WITNESS = (b"\x30" + b"\x01" * (WITNESS_SIG_LEN - 1),
                       b"\x02" + b"\x01" * (WITNESS_PUBKEY_LEN - 1))

COINBASE_TXID = b"\x00" * 32
COINBASE_VOUT = 0xFFFFFFFF

ADDRESS_TAG = "tns1"
_B32_ALPHABET = "qpzry9x8gf2tvdw0s3jn54khce6mua7l"
_B32_INDEX = {c: i for i, c in enumerate(_B32_ALPHABET)}


class TxFormatError(ValueError):
    """Raised when bytes cannot be parsed as a transaction."""


@dataclass(frozen=True)
class OutPoint:
    txid: bytes
    vout: int

    def __post_init__(self):
        if len(self.txid) != 32:
            raise TxFormatError("outpoint txid must be 32 bytes")
        if not 0 <= self.vout <= 0xFFFFFFFF:
            raise TxFormatError("outpoint vout out of range")

    def is_coinbase(self) -> bool:
        return self.txid == COINBASE_TXID and self.vout == COINBASE_VOUT

    def __str__(self):
        return f"{self.txid.hex()}:{self.vout}"


@dataclass(frozen=True)
class TxInput:
    prevout: OutPoint
    script_sig: bytes = b""
    sequence: int = 0xFFFFFFFF
    witness: tuple[bytes, ...] = ()


@dataclass(frozen=True)
class TxOutput:
    value: int
    script: bytes

    def __post_init__(self):
        if not 0 <= self.value < 2**64:
            raise TxFormatError("output value out of range")

    @property
    def is_data_carrier(self) -> bool:
        return len(self.script) > 0 and self.script[0] == OP_RETURN

    def carrier_data(self) -> bytes:
        """The pushed payload of a data-carrier script."""
        if not self.is_data_carrier:
            raise TxFormatError("not a data carrier output")
        return parse_data_carrier_script(self.script)


class Utxo(NamedTuple):
    """An unspent output: where it lives, what it pays, to whom."""
    outpoint: OutPoint
    value: int
    script: bytes


@dataclass(frozen=True)
class SizeProfile:
    total_size: int    # full serialization, witness included
    base_size: int     # witness-stripped serialization
    virtual_size: int  # ceil((total + 3*base) / 4)


class Transaction:
    """An immutable transaction; serialization and txid are cached."""

    __slots__ = ("version", "inputs", "outputs", "locktime",
                 "_base", "_full", "_txid")

    def __init__(self, inputs, outputs, version: int = 2, locktime: int = 0):
        inputs = tuple(inputs)
        outputs = tuple(outputs)
        if not inputs or not outputs:
            raise TxFormatError("transaction needs at least one input and one output")
        self.version = version
        self.inputs = inputs
        self.outputs = outputs
        self.locktime = locktime
        self._base = None
        self._full = None
        self._txid = None

    def __eq__(self, other):
        return (isinstance(other, Transaction)
                and self.version == other.version
                and self.inputs == other.inputs
                and self.outputs == other.outputs
                and self.locktime == other.locktime)

    def __hash__(self):
        return hash((self.version, self.inputs, self.outputs, self.locktime))

    def __repr__(self):
        return (f"Transaction(txid={self.txid().hex()[:16]}…, "
                f"{len(self.inputs)} in, {len(self.outputs)} out)")

    def has_witness(self) -> bool:
        return any(txin.witness for txin in self.inputs)

    def serialize(self, include_witness: bool = True) -> bytes:
        if include_witness and self.has_witness():
            if self._full is None:
                self._full = _serialize(self, True)
            return self._full
        if self._base is None:
            self._base = _serialize(self, False)
        return self._base

    def txid(self) -> bytes:
        """Double SHA-256 of the base (witness-stripped) serialization."""
        if self._txid is None:
            base = self.serialize(include_witness=False)
            self._txid = hashlib.sha256(hashlib.sha256(base).digest()).digest()
        return self._txid

    def size_profile(self) -> SizeProfile:
        return size_profile(self)

    def carrier_outputs(self) -> list[TxOutput]:
        return [o for o in self.outputs if o.is_data_carrier]

    def is_coinbase(self) -> bool:
        return len(self.inputs) == 1 and self.inputs[0].prevout.is_coinbase()


def encode_varint(n: int) -> bytes:
    if n < 0:
        raise TxFormatError("varint must be non-negative")
    if n < 0xFD:
        return struct.pack("<B", n)
    if n <= 0xFFFF:
        return b"\xfd" + struct.pack("<H", n)
    if n <= 0xFFFFFFFF:
        return b"\xfe" + struct.pack("<I", n)
    return b"\xff" + struct.pack("<Q", n)


def _serialize(tx: Transaction, include_witness: bool) -> bytes:
    use_witness = include_witness and tx.has_witness()
    parts = [struct.pack("<i", tx.version)]
    if use_witness:
        parts.append(b"\x00\x01")  # segwit marker + flag
    parts.append(encode_varint(len(tx.inputs)))
    for txin in tx.inputs:
        parts.append(txin.prevout.txid)
        parts.append(struct.pack("<I", txin.prevout.vout))
        parts.append(encode_varint(len(txin.script_sig)))
        parts.append(txin.script_sig)
        parts.append(struct.pack("<I", txin.sequence))
    parts.append(encode_varint(len(tx.outputs)))
    for txout in tx.outputs:
        parts.append(struct.pack("<Q", txout.value))
        parts.append(encode_varint(len(txout.script)))
        parts.append(txout.script)
    if use_witness:
        for txin in tx.inputs:
            parts.append(encode_varint(len(txin.witness)))
            for item in txin.witness:
                parts.append(encode_varint(len(item)))
                parts.append(item)
    parts.append(struct.pack("<I", tx.locktime))
    return b"".join(parts)


def serialize(tx: Transaction, include_witness: bool = True) -> bytes:
    return tx.serialize(include_witness)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TxFormatError("truncated transaction")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def varint(self) -> int:
        first = self.take(1)[0]
        if first < 0xFD:
            return first
        width = {0xFD: 2, 0xFE: 4, 0xFF: 8}[first]
        return int.from_bytes(self.take(width), "little")

    def done(self) -> bool:
        return self.pos == len(self.data)


def deserialize(data: bytes) -> Transaction:
    """Inverse of serialize(); accepts both base and witness layouts."""
    r = _Reader(data)
    version = struct.unpack("<i", r.take(4))[0]
    n_in = r.varint()
    segwit = False
    if n_in == 0:
        # marker byte: a witness serialization follows
        flag = r.take(1)[0]
        if flag != 1:
            raise TxFormatError("bad segwit flag")
        segwit = True
        n_in = r.varint()
    if n_in == 0:
        raise TxFormatError("transaction needs at least one input")
    raw_inputs = []
    for _ in range(n_in):
        txid = r.take(32)
        vout = struct.unpack("<I", r.take(4))[0]
        script_sig = r.take(r.varint())
        sequence = struct.unpack("<I", r.take(4))[0]
        raw_inputs.append((OutPoint(txid, vout), script_sig, sequence))
    outputs = []
    for _ in range(r.varint()):
        value = struct.unpack("<Q", r.take(8))[0]
        script = r.take(r.varint())
        outputs.append(TxOutput(value, script))
    witnesses: list[tuple[bytes, ...]] = [()] * n_in
    if segwit:
        for i in range(n_in):
            witnesses[i] = tuple(r.take(r.varint()) for _ in range(r.varint()))
    locktime = struct.unpack("<I", r.take(4))[0]
    if not r.done():
        raise TxFormatError("trailing bytes after transaction")
    inputs = [TxInput(p, s, q, w) for (p, s, q), w in zip(raw_inputs, witnesses)]
    return Transaction(inputs, outputs, version=version, locktime=locktime)


def size_profile(tx: Transaction) -> SizeProfile:
    w = len(tx.serialize(include_witness=True))
    s = len(tx.serialize(include_witness=False))
    v = virtual_size(w, s)
    return SizeProfile(total_size=w, base_size=s, virtual_size=v)


def virtual_size(total_size: int, base_size: int) -> int:
    """ceil((w + 3s) / 4); equals w for transactions without witness data."""
    return -((total_size + 3 * base_size) // -4)


def txid(tx: Transaction) -> bytes:
    return tx.txid()


def build_data_carrier_script(data: bytes) -> bytes:
    """OP_RETURN followed by the minimal push encoding of ``data``."""
    n = len(data)
    if n <= 75:
        push = struct.pack("<B", n)
    elif n <= 0xFF:
        push = struct.pack("<BB", OP_PUSHDATA1, n)
    elif n <= 0xFFFF:
        push = struct.pack("<B", OP_PUSHDATA2) + struct.pack("<H", n)
    else:
        push = struct.pack("<B", OP_PUSHDATA4) + struct.pack("<I", n)
    return bytes([OP_RETURN]) + push + data


def parse_data_carrier_script(script: bytes) -> bytes:
    if not script or script[0] != OP_RETURN:
        raise TxFormatError("script does not start with the data-carrier opcode")
    body = script[1:]
    if not body:
        raise TxFormatError("data carrier script has no push")
    op = body[0]
    if op <= 75:
        n, off = op, 1
    elif op == OP_PUSHDATA1:
        if len(body) < 2:
            raise TxFormatError("truncated push")
        n, off = body[1], 2
    elif op == OP_PUSHDATA2:
        if len(body) < 3:
            raise TxFormatError("truncated push")
        n, off = struct.unpack_from("<H", body, 1)[0], 3
    elif op == OP_PUSHDATA4:
        if len(body) < 5:
            raise TxFormatError("truncated push")
        n, off = struct.unpack_from("<I", body, 1)[0], 5
    else:
        raise TxFormatError("unsupported push opcode in data carrier")
    data = body[off:off + n]
    if len(data) != n or len(body) != off + n:
        raise TxFormatError("push length mismatch in data carrier")
    return data


def spend_script(program: bytes) -> bytes:
    """Fixed 23-byte script-hash style locking script for a 20-byte program."""
    if len(program) != 20:
        raise TxFormatError("program must be 20 bytes")
    return b"\xa9\x14" + program + b"\x87"


def script_program(script: bytes) -> bytes:
    if len(script) != SPEND_SCRIPT_LEN or script[:2] != b"\xa9\x14" or script[-1] != 0x87:
        raise TxFormatError("not a spendable template script")
    return script[2:22]


def make_input(prevout: OutPoint) -> TxInput:
    """Standard protocol input: empty script_sig, placeholder witness."""
    return TxInput(prevout, witness=PLACEHOLDER_WITNESS)


def program_to_address(program: bytes) -> str:
    """36-character address string: 4-char tag + 32-char base32 data part."""
    if len(program) != 20:
        raise TxFormatError("program must be 20 bytes")
    bits = int.from_bytes(program, "big")
    chars = []
    for shift in range(155, -1, -5):
        chars.append(_B32_ALPHABET[(bits >> shift) & 31])
    return ADDRESS_TAG + "".join(chars)


def address_to_program(address: str) -> bytes:
    if len(address) != 36 or not address.startswith(ADDRESS_TAG):
        raise TxFormatError(f"bad address: {address!r}")
    bits = 0
    for c in address[len(ADDRESS_TAG):]:
        if c not in _B32_INDEX:
            raise TxFormatError(f"bad address character: {c!r}")
        bits = (bits << 5) | _B32_INDEX[c]
    return bits.to_bytes(20, "big")


def address_to_script(address: str) -> bytes:
    return spend_script(address_to_program(address))


def script_to_address(script: bytes) -> str:
    return program_to_address(script_program(script))


def tx_to_hex(tx: Transaction) -> str:
    return tx.serialize(include_witness=True).hex()


def tx_from_hex(text: str) -> Transaction:
    try:
        raw = bytes.fromhex(text.strip())
    except ValueError as exc:
        raise TxFormatError(f"invalid hex: {exc}") from exc
    return deserialize(raw)


def coinbase_transaction(tag: bytes, outputs: list[TxOutput]) -> Transaction:
    """Issuance transaction (genesis / faucet / miner credit).

    The tag keeps txids unique across issuance events.
    """
    txin = TxInput(OutPoint(COINBASE_TXID, COINBASE_VOUT), script_sig=tag)
    return Transaction([txin], outputs)
