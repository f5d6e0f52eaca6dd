"""Defender-side chain analysis.

Works from the simulator's chain-dump text (`height txid hex` lines):
flag transactions that break strict-relay rules, count spent quotas to
estimate campaign size, decrypt command traffic with captured keys, and
walk change chains.  All functions are pure over the parsed dump.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import cryptoenvelope as ce
from . import wireformat as wf
from .relaypolicy import MAINNET, Violation, check
from .txmodel import (
    OutPoint, Transaction, TxFormatError, address_to_script, tx_from_hex,
)


class ParseError(Exception):
    """Chain dump text does not parse; message carries the line number."""


class NotFound(Exception):
    """Referenced transaction is not in the dump."""


@dataclass(frozen=True)
class DumpEntry:
    height: int
    txid: bytes
    tx: Transaction


class ChainView:
    """Parsed dump with spend and output indexes."""

    def __init__(self, entries: list[DumpEntry]):
        self.entries = entries
        self.by_txid: dict[bytes, DumpEntry] = {}
        self.spender_of: dict[OutPoint, bytes] = {}
        for entry in entries:
            self.by_txid[entry.txid] = entry
            if entry.tx.is_coinbase():
                continue
            for txin in entry.tx.inputs:
                self.spender_of[txin.prevout] = entry.txid

    def output_value(self, outpoint: OutPoint) -> int | None:
        entry = self.by_txid.get(outpoint.txid)
        if entry is None or outpoint.vout >= len(entry.tx.outputs):
            return None
        return entry.tx.outputs[outpoint.vout].value

    def fee_of(self, tx: Transaction) -> int | None:
        """Fee when every input resolves inside the dump, else None."""
        if tx.is_coinbase():
            return 0
        total_in = 0
        for txin in tx.inputs:
            value = self.output_value(txin.prevout)
            if value is None:
                return None
            total_in += value
        return total_in - sum(out.value for out in tx.outputs)


def parse_dump(text: str) -> ChainView:
    entries: list[DumpEntry] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) != 3:
            raise ParseError(
                f"line {lineno}: expected 'height txid hex', "
                f"got {len(parts)} fields")
        try:
            height = int(parts[0])
        except ValueError:
            raise ParseError(f"line {lineno}: bad height {parts[0]!r}") from None
        try:
            txid = bytes.fromhex(parts[1])
            tx = tx_from_hex(parts[2])
        except (ValueError, TxFormatError) as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
        if len(txid) != 32 or tx.txid() != txid:
            raise ParseError(f"line {lineno}: txid does not match transaction")
        entries.append(DumpEntry(height, txid, tx))
    return ChainView(entries)


def _as_view(dump: str | ChainView) -> ChainView:
    return dump if isinstance(dump, ChainView) else parse_dump(dump)


# ---------------------------------------------------------------------------
# detection


@dataclass(frozen=True)
class Finding:
    height: int
    txid: bytes
    violations: tuple[Violation, ...]
    suspected_kind: str      # shape-classifier verdict or "unknown"
    confidence: str          # "high" when a strict-relay rule is broken

    @property
    def flagged(self) -> bool:
        return bool(self.violations)


def scan(dump: str | ChainView) -> list[Finding]:
    """Classify every transaction under the strict (Mainnet) lens.

    A transaction breaking at least one strict-relay rule is flagged
    with high confidence; standard-looking ones only carry the shape
    heuristic, marked low confidence.
    """
    view = _as_view(dump)
    findings = []
    for entry in view.entries:
        if entry.tx.is_coinbase():
            findings.append(Finding(entry.height, entry.txid, (),
                                    "issuance", "low"))
            continue
        fee = view.fee_of(entry.tx)
        if fee is None:
            # inputs outside the dump: fee rule not checkable
            verdict = check(entry.tx, 10 ** 12, MAINNET)
        else:
            verdict = check(entry.tx, fee, MAINNET)
        kind = wf.classify(entry.tx)
        findings.append(Finding(
            entry.height, entry.txid, verdict.violations,
            str(kind) if kind is not None else "unknown",
            "high" if verdict.violations else "low"))
    return findings


def estimate_botnet_size(dump: str | ChainView,
                         shared_address: str | bytes) -> int:
    """Count confirmed spends of quota-shaped outputs of the shared address.

    Every registration burns one quota, so this bounds the campaign
    size from public data alone.  Adversarial or decoy quota spends
    inflate the count; the estimator cannot tell them apart.
    """
    view = _as_view(dump)
    script = (address_to_script(shared_address)
              if isinstance(shared_address, str) else shared_address)
    spent = 0
    for entry in view.entries:
        if wf.classify(entry.tx) is not wf.TxKind.QUOTA_BATCH:
            continue
        for vout, out in enumerate(entry.tx.outputs):
            if out.script == script and \
                    OutPoint(entry.txid, vout) in view.spender_of:
                spent += 1
    return spent


# ---------------------------------------------------------------------------
# decryption with captured keys


def decrypt_downlink(dump: str | ChainView, botnet_key: ce.BotnetKey,
                     botmaster_public: ce.RsaPublicKey
                     ) -> list[tuple[bytes, wf.Command]]:
    """Recover the operator's command log from carrier outputs.

    Tries each single-carrier transaction as a signed, then an
    unsigned, command envelope; anything that fails to open (uplinks,
    registrations, foreign data) is skipped.  Results keep chain order.
    """
    view = _as_view(dump)
    recovered: list[tuple[bytes, wf.Command]] = []
    for entry in view.entries:
        carriers = entry.tx.carrier_outputs()
        if len(carriers) != 1:
            continue
        wire = carriers[0].carrier_data()
        command = None
        for signed in (True, False):
            try:
                env = ce.parse_symmetric_wire(wire, ce.EnvelopeForm.DOWNLINK,
                                              signed=signed)
                command = wf.decode_command(env, botnet_key, botmaster_public,
                                            require_signature=signed)
                break
            except (ce.EnvelopeError, wf.WireError):
                continue
        if command is not None:
            recovered.append((entry.txid, command))
    return recovered


# ---------------------------------------------------------------------------
# flow tracing


def trace_change_chain(dump: str | ChainView,
                       start_txid: bytes | str) -> list[bytes]:
    """Follow the chain of change outputs starting at one transaction.

    Each hop takes the final non-carrier output (the change slot of
    every protocol template) and moves to whatever spends it; the walk
    ends at the first unspent change output.
    """
    view = _as_view(dump)
    txid = bytes.fromhex(start_txid) if isinstance(start_txid, str) \
        else start_txid
    if txid not in view.by_txid:
        raise NotFound(f"transaction {txid.hex()} is not in the dump")
    chain = [txid]
    seen = {txid}
    while True:
        tx = view.by_txid[chain[-1]].tx
        change_vout = None
        for vout in range(len(tx.outputs) - 1, -1, -1):
            if not tx.outputs[vout].is_data_carrier:
                change_vout = vout
                break
        if change_vout is None:
            return chain
        spender = view.spender_of.get(OutPoint(chain[-1], change_vout))
        if spender is None or spender in seen:
            return chain
        chain.append(spender)
        seen.add(spender)
