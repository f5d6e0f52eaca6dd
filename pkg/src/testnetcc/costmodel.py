"""Closed-form fee schedule and campaign cost arithmetic.

Every figure here is computed by building the actual transaction
template through the wire-format builders and taking its minimum relay
fee; there are no hand-entered fee constants.  Campaign helpers accept
pinned per-transaction costs so projections can be cross-checked
against an externally published fee schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import wireformat as wf
from .relaypolicy import NetworkProfile, TESTNET
from .txmodel import OutPoint, Utxo, spend_script

# Carrier byte sizes the fee-schedule rows are quoted at.  The fixed
# rows (hardcoded, script command) carry block-padded envelopes; the
# range rows are quoted at iv + raw payload bytes, the convention the
# published schedule uses, so endpoint fees stay comparable even though
# live envelopes round the body up to whole cipher blocks.
REGISTRATION_CARRIER = 256
HARDCODED_CARRIER = 48
SCRIPT_COMMAND_CARRIER = 96
SHELL_CARRIER_RANGE = (17, 16 + wf.MAX_SHELL_BYTES)
SCRIPT_TX_CARRIER_RANGE = (16 + wf.MAX_SHELL_BYTES + 1, wf.MAX_PAYLOAD_BYTES)
RESPONSE_CARRIER_RANGE = (17, wf.MAX_PAYLOAD_BYTES)

_PROBE_VALUE = 1_000_000_000
_PROBE_SOURCE = Utxo(OutPoint(b"\x11" * 32, 0), _PROBE_VALUE,
                     spend_script(b"\x22" * 20))
_PROBE_DEST = spend_script(b"\x33" * 20)
_PROBE_CHANGE = spend_script(b"\x44" * 20)

DEFAULT_FUNDING_PER_BOT = 10_000


class CostError(Exception):
    """Nonsensical cost query (negative counts or budgets)."""


@dataclass(frozen=True)
class FeeRow:
    """One message kind: carrier size span and the fee span it costs."""
    kind: str
    carrier_low: int | None     # None: the template carries no data output
    carrier_high: int | None
    fee_low: int
    fee_high: int

    @property
    def is_range(self) -> bool:
        return self.carrier_low != self.carrier_high


@dataclass(frozen=True)
class FeeTable:
    profile_name: str
    rows: tuple[FeeRow, ...]

    def row(self, kind: str) -> FeeRow:
        for row in self.rows:
            if row.kind == kind:
                return row
        raise KeyError(kind)


def quota_batch_fee(profile: NetworkProfile = TESTNET) -> int:
    built = wf.build_quota_batch(_PROBE_SOURCE, _PROBE_DEST, _PROBE_CHANGE,
                                 profile)
    return built.fee


def funding_fee(amount: int = DEFAULT_FUNDING_PER_BOT,
                profile: NetworkProfile = TESTNET) -> int:
    built = wf.build_funding(_PROBE_SOURCE, amount, _PROBE_DEST,
                             _PROBE_CHANGE, profile)
    return built.fee


def fee_table(profile: NetworkProfile = TESTNET) -> FeeTable:
    def span(kind: str, low: int, high: int) -> FeeRow:
        return FeeRow(kind, low, high, wf.message_fee(low, profile),
                      wf.message_fee(high, profile))

    def point(kind: str, carrier: int, fee: int) -> FeeRow:
        return FeeRow(kind, carrier, carrier, fee, fee)

    batch = quota_batch_fee(profile)
    rows = (
        point("quota-batch", None, batch),
        point("registration", REGISTRATION_CARRIER,
              wf.registration_fee(profile)),
        point("funding", None, funding_fee(profile=profile)),
        point("hardcoded-command", HARDCODED_CARRIER,
              wf.message_fee(HARDCODED_CARRIER, profile)),
        span("shell-command", *SHELL_CARRIER_RANGE),
        point("script-command", SCRIPT_COMMAND_CARRIER,
              wf.message_fee(SCRIPT_COMMAND_CARRIER, profile)),
        span("script-transaction", *SCRIPT_TX_CARRIER_RANGE),
        span("response", *RESPONSE_CARRIER_RANGE),
    )
    return FeeTable(profile_name=profile.name, rows=rows)


def campaign_registration_cost(n_bots: int,
                               profile: NetworkProfile = TESTNET, *,
                               batch_fee: int | None = None,
                               quota_value: int | None = None) -> int:
    """Quota batches plus the quotas the bots will burn registering.

    Batch change returns to the operator wallet, so it is not a cost;
    only batch fees and the quota values themselves leave the balance.
    """
    if n_bots < 0:
        raise CostError("bot count cannot be negative")
    if n_bots == 0:
        return 0
    if batch_fee is None:
        batch_fee = quota_batch_fee(profile)
    if quota_value is None:
        quota_value = wf.registration_fee(profile)
    batches = math.ceil(n_bots / wf.QUOTAS_PER_BATCH)
    return batches * batch_fee + n_bots * quota_value


def campaign_funding_cost(n_bots: int,
                          per_bot_sats: int = DEFAULT_FUNDING_PER_BOT,
                          profile: NetworkProfile = TESTNET, *,
                          fee: int | None = None) -> int:
    """Initial bot funding: each bot costs its stipend plus one tx fee."""
    if n_bots < 0:
        raise CostError("bot count cannot be negative")
    if per_bot_sats <= 0:
        raise CostError("per-bot funding must be positive")
    if n_bots == 0:
        return 0
    if fee is None:
        fee = funding_fee(per_bot_sats, profile)
    return n_bots * (per_bot_sats + fee)


def daily_throughput(budget_sats: int) -> int:
    """Command-and-control bytes per day a fee budget buys.

    At the minimum relay rate one satoshi moves one virtual byte, so
    the conversion is the identity.
    """
    if budget_sats < 0:
        raise CostError("budget cannot be negative")
    return budget_sats
