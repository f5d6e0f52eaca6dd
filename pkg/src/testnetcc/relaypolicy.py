"""Relay policy: standardness rules, dust, and the minimum relay fee.

Violations are always detected against the strict (mainnet) baseline,
whatever profile is active.  The profile only decides which violations
it tolerates.  This keeps the verdict usable both as a relay gate and
as a forensic classifier: a testnet node relays an oversized data
carrier, but the verdict still names the rule it breaks.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .txmodel import Transaction, virtual_size

# strict-baseline constants used for violation detection on any profile
BASELINE_MAX_CARRIER_DATA = 80
BASELINE_DUST_LIMIT = 546
BASELINE_MAX_TX_BYTES = 100_000


class Violation(enum.Enum):
    DATA_CARRIER_SIZE = "data-carrier-size"
    MULTIPLE_DATA_CARRIERS = "multiple-data-carriers"
    REPEATED_OUTPUT = "repeated-output"
    DUST_OUTPUT = "dust-output"
    OVERSIZE_TX = "oversize-tx"
    FEE_BELOW_MINIMUM = "fee-below-minimum"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class NetworkProfile:
    name: str
    max_data_carrier_bytes: int | None   # None = unrestricted
    allow_multiple_data_carriers: bool
    allow_repeated_outputs: bool
    dust_limit: int                      # 0 = no dust rule
    max_standard_tx_bytes: int | None    # None = block bound only
    mrf_rate: int = 1                    # satoshis per virtual byte

    def permits(self, violation: Violation) -> bool:
        if violation is Violation.FEE_BELOW_MINIMUM:
            return False
        if violation is Violation.DATA_CARRIER_SIZE:
            return self.max_data_carrier_bytes is None
        if violation is Violation.MULTIPLE_DATA_CARRIERS:
            return self.allow_multiple_data_carriers
        if violation is Violation.REPEATED_OUTPUT:
            return self.allow_repeated_outputs
        if violation is Violation.DUST_OUTPUT:
            return self.dust_limit == 0
        if violation is Violation.OVERSIZE_TX:
            return self.max_standard_tx_bytes is None
        raise ValueError(f"unknown violation: {violation}")


MAINNET = NetworkProfile(
    name="mainnet",
    max_data_carrier_bytes=BASELINE_MAX_CARRIER_DATA,
    allow_multiple_data_carriers=False,
    allow_repeated_outputs=False,
    dust_limit=BASELINE_DUST_LIMIT,
    max_standard_tx_bytes=BASELINE_MAX_TX_BYTES,
)

TESTNET = NetworkProfile(
    name="testnet",
    max_data_carrier_bytes=None,
    allow_multiple_data_carriers=True,
    allow_repeated_outputs=True,
    dust_limit=0,
    max_standard_tx_bytes=None,
)

_PROFILES = {"mainnet": MAINNET, "testnet": TESTNET}


def profile_by_name(name: str) -> NetworkProfile:
    try:
        return _PROFILES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown network profile: {name!r}") from None


@dataclass(frozen=True)
class PolicyVerdict:
    standard: bool
    relayable: bool
    violations: tuple[Violation, ...]

    def __str__(self):
        tags = ",".join(str(v) for v in self.violations) or "-"
        return f"standard={self.standard} relayable={self.relayable} violations={tags}"


def mrf(tx: Transaction, profile: NetworkProfile) -> int:
    """Minimum relay fee in satoshis: virtual size times the rate."""
    return tx.size_profile().virtual_size * profile.mrf_rate


def mrf_for_sizes(total_size: int, base_size: int,
                  profile: NetworkProfile) -> int:
    return virtual_size(total_size, base_size) * profile.mrf_rate


def check(tx: Transaction, fee: int, profile: NetworkProfile) -> PolicyVerdict:
    """Exhaustively enumerate baseline violations, then apply the profile.

    fee is the caller-computed input minus output value.
    """
    violations: list[Violation] = []

    carriers = tx.carrier_outputs()
    if any(len(c.carrier_data()) > BASELINE_MAX_CARRIER_DATA for c in carriers):
        violations.append(Violation.DATA_CARRIER_SIZE)
    if len(carriers) > 1:
        violations.append(Violation.MULTIPLE_DATA_CARRIERS)

    scripts = [o.script for o in tx.outputs]
    if len(set(scripts)) < len(scripts):
        violations.append(Violation.REPEATED_OUTPUT)

    if any(not o.is_data_carrier and o.value < BASELINE_DUST_LIMIT
           for o in tx.outputs):
        violations.append(Violation.DUST_OUTPUT)

    if tx.size_profile().total_size > BASELINE_MAX_TX_BYTES:
        violations.append(Violation.OVERSIZE_TX)

    if fee < mrf(tx, profile):
        violations.append(Violation.FEE_BELOW_MINIMUM)

    return PolicyVerdict(
        standard=not violations,
        relayable=all(profile.permits(v) for v in violations),
        violations=tuple(violations),
    )
