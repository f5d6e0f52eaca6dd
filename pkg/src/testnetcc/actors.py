"""Operator and bot state machines on top of the simulated network.

The operator (botmaster) keeps the shared account stocked with quotas,
converts observed quota spends into registry entries and funding
payments, and issues commands.  Bots register by burning one quota into
a data carrier, wait for funding, then execute commands and send
responses, rotating to a fresh change address with every message.

Simulation behavior for a command (how long it runs, how many output
bytes it produces, whether it repeats) travels out of band in a shared
behavior table, standing in for the real-world effect of execution.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from random import Random

from . import cryptoenvelope as ce
from . import wireformat as wf
from .netsim import RejectReason, World
from .relaypolicy import mrf
from .txmodel import (
    OutPoint, Transaction, TxFormatError, TxOutput, Utxo, address_to_script,
    make_input, script_to_address, spend_script,
)

DEFAULT_INITIAL_FUNDING = 10_000
DEFAULT_REGISTRATION_TIMEOUT = 600.0
DEFAULT_POLL_INTERVAL = 60.0
DEFAULT_QUOTA_LOW_WATER = 10
DEFAULT_QUOTA_TARGET = 20
FUNDING_SAFETY_FACTOR = 1.5

_HEX_CHARS = "0123456789abcdef"


class ActorError(Exception):
    """Actor-level protocol failure."""


class NoQuotaAvailable(ActorError):
    """No unspent quota is visible right now."""


class NotFound(ActorError):
    """Referenced transaction is not retrievable."""


class BotPhase(enum.Enum):
    UNREGISTERED = "unregistered"
    AWAITING_FUNDING = "awaiting-funding"
    ACTIVE = "active"


@dataclass
class SimCommandSpec:
    """What executing a command should look like in simulation."""
    command: wf.Command
    output_size: int = 0          # synthetic response payload bytes; 0 = none
    duration: float = 1.0         # seconds from receipt to effect/response
    repeat_interval: float | None = None
    repeat_iterations: int | None = None   # None with an interval = indefinite

    def __post_init__(self):
        if not 0 <= self.output_size <= wf.MAX_PAYLOAD_BYTES:
            raise ActorError("output size outside the payload budget")


class FeeLedger:
    """Cumulative satoshis by category, with counts."""

    def __init__(self):
        self.totals: dict[str, int] = {}
        self.counts: dict[str, int] = {}

    def record(self, category: str, sats: int) -> None:
        self.totals[category] = self.totals.get(category, 0) + sats
        self.counts[category] = self.counts.get(category, 0) + 1

    def total(self, category: str | None = None) -> int:
        if category is None:
            return sum(self.totals.values())
        return self.totals.get(category, 0)

    def count(self, category: str) -> int:
        return self.counts.get(category, 0)

    def rows(self) -> list[tuple[str, int, int]]:
        return [(cat, self.counts[cat], self.totals[cat])
                for cat in sorted(self.totals)]


class Wallet:
    """Owned scripts plus optimistic UTXO tracking.

    Own transactions debit and credit immediately; network notifications
    re-credit idempotently (spent outpoints stay spent).
    """

    def __init__(self, rng: Random, on_new_script=None):
        self.rng = rng
        self.scripts: list[bytes] = []
        self._script_set: set[bytes] = set()
        self.utxos: dict[OutPoint, Utxo] = {}
        self._spent: set[OutPoint] = set()
        self._on_new_script = on_new_script

    def new_script(self) -> bytes:
        program = self.rng.getrandbits(160).to_bytes(20, "big")
        script = spend_script(program)
        self.scripts.append(script)
        self._script_set.add(script)
        if self._on_new_script is not None:
            self._on_new_script(script)
        return script

    def owns(self, script: bytes) -> bool:
        return script in self._script_set

    def credit(self, utxo: Utxo) -> bool:
        if utxo.outpoint in self._spent or utxo.outpoint in self.utxos:
            return False
        self.utxos[utxo.outpoint] = utxo
        return True

    def debit(self, outpoint: OutPoint) -> None:
        self.utxos.pop(outpoint, None)
        self._spent.add(outpoint)

    def credit_transaction(self, tx: Transaction) -> int:
        """Pick up every output of tx that pays one of our scripts."""
        gained = 0
        txid = tx.txid()
        for vout, out in enumerate(tx.outputs):
            if not out.is_data_carrier and self.owns(out.script):
                if self.credit(Utxo(OutPoint(txid, vout), out.value, out.script)):
                    gained += out.value
        return gained

    def balance(self) -> int:
        return sum(u.value for u in self.utxos.values())

    def spendable(self) -> list[Utxo]:
        found = list(self.utxos.values())
        found.sort(key=lambda u: (-u.value, u.outpoint.txid, u.outpoint.vout))
        return found

    def select(self, need: int) -> Utxo | None:
        for utxo in self.spendable():
            if utxo.value >= need:
                return utxo
        return None


@dataclass
class RegistryEntry:
    bot_key: ce.BotKey
    current_script: bytes
    balance_estimate: int = 0


class Botmaster:
    """Shared-account custodian, registrar, and command issuer."""

    def __init__(self, world: World, rng: Random, ledger: FeeLedger,
                 behaviors: dict[bytes, SimCommandSpec],
                 node_id: str = "botmaster",
                 initial_funding: int = DEFAULT_INITIAL_FUNDING,
                 quota_low_water: int = DEFAULT_QUOTA_LOW_WATER,
                 quota_target: int = DEFAULT_QUOTA_TARGET,
                 sign_downlinks: bool = True,
                 keys: ce.BotmasterKeys | None = None,
                 botnet_key: ce.BotnetKey | None = None):
        self.world = world
        self.rng = rng
        self.ledger = ledger
        self.behaviors = behaviors
        self.node_id = node_id
        self.initial_funding = initial_funding
        self.quota_low_water = quota_low_water
        self.quota_target = quota_target
        self.sign_downlinks = sign_downlinks

        world.add_spv_node(node_id, listener=self)
        self.wallet = Wallet(rng, on_new_script=lambda s:
                             world.watch_script(node_id, s))
        self.keys = keys or ce.BotmasterKeys.generate(rng)
        self.botnet_key = botnet_key or ce.BotnetKey.generate(rng)
        shared_program = rng.getrandbits(160).to_bytes(20, "big")
        self.shared_script = spend_script(shared_program)
        world.watch_script(node_id, self.shared_script)

        self.registry: dict[bytes, RegistryEntry] = {}
        self.quota_pool: dict[OutPoint, Utxo] = {}
        self.command_log: list[wf.Command] = []
        self.published_scripts: dict[bytes, int] = {}
        self.own_txids: set[bytes] = set()
        self._seen_txids: set[bytes] = set()
        self.funding_sent = 0

    # -- lifecycle ----------------------------------------------------------

    def sync_from_chain(self) -> None:
        """Pick up pre-seeded funds (genesis grants) into the wallet."""
        for outpoint, out in self.world.chain.utxo.items():
            if self.wallet.owns(out.script):
                self.wallet.credit(Utxo(outpoint, out.value, out.script))

    def bootstrap(self) -> None:
        self.sync_from_chain()
        self.replenish_quotas()

    def harvest_faucets(self, identity: str | None = None,
                        rotate_identities: bool = False) -> int:
        """Request a grant from every faucet; returns satoshis pledged."""
        pledged = 0
        for index in range(self.world.faucet_count):
            who = (f"{self.node_id}-vpn{self.rng.getrandbits(32):08x}"
                   if rotate_identities else identity or self.node_id)
            amount = self.world.faucet_grant(
                index, who, self.wallet.new_script(), self.rng)
            if amount is not None:
                pledged += amount
        self.world.log(self.node_id, "faucet-harvest", f"pledged={pledged}")
        return pledged

    # -- quota management -----------------------------------------------------

    def replenish_quotas(self) -> int:
        """Top the optimistic pool back up to the target; returns batches sent."""
        deficit = self.quota_target - len(self.quota_pool)
        if deficit <= 0:
            return 0
        batches = math.ceil(deficit / wf.QUOTAS_PER_BATCH)
        quota_value = wf.registration_fee(self.world.profile)
        sent = 0
        for _ in range(batches):
            # rough upper bound on the batch cost, fee settled by the builder
            need = wf.QUOTAS_PER_BATCH * quota_value + 1_000
            source = self.wallet.select(need)
            if source is None:
                self.world.log(self.node_id, "replenish-blocked",
                               f"balance={self.wallet.balance()} need={need}")
                break
            built = wf.build_quota_batch(source, self.shared_script,
                                         self.wallet.new_script(),
                                         self.world.profile)
            self._send_own(built, "quota-batch")
            txid = built.tx.txid()
            for vout in range(wf.QUOTAS_PER_BATCH):
                outpoint = OutPoint(txid, vout)
                self.quota_pool[outpoint] = Utxo(outpoint, quota_value,
                                                 self.shared_script)
            sent += 1
        if sent:
            self.world.log(self.node_id, "replenish",
                           f"batches={sent} pool={len(self.quota_pool)}")
        return sent

    def _send_own(self, built: wf.BuiltTx, category: str) -> None:
        self.wallet.debit(built.tx.inputs[0].prevout)
        self.wallet.credit_transaction(built.tx)
        self.own_txids.add(built.tx.txid())
        self._seen_txids.add(built.tx.txid())
        self.ledger.record(category, built.fee)
        self.world.submit(built.tx, self.node_id)

    # -- registration handling ---------------------------------------------------

    def on_tx_seen(self, tx: Transaction, height: int | None) -> None:
        txid = tx.txid()
        if txid in self.own_txids:
            return
        first_sight = txid not in self._seen_txids
        self._seen_txids.add(txid)
        self.wallet.credit_transaction(tx)
        if not first_sight:
            return
        consumed = [txin.prevout for txin in tx.inputs
                    if txin.prevout in self.quota_pool]
        for outpoint in consumed:
            del self.quota_pool[outpoint]
            self._handle_quota_spend(tx)
        if consumed and len(self.quota_pool) < self.quota_low_water:
            self.replenish_quotas()
        if not consumed:
            self._track_bot_message(tx)

    def _handle_quota_spend(self, tx: Transaction) -> None:
        if wf.classify(tx) is not wf.TxKind.REGISTRATION:
            self.world.log(self.node_id, "foreign-quota-spend",
                           f"txid={tx.txid().hex()}")
            return
        try:
            wire = tx.outputs[0].carrier_data()
            env = ce.parse_symmetric_wire(wire, ce.EnvelopeForm.REGISTRATION)
            address, bot_key = ce.registration_open(env, self.keys)
            script = address_to_script(address)
        except (ce.EnvelopeError, TxFormatError):
            self.world.log(self.node_id, "foreign-quota-spend",
                           f"txid={tx.txid().hex()}")
            return
        if script in self.registry:
            self.world.log(self.node_id, "duplicate-registration",
                           f"address={address}")
            return
        self.registry[script] = RegistryEntry(bot_key, script)
        self.world.watch_script(self.node_id, script)
        self.world.log(self.node_id, "registered-bot",
                       f"address={address} bots={len(self.registry)}")
        self._fund(script, self.initial_funding)

    def _fund(self, dest_script: bytes, amount: int) -> bool:
        source = self.wallet.select(amount + 1_000)
        if source is None:
            self.world.log(self.node_id, "funding-blocked",
                           f"balance={self.wallet.balance()}")
            return False
        built = wf.build_funding(source, amount, dest_script,
                                 self.wallet.new_script(), self.world.profile)
        self._send_own(built, "funding")
        self.funding_sent += amount
        entry = self.registry.get(dest_script)
        if entry is not None:
            entry.balance_estimate += amount
        self.world.log(self.node_id, "funding-sent",
                       f"address={script_to_address(dest_script)} sats={amount}")
        return True

    def _track_bot_message(self, tx: Transaction) -> None:
        """Follow a bot's change to its new address and balance."""
        carriers = tx.carrier_outputs()
        if len(carriers) != 1 or len(tx.outputs) != 2:
            return
        for txin in tx.inputs:
            parent = self.world.spv_fetch_tx(self.node_id, txin.prevout.txid)
            if parent is None:
                continue
            source_script = parent.outputs[txin.prevout.vout].script
            entry = self.registry.get(source_script)
            if entry is None or entry.current_script != source_script:
                continue
            change = next(o for o in tx.outputs if not o.is_data_carrier)
            del self.registry[source_script]
            self.registry[change.script] = RegistryEntry(
                entry.bot_key, change.script, change.value)
            self.world.watch_script(self.node_id, change.script)

    # -- commands --------------------------------------------------------------

    def _response_cost(self, spec: SimCommandSpec) -> int:
        if spec.output_size == 0:
            return 0
        per_response = wf.message_fee(
            ce.sealed_wire_size(spec.output_size), self.world.profile)
        iterations = spec.repeat_iterations or 1
        return math.ceil(per_response * iterations * FUNDING_SAFETY_FACTOR)

    def issue_command(self, spec: SimCommandSpec) -> Transaction:
        cmd = spec.command
        if cmd.kind is wf.CommandKind.SCRIPT and \
                cmd.stored_txid not in self.published_scripts:
            raise ActorError("script command references an unpublished txid")
        self.behaviors[cmd.plaintext()] = spec
        required = self._response_cost(spec)
        for script, entry in list(self.registry.items()):
            if entry.balance_estimate < required:
                top_up = max(self.initial_funding,
                             required - entry.balance_estimate)
                self._fund(script, top_up)
        env = wf.encode_command(cmd, self.botnet_key, self.keys, self.rng,
                                sign=self.sign_downlinks)
        source = self.wallet.select(len(env.wire()) + 2_000)
        if source is None:
            raise ActorError("operator wallet cannot cover the command fee")
        built = wf.build_message(source, env.wire(), self.wallet.new_script(),
                                 self.world.profile)
        self._send_own(built, "command")
        self.command_log.append(cmd)
        self.world.log(self.node_id, "command-issued",
                       f"txid={built.tx.txid().hex()} cmd={cmd.describe()!r}")
        return built.tx

    def publish_script(self, code: bytes) -> tuple[Transaction, bytes]:
        if len(code) > wf.MAX_PAYLOAD_BYTES:
            raise ce.PayloadTooLarge(
                f"script of {len(code)} bytes exceeds the payload budget")
        storage_key = ce.SymmetricKey.generate(self.rng)
        iv = self.rng.getrandbits(8 * ce.BLOCK_LEN).to_bytes(ce.BLOCK_LEN, "big")
        sealed = iv + ce.symmetric_seal(code, storage_key, iv)
        source = self.wallet.select(len(sealed) + 2_000)
        if source is None:
            raise ActorError("operator wallet cannot cover the script storage fee")
        built = wf.build_script_storage(source, sealed, self.wallet.new_script(),
                                        self.world.profile)
        self._send_own(built, "script-storage")
        txid = built.tx.txid()
        self.published_scripts[txid] = len(code)
        self.world.log(self.node_id, "script-published",
                       f"txid={txid.hex()} carrier={len(sealed)}")
        return built.tx, storage_key.data

    def issue_script_command(self, code: bytes, spec_fields: dict) -> SimCommandSpec:
        """Publish code, then issue the pointing command; returns the spec."""
        tx, key = self.publish_script(code)
        spec = SimCommandSpec(command=wf.Command.script(tx.txid(), key),
                              **spec_fields)
        self.issue_command(spec)
        return spec

    # decoy hook (quota spends at a random rate would go here); the
    # estimator's blindness to decoys is a documented limitation
    decoy_spend_hook = None


class Bot:
    """One infected machine: registers, executes, responds."""

    def __init__(self, bot_id: str, world: World, rng: Random,
                 ledger: FeeLedger, behaviors: dict[bytes, SimCommandSpec],
                 shared_script: bytes, botnet_key: ce.BotnetKey,
                 botmaster_public: ce.RsaPublicKey,
                 registration_timeout: float = DEFAULT_REGISTRATION_TIMEOUT,
                 poll_interval: float = DEFAULT_POLL_INTERVAL,
                 sign_required: bool = True):
        self.bot_id = bot_id
        self.world = world
        self.rng = rng
        self.ledger = ledger
        self.behaviors = behaviors
        self.shared_script = shared_script
        self.botnet_key = botnet_key
        self.botmaster_public = botmaster_public
        self.registration_timeout = registration_timeout
        self.poll_interval = poll_interval
        self.sign_required = sign_required

        world.add_spv_node(bot_id, listener=self)
        world.watch_carriers(bot_id)
        self.wallet = Wallet(rng, on_new_script=lambda s:
                             world.watch_script(bot_id, s))
        self.bot_key = ce.BotKey.generate(rng)
        self.phase = BotPhase.UNREGISTERED
        self.quota_value = wf.registration_fee(world.profile)

        self._generation = 0
        self._job_generation = 0
        self._tried: set[OutPoint] = set()
        self._reg_outpoint: OutPoint | None = None
        self._reg_txid: bytes | None = None
        self.current_script: bytes | None = None
        self._used_sources: set[bytes] = set()
        self.own_txids: set[bytes] = set()
        self._processed: set[bytes] = set()
        self._pending_responses: list[tuple[int, bytes]] = []
        self.executed: list[wf.Command] = []

    # -- registration -------------------------------------------------------

    def begin(self) -> None:
        self.world.log(self.bot_id, "join", f"phase={self.phase.value}")
        self.try_register()

    def try_register(self) -> None:
        if self.phase is BotPhase.ACTIVE:
            return
        self.phase = BotPhase.UNREGISTERED
        self._generation += 1
        generation = self._generation
        quotas = [u for u in self.world.spv_query_utxos(self.bot_id,
                                                        self.shared_script)
                  if u.value == self.quota_value
                  and u.outpoint not in self._tried]
        if not quotas:
            self.world.log(self.bot_id, "quota-wait", "none visible")
            self.world.schedule(self.poll_interval,
                                lambda: self._poll(generation))
            return
        quota = self.rng.choice(quotas)
        self._tried.add(quota.outpoint)
        address_script = self.wallet.new_script()
        address = script_to_address(address_script)
        env = ce.registration_seal(address.encode("ascii"), self.bot_key,
                                   self.botmaster_public, self.rng)
        built = wf.build_registration(quota, env.wire(), self.world.profile)
        self._reg_outpoint = quota.outpoint
        self._reg_txid = built.tx.txid()
        self.own_txids.add(self._reg_txid)
        self.phase = BotPhase.AWAITING_FUNDING
        self.world.watch_outpoint(self.bot_id, quota.outpoint)
        self.world.submit(built.tx, self.bot_id)
        self.ledger.record("registration", built.fee)
        self.world.log(self.bot_id, "register-attempt",
                       f"quota={quota.outpoint} txid={self._reg_txid.hex()}")
        self.world.schedule(self.registration_timeout,
                            lambda: self._registration_timeout(generation))

    def _poll(self, generation: int) -> None:
        if generation == self._generation and self.phase is not BotPhase.ACTIVE:
            self.try_register()

    def _registration_timeout(self, generation: int) -> None:
        if generation != self._generation or \
                self.phase is not BotPhase.AWAITING_FUNDING:
            return
        self.world.log(self.bot_id, "registration-timeout",
                       f"quota={self._reg_outpoint}")
        self._abandon_attempt()

    def _abandon_attempt(self) -> None:
        if self._reg_outpoint is not None:
            self.world.unwatch_outpoint(self.bot_id, self._reg_outpoint)
        self._reg_outpoint = None
        self._reg_txid = None
        self.try_register()

    def on_conflict(self, outpoint: OutPoint, winner: bytes | None) -> None:
        if outpoint != self._reg_outpoint or \
                self.phase is not BotPhase.AWAITING_FUNDING:
            return
        if winner == self._reg_txid:
            return  # our spend is the one being defended
        self.world.log(self.bot_id, "registration-conflict",
                       f"quota={outpoint}")
        self._abandon_attempt()

    def on_reject(self, tx: Transaction, reason: RejectReason) -> None:
        if tx.txid() != self._reg_txid or \
                self.phase is not BotPhase.AWAITING_FUNDING:
            return
        self.world.log(self.bot_id, "registration-rejected",
                       f"reason={reason}")
        self._abandon_attempt()

    # -- inbound traffic -------------------------------------------------------

    def on_tx_seen(self, tx: Transaction, height: int | None) -> None:
        txid = tx.txid()
        gained = self.wallet.credit_transaction(tx)
        if txid not in self.own_txids and gained > 0:
            if self.phase is BotPhase.AWAITING_FUNDING:
                funded = next(o.script for o in tx.outputs
                              if not o.is_data_carrier
                              and self.wallet.owns(o.script))
                self.phase = BotPhase.ACTIVE
                self.current_script = funded
                if self._reg_outpoint is not None:
                    self.world.unwatch_outpoint(self.bot_id, self._reg_outpoint)
                self.world.log(self.bot_id, "active",
                               f"address={script_to_address(funded)}")
            self._flush_pending()
        if txid not in self.own_txids:
            self._consider_downlink(tx)

    def _consider_downlink(self, tx: Transaction) -> None:
        txid = tx.txid()
        if txid in self._processed:
            return
        carriers = tx.carrier_outputs()
        if len(carriers) != 1:
            return
        self._processed.add(txid)
        try:
            env = ce.parse_symmetric_wire(carriers[0].carrier_data(),
                                          ce.EnvelopeForm.DOWNLINK,
                                          signed=self.sign_required)
            cmd = wf.decode_command(env, self.botnet_key,
                                    self.botmaster_public,
                                    require_signature=self.sign_required)
        except (ce.EnvelopeError, wf.WireError):
            return  # not for us; stay quiet
        if self.phase is not BotPhase.ACTIVE:
            return
        self.world.log(self.bot_id, "command-received",
                       f"cmd={cmd.describe()!r}")
        self.executed.append(cmd)
        self._dispatch(cmd)

    # -- execution ---------------------------------------------------------------

    def _dispatch(self, cmd: wf.Command) -> None:
        spec = self.behaviors.get(cmd.plaintext())
        if cmd.kind is wf.CommandKind.HARDCODED and cmd.mnemonic == "stp":
            self._job_generation += 1
            self.world.log(self.bot_id, "execute", "stop: jobs cancelled")
            return
        if spec is None:
            spec = SimCommandSpec(command=cmd)
        if cmd.kind is wf.CommandKind.SCRIPT:
            code = self._fetch_script(cmd.stored_txid, cmd.storage_key)
            if code is None:
                return
            self.world.log(self.bot_id, "script-fetched",
                           f"txid={cmd.stored_txid.hex()} bytes={len(code)}")
        job = self._job_generation
        iterations = spec.repeat_iterations
        if spec.repeat_interval is None:
            iterations = 1
        self._run_iteration(cmd, spec, job, iterations, first_delay=spec.duration)

    def _run_iteration(self, cmd, spec, job, remaining, first_delay) -> None:
        def fire():
            if spec.repeat_interval is not None and remaining is None \
                    and job != self._job_generation:
                return  # indefinite job cancelled by a stop command
            self.world.log(self.bot_id, "execute",
                           f"cmd={cmd.describe()!r}")
            if spec.output_size > 0 and cmd.kind is not wf.CommandKind.HARDCODED:
                self._send_response(spec.output_size)
            nxt = None if remaining is None else remaining - 1
            if spec.repeat_interval is not None and (nxt is None or nxt > 0):
                self._run_iteration(cmd, spec, job, nxt,
                                    first_delay=spec.repeat_interval)
        self.world.schedule(first_delay, fire)

    def _fetch_script(self, stored_txid: bytes, key: bytes) -> bytes | None:
        tx = self.world.spv_fetch_tx(self.bot_id, stored_txid)
        if tx is None:
            self.world.log(self.bot_id, "script-missing",
                           f"txid={stored_txid.hex()}")
            return None
        carriers = tx.carrier_outputs()
        if len(carriers) != 1:
            return None
        wire = carriers[0].carrier_data()
        iv, body = wire[:ce.BLOCK_LEN], wire[ce.BLOCK_LEN:]
        try:
            return ce.symmetric_open(body, ce.SymmetricKey(key), iv)
        except ce.BadPadding:
            self.world.log(self.bot_id, "script-undecryptable",
                           f"txid={stored_txid.hex()}")
            return None

    # -- responses -----------------------------------------------------------------

    def _synthetic_output(self, size: int) -> bytes:
        return "".join(self.rng.choices(_HEX_CHARS, k=size)).encode("ascii")

    def _send_response(self, size: int) -> None:
        payload = self._synthetic_output(size)
        env = ce.uplink_seal(payload, self.bot_key, self.rng)
        wire = env.wire()
        fee = wf.message_fee(len(wire), self.world.profile)
        source = self._select_source(fee)
        if source is None:
            self.world.log(self.bot_id, "response-blocked",
                           f"need={fee} balance={self.wallet.balance()}")
            self._pending_responses.append((size, b""))
            return
        change_script = self.wallet.new_script()
        built = wf.build_message(source, wire, change_script,
                                 self.world.profile)
        self.wallet.debit(source.outpoint)
        self.wallet.credit_transaction(built.tx)
        self._used_sources.add(source.script)
        self.current_script = change_script
        self.own_txids.add(built.tx.txid())
        self.ledger.record("response", built.fee)
        self.world.submit(built.tx, self.bot_id)
        self.world.log(self.bot_id, "response-sent",
                       f"bytes={size} fee={built.fee} "
                       f"txid={built.tx.txid().hex()}")

    def _select_source(self, need: int) -> Utxo | None:
        eligible = [u for u in self.wallet.spendable()
                    if u.value >= need and u.script not in self._used_sources]
        if not eligible:
            return None
        for utxo in eligible:
            if utxo.script == self.current_script:
                return utxo
        return eligible[0]

    def _flush_pending(self) -> None:
        pending, self._pending_responses = self._pending_responses, []
        for size, _ in pending:
            self._send_response(size)


class DrainAdversary:
    """Spends quotas without registering, using a captured shared key."""

    def __init__(self, world: World, rng: Random, shared_script: bytes,
                 node_id: str = "drain", interval: float = 120.0,
                 max_spends: int | None = None):
        self.world = world
        self.rng = rng
        self.shared_script = shared_script
        self.node_id = node_id
        self.interval = interval
        self.max_spends = max_spends
        self.spent = 0
        world.add_spv_node(node_id, listener=self)
        self.loot_script = spend_script(rng.getrandbits(160).to_bytes(20, "big"))

    def begin(self) -> None:
        self.world.schedule(self.interval, self._tick)

    def _tick(self) -> None:
        if self.max_spends is not None and self.spent >= self.max_spends:
            return
        quotas = self.world.spv_query_utxos(self.node_id, self.shared_script)
        if quotas:
            quota = self.rng.choice(quotas)
            probe = Transaction([make_input(quota.outpoint)],
                                [TxOutput(0, self.loot_script)])
            fee = mrf(probe, self.world.profile)
            if quota.value > fee:
                tx = Transaction([make_input(quota.outpoint)],
                                 [TxOutput(quota.value - fee, self.loot_script)])
                self.world.submit(tx, self.node_id)
                self.spent += 1
                self.world.log(self.node_id, "drain-spend",
                               f"quota={quota.outpoint} loot={quota.value - fee}")
        self.world.schedule(self.interval, self._tick)
