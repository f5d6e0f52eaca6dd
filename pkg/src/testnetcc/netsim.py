"""Deterministic discrete-event simulation of the relay network.

Full nodes form a fixed random regular graph and gossip transactions
with a uniform per-hop latency.  Each full node keeps its own mempool
under the first-seen rule; one designated node mines on a timer,
packing transactions greedily by feerate under the block-size cap.
Light (SPV) clients attach to a full node, watch scripts and outpoints,
and query their peer's combined chain-plus-mempool view.

Everything runs off one event heap ordered by (time, sequence number),
and every random draw comes from seeded generators, so a scenario and a
seed fully determine the event log and the chain.
"""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field
from random import Random

from .relaypolicy import NetworkProfile, Violation, check
from .txmodel import (
    OutPoint, Transaction, TxOutput, Utxo, coinbase_transaction, tx_to_hex,
)

SATS_PER_COIN = 100_000_000
SECONDS_PER_DAY = 86_400

DEFAULT_FULL_NODES = 50
DEFAULT_DEGREE = 8
DEFAULT_HOP_LATENCY = 0.1
DEFAULT_BLOCK_INTERVAL = 600.0
MAX_BLOCK_BYTES = 1_000_000

# faucet grant distribution endpoints (satoshis); the mode is pinned so
# the long-run mean lands on 5_000_000
FAUCET_MIN = 10_000
FAUCET_MAX = 8_900_000
FAUCET_MEAN = 5_000_000
FAUCET_MODE = 3 * FAUCET_MEAN - FAUCET_MIN - FAUCET_MAX


class SimError(Exception):
    """Simulation-level failure (bad node ids, broken invariants)."""


class RejectReason(enum.Enum):
    FEE_BELOW_MINIMUM = "fee-below-minimum"
    POLICY_VIOLATION = "policy-violation"
    DOUBLE_SPEND = "double-spend"
    MISSING_INPUT = "missing-input"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Block:
    height: int
    timestamp: float
    txs: tuple[Transaction, ...]
    total_bytes: int
    fees: int


@dataclass
class _MempoolEntry:
    tx: Transaction
    fee: int
    vsize: int
    seq: int

    @property
    def feerate(self) -> float:
        return self.fee / self.vsize


@dataclass
class _FullNode:
    node_id: str
    peers: list[str] = field(default_factory=list)
    mempool: dict[bytes, _MempoolEntry] = field(default_factory=dict)
    claims: dict[OutPoint, bytes] = field(default_factory=dict)
    orphans: dict[OutPoint, list[Transaction]] = field(default_factory=dict)
    seen: set[bytes] = field(default_factory=set)
    spv_children: list[str] = field(default_factory=list)


@dataclass
class _SpvNode:
    node_id: str
    peer_id: str
    listener: object | None = None
    watched_scripts: set[bytes] = field(default_factory=set)
    watched_outpoints: set[OutPoint] = field(default_factory=set)
    watch_carriers: bool = False
    notified: set[tuple] = field(default_factory=set)


class Chain:
    """Single canonical chain: blocks, UTXO set, and a full tx index."""

    def __init__(self):
        self.blocks: list[Block] = []
        self.utxo: dict[OutPoint, TxOutput] = {}
        self.spent_by: dict[OutPoint, bytes] = {}
        self.txindex: dict[bytes, tuple[int, Transaction]] = {}

    @property
    def height(self) -> int:
        return len(self.blocks) - 1

    def has_tx(self, txid: bytes) -> bool:
        return txid in self.txindex

    def connect(self, block: Block) -> None:
        for tx in block.txs:
            txid = tx.txid()
            if not tx.is_coinbase():
                for txin in tx.inputs:
                    del self.utxo[txin.prevout]
                    self.spent_by[txin.prevout] = txid
            for vout, out in enumerate(tx.outputs):
                if not out.is_data_carrier:
                    self.utxo[OutPoint(txid, vout)] = out
            self.txindex[txid] = (block.height, tx)
        self.blocks.append(block)

    def utxos_for_script(self, script: bytes) -> list[Utxo]:
        found = [Utxo(op, out.value, out.script)
                 for op, out in self.utxo.items() if out.script == script]
        found.sort(key=lambda u: (u.outpoint.txid, u.outpoint.vout))
        return found


def build_topology(n_nodes: int, degree: int, rng: Random) -> list[list[int]]:
    """Connected random regular graph adjacency via stub matching."""
    if n_nodes * degree % 2 or degree >= n_nodes:
        raise SimError("degree and node count cannot form a regular graph")
    while True:
        stubs = [i for i in range(n_nodes) for _ in range(degree)]
        rng.shuffle(stubs)
        edges = set()
        ok = True
        for a, b in zip(stubs[::2], stubs[1::2]):
            if a == b or (min(a, b), max(a, b)) in edges:
                ok = False
                break
            edges.add((min(a, b), max(a, b)))
        if not ok:
            continue
        adj = [[] for _ in range(n_nodes)]
        for a, b in sorted(edges):
            adj[a].append(b)
            adj[b].append(a)
        # redraw on a disconnected graph
        seen = {0}
        queue = [0]
        while queue:
            node = queue.pop()
            for nxt in adj[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        if len(seen) == n_nodes:
            return adj


class World:
    """The simulated network, clock, chain, and economy."""

    def __init__(self, profile: NetworkProfile, rng: Random,
                 n_full_nodes: int = DEFAULT_FULL_NODES,
                 degree: int = DEFAULT_DEGREE,
                 hop_latency: float = DEFAULT_HOP_LATENCY,
                 block_interval: float = DEFAULT_BLOCK_INTERVAL,
                 max_block_bytes: int = MAX_BLOCK_BYTES,
                 faucet_count: int = 6,
                 miner_rate_sats_per_day: int = 0,
                 miner_payout_script: bytes | None = None):
        self.profile = profile
        self.hop_latency = hop_latency
        self.block_interval = block_interval
        self.max_block_bytes = max_block_bytes
        self.now = 0.0
        self._events: list[tuple[float, int, object]] = []
        self._seq = 0
        self.chain = Chain()
        self.log_lines: list[str] = []

        self.full_nodes: dict[str, _FullNode] = {}
        self.spv_nodes: dict[str, _SpvNode] = {}
        adj = build_topology(n_full_nodes, degree, rng)
        ids = [f"n{i:02d}" for i in range(n_full_nodes)]
        for i, node_id in enumerate(ids):
            self.full_nodes[node_id] = _FullNode(
                node_id, peers=[ids[j] for j in adj[i]])
        self.miner_id = ids[0]
        self._spv_attach_counter = 0

        # economy
        self.faucet_count = faucet_count
        self._faucet_grants: set[tuple[int, str, int]] = set()
        self.miner_rate = miner_rate_sats_per_day
        self.miner_payout_script = miner_payout_script
        self._miner_credited = 0
        self._issuance_queue: list[Transaction] = []
        self._issuance_count = 0
        self.total_issued = 0
        self.total_fees_collected = 0
        self.total_carrier_burn = 0

        self.schedule(self.block_interval, self._mine_event)

    # -- clock & events ----------------------------------------------------

    def schedule(self, delay: float, fn) -> None:
        if delay < 0:
            raise SimError("cannot schedule into the past")
        self._seq += 1
        heapq.heappush(self._events, (self.now + delay, self._seq, fn))

    def run_until(self, t_end: float) -> None:
        while self._events and self._events[0][0] <= t_end:
            time, _, fn = heapq.heappop(self._events)
            self.now = time
            fn()
        self.now = t_end

    def log(self, node: str, event: str, detail: str) -> None:
        self.log_lines.append(f"{self.now:.3f} | {node} | {event} | {detail}")

    # -- topology ----------------------------------------------------------

    def add_spv_node(self, node_id: str, listener=None,
                     peer_id: str | None = None) -> str:
        if node_id in self.spv_nodes or node_id in self.full_nodes:
            raise SimError(f"duplicate node id: {node_id}")
        if peer_id is None:
            ids = list(self.full_nodes)
            peer_id = ids[self._spv_attach_counter % len(ids)]
            self._spv_attach_counter += 1
        if peer_id not in self.full_nodes:
            raise SimError(f"unknown peer: {peer_id}")
        self.spv_nodes[node_id] = _SpvNode(node_id, peer_id, listener)
        self.full_nodes[peer_id].spv_children.append(node_id)
        return peer_id

    def watch_script(self, node_id: str, script: bytes) -> None:
        self.spv_nodes[node_id].watched_scripts.add(script)

    def watch_outpoint(self, node_id: str, outpoint: OutPoint) -> None:
        self.spv_nodes[node_id].watched_outpoints.add(outpoint)

    def unwatch_outpoint(self, node_id: str, outpoint: OutPoint) -> None:
        self.spv_nodes[node_id].watched_outpoints.discard(outpoint)

    def watch_carriers(self, node_id: str) -> None:
        """Deliver every data-carrier transaction to this node's listener.

        Light clients receive and relay all transactions; filtering for
        carriers models a client that inspects each one for messages.
        """
        self.spv_nodes[node_id].watch_carriers = True

    # -- submission & relay --------------------------------------------------

    def submit(self, tx: Transaction, origin: str):
        """Inject a transaction at a node.

        From a full node this validates immediately and returns
        (accepted, reason).  From an SPV node the transaction travels to
        the peer first; the verdict arrives through the listener.
        """
        if origin in self.full_nodes:
            return self._receive(self.full_nodes[origin], tx, announce=True)
        if origin in self.spv_nodes:
            spv = self.spv_nodes[origin]
            peer = self.full_nodes[spv.peer_id]
            self.schedule(self.hop_latency,
                          lambda: self._receive(peer, tx, announce=True,
                                                submitter=spv))
            return None
        raise SimError(f"unknown origin node: {origin}")

    def _resolve_input(self, node: _FullNode, prevout: OutPoint):
        """Return (utxo | None, reason | None) for one input at one node."""
        out = self.chain.utxo.get(prevout)
        if out is not None:
            if prevout in node.claims:
                return None, RejectReason.DOUBLE_SPEND
            return Utxo(prevout, out.value, out.script), None
        if prevout in self.chain.spent_by:
            return None, RejectReason.DOUBLE_SPEND
        parent = node.mempool.get(prevout.txid)
        if parent is not None and prevout.vout < len(parent.tx.outputs):
            sibling = parent.tx.outputs[prevout.vout]
            if sibling.is_data_carrier:
                return None, RejectReason.MISSING_INPUT
            if prevout in node.claims:
                return None, RejectReason.DOUBLE_SPEND
            return Utxo(prevout, sibling.value, sibling.script), None
        return None, RejectReason.MISSING_INPUT

    def _receive(self, node: _FullNode, tx: Transaction,
                 announce: bool = False, submitter: _SpvNode | None = None):
        txid = tx.txid()
        if txid in node.mempool or self.chain.has_tx(txid):
            return True, None
        resolved: list[Utxo] = []
        verdict_reason = None
        conflicted: OutPoint | None = None
        missing: OutPoint | None = None
        for txin in tx.inputs:
            utxo, reason = self._resolve_input(node, txin.prevout)
            if reason is not None:
                verdict_reason = reason
                if reason is RejectReason.DOUBLE_SPEND:
                    conflicted = txin.prevout
                else:
                    missing = txin.prevout
                break
            resolved.append(utxo)

        if verdict_reason is RejectReason.MISSING_INPUT and not announce:
            # a relayed child can outrun its parent along a shorter
            # path; park it until the parent arrives
            node.orphans.setdefault(missing, []).append(tx)
            return False, RejectReason.MISSING_INPUT

        if verdict_reason is None:
            fee = sum(u.value for u in resolved) - sum(o.value for o in tx.outputs)
            verdict = check(tx, fee, self.profile)
            if not verdict.relayable:
                if Violation.FEE_BELOW_MINIMUM in verdict.violations:
                    verdict_reason = RejectReason.FEE_BELOW_MINIMUM
                else:
                    verdict_reason = RejectReason.POLICY_VIOLATION

        if verdict_reason is not None:
            node.seen.add(txid)
            if announce:
                detail = f"txid={txid.hex()} reason={verdict_reason}"
                self.log(node.node_id, "tx-reject", detail)
                if submitter is not None:
                    self._notify_reject(submitter, tx, verdict_reason)
            if conflicted is not None:
                winner = node.claims.get(conflicted) or \
                    self.chain.spent_by.get(conflicted)
                self._notify_conflicts(node, conflicted, winner, txid)
            return False, verdict_reason

        entry = _MempoolEntry(tx, fee, tx.size_profile().virtual_size,
                              self._next_seq())
        node.mempool[txid] = entry
        for txin in tx.inputs:
            node.claims[txin.prevout] = txid
        node.seen.add(txid)
        if announce:
            self.log(node.node_id, "tx-accept",
                     f"txid={txid.hex()} fee={fee} vsize={entry.vsize}")
        self._notify_watchers(node, tx, resolved, confirmed=False)
        for peer_id in node.peers:
            peer = self.full_nodes[peer_id]
            if txid not in peer.seen:
                self.schedule(self.hop_latency,
                              lambda p=peer, t=tx: self._receive(p, t))
        self._adopt_orphans(node, tx)
        return True, None

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _adopt_orphans(self, node: _FullNode, parent: Transaction) -> None:
        parent_id = parent.txid()
        for vout in range(len(parent.outputs)):
            waiting = node.orphans.pop(OutPoint(parent_id, vout), [])
            for orphan in waiting:
                self._receive(node, orphan)

    # -- notifications -------------------------------------------------------

    def _notify_watchers(self, node: _FullNode, tx: Transaction,
                         resolved: list[Utxo], confirmed: bool) -> None:
        spent_scripts = {u.script for u in resolved}
        spent_outpoints = {u.outpoint for u in resolved}
        out_scripts = {o.script for o in tx.outputs}
        has_carrier = any(o.is_data_carrier for o in tx.outputs)
        for child_id in node.spv_children:
            spv = self.spv_nodes[child_id]
            relevant = (spv.watched_scripts & (spent_scripts | out_scripts)
                        or spv.watched_outpoints & spent_outpoints
                        or (spv.watch_carriers and has_carrier))
            if not relevant:
                continue
            key = (tx.txid(), confirmed)
            if key in spv.notified:
                continue
            spv.notified.add(key)
            height = self.chain.height if confirmed else None
            self.schedule(self.hop_latency,
                          lambda s=spv, t=tx, h=height: self._deliver_tx(s, t, h))

    def _deliver_tx(self, spv: _SpvNode, tx: Transaction, height) -> None:
        if spv.listener is not None and hasattr(spv.listener, "on_tx_seen"):
            spv.listener.on_tx_seen(tx, height)

    def _notify_conflicts(self, node: _FullNode, outpoint: OutPoint,
                          winner: bytes | None, loser: bytes) -> None:
        for child_id in node.spv_children:
            spv = self.spv_nodes[child_id]
            if outpoint not in spv.watched_outpoints:
                continue
            # keyed by winner: a later resolution naming a different
            # victor (say, at block connect) must still get through
            key = ("conflict", outpoint, winner)
            if key in spv.notified:
                continue
            spv.notified.add(key)
            self.log(node.node_id, "conflict",
                     f"outpoint={outpoint} winner={winner.hex() if winner else '?'} "
                     f"loser={loser.hex()}")
            self.schedule(self.hop_latency,
                          lambda s=spv, o=outpoint, w=winner:
                          self._deliver_conflict(s, o, w))

    def _deliver_conflict(self, spv: _SpvNode, outpoint: OutPoint,
                          winner: bytes | None) -> None:
        if spv.listener is not None and hasattr(spv.listener, "on_conflict"):
            spv.listener.on_conflict(outpoint, winner)

    def _notify_reject(self, spv: _SpvNode, tx: Transaction,
                       reason: RejectReason) -> None:
        if spv.listener is not None and hasattr(spv.listener, "on_reject"):
            self.schedule(self.hop_latency,
                          lambda: spv.listener.on_reject(tx, reason))

    # -- mining --------------------------------------------------------------

    def _mine_event(self) -> None:
        self.mine_block()
        self.schedule(self.block_interval, self._mine_event)

    def mine_block(self) -> Block:
        if self.miner_rate and self.miner_payout_script is not None:
            self._accrue_miner_income()
        miner = self.full_nodes[self.miner_id]
        txs: list[Transaction] = []
        total = 0
        fees = 0
        for issued in self._issuance_queue:
            txs.append(issued)
            total += issued.size_profile().total_size
        self._issuance_queue.clear()

        candidates = sorted(miner.mempool.values(),
                            key=lambda e: (-e.feerate, e.seq))
        included: set[bytes] = set()
        block_spent: set[OutPoint] = set()
        block_created: set[OutPoint] = set()
        progress = True
        while progress:
            progress = False
            for entry in candidates:
                txid = entry.tx.txid()
                if txid in included:
                    continue
                size = entry.tx.size_profile().total_size
                if total + size > self.max_block_bytes:
                    continue
                ready = True
                for txin in entry.tx.inputs:
                    op = txin.prevout
                    available = ((op in self.chain.utxo and op not in block_spent)
                                 or op in block_created)
                    if not available:
                        ready = False
                        break
                if not ready:
                    continue
                included.add(txid)
                txs.append(entry.tx)
                total += size
                fees += entry.fee
                for txin in entry.tx.inputs:
                    block_spent.add(txin.prevout)
                for vout, out in enumerate(entry.tx.outputs):
                    if not out.is_data_carrier:
                        block_created.add(OutPoint(txid, vout))
                progress = True

        block = Block(height=self.chain.height + 1, timestamp=self.now,
                      txs=tuple(txs), total_bytes=total, fees=fees)
        self._connect_everywhere(block)
        self.log(self.miner_id, "block",
                 f"height={block.height} txs={len(txs)} bytes={total} fees={fees}")
        return block

    def _connect_everywhere(self, block: Block) -> None:
        self.chain.connect(block)
        self.total_fees_collected += block.fees
        for tx in block.txs:
            self.total_carrier_burn += sum(
                o.value for o in tx.outputs if o.is_data_carrier)
        block_ids = {tx.txid() for tx in block.txs}
        confirmed_spends = {txin.prevout: tx.txid()
                            for tx in block.txs if not tx.is_coinbase()
                            for txin in tx.inputs}
        for node in self.full_nodes.values():
            # drop mined txs, then evict anything they conflicted with
            for txid in block_ids:
                entry = node.mempool.pop(txid, None)
                if entry is not None:
                    for txin in entry.tx.inputs:
                        node.claims.pop(txin.prevout, None)
            for outpoint, winner in confirmed_spends.items():
                loser = node.claims.get(outpoint)
                if loser is not None and loser not in block_ids:
                    self._evict(node, loser)
                    self._notify_conflicts(node, outpoint, winner, loser)
        # watched-transaction confirmations
        for node in self.full_nodes.values():
            for tx in block.txs:
                resolved = []
                if not tx.is_coinbase():
                    resolved = [Utxo(i.prevout, 0,
                                     self._script_of_confirmed(i.prevout))
                                for i in tx.inputs]
                self._notify_watchers(node, tx, resolved, confirmed=True)

    def _script_of_confirmed(self, outpoint: OutPoint) -> bytes:
        spender = self.chain.spent_by.get(outpoint)
        if spender is None:
            return b""
        # the spend is in this block; the creating tx is indexed
        _, creator = self.chain.txindex[outpoint.txid]
        return creator.outputs[outpoint.vout].script

    def _evict(self, node: _FullNode, txid: bytes) -> None:
        entry = node.mempool.pop(txid, None)
        if entry is None:
            return
        for txin in entry.tx.inputs:
            if node.claims.get(txin.prevout) == txid:
                del node.claims[txin.prevout]
        # descendants spending this tx's outputs go too
        for vout in range(len(entry.tx.outputs)):
            child = node.claims.get(OutPoint(txid, vout))
            if child is not None:
                self._evict(node, child)

    # -- SPV services ----------------------------------------------------------

    def _peer_of(self, node_id: str) -> _FullNode:
        if node_id in self.spv_nodes:
            return self.full_nodes[self.spv_nodes[node_id].peer_id]
        if node_id in self.full_nodes:
            return self.full_nodes[node_id]
        raise SimError(f"unknown node: {node_id}")

    def spv_query_utxos(self, node_id: str, script: bytes) -> list[Utxo]:
        """Peer's view: confirmed and mempool outputs, minus mempool spends."""
        peer = self._peer_of(node_id)
        visible = [u for u in self.chain.utxos_for_script(script)
                   if u.outpoint not in peer.claims]
        for entry in peer.mempool.values():
            txid = entry.tx.txid()
            for vout, out in enumerate(entry.tx.outputs):
                if out.is_data_carrier or out.script != script:
                    continue
                op = OutPoint(txid, vout)
                if op not in peer.claims:
                    visible.append(Utxo(op, out.value, out.script))
        visible.sort(key=lambda u: (u.outpoint.txid, u.outpoint.vout))
        return visible

    def spv_fetch_tx(self, node_id: str, txid: bytes) -> Transaction | None:
        peer = self._peer_of(node_id)
        if self.chain.has_tx(txid):
            return self.chain.txindex[txid][1]
        entry = peer.mempool.get(txid)
        return entry.tx if entry else None

    # -- economy -----------------------------------------------------------------

    def genesis(self, grants: list[tuple[bytes, int]]) -> None:
        """Block 0: initial issuance, available immediately."""
        if self.chain.blocks:
            raise SimError("genesis must precede all blocks")
        txs: tuple[Transaction, ...] = ()
        total_bytes = 0
        if grants:
            outputs = [TxOutput(value, script) for script, value in grants]
            tx = coinbase_transaction(b"genesis", outputs)
            txs = (tx,)
            total_bytes = tx.size_profile().total_size
        block = Block(0, 0.0, txs, total_bytes, 0)
        self.chain.connect(block)
        self.total_issued += sum(value for _, value in grants)
        self.log("chain", "block",
                 f"height=0 txs={len(txs)} bytes={total_bytes} fees=0")

    def _issue(self, tag: bytes, script: bytes, value: int) -> None:
        self._issuance_count += 1
        tx = coinbase_transaction(tag + b":%d" % self._issuance_count,
                                  [TxOutput(value, script)])
        self._issuance_queue.append(tx)
        self.total_issued += value

    def faucet_grant(self, faucet_index: int, requester: str,
                     script: bytes, rng: Random) -> int | None:
        """One grant per faucet per requester per simulated day."""
        if not 0 <= faucet_index < self.faucet_count:
            raise SimError(f"no such faucet: {faucet_index}")
        day = int(self.now // SECONDS_PER_DAY)
        key = (faucet_index, requester, day)
        if key in self._faucet_grants:
            self.log(f"faucet{faucet_index}", "faucet-deny",
                     f"requester={requester} day={day}")
            return None
        self._faucet_grants.add(key)
        amount = round(rng.triangular(FAUCET_MIN, FAUCET_MAX, FAUCET_MODE))
        self._issue(b"faucet", script, amount)
        self.log(f"faucet{faucet_index}", "faucet-grant",
                 f"requester={requester} sats={amount}")
        return amount

    def _accrue_miner_income(self) -> None:
        # block times are integral, so this stays in exact integer math
        due = self.miner_rate * int(self.now) // SECONDS_PER_DAY
        delta = due - self._miner_credited
        if delta > 0:
            self._miner_credited = due
            self._issue(b"mining", self.miner_payout_script, delta)
            self.log(self.miner_id, "miner-credit", f"sats={delta}")

    # -- reporting & invariants ---------------------------------------------------

    def event_log(self) -> str:
        return "\n".join(self.log_lines) + "\n"

    def chain_dump(self) -> str:
        lines = []
        for block in self.chain.blocks:
            for tx in block.txs:
                lines.append(f"{block.height} {tx.txid().hex()} {tx_to_hex(tx)}")
        return "\n".join(lines) + "\n"

    def check_soundness(self) -> None:
        """Conservation: all issued value is in the UTXO set or burned as fees."""
        held = sum(out.value for out in self.chain.utxo.values())
        total = held + self.total_fees_collected + self.total_carrier_burn
        if total != self.total_issued:
            raise SimError(
                f"value leak: utxo {held} + fees {self.total_fees_collected} "
                f"+ burns {self.total_carrier_burn} != issued {self.total_issued}")
