"""Report rendering: aligned tables for humans, delimited records for
machines, and matplotlib figures written to files.

Every renderer returns deterministic text (no timestamps, no float
formatting surprises), so golden tests can compare the machine form
byte for byte.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from . import costmodel as cm
from . import forensics as fx
from . import wireformat as wf
from .relaypolicy import NetworkProfile, check
from .txmodel import Transaction


# ---------------------------------------------------------------------------
# text primitives


def render_table(headers: list[str], rows: list[list[str]]) -> str:
    """Aligned monospace table; numeric-looking cells right-align."""
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))

    def numeric(cell: str) -> bool:
        return cell.replace("_", "").replace("-", "").replace(".", "").isdigit()

    def fmt(cells, force_left=False):
        out = []
        for i, cell in enumerate(cells):
            if not force_left and numeric(cell):
                out.append(cell.rjust(widths[i]))
            else:
                out.append(cell.ljust(widths[i]))
        return "  ".join(out).rstrip()

    lines = [fmt(headers, force_left=True),
             fmt(["-" * w for w in widths], force_left=True)]
    lines.extend(fmt(row) for row in rows)
    return "\n".join(lines)


def render_records(record_type: str, fields: list[str],
                   rows: list[list[object]]) -> str:
    """Pipe-delimited records, one block per record type.

    The '#' header names the fields; None renders as '-'.
    """
    lines = ["# " + "|".join([record_type] + fields)]
    for row in rows:
        cells = ["-" if v is None else str(v) for v in row]
        lines.append("|".join([record_type] + cells))
    return "\n".join(lines)


def _span(low: int | None, high: int | None) -> str:
    if low is None:
        return "-"
    return str(low) if low == high else f"{low}-{high}"


# ---------------------------------------------------------------------------
# costs


def cost_report(n_bots: int, per_bot: int, budget: int,
                profile: NetworkProfile) -> tuple[str, str]:
    """Fee schedule plus campaign totals; returns (human, machine)."""
    table = cm.fee_table(profile)
    reg = cm.campaign_registration_cost(n_bots, profile)
    fund = cm.campaign_funding_cost(n_bots, per_bot, profile)
    thru = cm.daily_throughput(budget)

    fee_rows = [[r.kind, _span(r.carrier_low, r.carrier_high),
                 _span(r.fee_low, r.fee_high)] for r in table.rows]
    human = "\n".join([
        f"fee schedule ({table.profile_name})",
        "",
        render_table(["kind", "carrier bytes", "fee sats"], fee_rows),
        "",
        f"campaign ({n_bots} bots, {per_bot} sats each)",
        "",
        render_table(["metric", "sats"], [
            ["registration (quotas + batch fees)", str(reg)],
            ["funding (balances + fees)", str(fund)],
        ]),
        "",
        f"daily response throughput at {budget} sats/day: {thru} bytes",
    ])

    machine = "\n".join([
        render_records("fee", ["kind", "carrier_low", "carrier_high",
                               "fee_low", "fee_high"],
                       [[r.kind, r.carrier_low, r.carrier_high,
                         r.fee_low, r.fee_high] for r in table.rows]),
        render_records("campaign", ["metric", "bots", "sats"],
                       [["registration", n_bots, reg],
                        ["funding", n_bots, fund]]),
        render_records("throughput", ["budget_sats", "bytes_per_day"],
                       [[budget, thru]]),
    ])
    return human, machine


# ---------------------------------------------------------------------------
# simulation runs


def _active_times(event_log: str) -> list[float]:
    times = []
    for line in event_log.splitlines():
        parts = [p.strip() for p in line.split("|")]
        if len(parts) >= 3 and parts[2] == "active":
            times.append(float(parts[0]))
    return times


def run_report(result) -> tuple[str, str]:
    """Scenario outcome summary plus the operator's fee ledger."""
    sc = result.scenario
    active = sum(1 for b in result.bots if b.phase.value == "active")
    height = result.world.chain.height
    n_txs = len(result.world.chain.txindex)
    ledger_rows = result.ledger.rows()

    human = "\n".join([
        f"scenario {sc.name} (network {result.profile.name}, "
        f"seed {result.seed})",
        "",
        render_table(["metric", "value"], [
            ["simulated seconds", str(sc.duration)],
            ["bots", str(len(result.bots))],
            ["bots active", str(active)],
            ["chain height", str(height)],
            ["chain transactions", str(n_txs)],
            ["operator fees paid", str(result.ledger.total())],
        ]),
        "",
        "fee ledger",
        "",
        render_table(["category", "count", "total sats"],
                     [[c, str(n), str(t)] for c, n, t in ledger_rows]),
    ])

    machine = "\n".join([
        render_records("run", ["scenario", "network", "seed", "duration",
                               "bots", "active", "height", "transactions",
                               "fees"],
                       [[sc.name, result.profile.name, result.seed,
                         sc.duration, len(result.bots), active, height,
                         n_txs, result.ledger.total()]]),
        render_records("ledger", ["category", "count", "total_sats"],
                       [list(row) for row in ledger_rows]),
        render_records("bot", ["index", "phase", "balance"],
                       [[i, b.phase.value, b.wallet.balance()]
                        for i, b in enumerate(result.bots)]),
    ])
    return human, machine


# ---------------------------------------------------------------------------
# forensics


def scan_report(findings: list[fx.Finding],
                estimate: int | None = None,
                commands: list[tuple[bytes, wf.Command]] | None = None
                ) -> tuple[str, str]:
    flagged = [f for f in findings if f.flagged]
    human_rows = [[f.txid.hex()[:16], str(f.height), f.suspected_kind,
                   f.confidence,
                   ",".join(str(v) for v in f.violations) or "-"]
                  for f in findings]
    sections = [
        f"scanned {len(findings)} transactions, {len(flagged)} flagged",
        "",
        render_table(["txid", "height", "suspected kind", "confidence",
                      "violations"], human_rows),
    ]
    if estimate is not None:
        sections += ["", f"estimated botnet size: {estimate} "
                         "(spent quota outputs of the shared address)"]
    if commands is not None:
        cmd_rows = [[txid.hex()[:16], cmd.mnemonic, _arg_preview(cmd)]
                    for txid, cmd in commands]
        sections += ["", f"decrypted {len(commands)} command(s)", "",
                     render_table(["txid", "mnemonic", "argument"],
                                  cmd_rows) if cmd_rows else "(none)"]
    human = "\n".join(sections)

    blocks = [render_records(
        "finding", ["height", "txid", "suspected_kind", "confidence",
                    "violations"],
        [[f.height, f.txid.hex(), f.suspected_kind, f.confidence,
          ",".join(str(v) for v in f.violations) or None]
         for f in findings])]
    if estimate is not None:
        blocks.append(render_records("estimate", ["botnet_size"],
                                     [[estimate]]))
    if commands is not None:
        blocks.append(render_records(
            "command", ["txid", "mnemonic", "argument"],
            [[txid.hex(), cmd.mnemonic, _arg_preview(cmd)]
             for txid, cmd in commands]))
    return human, "\n".join(blocks)


def _arg_preview(cmd: wf.Command) -> str:
    args = cmd.args
    if args and all(32 <= b < 127 for b in args) and len(args) <= 48:
        return args.decode("ascii")
    if len(args) > 16:
        return f"{args[:16].hex()}..({len(args)}B)"
    return args.hex() or "-"


# ---------------------------------------------------------------------------
# single-transaction decode


def decode_report(tx: Transaction, profile: NetworkProfile
                  ) -> tuple[str, str]:
    """Shape classification and policy verdict for one transaction.

    Input values are unknown from the transaction alone, so the fee
    rule is checked with the fee assumed sufficient and annotated.
    """
    sizes = tx.size_profile()
    kind = wf.classify(tx)
    verdict = check(tx, 10 ** 12, profile)
    violations = ",".join(str(v) for v in verdict.violations) or "-"
    status = "would relay" if verdict.relayable else "rejected"

    human = "\n".join([
        render_table(["field", "value"], [
            ["txid", tx.txid().hex()],
            ["size bytes", str(sizes.total_size)],
            ["virtual size", str(sizes.virtual_size)],
            ["inputs / outputs",
             f"{len(tx.inputs)} / {len(tx.outputs)}"],
            ["carrier bytes", str(sum(len(o.carrier_data())
                                      for o in tx.carrier_outputs()))],
            ["suspected kind", str(kind) if kind else "unknown"],
            [f"verdict ({profile.name})", f"{status} ({violations})"],
        ]),
        "",
        "note: fee rule not evaluated (input values unknown)",
    ])
    machine = render_records(
        "decoded", ["txid", "size", "vsize", "suspected_kind", "relayable",
                    "violations"],
        [[tx.txid().hex(), sizes.total_size, sizes.virtual_size,
          str(kind) if kind else "unknown", verdict.relayable,
          violations if violations != "-" else None]])
    return human, machine


# ---------------------------------------------------------------------------
# figures


def save_fee_figure(path: str, profile: NetworkProfile) -> None:
    """Message fee as a function of carrier payload size."""
    xs = sorted({1, 17, 48, 80, 96, 116, 256} |
                set(range(500, 51_201, 500)) | {51_200})
    ys = [wf.message_fee(x, profile) for x in xs]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(xs, ys, lw=1.8)
    ax.set_xlabel("carrier payload (bytes)")
    ax.set_ylabel("minimum relay fee (sats)")
    ax.set_title(f"message fee vs carrier size ({profile.name})")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_ledger_figure(path: str, ledger) -> None:
    """Operator spend by category."""
    rows = ledger.rows()
    cats = [r[0] for r in rows]
    totals = [r[2] for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.bar(range(len(cats)), totals, color="#3b6ea5")
    ax.set_xticks(range(len(cats)))
    ax.set_xticklabels(cats, rotation=30, ha="right")
    ax.set_ylabel("total fees (sats)")
    ax.set_title("operator fee ledger")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_findings_figure(path: str, findings: list[fx.Finding]) -> None:
    """Scan results by suspected kind, split flagged vs standard."""
    kinds = sorted({f.suspected_kind for f in findings})
    flagged = [sum(1 for f in findings
                   if f.suspected_kind == k and f.flagged) for k in kinds]
    standard = [sum(1 for f in findings
                    if f.suspected_kind == k and not f.flagged)
                for k in kinds]
    xs = range(len(kinds))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.bar(xs, flagged, color="#b34040", label="flagged")
    ax.bar(xs, standard, bottom=flagged, color="#8aa87a", label="standard")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(kinds, rotation=30, ha="right")
    ax.set_ylabel("transactions")
    ax.set_title("scan findings by suspected kind")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_timeline_figure(path: str, event_log: str, n_bots: int) -> None:
    """Cumulative bot activations over simulated time."""
    times = _active_times(event_log)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if times:
        xs = sorted(times)
        ax.step(xs, range(1, len(xs) + 1), where="post", lw=1.8)
    ax.set_xlabel("simulated seconds")
    ax.set_ylabel("bots active")
    ax.set_ylim(0, max(n_bots, 1) * 1.05)
    ax.set_title("bot activation timeline")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
