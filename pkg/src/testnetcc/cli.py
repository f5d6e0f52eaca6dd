"""Command-line front end.

Subcommands: `run` (execute a scenario, write artifacts), `analyze`
(forensics over a chain dump), `costs` (fee schedule and campaign
arithmetic), `decode` (inspect one raw transaction).

Exit codes: 0 success, 1 usage, 2 bad input (scenario, dump, keys,
hex), 3 simulation invariant violation.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import cryptoenvelope as ce
from . import forensics as fx
from . import report as rp
from . import scenario as sc
from .actors import ActorError
from .netsim import SimError
from .relaypolicy import NetworkProfile, TESTNET, profile_by_name
from .txmodel import TxFormatError, tx_from_hex

SCENARIO_DIR_ENV = "TESTNETCC_SCENARIOS"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BAD_INPUT = 2
EXIT_INVARIANT = 3


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1; argparse's default is 2, which this tool
    # reserves for bad input files
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="testnetcc",
                     description="Deterministic covert-channel simulator "
                                 "and chain analysis toolkit.")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="{run,analyze,costs,decode}")

    def add_network(p):
        p.add_argument("--network", default=None,
                       choices=["testnet", "mainnet"],
                       help="relay policy profile (default: testnet)")

    p_run = sub.add_parser("run", help="execute a scenario")
    p_run.add_argument("scenario",
                       help="scenario file path, a name in "
                            f"${SCENARIO_DIR_ENV}, or a bundled name "
                            f"({', '.join(sc.list_bundled())})")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    add_network(p_run)
    p_run.add_argument("--out", required=True,
                       help="directory for run artifacts")
    p_run.add_argument("--no-figures", action="store_true",
                       help="skip figure rendering")

    p_an = sub.add_parser("analyze", help="scan a chain dump")
    p_an.add_argument("dump", help="chain dump file (height txid hex lines)")
    p_an.add_argument("--keys", default=None,
                      help="operator key file (enables decryption)")
    p_an.add_argument("--shared-address", default=None,
                      help="shared account address (enables size estimate)")
    p_an.add_argument("--out", default=None,
                      help="directory for report files and figures")
    p_an.add_argument("--no-figures", action="store_true")

    p_costs = sub.add_parser("costs", help="fee schedule and campaign costs")
    p_costs.add_argument("--bots", type=int, default=1000)
    p_costs.add_argument("--per-bot", type=int, default=10_000,
                         help="working balance per bot in sats")
    p_costs.add_argument("--budget", type=int, default=10_000_000,
                         help="daily fee budget for throughput, in sats")
    add_network(p_costs)
    p_costs.add_argument("--out", default=None)
    p_costs.add_argument("--no-figures", action="store_true")

    p_dec = sub.add_parser("decode", help="classify one raw transaction")
    p_dec.add_argument("tx", help="transaction hex, or a file containing it")
    add_network(p_dec)

    return parser


def _profile(name: str | None) -> NetworkProfile:
    return profile_by_name(name) if name else TESTNET


def _emit(human: str, machine: str, out_dir: str | None) -> None:
    print(human)
    if out_dir is None:
        print()
        print(machine)
    else:
        os.makedirs(out_dir, exist_ok=True)
        _write(out_dir, "report.txt", human + "\n")
        _write(out_dir, "records.txt", machine + "\n")


def _write(out_dir: str, name: str, text: str) -> str:
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        fh.write(text)
    return path


def _resolve_scenario(name: str) -> sc.Scenario:
    if os.path.exists(name):
        return sc.load_scenario(name)
    config_dir = os.environ.get(SCENARIO_DIR_ENV)
    if config_dir:
        for candidate in (os.path.join(config_dir, name),
                          os.path.join(config_dir, name + ".scenario")):
            if os.path.exists(candidate):
                return sc.load_scenario(candidate)
    return sc.load_bundled(name)


def _cmd_run(args) -> int:
    scn = _resolve_scenario(args.scenario)
    result = sc.run_scenario(scn, seed=args.seed, network=args.network)
    human, machine = rp.run_report(result)

    os.makedirs(args.out, exist_ok=True)
    _write(args.out, "events.log", result.event_log())
    _write(args.out, "chain.dump", result.chain_dump())
    _write(args.out, "keys.txt", sc.format_keys(result.botmaster))
    _write(args.out, "report.txt", human + "\n")
    _write(args.out, "records.txt", machine + "\n")
    if not args.no_figures:
        rp.save_ledger_figure(os.path.join(args.out, "ledger.png"),
                              result.ledger)
        rp.save_timeline_figure(os.path.join(args.out, "timeline.png"),
                                result.event_log(), len(result.bots))
    print(human)
    print(f"\nartifacts written to {args.out}")
    return EXIT_OK


def _read_file(path: str, what: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise fx.ParseError(f"cannot read {what} {path!r}: {exc.strerror}") \
            from exc


def _cmd_analyze(args) -> int:
    view = fx.parse_dump(_read_file(args.dump, "chain dump"))
    findings = fx.scan(view)

    shared_address = args.shared_address
    commands = None
    if args.keys:
        keys = sc.parse_keys(_read_file(args.keys, "key file"))
        shared_address = shared_address or keys.get("shared_address")
        try:
            botnet_key = ce.BotnetKey.from_hex(keys["botnet_key"])
            public = ce.RsaPublicKey(n=int(keys["rsa_n"], 16),
                                     e=int(keys["rsa_e"], 16))
        except (KeyError, ValueError) as exc:
            raise sc.ScenarioError(
                f"key file {args.keys!r} is missing usable "
                f"botnet_key/rsa_n/rsa_e fields ({exc})") from exc
        commands = fx.decrypt_downlink(view, botnet_key, public)

    estimate = None
    if shared_address:
        estimate = fx.estimate_botnet_size(view, shared_address)

    human, machine = rp.scan_report(findings, estimate=estimate,
                                    commands=commands)
    _emit(human, machine, args.out)
    if args.out and not args.no_figures:
        rp.save_findings_figure(os.path.join(args.out, "findings.png"),
                                findings)
    return EXIT_OK


def _cmd_costs(args) -> int:
    profile = _profile(args.network)
    human, machine = rp.cost_report(args.bots, args.per_bot, args.budget,
                                    profile)
    _emit(human, machine, args.out)
    if args.out and not args.no_figures:
        rp.save_fee_figure(os.path.join(args.out, "fees.png"), profile)
    return EXIT_OK


def _cmd_decode(args) -> int:
    text = _read_file(args.tx, "transaction file") \
        if os.path.exists(args.tx) else args.tx
    tx = tx_from_hex(text)
    human, machine = rp.decode_report(tx, _profile(args.network))
    print(human)
    print()
    print(machine)
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "analyze": _cmd_analyze,
    "costs": _cmd_costs,
    "decode": _cmd_decode,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (sc.ScenarioError, fx.ParseError, fx.NotFound, TxFormatError,
            ce.EnvelopeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (SimError, ActorError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
