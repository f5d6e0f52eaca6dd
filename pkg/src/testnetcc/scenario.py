"""Scenario files: flat key=value configs and the runner they drive.

A scenario pins everything a run needs (network profile, topology,
economy, bot join schedule, command schedule, adversary toggles) so a
(scenario, seed) pair fully determines the event log and the chain.
Files are plain text: one `key = value` per line, `#` comments, blank
lines ignored.  Command entries use numbered keys::

    command1 = at | kind | output_size | duration | interval | iterations | arg

with `-` for "no value" in the repeat fields.  The arg field comes last
and keeps everything after the sixth pipe verbatim, so shell one-liners
may themselves contain pipes.  For `kind = script` the arg is the code
size in bytes; the runner generates that many deterministic bytes and
publishes them before issuing the pointing command.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from random import Random

from . import cryptoenvelope as ce
from . import wireformat as wf
from .actors import Bot, Botmaster, DrainAdversary, FeeLedger, SimCommandSpec
from .netsim import World
from .relaypolicy import NetworkProfile, profile_by_name
from .txmodel import script_to_address


class ScenarioError(Exception):
    """Bad scenario text; the message names the offending key."""


COMMAND_KINDS = ("shell", "hardcoded", "script")

_BOOL_WORDS = {"true": True, "yes": True, "on": True, "1": True,
               "false": False, "no": False, "off": False, "0": False}
_COMMAND_KEY = re.compile(r"^command(\d+)$")


@dataclass
class CommandEvent:
    """One scheduled command issue."""
    at: float
    kind: str
    arg: str
    output_size: int = 0
    duration: float = 1.0
    repeat_interval: float | None = None
    repeat_iterations: int | None = None


@dataclass
class Scenario:
    name: str = "unnamed"
    network: str = "testnet"
    seed: int = 1
    duration: float = 3600.0
    # topology
    full_nodes: int = 12
    degree: int = 4
    topology_seed: int | None = None
    hop_latency: float = 0.1
    block_interval: float = 600.0
    # economy
    faucets: int = 6
    miner_rate: int = 0
    genesis_funds: int = 60_000_000
    harvest_times: tuple[float, ...] = ()
    harvest_rotate: bool = True
    # operator
    quota_target: int = 20
    quota_low_water: int = 10
    initial_funding: int = 10_000
    sign_downlinks: bool = True
    botnet_key: str = ""          # hex; empty = generate from seed
    rsa_private: dict[str, str] = field(default_factory=dict)
    # bots
    bots: int = 5
    bot_join_start: float = 5.0
    bot_join_interval: float = 1.0
    registration_timeout: float = 600.0
    poll_interval: float = 60.0
    # adversary
    drain_adversary: bool = False
    drain_start: float = 60.0
    drain_interval: float = 120.0
    drain_max_spends: int = 0     # 0 = unlimited
    # schedule
    commands: list[CommandEvent] = field(default_factory=list)


def _parse_int(key: str, raw: str) -> int:
    try:
        return int(raw, 0)
    except ValueError:
        raise ScenarioError(f"{key}: expected an integer, got {raw!r}") from None


def _parse_float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ScenarioError(f"{key}: expected a number, got {raw!r}") from None


def _parse_bool(key: str, raw: str) -> bool:
    try:
        return _BOOL_WORDS[raw.lower()]
    except KeyError:
        raise ScenarioError(f"{key}: expected true/false, got {raw!r}") from None


def _parse_float_list(key: str, raw: str) -> tuple[float, ...]:
    if not raw.strip():
        return ()
    return tuple(_parse_float(key, part.strip()) for part in raw.split(","))


def _parse_hex(key: str, raw: str, nbytes: int | None = None) -> str:
    try:
        data = bytes.fromhex(raw)
    except ValueError:
        raise ScenarioError(f"{key}: expected hex, got {raw!r}") from None
    if nbytes is not None and len(data) != nbytes:
        raise ScenarioError(f"{key}: expected {nbytes} hex-encoded bytes")
    return raw.lower()


_RSA_FIELDS = ("rsa_n", "rsa_e", "rsa_d", "rsa_p", "rsa_q")

# key -> (attribute, parser); parsers take (key, raw_value)
_SCALAR_KEYS = {
    "name": ("name", lambda k, v: v),
    "network": ("network", lambda k, v: v),
    "seed": ("seed", _parse_int),
    "duration": ("duration", _parse_float),
    "full_nodes": ("full_nodes", _parse_int),
    "degree": ("degree", _parse_int),
    "topology_seed": ("topology_seed", _parse_int),
    "hop_latency": ("hop_latency", _parse_float),
    "block_interval": ("block_interval", _parse_float),
    "faucets": ("faucets", _parse_int),
    "miner_rate": ("miner_rate", _parse_int),
    "genesis_funds": ("genesis_funds", _parse_int),
    "harvest_times": ("harvest_times", _parse_float_list),
    "harvest_rotate": ("harvest_rotate", _parse_bool),
    "quota_target": ("quota_target", _parse_int),
    "quota_low_water": ("quota_low_water", _parse_int),
    "initial_funding": ("initial_funding", _parse_int),
    "sign_downlinks": ("sign_downlinks", _parse_bool),
    "botnet_key": ("botnet_key",
                   lambda k, v: _parse_hex(k, v, ce.SYMMETRIC_KEY_LEN)),
    "bots": ("bots", _parse_int),
    "bot_join_start": ("bot_join_start", _parse_float),
    "bot_join_interval": ("bot_join_interval", _parse_float),
    "registration_timeout": ("registration_timeout", _parse_float),
    "poll_interval": ("poll_interval", _parse_float),
    "drain_adversary": ("drain_adversary", _parse_bool),
    "drain_start": ("drain_start", _parse_float),
    "drain_interval": ("drain_interval", _parse_float),
    "drain_max_spends": ("drain_max_spends", _parse_int),
}


def _parse_command(key: str, raw: str) -> CommandEvent:
    # arg comes last and is kept verbatim, so shell pipelines survive
    fields = [part.strip() for part in raw.split("|", 6)]
    if len(fields) < 7:
        raise ScenarioError(
            f"{key}: expected 'at | kind | output_size | duration | "
            f"interval | iterations | arg', got {len(fields)} fields")
    at = _parse_float(key, fields[0])
    kind = fields[1]
    if kind not in COMMAND_KINDS:
        raise ScenarioError(f"{key}: unknown command kind {kind!r}")
    output_size = _parse_int(key, fields[2])
    if not 0 <= output_size <= wf.MAX_PAYLOAD_BYTES:
        raise ScenarioError(f"{key}: output_size outside 0..{wf.MAX_PAYLOAD_BYTES}")
    duration = _parse_float(key, fields[3])
    interval = None if fields[4] == "-" else _parse_float(key, fields[4])
    iterations = None if fields[5] == "-" else _parse_int(key, fields[5])
    arg = fields[6]
    if not arg:
        raise ScenarioError(f"{key}: empty arg")
    if kind == "script":
        size = _parse_int(key, arg)
        if not 0 < size <= wf.MAX_PAYLOAD_BYTES:
            raise ScenarioError(f"{key}: script size outside 1..{wf.MAX_PAYLOAD_BYTES}")
    elif kind == "hardcoded":
        mnemonic = arg.split(None, 1)[0]
        if mnemonic not in wf.HARDCODED_MNEMONICS:
            raise ScenarioError(f"{key}: {mnemonic!r} is not a hardcoded command")
    else:
        try:
            wf.Command.shell(arg.encode("utf-8"))
        except wf.WireError as exc:
            raise ScenarioError(f"{key}: {exc}") from None
    return CommandEvent(at=at, kind=kind, arg=arg, output_size=output_size,
                        duration=duration, repeat_interval=interval,
                        repeat_iterations=iterations)


def parse_scenario(text: str) -> Scenario:
    scenario = Scenario()
    commands: list[tuple[int, CommandEvent]] = []
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ScenarioError(f"line {lineno}: expected 'key = value'")
        key, _, raw = body.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key in seen:
            raise ScenarioError(f"{key}: duplicate key")
        seen.add(key)
        match = _COMMAND_KEY.match(key)
        if match:
            commands.append((int(match.group(1)), _parse_command(key, raw)))
            continue
        if key in _RSA_FIELDS:
            scenario.rsa_private[key] = _parse_hex(key, raw)
            continue
        if key not in _SCALAR_KEYS:
            raise ScenarioError(f"{key}: unknown key")
        attr, parser = _SCALAR_KEYS[key]
        setattr(scenario, attr, parser(key, raw))

    if scenario.network not in ("mainnet", "testnet"):
        raise ScenarioError(f"network: unknown profile {scenario.network!r}")
    if scenario.full_nodes < 3:
        raise ScenarioError("full_nodes: need at least 3 nodes")
    if not 2 <= scenario.degree < scenario.full_nodes:
        raise ScenarioError("degree: must be >= 2 and below full_nodes")
    if scenario.full_nodes * scenario.degree % 2:
        raise ScenarioError("degree: full_nodes * degree must be even")
    if scenario.rsa_private and set(scenario.rsa_private) != set(_RSA_FIELDS):
        missing = sorted(set(_RSA_FIELDS) - set(scenario.rsa_private))
        raise ScenarioError(f"{missing[0]}: incomplete private key material")
    commands.sort(key=lambda pair: (pair[1].at, pair[0]))
    scenario.commands = [event for _, event in commands]
    return scenario


def load_scenario(path: str) -> Scenario:
    with open(path, encoding="utf-8") as handle:
        return parse_scenario(handle.read())


def list_bundled() -> list[str]:
    root = resources.files(__package__) / "scenarios"
    return sorted(entry.name.removesuffix(".scenario")
                  for entry in root.iterdir()
                  if entry.name.endswith(".scenario"))


def load_bundled(name: str) -> Scenario:
    ref = resources.files(__package__) / "scenarios" / f"{name}.scenario"
    if not ref.is_file():
        raise ScenarioError(
            f"no bundled scenario {name!r} (have: {', '.join(list_bundled())})")
    return parse_scenario(ref.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# key material files


def format_keys(botmaster: Botmaster) -> str:
    """Operator key material as flat hex key=value text."""
    lines = [f"botnet_key = {botmaster.botnet_key.hex()}"]
    for name, value in sorted(botmaster.keys.private.to_config().items()):
        lines.append(f"{name} = {value}")
    lines.append(f"shared_address = "
                 f"{script_to_address(botmaster.shared_script)}")
    for script, entry in sorted(botmaster.registry.items()):
        lines.append(f"bot_key.{script_to_address(script)} = "
                     f"{entry.bot_key.hex()}")
    return "\n".join(lines) + "\n"


def parse_keys(text: str) -> dict[str, str]:
    fields: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ScenarioError(f"line {lineno}: expected 'key = value'")
        key, _, raw = body.partition("=")
        fields[key.strip()] = raw.strip()
    return fields


# ---------------------------------------------------------------------------
# runner


@dataclass
class RunResult:
    scenario: Scenario
    seed: int
    profile: NetworkProfile
    world: World
    botmaster: Botmaster
    bots: list[Bot]
    ledger: FeeLedger
    drain: DrainAdversary | None

    def event_log(self) -> str:
        return self.world.event_log()

    def chain_dump(self) -> str:
        return self.world.chain_dump()


def _spec_fields(event: CommandEvent) -> dict:
    return dict(output_size=event.output_size, duration=event.duration,
                repeat_interval=event.repeat_interval,
                repeat_iterations=event.repeat_iterations)


def _fire_command(botmaster: Botmaster, event: CommandEvent,
                  rng: Random) -> None:
    if event.kind == "script":
        code = rng.randbytes(int(event.arg))
        botmaster.issue_script_command(code, _spec_fields(event))
        return
    if event.kind == "hardcoded":
        parts = event.arg.split(None, 1)
        args = parts[1].encode("utf-8") if len(parts) > 1 else b""
        command = wf.Command.hardcoded(parts[0], args)
    else:
        command = wf.Command.shell(event.arg.encode("utf-8"))
    botmaster.issue_command(SimCommandSpec(command=command,
                                           **_spec_fields(event)))


def run_scenario(scenario: Scenario, seed: int | None = None,
                 network: str | None = None) -> RunResult:
    """Execute a scenario to its horizon and verify value conservation."""
    seed = scenario.seed if seed is None else seed
    profile_name = network or scenario.network
    try:
        profile = profile_by_name(profile_name)
    except ValueError:
        raise ScenarioError(f"network: unknown profile {profile_name!r}") from None

    master = Random(seed)
    topo_seed = master.getrandbits(64)
    if scenario.topology_seed is not None:
        topo_seed = scenario.topology_seed
    world = World(profile, Random(topo_seed),
                  n_full_nodes=scenario.full_nodes,
                  degree=scenario.degree,
                  hop_latency=scenario.hop_latency,
                  block_interval=scenario.block_interval,
                  faucet_count=scenario.faucets)

    keys = None
    if scenario.rsa_private:
        keys = ce.BotmasterKeys(ce.RsaPrivateKey.from_config(scenario.rsa_private))
    botnet_key = None
    if scenario.botnet_key:
        botnet_key = ce.BotnetKey.from_hex(scenario.botnet_key)

    ledger = FeeLedger()
    behaviors: dict[bytes, SimCommandSpec] = {}
    botmaster = Botmaster(world, Random(master.getrandbits(64)), ledger,
                          behaviors,
                          initial_funding=scenario.initial_funding,
                          quota_low_water=scenario.quota_low_water,
                          quota_target=scenario.quota_target,
                          sign_downlinks=scenario.sign_downlinks,
                          keys=keys, botnet_key=botnet_key)
    if scenario.miner_rate:
        world.miner_rate = scenario.miner_rate
        world.miner_payout_script = botmaster.wallet.new_script()
    world.genesis([(botmaster.wallet.new_script(), scenario.genesis_funds)])
    botmaster.bootstrap()
    for at in scenario.harvest_times:
        world.schedule(at, lambda: botmaster.harvest_faucets(
            rotate_identities=scenario.harvest_rotate))

    bots = []
    for i in range(scenario.bots):
        bot = Bot(f"bot{i:03d}", world, Random(master.getrandbits(64)),
                  ledger, behaviors, botmaster.shared_script,
                  botmaster.botnet_key, botmaster.keys.public,
                  registration_timeout=scenario.registration_timeout,
                  poll_interval=scenario.poll_interval,
                  sign_required=scenario.sign_downlinks)
        world.schedule(scenario.bot_join_start + i * scenario.bot_join_interval,
                       bot.begin)
        bots.append(bot)

    drain = None
    if scenario.drain_adversary:
        drain = DrainAdversary(world, Random(master.getrandbits(64)),
                               botmaster.shared_script,
                               interval=scenario.drain_interval,
                               max_spends=scenario.drain_max_spends or None)
        world.schedule(scenario.drain_start, drain.begin)

    command_rng = Random(master.getrandbits(64))
    for event in scenario.commands:
        world.schedule(event.at,
                       lambda e=event: _fire_command(botmaster, e, command_rng))

    world.run_until(scenario.duration)
    world.check_soundness()
    return RunResult(scenario=scenario, seed=seed, profile=profile,
                     world=world, botmaster=botmaster, bots=bots,
                     ledger=ledger, drain=drain)
