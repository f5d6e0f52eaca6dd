"""Scenario parsing, bundled scenarios, the runner, and key files."""

import pytest

from testnetcc import scenario as sce


BASE = """
name = parse-check
seed = 42
duration = 1200
full_nodes = 10
degree = 4
bots = 3
"""


class TestParsing:
    def test_scalar_keys_round_trip(self):
        s = sce.parse_scenario(BASE)
        assert s.name == "parse-check"
        assert s.seed == 42
        assert s.duration == 1200
        assert s.full_nodes == 10
        assert s.bots == 3
        # untouched keys keep their defaults
        assert s.network == "testnet"
        assert s.quota_target == 20

    def test_comments_and_blanks_ignored(self):
        s = sce.parse_scenario("# header\n\nname = x  # trailing\nseed = 9\n")
        assert s.name == "x"
        assert s.seed == 9

    def test_unknown_key_names_the_key(self):
        with pytest.raises(sce.ScenarioError, match="frobnicate"):
            sce.parse_scenario(BASE + "frobnicate = 1\n")

    def test_duplicate_key_names_the_key(self):
        with pytest.raises(sce.ScenarioError, match="seed"):
            sce.parse_scenario(BASE + "seed = 43\n")

    def test_bad_value_reports_line(self):
        with pytest.raises(sce.ScenarioError, match="seed"):
            sce.parse_scenario("name = x\nseed = banana\n")

    def test_topology_feasibility_checked(self):
        with pytest.raises(sce.ScenarioError, match="degree"):
            sce.parse_scenario("name = x\nfull_nodes = 4\ndegree = 5\n")

    def test_missing_equals_sign(self):
        with pytest.raises(sce.ScenarioError, match="line 2"):
            sce.parse_scenario("name = x\njust words\n")


class TestCommandLines:
    def test_shell_arg_keeps_pipes(self):
        s = sce.parse_scenario(
            BASE + "command1 = 60 | shell | 256 | 2.0 | - | - | "
                   "cat /etc/passwd | wc -l\n")
        (cmd,) = s.commands
        assert cmd.kind == "shell"
        assert cmd.arg == "cat /etc/passwd | wc -l"
        assert cmd.at == 60
        assert cmd.output_size == 256
        assert cmd.duration == 2.0
        assert cmd.repeat_interval is None
        assert cmd.repeat_iterations is None

    def test_repeat_fields(self):
        s = sce.parse_scenario(
            BASE + "command1 = 60 | hardcoded | 0 | 1 | 300 | 4 | "
                   "dos 198.51.100.7\n")
        (cmd,) = s.commands
        assert cmd.repeat_interval == 300
        assert cmd.repeat_iterations == 4

    def test_script_arg_is_code_size(self):
        s = sce.parse_scenario(
            BASE + "command1 = 60 | script | 1024 | 1 | - | - | 112\n")
        assert s.commands[0].arg == "112"

    def test_bad_kind_rejected(self):
        with pytest.raises(sce.ScenarioError, match="command1"):
            sce.parse_scenario(
                BASE + "command1 = 60 | teleport | 0 | 1 | - | - | x\n")

    def test_oversize_output_rejected_at_parse(self):
        with pytest.raises(sce.ScenarioError, match="command1"):
            sce.parse_scenario(
                BASE + "command1 = 60 | shell | 99999999 | 1 | - | - | ls\n")

    def test_too_few_fields_rejected(self):
        with pytest.raises(sce.ScenarioError, match="command1"):
            sce.parse_scenario(BASE + "command1 = 60 | shell | 256\n")

    def test_commands_sorted_by_index(self):
        s = sce.parse_scenario(
            BASE
            + "command2 = 120 | hardcoded | 0 | 1 | - | - | stp\n"
            + "command1 = 60 | shell | 64 | 1 | - | - | id\n")
        assert [c.at for c in s.commands] == [60, 120]


class TestBundled:
    def test_listing(self):
        names = sce.list_bundled()
        assert "smoke" in names
        assert "e2e_script" in names
        assert "contention" in names

    def test_load_each(self):
        for name in sce.list_bundled():
            s = sce.load_bundled(name)
            assert s.bots > 0

    def test_unknown_name(self):
        with pytest.raises(sce.ScenarioError, match="nope"):
            sce.load_bundled("nope")


class TestRunner:
    def test_smoke_run_completes(self):
        result = sce.run_scenario(sce.load_bundled("smoke"))
        assert all(b.phase.value == "active" for b in result.bots)
        assert result.ledger.count("registration") == len(result.bots)
        # both scheduled commands executed on every bot
        for bot in result.bots:
            assert len(bot.executed) == 2

    def test_same_seed_identical_outputs(self):
        a = sce.run_scenario(sce.load_bundled("smoke"))
        b = sce.run_scenario(sce.load_bundled("smoke"))
        assert a.event_log() == b.event_log()
        assert a.chain_dump() == b.chain_dump()

    def test_seed_override_changes_outputs(self):
        a = sce.run_scenario(sce.load_bundled("smoke"))
        b = sce.run_scenario(sce.load_bundled("smoke"), seed=99)
        assert b.seed == 99
        assert a.event_log() != b.event_log()

    def test_soundness_holds_after_run(self):
        result = sce.run_scenario(sce.load_bundled("smoke"))
        result.world.check_soundness()


class TestKeyFiles:
    def test_format_parse_round_trip(self):
        result = sce.run_scenario(sce.load_bundled("smoke"))
        text = sce.format_keys(result.botmaster)
        fields = sce.parse_keys(text)
        bm = result.botmaster
        assert fields["botnet_key"] == bm.botnet_key.hex()
        assert int(fields["rsa_n"], 16) == bm.keys.private.n
        assert int(fields["rsa_e"], 16) == bm.keys.private.e
        # one uplink key per registered bot
        bot_keys = [k for k in fields if k.startswith("bot_key.")]
        assert len(bot_keys) == len(result.bots)

    def test_parse_keys_rejects_bad_line(self):
        with pytest.raises(sce.ScenarioError, match="line 1"):
            sce.parse_keys("no equals here\n")

    def test_rsa_key_survives_config_round_trip(self):
        result = sce.run_scenario(sce.load_bundled("smoke"))
        from testnetcc.cryptoenvelope import RsaPrivateKey
        cfg = result.botmaster.keys.private.to_config()
        back = RsaPrivateKey.from_config(cfg)
        assert back == result.botmaster.keys.private
