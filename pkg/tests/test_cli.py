"""Command-line behavior: artifacts, reports, exit codes."""

import os
import shutil
import subprocess

import pytest

from testnetcc import cli
from testnetcc import scenario as sce
from testnetcc.netsim import SimError

RUN_FILES = ["events.log", "chain.dump", "keys.txt", "report.txt",
             "records.txt"]


def run_cli(*argv):
    return cli.main(list(argv))


@pytest.fixture(scope="module")
def smoke_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("smoke-run")
    assert run_cli("run", "smoke", "--out", str(out)) == 0
    return out


class TestRun:
    def test_writes_all_artifacts(self, smoke_run):
        for name in RUN_FILES + ["ledger.png", "timeline.png"]:
            assert (smoke_run / name).exists(), name

    def test_records_capture_outcome(self, smoke_run):
        records = (smoke_run / "records.txt").read_text()
        assert "run|smoke|testnet|7|" in records
        assert "ledger|registration|5|" in records
        assert records.count("\nbot|") == 5

    def test_no_figures_flag(self, tmp_path):
        out = tmp_path / "bare"
        assert run_cli("run", "smoke", "--out", str(out),
                       "--no-figures") == 0
        assert not list(out.glob("*.png"))
        assert (out / "records.txt").exists()

    def test_same_seed_byte_identical(self, smoke_run, tmp_path):
        again = tmp_path / "again"
        assert run_cli("run", "smoke", "--out", str(again)) == 0
        for name in RUN_FILES:
            assert (again / name).read_bytes() == \
                (smoke_run / name).read_bytes(), name

    def test_seed_override_changes_run(self, smoke_run, tmp_path):
        other = tmp_path / "other"
        assert run_cli("run", "smoke", "--seed", "99",
                       "--out", str(other)) == 0
        assert (other / "events.log").read_bytes() != \
            (smoke_run / "events.log").read_bytes()

    def test_scenario_from_file_path(self, tmp_path):
        path = tmp_path / "tiny.scenario"
        path.write_text("name = tiny\nseed = 3\nduration = 700\n"
                        "full_nodes = 8\ndegree = 3\nbots = 1\n")
        out = tmp_path / "out"
        assert run_cli("run", str(path), "--out", str(out),
                       "--no-figures") == 0
        assert "run|tiny|" in (out / "records.txt").read_text()

    def test_scenario_from_env_dir(self, tmp_path, monkeypatch):
        config = tmp_path / "config"
        config.mkdir()
        (config / "mine.scenario").write_text(
            "name = mine\nseed = 3\nduration = 700\nfull_nodes = 8\n"
            "degree = 3\nbots = 1\n")
        monkeypatch.setenv(cli.SCENARIO_DIR_ENV, str(config))
        out = tmp_path / "out"
        assert run_cli("run", "mine", "--out", str(out),
                       "--no-figures") == 0

    def test_malformed_scenario_names_the_key(self, tmp_path, capsys):
        path = tmp_path / "bad.scenario"
        path.write_text("name = bad\nwarp_speed = 9\n")
        assert run_cli("run", str(path), "--out", str(tmp_path / "o")) == 2
        assert "warp_speed" in capsys.readouterr().err

    def test_unknown_scenario_name(self, tmp_path):
        assert run_cli("run", "missing", "--out", str(tmp_path / "o")) == 2

    def test_invariant_violation_exits_3(self, tmp_path, monkeypatch):
        def boom(*a, **kw):
            raise SimError("value conservation broken")
        monkeypatch.setattr(cli.sc, "run_scenario", boom)
        assert run_cli("run", "smoke", "--out", str(tmp_path / "o")) == 3


class TestAnalyze:
    def test_with_keys_decrypts_and_estimates(self, smoke_run, tmp_path):
        out = tmp_path / "an"
        assert run_cli("analyze", str(smoke_run / "chain.dump"),
                       "--keys", str(smoke_run / "keys.txt"),
                       "--out", str(out)) == 0
        records = (out / "records.txt").read_text()
        assert "estimate|5" in records
        assert records.count("\ncommand|") == 2
        assert (out / "findings.png").exists()

    def test_without_keys_scans_only(self, smoke_run, capsys):
        assert run_cli("analyze", str(smoke_run / "chain.dump")) == 0
        output = capsys.readouterr().out
        assert "finding|" in output
        assert "estimate|" not in output
        assert "command|" not in output

    def test_shared_address_flag_enables_estimate(self, smoke_run, capsys):
        keys = sce.parse_keys((smoke_run / "keys.txt").read_text())
        assert run_cli("analyze", str(smoke_run / "chain.dump"),
                       "--shared-address", keys["shared_address"]) == 0
        assert "estimate|5" in capsys.readouterr().out

    def test_missing_dump_exits_2(self):
        assert run_cli("analyze", "/no/such/dump") == 2

    def test_unusable_keys_exit_2(self, smoke_run, tmp_path, capsys):
        keys = tmp_path / "keys.txt"
        keys.write_text("shared_address = tns1qqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqq\n")
        assert run_cli("analyze", str(smoke_run / "chain.dump"),
                       "--keys", str(keys)) == 2
        assert "botnet_key" in capsys.readouterr().err


class TestCosts:
    def test_stdout_has_both_report_forms(self, capsys):
        assert run_cli("costs") == 0
        output = capsys.readouterr().out
        assert "fee schedule (testnet)" in output
        assert "fee|quota-batch|-|-|431|431" in output
        assert "campaign|registration|1000|393100" in output
        assert "throughput|10000000|10000000" in output

    def test_out_dir_gets_records_and_figure(self, tmp_path):
        out = tmp_path / "costs"
        assert run_cli("costs", "--bots", "50", "--out", str(out)) == 0
        assert "campaign|registration|50|" in \
            (out / "records.txt").read_text()
        assert (out / "fees.png").exists()

    def test_parameters_flow_through(self, capsys):
        assert run_cli("costs", "--bots", "10", "--per-bot", "5000",
                       "--budget", "777") == 0
        output = capsys.readouterr().out
        assert "campaign|funding|10|" in output
        assert "throughput|777|777" in output


class TestDecode:
    def test_registration_from_hex(self, smoke_run, capsys):
        line = (smoke_run / "chain.dump").read_text().splitlines()[3]
        height, txid, tx_hex = line.split()
        assert run_cli("decode", tx_hex, "--network", "mainnet") == 0
        output = capsys.readouterr().out
        assert txid in output
        assert "registration" in output
        assert "rejected" in output

    def test_hex_from_file(self, smoke_run, tmp_path, capsys):
        line = (smoke_run / "chain.dump").read_text().splitlines()[3]
        tx_file = tmp_path / "tx.hex"
        tx_file.write_text(line.split()[2])
        assert run_cli("decode", str(tx_file)) == 0
        assert "decoded|" in capsys.readouterr().out

    def test_bad_hex_exits_2(self):
        assert run_cli("decode", "zznothex") == 2


class TestUsage:
    @pytest.mark.parametrize("argv", [
        [],
        ["teleport"],
        ["costs", "--warp"],
        ["run"],
    ])
    def test_usage_errors_exit_1(self, argv):
        assert run_cli(*argv) == 1

    def test_help_exits_0(self):
        assert run_cli("--help") == 0

    def test_console_script_installed(self):
        exe = shutil.which("testnetcc")
        assert exe, "console script not on PATH"
        proc = subprocess.run([exe, "costs"], capture_output=True, text=True,
                              env={**os.environ})
        assert proc.returncode == 0
        assert "fee|response|" in proc.stdout
