"""Rendering primitives and figure output."""

from testnetcc import report as rp
from testnetcc.relaypolicy import TESTNET


class TestTable:
    def test_alignment(self):
        text = rp.render_table(["name", "sats"],
                               [["alpha", "5"], ["b", "12345"]])
        lines = text.splitlines()
        assert lines[0].startswith("name")
        assert lines[1].startswith("----")
        # numeric column right-aligns to its width
        assert lines[2].endswith("    5")
        assert lines[3].endswith("12345")

    def test_no_trailing_whitespace(self):
        text = rp.render_table(["a", "b"], [["x", "1"], ["longer", "2"]])
        assert all(line == line.rstrip() for line in text.splitlines())


class TestRecords:
    def test_header_and_rows(self):
        text = rp.render_records("fee", ["kind", "sats"],
                                 [["funding", 143], ["batch", None]])
        assert text.splitlines() == [
            "# fee|kind|sats",
            "fee|funding|143",
            "fee|batch|-",
        ]

    def test_empty_rows_keep_header(self):
        text = rp.render_records("x", ["a"], [])
        assert text == "# x|a"


class TestCostReport:
    def test_both_forms_agree_on_values(self):
        human, machine = rp.cost_report(10, 10_000, 500, TESTNET)
        assert "campaign|registration|10|" in machine
        assert "throughput|500|500" in machine
        assert "fee schedule (testnet)" in human
        # every schedule row appears in both forms
        for kind in ("quota-batch", "registration", "funding", "response"):
            assert kind in human
            assert f"fee|{kind}|" in machine


class TestFigures:
    def test_fee_figure_deterministic(self, tmp_path):
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        rp.save_fee_figure(str(a), TESTNET)
        rp.save_fee_figure(str(b), TESTNET)
        assert a.stat().st_size > 1_000
        assert a.read_bytes() == b.read_bytes()

    def test_timeline_handles_empty_log(self, tmp_path):
        path = tmp_path / "t.png"
        rp.save_timeline_figure(str(path), "", 5)
        assert path.stat().st_size > 1_000
