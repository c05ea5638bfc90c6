import csv
import io
import json
import subprocess
import sys

import pytest

import mmtrack.cli as cli
import mmtrack.experiments as ex

ARGS = [
    "--n-t", "8", "--n-r", "8", "--g-t", "16", "--g-r", "16", "--gbar-t", "3", "--gbar-r", "3",
    "--blocks", "3", "--realizations", "2", "--m", "4", "6", "--snr-db", "-10", "0",
]  # fmt: skip


def run(argv):
    return cli.main(argv)


def test_run_writes_csv_with_config_echo(tmp_path):
    out = tmp_path / "r.csv"
    assert run(["run", *ARGS, "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# mmtrack ")
    assert lines[1] == "# status: complete"
    cfg = json.loads(lines[2][len("# config: ") :])
    assert cfg["m_values"] == [4, 6] and cfg["blocks"] == 3
    rows = list(csv.DictReader(lines[3:]))
    agg = [r for r in rows if r["block"] == "all"]
    assert len(agg) == 2 * 2 * 3
    assert len(rows) == len(agg) * 4


def test_same_seed_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run([*ARGS, "--out", str(a)]) == 0
    assert run([*ARGS, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_result_file_reproduces_itself(tmp_path, fmt):
    a, b = tmp_path / f"a.{fmt}", tmp_path / f"b.{fmt}"
    assert run([*ARGS, "--seed", "5", "--format", fmt, "--out", str(a)]) == 0
    assert run(["run", "--config", str(a), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_json_format(tmp_path):
    out = tmp_path / "r.json"
    assert run([*ARGS, "--format", "json", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["status"] == "complete" and doc["config"]["format"] == "json"
    assert len(doc["records"]) == 12
    config, status, rows = cli.read_result(str(out))
    assert status == "complete" and len(rows) == 12


def test_bad_config_exit_2(tmp_path, capsys):
    assert run([*ARGS, "--rho", "1.5"]) == 2
    assert "rho" in capsys.readouterr().err
    p = tmp_path / "c.json"
    p.write_text('{"bogus": 1}')
    assert run(["run", "--config", str(p)]) == 2
    assert run(["run", "--config", str(tmp_path / "missing.json")]) == 2


def test_interrupt_leaves_partial_file(tmp_path, monkeypatch, capsys):
    real = ex.RUNNERS["mse"]

    def interrupted(cfg):
        it = real(cfg)
        yield next(it)
        raise KeyboardInterrupt

    monkeypatch.setitem(cli.RUNNERS, "mse", interrupted)
    out = tmp_path / "p.csv"
    assert run([*ARGS, "--out", str(out)]) == 130
    config, status, rows = cli.read_result(str(out))
    assert status == "partial" and len(rows) == 1
    assert not (tmp_path / "p.csv.tmp").exists()


def test_failure_exit_1(tmp_path, monkeypatch, capsys):
    def broken(cfg):
        raise RuntimeError("boom")
        yield

    monkeypatch.setitem(cli.RUNNERS, "mse", broken)
    out = tmp_path / "f.csv"
    assert run([*ARGS, "--out", str(out)]) == 1
    assert "boom" in capsys.readouterr().err
    assert cli.read_result(str(out))[1] == "partial"


def test_plotdata_mse_round_trip(tmp_path):
    res, plot = tmp_path / "r.csv", tmp_path / "p.csv"
    assert run([*ARGS, "--out", str(res)]) == 0
    assert run(["plotdata", str(res), "--out", str(plot)]) == 0
    table = list(csv.DictReader(io.StringIO(plot.read_text())))
    assert list(table[0]) == ["M", "estimator", "scenario", "mse_db"]
    _, _, rows = cli.read_result(str(res))
    means = {(r["m"], r["estimator"], r["scenario"]): r["mse_db"] for r in rows}
    back = {(int(t["M"]), t["estimator"], t["scenario"]): float(t["mse_db"]) for t in table}
    assert back == means


def test_plotdata_rate_columns(tmp_path, capsys):
    res = tmp_path / "r.csv"
    argv = [*ARGS, "--experiment", "rate", "--snr-db", "0", "--train-snr-db", "0", "--out", str(res)]
    assert run(argv) == 0
    capsys.readouterr()
    assert run(["plotdata", str(res)]) == 0
    text = capsys.readouterr().out
    assert text.splitlines()[0] == "snr_db,estimator,M,N,rate"
    assert len(text.splitlines()) == 1 + 2 * 4


def test_plotdata_unreadable(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    assert run(["plotdata", str(p)]) == 1


def test_complexity_summary_printed(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert run([*ARGS, "--experiment", "complexity", "--m", "4", "--snr-db", "0", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "full/alg1" in text and "measured/predicted" in text


def test_stdout_when_no_out(capsys):
    assert run([*ARGS, "--m", "4", "--snr-db", "0"]) == 0
    captured = capsys.readouterr()
    assert captured.out.startswith("# mmtrack ")
    assert "MSE dB" in captured.err


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "mmtrack.cli", "--help"], capture_output=True, text=True, check=True)
    assert "plotdata" in out.stdout


def test_no_command_prints_help(capsys):
    assert run([]) == 2


@pytest.mark.parametrize("flag", ["--delta-deg", "--rho", "--blocks", "--seed", "--format", "--experiment"])
def test_documented_flags_exist(flag):
    assert flag in cli.build_parser()._subparsers._group_actions[0].choices["run"].format_help()
