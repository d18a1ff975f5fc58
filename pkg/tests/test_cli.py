import csv
import subprocess
import sys

from automon import CorrectnessError
from automon import cli
from automon.bench import CSV_COLUMNS


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_bench_single_config_to_stdout(capsys):
    code, out, err = run(
        ["bench", "--problem", "round-robin", "--mechanism", "auto", "--threads", "4",
         "--ops", "20", "--runs", "3"],
        capsys,
    )
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert len(rows) == 1
    assert rows[0]["problem"] == "round-robin"
    assert rows[0]["runs"] == "3"
    assert tuple(rows[0]) == CSV_COLUMNS
    assert err  # progress


def test_bench_csv_file_and_repeatable_flags(tmp_path, capsys):
    path = tmp_path / "b.csv"
    code, out, err = run(
        ["bench", "--problem", "h2o", "--problem", "bounded-buffer", "--mechanism", "auto",
         "--mechanism", "explicit", "--threads", "2", "--threads", "4", "--ops", "10",
         "--runs", "1", "--csv", str(path), "-q"],
        capsys,
    )
    assert code == 0
    assert err == ""
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == 8


def test_bench_bad_config_exit_2(capsys):
    code, _, err = run(["bench", "--problem", "h2o", "--threads", "1", "--runs", "1", "-q"], capsys)
    assert code == 2
    assert "h2o" in err


def test_bench_correctness_failure_exit_1(monkeypatch, capsys):
    def broken(*a, **k):
        raise CorrectnessError("digest mismatch")

    monkeypatch.setattr(cli, "run_suite", broken)
    code, _, err = run(["bench", "--problem", "h2o", "--runs", "1", "-q"], capsys)
    assert code == 1
    assert "digest mismatch" in err


def test_verify_pass(capsys):
    code, out, _ = run(["verify", "--scenario", "pbb-two-producers"], capsys)
    assert code == 0
    assert "PASS" in out


def test_verify_random(capsys):
    code, out, _ = run(
        ["verify", "--scenario", "round-robin", "--random", "--seed", "3", "--trials", "20"], capsys
    )
    assert code == 0
    assert "random" in out


def test_verify_mutant_prints_trace(capsys):
    code, out, _ = run(["verify", "--scenario", "pbb-48-16", "--mutant", "no-exit-relay"], capsys)
    assert code == 1
    assert "relay-invariance" in out
    assert "schedule: " in out
    assert "producer   exit" in out


def test_verify_truncated_exit_2(capsys):
    code, out, _ = run(["verify", "--scenario", "round-robin", "--bound", "10"], capsys)
    assert code == 2
    assert "TRUNCATED" in out


def test_verify_list(capsys):
    code, out, _ = run(["verify", "--list"], capsys)
    assert code == 0
    assert "param-bounded-buffer" in out and "round-robin" in out


def test_verify_requires_scenario(capsys):
    code, _, err = run(["verify"], capsys)
    assert code == 2
    assert "--scenario" in err


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "automon", "verify", "--scenario", "two-by-two"],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert res.returncode == 0, res.stderr
    assert "schedules=6" in res.stdout
