import json
import subprocess
import sys

import pytest

from tsshuffle import cli

FAST = ["shuffle-table", "martingale-demo", "heat-cross-validate"]


def run_cli(*args, tmp_path=None, config=None):
    argv = list(args)
    if config is not None:
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(config))
        argv += ["--config", str(p)]
    return subprocess.run([sys.executable, "-m", "tsshuffle", *argv], capture_output=True, text=True)


@pytest.mark.parametrize("command", FAST)
def test_commands_pass_and_echo_config(command, tmp_path):
    code = cli.main([command, "--out", str(tmp_path), "--seed", "3"])
    assert code == 0
    text = (tmp_path / f"{command}.csv").read_text()
    cfg = cli.parse_header(text)
    assert cfg["command"] == command and cfg["seed"] == 3
    assert cli.run(cfg)[0] == text


def test_shuffle_table_content(tmp_path):
    assert cli.main(["shuffle-table", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "shuffle-table.csv").read_text().splitlines()
    assert rows[1] == "level,source_block,image_block,inverse_image"
    last = [r.split(",") for r in rows if r.startswith("3,")]
    assert [int(r[2]) for r in last] == [0, 6, 2, 8, 4, 10, 1, 7, 3, 9, 5, 11]


def test_golden_pass_and_mismatch(tmp_path, monkeypatch, capsys):
    assert cli.main(["shuffle-table", "--golden", "--out", str(tmp_path)]) == 0
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"schedule": {"p0": 1.0, "factors": [2, 3]}}))
    assert cli.main(["shuffle-table", "--golden", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    cfg.write_text(json.dumps({"schedule": {"p0": 1.0, "factors": [3, 2]}}))
    assert cli.main(["shuffle-table", "--golden", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    # a corrupted table is caught
    real = cli.cmd_shuffle_table

    def broken(c, seed):
        text, ok = real(c, seed)
        return text.replace("3,1,6,", "3,1,7,"), ok

    monkeypatch.setitem(cli.COMMANDS, "shuffle-table", broken)
    capsys.readouterr()
    assert cli.main(["shuffle-table", "--golden", "--out", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "GoldenMismatch"


def test_invalid_config_exit_one(tmp_path):
    r = run_cli("shuffle-table", tmp_path=tmp_path, config={"schedule": {"factors": [2, 1]}})
    assert r.returncode == 1
    err = json.loads(r.stderr)
    assert err["error"] == "ScheduleError" and err["command"] == "shuffle-table"
    r = run_cli("heat-cross-validate", tmp_path=tmp_path, config={"bogus": 1})
    assert r.returncode == 1
    r = run_cli("heat-cross-validate", tmp_path=tmp_path, config={"params": {"A": -1, "K": 0, "J": 1, "delta": 0.1}})
    assert r.returncode == 1


def test_numeric_failure_exit_two(tmp_path):
    r = run_cli("two-scale-demo", tmp_path=tmp_path, config={"k_min": 4, "k_max": 6, "tol": 1e-12})
    assert r.returncode == 2
    assert json.loads(r.stderr)["error"] == "CheckFailed"
    assert r.stdout.startswith("# config: ")


def test_stdout_default(tmp_path):
    r = run_cli("heat-cross-validate", tmp_path=tmp_path, config={
        "schedule": {"p0": 1.0, "factors": [2, 3]}, "n": 1, "level": 2, "T": [1.0]})
    assert r.returncode == 0
    lines = r.stdout.splitlines()
    assert "cases" not in cli.parse_header(r.stdout)
    assert lines[1] == "factors,n,level,T,max_deviation"
    assert len(lines) == 3


def test_config_for_other_command_rejected(tmp_path):
    r = run_cli("shuffle-table", tmp_path=tmp_path, config={"command": "two-scale-demo"})
    assert r.returncode == 1


def test_seed_changes_random_data(tmp_path):
    a = cli.run(cli.resolve_config("heat-cross-validate", None, 1))[0]
    b = cli.run(cli.resolve_config("heat-cross-validate", None, 2))[0]
    assert a != b
