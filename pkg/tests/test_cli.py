import json
import subprocess
import sys

import pytest

from mmaf_lab.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main

SMALL = ["--samples", "60"]


@pytest.fixture
def config(tmp_path):
    f = tmp_path / "scenario.yaml"
    f.write_text(
        "scenario: three_blocks\nmasses: [0.2, 0.3, 0.5]\ng: [0.0, 0.4, 0.8]\n"
        "dt: 0.01\nT: 1.0\nN: 40\nseed: 5\nladder: [1, 4]\nexport_paths: 1\nmax_draws: 300\n"
    )
    return f


def outputs(d):
    """File bytes, minus run timing and the echoed output directory (which differ by design)."""
    files = {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != "run_meta.json"}
    echo = json.loads(files.pop("config.resolved.json"))
    echo.pop("out")
    return files, echo


@pytest.mark.parametrize("command", ["simulate", "directions", "condition", "bridge"])
def test_commands_run(tmp_path, config, command, capsys):
    out = tmp_path / command
    args = [command, "--config", str(config), "--out", str(out), "--workers", "1"]
    if command == "condition":
        args += ["--eps", "1.0"]
    assert main(args) == EXIT_OK
    assert (out / "config.resolved.json").exists()
    assert (out / "reports.json").exists()
    meta = json.loads((out / "run_meta.json").read_text())
    assert meta["command"] == command and meta["exit_code"] == 0
    printed = capsys.readouterr().out
    assert "PASS" in printed or "FAIL" in printed


def test_outputs_identical_across_worker_counts(tmp_path, config):
    a, b = tmp_path / "a", tmp_path / "b"
    base = ["simulate", "--config", str(config), *SMALL, "--samples", "150"]
    assert main([*base, "--out", str(a), "--workers", "1"]) == EXIT_OK
    assert main([*base, "--out", str(b), "--workers", "2"]) == EXIT_OK
    assert outputs(a) == outputs(b)


def test_config_echo_and_flag_precedence(tmp_path, config):
    out = tmp_path / "echo"
    assert main(["bridge", "--config", str(config), "--out", str(out), "--seed", "11", "--z0", "0.5",
                 "--workers", "1"]) == EXIT_OK
    echo = json.loads((out / "config.resolved.json").read_text())
    assert echo["seed"] == 11 and echo["z0"] == 0.5 and echo["N"] == 40
    assert echo["coal_deadline"] == pytest.approx(0.8)
    assert "workers" not in echo


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("masses: [0.5, 0.6]\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert "masses" in capsys.readouterr().err


def test_bridge_needs_unit_horizon(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("T: 2.0\ndt: 0.01\n")
    assert main(["bridge", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_io_error_exit_code(tmp_path, config):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    assert main(["simulate", "--config", str(config), "--out", str(blocker / "sub")]) == EXIT_IO


def test_verify_list(capsys):
    assert main(["verify", "--list"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 11 and lines[0].startswith("[1]")


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "mmaf_lab", "verify", "--list"], capture_output=True, text=True)
    assert r.returncode == 0 and "[11]" in r.stdout
