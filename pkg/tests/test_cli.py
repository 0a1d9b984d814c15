import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from heatbridge import cli

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
CONST = str(CONFIGS / "potentials" / "const.json")
BALL = '{"type": "indicator_ball", "dim": 3, "coeff": -1.0, "radius": 1.0}'


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_functional_S_constant(capsys):
    code, out, _ = run(["functional", "--which", "S", "--potential", CONST, "--t", "1.5",
                        "--x", "0,0,0", "--y", "1,0,0"], capsys)
    assert code == cli.EXIT_OK
    assert json.loads(out)["result"]["value"] == 3.0


def test_inline_potential_and_csv(capsys):
    code, out, _ = run(["functional", "--which", "newtonian", "--potential", BALL, "--x", "0,0,0",
                        "--format", "csv"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 1 and rows[0]["x"] == "0,0,0"
    assert float(rows[0]["value"]) == pytest.approx(0.5, rel=1e-8)


def test_kernel_values(capsys):
    code, out, _ = run(["kernel", "--which", "K", "--x", "1,0,0,0", "--y", "0,1,0,0"], capsys)
    assert code == 0 and json.loads(out)["value"] == pytest.approx(math.sqrt(2) * math.exp(-0.5), rel=1e-14)
    code, out, _ = run(["kernel", "--which", "bessel", "--nu", "0.5", "--r", "1"], capsys)
    assert json.loads(out)["value"] == pytest.approx(math.sqrt(math.pi / 2) / math.e, rel=1e-14)


def test_constants(capsys):
    code, out, _ = run(["constants", "--d", "3", "--p", "1,inf"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["C_d"] == pytest.approx(1 / (4 * math.pi)) and doc["kappa_d"] is None


@pytest.mark.parametrize("argv", [
    ["functional", "--which", "S", "--potential", CONST, "--t", "1", "--x", "0,0", "--y", "0,0,0"],
    ["functional", "--which", "S", "--potential", '{"type": "constant", "dim": 3}', "--t", "1",
     "--x", "0,0,0", "--y", "0,0,0"],
    ["functional", "--which", "S", "--potential", CONST, "--t", "-1", "--x", "0,0,0", "--y", "0,0,0"],
    ["functional", "--which", "S", "--potential", CONST, "--x", "0,0,0", "--y", "0,0,0"],
    ["functional", "--which", "nope"],
    ["constants", "--d", "3", "--p", "0.5"],
    ["verify", "--suite", "nonsense"],
    ["mc", "--which", "fk", "--potential", BALL, "--t", "1", "--x", "0,0,0", "--y", "0,0,0",
     "--steps", "100"],
])
def test_configuration_errors_exit_2(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == cli.EXIT_CONFIG
    assert err


def test_config_file_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"command": "constants", "params": {"d": 3}, "colour": "red"}))
    code, _, err = run(["constants", "--config", str(cfg)], capsys)
    assert code == 2 and "colour" in err
    cfg.write_text(json.dumps({"params": {"d": 3, "depth": 1}}))
    assert run(["constants", "--config", str(cfg)], capsys)[0] == 2


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"potential": json.loads(BALL), "params": {"which": "S", "t": 1.0,
                                                                       "x": [0, 0, 0], "y": [0, 0, 0]}}))
    code, out, _ = run(["functional", "--config", str(cfg)], capsys)
    assert code == 0
    v1 = json.loads(out)["result"]["value"]
    code, out, _ = run(["functional", "--config", str(cfg), "--t", "2"], capsys)
    assert json.loads(out)["t"] == 2.0 and json.loads(out)["result"]["value"] > v1


def test_output_written_atomically(tmp_path, capsys):
    target = tmp_path / "sub" / "out.json"
    code, out, _ = run(["constants", "--d", "3", "-o", str(target)], capsys)
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["d"] == 3
    assert [p.name for p in target.parent.iterdir()] == ["out.json"]


def test_mc_deterministic_and_thread_invariant(capsys):
    base = ["mc", "--which", "fk", "--potential", BALL, "--t", "1", "--x", "0,0,0", "--y", "0,0,0",
            "--samples", "2000", "--steps", "32", "--seed", "3"]
    a = run(base, capsys)[1]
    b = run(base + ["--threads", "3"], capsys)[1]
    assert json.loads(a)["estimate"] == json.loads(b)["estimate"]


def test_sup_needs_time(capsys):
    assert run(["sup", "--which", "S", "--potential", BALL], capsys)[0] == 2


def test_sup_S_constant(capsys):
    code, out, _ = run(["sup", "--which", "S", "--potential", CONST, "--t", "2", "--n-starts", "2",
                        "--max-evals", "10"], capsys)
    assert code == 0 and json.loads(out)["search"]["sup_estimate"] == 4.0


def test_verify_exit_codes(capsys):
    code, out, _ = run(["verify", "--suite", "identities", "--no-timestamp"], capsys)
    doc = json.loads(out)
    assert doc["status"] in ("pass", "fail")
    assert code == (0 if doc["status"] == "pass" else 1)
    assert "timestamp" not in doc


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "heatbridge.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("heatbridge ")


@pytest.mark.parametrize("name", ["functional_S", "mc_fk", "sup_S"])
def test_sample_run_configs(name, capsys, monkeypatch):
    monkeypatch.chdir(CONFIGS.parent)
    path = CONFIGS / "runs" / f"{name}.json"
    command = json.loads(path.read_text())["command"]
    code, out, _ = run([command, "--config", str(path)], capsys)
    assert code == 0 and json.loads(out)
