import csv
import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pytest

from neurorhythm.cli import DEMOS, load_config, main, parse_values
from neurorhythm.errors import ConfigError


def run_cli(*argv):
    return main([str(a) for a in argv])


def write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


SMALL = """
name = "small"

[network]
preset = "oscillator-1hz"

[simulation]
duration = 4000.0

[analysis]
warmup = 1000.0
portrait = true

[outputs]
rates = true
"""


def test_run_writes_outputs_and_manifest(tmp_path, capsys):
    cfg = write(tmp_path / "small.toml", SMALL)
    out = tmp_path / "out"
    assert run_cli("run", cfg, "--out", out) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["config.resolved.toml", "manifest.json", "metrics.json", "portrait.csv", "rates.csv", "spikes.csv"]
    man = json.loads((out / "manifest.json").read_text())
    for name, digest in man["files"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    assert man["seed"] == 1 and man["config"]["network"]["spec"]
    metrics = json.loads((out / "metrics.json").read_text())
    assert 0.7 < metrics["oscillation"]["freq"] < 1.3
    assert "small: freq" in capsys.readouterr().out


def test_rerun_is_byte_identical(tmp_path):
    cfg = write(tmp_path / "small.toml", SMALL)
    for d in ("a", "b"):
        assert run_cli("run", cfg, "--out", tmp_path / d) == 0
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_analyze_reproduces_run_metrics(tmp_path):
    cfg = write(tmp_path / "small.toml", SMALL)
    assert run_cli("run", cfg, "--out", tmp_path / "run") == 0
    assert run_cli("analyze", tmp_path / "run" / "spikes.csv", "--config", cfg, "--out", tmp_path / "re") == 0
    assert (tmp_path / "re" / "metrics.json").read_bytes() == (tmp_path / "run" / "metrics.json").read_bytes()


def test_seed_and_dt_overrides(tmp_path):
    cfg = write(tmp_path / "small.toml", SMALL)
    assert run_cli("--seed", 9, "run", cfg, "--dt", 0.05, "--out", tmp_path / "o") == 0
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["seed"] == 9 and man["trial_seed"] == 9
    assert man["config"]["simulation"]["dt"] == 0.05


def test_unknown_key_fails_without_outputs(tmp_path, capsys):
    cfg = write(tmp_path / "bad.toml", SMALL + "\n[extra]\nx = 1\n")
    out = tmp_path / "out"
    assert run_cli("run", cfg, "--out", out) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error: ConfigError:") and "extra" in err[0]
    assert not out.exists()


@pytest.mark.parametrize(
    "body,needle",
    [
        ("[network]\npreset = 'oscillator-1hz'\nfile = 'x.toml'\n", "exactly one"),
        ("[network]\npreset = 'nope'\n", "unknown preset"),
        ("[network]\npreset = 'oscillator-1hz'\n[simulation]\ndt = 'fast'\n", "dt"),
        ("[network]\npreset = 'oscillator-1hz'\nparams = {volts = 1}\n", "volts"),
        ("[network\n", "TOML"),
    ],
)
def test_config_errors(tmp_path, body, needle):
    cfg = write(tmp_path / "c.toml", body)
    with pytest.raises(ConfigError, match=needle):
        load_config(str(cfg))


def test_empty_spike_file_reports_insufficient_cycles(tmp_path, capsys):
    spikes = write(tmp_path / "s.csv", "t_ms,population,neuron\n")
    assert run_cli("analyze", spikes, "--out", tmp_path / "o") == 4
    assert "insufficient cycles" in capsys.readouterr().err


def test_malformed_spike_file_names_line(tmp_path, capsys):
    spikes = write(tmp_path / "s.csv", "t_ms,population,neuron\n1.0,P1_E,0\n2.0,P1_E\n")
    assert run_cli("analyze", spikes, "--out", tmp_path / "o") == 2
    assert "line 3" in capsys.readouterr().err
    assert run_cli("analyze", tmp_path / "missing.csv") == 2


def test_analyze_synthetic_four_cycles(tmp_path):
    rows = ["t_ms,population,neuron"]
    ev = []
    for t in (100.0, 1100.0, 2120.0, 3100.0, 4090.0):
        for lab, off in (("P1_E", 0.0), ("P2_E", 300.0), ("P3_E", 650.0)):
            ev += [(t + off + 10.0 * k, lab, k % 2) for k in range(4)]
    rows += [f"{t:.6f},{p},{i}" for t, p, i in sorted(ev)]
    spikes = write(tmp_path / "s.csv", "\n".join(rows) + "\n")
    assert run_cli("analyze", spikes, "--out", tmp_path / "o") == 0
    osc = json.loads((tmp_path / "o" / "metrics.json").read_text())["oscillation"]
    assert osc["period"] == pytest.approx(995.0)
    assert osc["offsets"] == pytest.approx([300.0, 650.0])
    assert osc["n_cycles"] == 4
    assert not (tmp_path / "o" / "config.resolved.toml").exists()


def test_sweep_single_value_and_silent_row(tmp_path):
    cfg = write(tmp_path / "small.toml", SMALL)
    out = tmp_path / "sw"
    assert run_cli("sweep", cfg, "--param", "network.params.drive", "--values", "350,0", "--out", out) == 0
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["network.params.drive"] for r in rows] == ["0", "350"]
    assert rows[0]["status"] == "no oscillation" and rows[0]["freq_hz"] == ""
    assert rows[1]["status"] == "ok" and 0.7 < float(rows[1]["freq_hz"]) < 1.3
    assert (out / "row_001" / "metrics.json").exists() and not (out / "row_000").exists()
    man = json.loads((out / "manifest.json").read_text())
    assert man["params"] == ["network.params.drive"]
    assert "sweep.csv" in man["files"]


def test_sweep_rejects_unresolvable_param(tmp_path, capsys):
    cfg = write(tmp_path / "small.toml", SMALL)
    assert run_cli("sweep", cfg, "--param", "network.params.voltage", "--values", "1", "--out", tmp_path / "o") == 2
    assert "voltage" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_parse_values():
    assert parse_values("1, 2.5", 1) == [(1,), (2.5,)]
    assert parse_values("1:2,3:4", 2) == [(1, 2), (3, 4)]
    for bad, n in (("1:2", 1), ("x", 1), ("", 1), ("inf", 1)):
        with pytest.raises(ConfigError):
            parse_values(bad, n)


def test_demos_are_bundled_and_valid():
    for name in DEMOS:
        cfg = load_config(f"demo/{name}")
        assert cfg.simulation.duration > cfg.analysis.warmup


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "neurorhythm.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("neurorhythm ")
    proc = subprocess.run([sys.executable, "-m", "neurorhythm.cli", "demo", "nope", "--out", str(tmp_path / "x")],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and proc.stderr.startswith("error: ConfigError:")
