import json

import pytest
import yaml

from ionmux.cli import run
from ionmux.config import parse_quantity, resolve_config
from ionmux.errors import ConfigError


def test_parse_quantity():
    assert parse_quantity("13 ns", "time", "k") == pytest.approx(13e-9)
    assert parse_quantity("650 us", "time", "k") == pytest.approx(650e-6)
    assert parse_quantity("12 km", "length", "k") == pytest.approx(12000.0)
    assert parse_quantity("2.0e8 m/s", "speed", "k") == pytest.approx(2.0e8)
    assert parse_quantity("inf", "time", "k") == float("inf")
    with pytest.raises(ConfigError):
        parse_quantity(13, "time", "k")          # unit-less number
    with pytest.raises(ConfigError):
        parse_quantity("13 lightyears", "length", "k")


def test_unknown_key_diagnostic():
    with pytest.raises(ConfigError, match="scenario.link.bogus"):
        resolve_config(preset="3m", overrides=["scenario.link.bogus=1"])


def test_override_and_roundtrip():
    cfg = resolve_config(preset="1km",
                         overrides=["scenario.strategy.pulses=6",
                                    "scenario.strategy.pump_after=[3]"])
    spec = cfg.protocol_spec()
    assert spec.per_ion_strategy.pulse_count == 6
    assert spec.per_ion_strategy.pump_after == frozenset({3})
    # canonical form re-parses to the same resolved tree
    dumped = yaml.safe_load(cfg.serialize())
    cfg2 = resolve_config(overrides=[], config_path=None)
    from ionmux.config import _SCHEMA, _resolve_tree
    assert _resolve_tree(_SCHEMA, dumped) == cfg.resolved


def test_config_file_with_preset_base(tmp_path):
    cfile = tmp_path / "run.yaml"
    cfile.write_text("preset: 3m\nscenario:\n  strategy:\n    pulses: 4\n")
    cfg = resolve_config(config_path=str(cfile))
    assert cfg.protocol_spec().per_ion_strategy.pulse_count == 4


def test_cli_protocol_deterministic(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert run(["protocol", "--preset", "1km", "--out", str(out),
                    "--seed", "7"]) == 0
    f1 = (out1 / "protocol_1km.csv").read_bytes()
    f2 = (out2 / "protocol_1km.csv").read_bytes()
    assert f1 == f2
    assert b"\r" not in f1
    text = f1.decode()
    assert text.startswith("# provenance: ")
    prov = json.loads(text.splitlines()[0].split(": ", 1)[1])
    assert prov["seed"] == 7
    assert len(prov["config_sha256"]) == 64


def test_cli_json_format(tmp_path):
    assert run(["protocol", "--preset", "3m", "--out", str(tmp_path),
                "--format", "json"]) == 0
    doc = json.loads((tmp_path / "protocol_3m.json").read_text())
    assert doc["scenario"] == "3m"
    assert doc["mode_count"] == 8
    assert "provenance" in doc


def test_cli_branching_ratio_and_plot(tmp_path):
    assert run(["branching-ratio", "--strategy", "every", "--n", "30",
                "--out", str(tmp_path), "--plot"]) == 0
    assert (tmp_path / "branching_ratio.csv").is_file()
    assert (tmp_path / "branching_ratio.png").stat().st_size > 0


def test_cli_enhance(tmp_path):
    assert run(["enhance", "--preset", "fig1c", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "enhancement.csv").read_text().splitlines()
    assert lines[1] == "N,M,t_eff_s"
    first = lines[2].split(",")
    assert first[0] == "1" and float(first[1]) == pytest.approx(1.0)


def test_cli_optimize(tmp_path):
    assert run(["optimize", "--n", "10", "--out", str(tmp_path),
                "--format", "json"]) == 0
    doc = json.loads((tmp_path / "optimize.json").read_text())
    assert doc["best_pump_after"] == list(range(1, 10))


def test_cli_bsm_and_sweep(tmp_path):
    assert run(["bsm", "--preset", "bsm-1km", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "bsm_sweep.csv").is_file()
    assert run(["bsm", "--preset", "bsm-1km", "--windows",
                "--out", str(tmp_path)]) == 0
    assert (tmp_path / "bsm_windows.csv").is_file()
    assert run(["sweep", "--preset", "fig1c", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "sweep.csv").is_file()


def test_cli_error_is_machine_readable(tmp_path, capsys):
    code = run(["protocol", "--preset", "nope", "--out", str(tmp_path)])
    assert code == 2
    err = capsys.readouterr().err
    record = json.loads(err.strip())
    assert record["error"]["kind"] == "ConfigError"


def test_number_formatting():
    from ionmux.report import format_number
    assert format_number(0.1) == "0.1"
    assert format_number(1 / 3) == "0.333333333333"
    assert format_number(42) == "42"
    assert format_number(1.5e-9) == "1.5e-09"
