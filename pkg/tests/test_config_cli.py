"""Configuration plumbing, serialized outputs, and the CLI surface."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from ottosim import moments as mo
from ottosim.cli import main as cli_main
from ottosim.config import (apply_override, config_from_dict, config_hash,
                            config_to_dict, default_config, load_config)
from ottosim.errors import ConfigError, DomainError
from ottosim.orchestrate import (read_timeseries_csv, run_scenario,
                                 series_to_csv_text, validate_csv_text)
from ottosim.params import EngineParams
from ottosim.thermo import NBAR_H_MAX, thermo_from_series


def test_default_config_round_trip():
    cfg = default_config()
    doc = config_to_dict(cfg)
    back = config_from_dict(doc)
    assert back == cfg
    assert config_hash(back) == config_hash(cfg)
    assert cfg.tiers == ("quantum-lindblad", "quantum-moments",
                         "semiclassical", "classical")


def test_toml_load(tmp_path):
    path = tmp_path / "scenario.toml"
    path.write_text(
        "seed = 7\n"
        "tiers = [\"quantum-moments\"]\n"
        "[engine]\n"
        "nbar_h = 0.325\n"
        "model = \"global\"\n"
        "[dims]\n"
        "a = 8\n"
        "b = 40\n"
        "[integration]\n"
        "dt = 0.01\n"
        "t_end = 900.0\n")
    cfg = load_config(str(path))
    assert cfg.seed == 7
    assert cfg.tiers == ("quantum-moments",)
    assert cfg.engine.nbar_h == 0.325
    assert cfg.engine.model == "global"
    assert cfg.engine.alpha > 0  # dressed variant
    assert (cfg.dims.dim_a, cfg.dims.dim_b) == (8, 40)
    assert cfg.integration.dt == 0.01
    # untouched sections keep defaults
    assert cfg.ensemble.n_traj == 10000
    bad = tmp_path / "broken.toml"
    bad.write_text("seed = [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(str(bad))


def test_unknown_and_mistyped_fields():
    with pytest.raises(ConfigError) as exc:
        config_from_dict({"engine": {"coupling": 0.1}})
    assert exc.value.field == "engine.coupling"
    with pytest.raises(ConfigError) as exc:
        config_from_dict({"engine": {"g": "strong"}})
    assert exc.value.field == "engine.g"
    with pytest.raises(ConfigError) as exc:
        config_from_dict({"integration": {"sample_every": 2.5}})
    assert exc.value.field == "integration.sample_every"
    with pytest.raises(ConfigError):
        config_from_dict({"seed": True})
    with pytest.raises(ConfigError):
        config_from_dict({"typo_section": {}})


def test_validation_guards():
    cfg = default_config()
    with pytest.raises(ConfigError) as exc:
        apply_override(cfg, "engine.nbar_h", NBAR_H_MAX + 1.0)
    assert exc.value.field == "engine.nbar_h"
    with pytest.raises(ConfigError) as exc:
        apply_override(cfg, "tiers", ["quantum-moments", "bogus"])
    assert exc.value.field == "tiers"
    with pytest.raises(ConfigError):
        apply_override(cfg, "tiers", ["classical", "classical"])
    with pytest.raises(ConfigError):
        apply_override(cfg, "seed", -1)
    with pytest.raises(ConfigError) as exc:
        # dt larger than the gated half-stroke cannot resolve the drive
        apply_override(cfg, "integration.dt", 100.0)
    assert exc.value.field == "integration.dt"


def test_apply_override_typing():
    cfg = default_config()
    assert apply_override(cfg, "seed", 99).seed == 99
    assert apply_override(cfg, "dims.a", 9).dims.dim_a == 9
    # int into a float slot coerces
    assert apply_override(cfg, "engine.nbar_h", 1).engine.nbar_h == 1.0
    sub = apply_override(cfg, "tiers", ["classical"])
    assert sub.tiers == ("classical",)
    with pytest.raises(ConfigError):
        apply_override(cfg, "dims.a", 6.5)
    with pytest.raises(ConfigError):
        apply_override(cfg, "engine.include_background", 1)  # bool slot
    with pytest.raises(ConfigError):
        apply_override(cfg, "engine.nope", 1.0)
    with pytest.raises(ConfigError):
        apply_override(cfg, "engine.model", 3)


def test_config_hash_sensitivity():
    cfg = default_config()
    h0 = config_hash(cfg)
    assert len(h0) == 64 and h0 == config_hash(default_config())
    assert config_hash(apply_override(cfg, "seed", 6)) != h0
    assert config_hash(apply_override(cfg, "engine.g", 0.06)) != h0


@pytest.fixture(scope="module")
def short_thermo_series():
    params = EngineParams()
    series = mo.integrate_moments(mo.initial_moments(params), params, 30.0,
                                  dt=0.02, sample_every=25)
    return thermo_from_series(series, params)


def test_csv_round_trip(tmp_path, short_thermo_series):
    series = short_thermo_series
    text = series_to_csv_text(series, "quantum-moments")
    validate_csv_text(text, "quantum-moments")
    path = tmp_path / "ts.csv"
    path.write_text(text)
    back = read_timeseries_csv(str(path), "quantum-moments")
    assert np.array_equal(back.t, series.t)
    for col in ("n_a", "q", "p", "var_na", "c_nq", "c_np", "n_b",
                "omega_eff", "U_a", "S_a", "T_eff", "P", "J_b", "Sigma",
                "g2"):
        # repr round-trips doubles exactly; g2 is NaN for moment tiers
        assert np.array_equal(back[col], series[col], equal_nan=True), col


def test_csv_contract_enforcement(short_thermo_series):
    series = short_thermo_series
    raw = mo.integrate_moments(mo.initial_moments(EngineParams()),
                               EngineParams(), 5.0, dt=0.02)
    with pytest.raises(DomainError):
        series_to_csv_text(raw, "quantum-moments")  # thermo columns missing
    text = series_to_csv_text(series, "quantum-moments")
    with pytest.raises(DomainError):
        validate_csv_text(text, "classical")  # classical wants se columns
    lines = text.splitlines()
    with pytest.raises(DomainError):
        validate_csv_text("\n".join([lines[0], lines[1] + ",0.0"]),
                          "quantum-moments")
    with pytest.raises(ValueError):
        validate_csv_text("\n".join([lines[0],
                                     lines[1].replace("0.", "x.", 1)]),
                          "quantum-moments")


def _small_cfg(tiers, t_end=150.0):
    cfg = default_config()
    cfg = apply_override(cfg, "tiers", list(tiers))
    cfg = apply_override(cfg, "integration.t_end", t_end)
    cfg = apply_override(cfg, "integration.sample_every", 50)
    cfg = apply_override(cfg, "ensemble.n_traj", 64)
    cfg = apply_override(cfg, "ensemble.sample_every", 2000)
    return cfg


def test_scenario_outputs_reproducible(tmp_path):
    cfg = _small_cfg(("quantum-moments", "classical"))
    man1 = run_scenario(cfg, str(tmp_path / "run1"))
    man2 = run_scenario(cfg, str(tmp_path / "run2"))
    assert man1["status"] == "ok" == man2["status"]
    assert man1["config_hash"] == man2["config_hash"]
    names = ["timeseries_quantum-moments.csv", "timeseries_classical.csv",
             "summary.json"]
    for name in names:
        assert name in man1["outputs"]
        b1 = (tmp_path / "run1" / name).read_bytes()
        b2 = (tmp_path / "run2" / name).read_bytes()
        assert b1 == b2, f"{name} not reproducible"
    # short horizon: cycle digest is skipped with a recorded reason
    info = man1["tiers"]["quantum-moments"]
    assert info["cycle"] is None and "cycle_skipped" in info
    with open(tmp_path / "run1" / "manifest.json") as fh:
        doc = json.load(fh)
    assert doc["status"] == "ok"
    assert doc["config"]["seed"] == cfg.seed
    with open(tmp_path / "run1" / "summary.json") as fh:
        summary = json.load(fh)
    assert "constant_drive_steady" in summary["analytic"]


def test_cli_run_and_report(tmp_path, capsys):
    out = str(tmp_path / "run")
    rc = cli_main(["run", "--out", out, "--tiers", "quantum-moments",
                   "--t-end", "150"])
    assert rc == 0
    for name in ("manifest.json", "summary.json",
                 "timeseries_quantum-moments.csv"):
        assert os.path.exists(os.path.join(out, name))
    text = capsys.readouterr().out
    assert "status: ok" in text
    rc = cli_main(["report", "--dir", out])
    assert rc == 0
    text = capsys.readouterr().out
    assert "no cycle summary" in text
    rc = cli_main(["report", "--dir", str(tmp_path / "nowhere")])
    assert rc == 2
    rc = cli_main(["report", "--dir", out, "--tier", "bogus"])
    assert rc == 2
    err = capsys.readouterr().err
    assert "not in this run" in err and "quantum-moments" in err


def test_cli_exit_codes(tmp_path):
    out = str(tmp_path / "x")
    assert cli_main(["run", "--out", out, "--tiers", "bogus"]) == 2
    assert cli_main(["run", "--out", out, "--dims", "7"]) == 2
    assert cli_main(["run", "--out", out, "--t-end", "-5"]) == 2
    with pytest.raises(SystemExit):
        cli_main([])  # a subcommand is required
    with pytest.raises(SystemExit):
        cli_main(["run"])  # --out is required


def test_cli_steady(capsys):
    rc = cli_main(["steady", "--dims", "4,12", "--model", "local"])
    assert rc == 0
    text = capsys.readouterr().out
    assert "max relative difference" in text
    assert "model=local" in text


def test_cli_sweep_without_cycles(tmp_path, capsys):
    out = str(tmp_path / "sweep")
    rc = cli_main(["sweep", "--out", out, "--tiers", "quantum-moments",
                   "--t-end", "150", "--param", "engine.nbar_h",
                   "--values", "0.125,0.325"])
    assert rc == 0
    assert os.path.exists(os.path.join(out, "sweep_summary.csv"))
    with open(os.path.join(out, "sweep_manifest.json")) as fh:
        doc = json.load(fh)
    assert doc["status"] == "ok"
    assert [r["value"] for r in doc["rows"]] == [0.125, 0.325]
    for tag in ("point_00", "point_01"):
        assert os.path.exists(os.path.join(out, tag, "manifest.json"))
    assert "status: ok" in capsys.readouterr().out


def test_cli_validate_battery(capsys):
    rc = cli_main(["validate"])
    text = capsys.readouterr().out
    assert rc == 0, text
    assert "[PASS]" in text and "[FAIL]" not in text


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ottosim", "--version"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert "ottosim" in proc.stdout
