"""Config file parsing and the command line interface."""

import math

import pytest

from torusswarm import ConfigError, TrialConfig, cli
from torusswarm.config import dump_config, load_config, parse_config_text

TINY = TrialConfig(cells=16, steps=5, agents=20, plots=False)


def _write(tmp_path, name, cfg):
    path = tmp_path / name
    path.write_text(dump_config(cfg), encoding="utf-8")
    return path


def test_round_trip():
    cfg = TrialConfig(cells=24, steps=7, sensing_radius=0.1 * math.pi,
                      legs="continuous", plots=False)
    assert parse_config_text(dump_config(cfg)) == cfg


def test_round_trip_unlimited_radius():
    cfg = TrialConfig()
    text = dump_config(cfg)
    assert "sensing_radius = unlimited" in text
    assert parse_config_text(text).sensing_radius == math.inf


def test_parser_fail_closed():
    with pytest.raises(ConfigError, match=r"<string>:1: unknown key"):
        parse_config_text("not_a_key = 3")
    with pytest.raises(ConfigError, match=r"cfg:2: duplicate key"):
        parse_config_text("dt = 0.1\ndt = 0.2", source="cfg")
    with pytest.raises(ConfigError, match=r":1: bad value"):
        parse_config_text("dt = fast")
    with pytest.raises(ConfigError, match=r":1: expected key = value"):
        parse_config_text("just some words")


def test_parser_skips_comments_and_blanks():
    cfg = parse_config_text("\n# comment\nsteps = 3  # trailing\n\n")
    assert cfg.steps == 3


def test_validation_rules():
    with pytest.raises(ConfigError):
        TrialConfig(d=3).validate()
    with pytest.raises(ConfigError):
        TrialConfig(cells=49).validate()
    with pytest.raises(ConfigError):
        TrialConfig(dt=0.0).validate()
    with pytest.raises(ConfigError):
        TrialConfig(legs="middle").validate()
    with pytest.raises(ConfigError):
        TrialConfig(init_density="bump").validate()
    with pytest.raises(ConfigError):
        TrialConfig(modes=26).validate()  # past the 50-cell Nyquist band
    with pytest.raises(ConfigError):
        TrialConfig(backend="rust").validate()
    with pytest.raises(ConfigError):
        TrialConfig(target_mode="spinning").validate()


def test_with_updates():
    cfg = TrialConfig()
    other = cfg.with_updates(steps=9)
    assert other.steps == 9 and cfg.steps == 200
    with pytest.raises(ConfigError):
        cfg.with_updates(cells=7)


def test_derived_properties():
    cfg = TrialConfig(steps=400, dt=0.001, disturbance_onset=-1.0)
    assert cfg.horizon == pytest.approx(0.4)
    assert cfg.onset_time == pytest.approx(0.2)
    assert TrialConfig(disturbance_onset=0.05).onset_time == 0.05
    assert TrialConfig(mass=100.0, agents=100).agent_mass == 1.0


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


def test_cli_run(tmp_path, capsys):
    cfg_path = _write(tmp_path, "tiny.cfg", TINY)
    out = tmp_path / "out"
    code = cli.main(["run", "--config", str(cfg_path), "--out", str(out)])
    assert code == 0
    text = capsys.readouterr().out
    assert "backend:" in text
    assert "final error" in text
    for name in ("config.cfg", "timeseries.csv", "audit.csv", "bounds.csv",
                 "agents_final.csv", "density_final.csv"):
        assert (out / name).exists(), name


def test_cli_run_overrides(tmp_path):
    cfg_path = _write(tmp_path, "tiny.cfg", TINY)
    out = tmp_path / "out"
    code = cli.main(["run", "--config", str(cfg_path), "--out", str(out),
                     "--set", "steps=2", "--set", "legs=continuous"])
    assert code == 0
    echoed = load_config(out / "config.cfg")
    assert echoed.steps == 2 and echoed.legs == "continuous"


def test_cli_bad_override_exit_2(tmp_path):
    cfg_path = _write(tmp_path, "tiny.cfg", TINY)
    assert cli.main(["run", "--config", str(cfg_path),
                     "--set", "bogus=1"]) == 2
    assert cli.main(["run", "--config", str(cfg_path),
                     "--set", "dt=-1"]) == 2


def test_cli_infeasible_gain_exit_2(tmp_path):
    """The pre-run Courant audit rejects an overdriven configuration."""
    cfg_path = _write(tmp_path, "hot.cfg", TINY.with_updates(kp=50000.0))
    assert cli.main(["run", "--config", str(cfg_path),
                     "--out", str(tmp_path / "o")]) == 2


def test_cli_outdir_env(tmp_path, monkeypatch):
    cfg_path = _write(tmp_path, "tiny.cfg",
                      TINY.with_updates(steps=2, legs="continuous"))
    monkeypatch.setenv("TORUSSWARM_OUTDIR", str(tmp_path / "env_root"))
    assert cli.main(["run", "--config", str(cfg_path)]) == 0
    assert (tmp_path / "env_root" / "run_out" / "timeseries.csv").exists()


def test_cli_bounds(tmp_path, capsys):
    cfg_path = _write(tmp_path, "tiny.cfg",
                      TINY.with_updates(sensing_radius=0.1 * math.pi))
    out = tmp_path / "b"
    code = cli.main(["bounds", "--config", str(cfg_path), "--out", str(out)])
    assert code == 0
    text = capsys.readouterr().out
    assert "minimum convergent gain" in text
    assert (out / "bounds.csv").exists()


def test_cli_sweep(tmp_path, capsys):
    a = _write(tmp_path, "a.cfg", TINY.with_updates(steps=2, legs="continuous"))
    b = _write(tmp_path, "b.cfg", TINY.with_updates(steps=2, kp=50000.0))
    out = tmp_path / "sweep"
    code = cli.main(["sweep", "--configs", str(a), str(b),
                     "--out", str(out), "--workers", "2"])
    assert code == 3  # row b fails its preflight; failure propagates
    table = (out / "sweep.csv").read_text().strip().splitlines()
    assert table[0].startswith("name,")
    assert len(table) == 3
    rows = {line.split(",")[0]: line for line in table[1:]}
    assert rows["a"].rstrip().endswith("ok")
    assert "error" in rows["b"]


def test_cli_sweep_duplicate_names(tmp_path):
    d1 = tmp_path / "one"
    d2 = tmp_path / "two"
    d1.mkdir()
    d2.mkdir()
    a = _write(d1, "x.cfg", TINY)
    b = _write(d2, "x.cfg", TINY)
    assert cli.main(["sweep", "--configs", str(a), str(b),
                     "--out", str(tmp_path / "s")]) == 2
