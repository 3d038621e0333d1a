import csv
import hashlib
from pathlib import Path

import numpy as np
import pytest

from tscrl.cli import main
from tscrl.config import ConfigError, OUT_DIR_ENV, RunConfig, parse_config
from tscrl.network import NetworkSpec, init_params, zero_params
from tscrl.persistence import (file_checksum, load_model, read_manifest,
                               read_model_dims, save_model, write_manifest)


# -- configuration ----------------------------------------------------------------

def test_defaults_reproduce_published_constants():
    cfg = parse_config(None, {})
    assert cfg.episodes == 300
    assert cfg.episode_length == 5400
    assert (cfg.eps_high_until, cfg.eps_decay_until, cfg.eps_final_episode) == (90, 210, 300)
    assert cfg.buffer_capacity == 50_000
    assert cfg.batch == 64
    assert cfg.lr == 0.001
    assert cfg.base_green == 15
    assert cfg.yellow == 4
    assert (cfg.vehicles_low, cfg.vehicles_high, cfg.vehicles_ew,
            cfg.vehicles_ns) == (600, 3000, 1500, 1500)
    assert cfg.straight_fraction == 0.6


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.cfg"
    p.write_text("# nothing but a comment\n\n")
    assert parse_config(p, {}) == parse_config(None, {})


def test_gamma_range_error(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("gamma = 1.5\n")
    with pytest.raises(ConfigError, match="gamma"):
        parse_config(p, {})


def test_unknown_key_reports_line_number(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("episodes = 10\nwibble = 3\n")
    with pytest.raises(ConfigError, match=r":2: unknown key"):
        parse_config(p, {})


def test_malformed_line_reports_line_number(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("episodes\n")
    with pytest.raises(ConfigError, match=r":1: malformed"):
        parse_config(p, {})


def test_flag_overrides_file(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("episodes = 300\n")
    cfg = parse_config(p, {"episodes": 10})
    assert cfg.episodes == 10


def test_manifest_keys_ignored(tmp_path):
    p = tmp_path / "m.cfg"
    p.write_text("episodes = 7\nmanifest.weights_checksum = abc\n")
    assert parse_config(p, {}).episodes == 7


def test_missing_file_errors():
    with pytest.raises(ConfigError, match="not found"):
        parse_config("/nonexistent/path.cfg", {})


def test_bad_encoding_weights_rejected(tmp_path):
    p = tmp_path / "w.cfg"
    p.write_text("encoding_weights = 16,16,16,8,8,4,3,1,1,1,1,1\n")
    with pytest.raises(ConfigError, match="encoding_weights"):
        parse_config(p, {})


def test_out_dir_resolution(monkeypatch, tmp_path):
    cfg = RunConfig(out="explicit")
    assert cfg.out_dir() == Path("explicit")
    monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path / "envdir"))
    assert RunConfig().out_dir() == tmp_path / "envdir"
    monkeypatch.delenv(OUT_DIR_ENV)
    assert RunConfig().out_dir() == Path("runs")


# -- model persistence ---------------------------------------------------------------

def test_model_roundtrip(tmp_path):
    spec = NetworkSpec(6, 3, (5, 4))
    params = init_params(spec, np.random.default_rng(0))
    path = tmp_path / "m.bin"
    save_model(path, params)
    assert read_model_dims(path) == (6, 5, 4, 3)
    back = load_model(path)
    assert back.spec == spec
    assert all((a == b).all() for a, b in zip(back.weights, params.weights))
    assert all((a == b).all() for a, b in zip(back.biases, params.biases))


def test_model_magic_guard(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOTAMODEL")
    with pytest.raises(ValueError, match="magic"):
        load_model(path)


def test_model_truncation_guard(tmp_path):
    spec = NetworkSpec(4, 2, (3,))
    params = zero_params(spec)
    path = tmp_path / "m.bin"
    save_model(path, params)
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(ValueError, match="truncated"):
        load_model(path)


def test_manifest_roundtrip(tmp_path):
    path = tmp_path / "m.manifest"
    write_manifest(path, {"agent": "time", "seed": "3"})
    assert read_manifest(path) == {"agent": "time", "seed": "3"}


# -- CLI ------------------------------------------------------------------------------

SMOKE_CFG = """
episodes = 2
episode_length = 120
vehicles_low = 15
vehicles_high = 25
vehicles_ew = 20
vehicles_ns = 20
eval_episodes = 2
batch = 8
buffer_capacity = 256
"""


def _write_cfg(tmp_path, extra=""):
    p = tmp_path / "smoke.cfg"
    p.write_text(SMOKE_CFG + extra)
    return p


def test_cli_train_smoke(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    out = tmp_path / "run1"
    rc = main(["train", "--config", str(cfg), "--agent", "turn",
               "--seed", "3", "--out", str(out)])
    assert rc == 0
    assert (out / "model.bin").exists()
    assert read_model_dims(out / "model.bin")[0] == 192
    with open(out / "training_log.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:3] == ["episode", "epsilon", "total_reward"]
    assert len(rows) == 3  # header + 2 episodes
    manifest = read_manifest(out / "model.bin.manifest")
    assert manifest["agent"] == "turn" and manifest["input_dim"] == "192"
    run_manifest = (out / "run_manifest.txt").read_text()
    assert "manifest.weights_checksum" in run_manifest


def test_cli_train_rerun_is_byte_identical(tmp_path):
    cfg = _write_cfg(tmp_path)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        rc = main(["train", "--config", str(cfg), "--agent", "time",
                   "--seed", "9", "--out", str(out)])
        assert rc == 0
        outs.append(out)
    w1 = (outs[0] / "model.bin").read_bytes()
    w2 = (outs[1] / "model.bin").read_bytes()
    assert w1 == w2
    h1 = hashlib.sha256((outs[0] / "training_log.csv").read_bytes()).hexdigest()
    h2 = hashlib.sha256((outs[1] / "training_log.csv").read_bytes()).hexdigest()
    assert h1 == h2


def test_cli_rerun_from_manifest(tmp_path):
    cfg = _write_cfg(tmp_path)
    out1 = tmp_path / "orig"
    main(["train", "--config", str(cfg), "--agent", "time", "--seed", "4",
          "--out", str(out1)])
    out2 = tmp_path / "replay"
    rc = main(["train", "--config", str(out1 / "run_manifest.txt"),
               "--out", str(out2)])
    assert rc == 0
    assert (out1 / "model.bin").read_bytes() == (out2 / "model.bin").read_bytes()


def test_cli_train_rejects_fixed_agent(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    rc = main(["train", "--config", str(cfg), "--agent", "fixed",
               "--out", str(tmp_path / "x")])
    assert rc == 2
    assert "turn or time" in capsys.readouterr().err


def test_cli_eval_fixed_on_empty_traffic(tmp_path):
    cfg = _write_cfg(tmp_path, "vehicles_low = 0\n")
    out = tmp_path / "evalout"
    rc = main(["eval", "--config", str(cfg), "--agent", "fixed",
               "--scenario", "low", "--out", str(out)])
    assert rc == 0
    with open(out / "eval_fixed_low.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 1 + 2 + 1  # header + per-episode + mean
    assert all(float(v) == 0.0 for v in rows[-1][1:])


def test_cli_eval_agent_model_mismatch(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    out = tmp_path / "m"
    main(["train", "--config", str(cfg), "--agent", "turn", "--seed", "2",
          "--out", str(out)])
    rc = main(["eval", "--config", str(cfg), "--agent", "time",
               "--scenario", "low", "--model", str(out / "model.bin"),
               "--out", str(tmp_path / "e")])
    assert rc == 2
    assert "does not match agent" in capsys.readouterr().err


def test_cli_eval_missing_model(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    rc = main(["eval", "--config", str(cfg), "--agent", "time",
               "--scenario", "low", "--out", str(tmp_path / "e")])
    assert rc == 2
    assert "--model is required" in capsys.readouterr().err


def test_cli_compare_fixed_vs_itself_zero(tmp_path):
    cfg = _write_cfg(tmp_path)
    out = tmp_path / "cmp"
    rc = main(["compare", "--config", str(cfg), "--agent", "fixed",
               "--scenario", "low", "--out", str(out)])
    assert rc == 0
    with open(out / "comparison.csv") as fh:
        rows = list(csv.reader(fh))
    pct_col = rows[0].index("low_improvement_pct")
    for row in rows[1:-1]:
        assert row[pct_col] in ("", "0.0")
    with open(out / "aggregate_summary.csv") as fh:
        agg = list(csv.reader(fh))
    assert agg[1][0] == "fixed"
    assert float(agg[1][1]) == 0.0


def test_cli_compare_aggregate_is_mean_of_scenarios(tmp_path):
    cfg = _write_cfg(tmp_path)
    out = tmp_path / "cmp_all"
    rc = main(["compare", "--config", str(cfg), "--agent", "fixed",
               "--scenario", "all", "--out", str(out)])
    assert rc == 0
    with open(out / "scenario_summary.csv") as fh:
        rows = list(csv.reader(fh))[1:]
    means = [float(r[1]) for r in rows if r[1] != ""]
    with open(out / "aggregate_summary.csv") as fh:
        agg = float(list(csv.reader(fh))[1][1])
    assert agg == pytest.approx(sum(means) / len(means))
    assert (out / "comparison.txt").read_text().startswith("Performance Measure")


def test_cli_gen_traffic(tmp_path):
    cfg = _write_cfg(tmp_path)
    out = tmp_path / "gen"
    rc = main(["gen-traffic", "--config", str(cfg), "--scenario", "low",
               "--seed", "11", "--out", str(out)])
    assert rc == 0
    path = out / "schedule_low_seed11.csv"
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["depart_time", "origin", "movement", "destination"]
    assert len(rows) == 1 + 15


def test_cli_trace_emission(tmp_path):
    cfg = _write_cfg(tmp_path, "trace = true\nvehicles_low = 5\n")
    out = tmp_path / "tr"
    rc = main(["eval", "--config", str(cfg), "--agent", "fixed",
               "--scenario", "low", "--out", str(out)])
    assert rc == 0
    traces = sorted(out.glob("trace_fixed_low_seed*.csv"))
    assert len(traces) == 2
    with open(traces[0]) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["tick", "phase", "ql_N", "ql_W", "ql_E", "ql_S", "awt"]
    assert len(rows) == 1 + 120


def test_cli_unwritable_out(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    rc = main(["gen-traffic", "--config", str(cfg), "--scenario", "low",
               "--out", "/proc/definitely/not/writable"])
    assert rc == 1
