import json
import sys
from pathlib import Path

import pytest

sys.path.append(str(Path(__file__).resolve().parents[1] / "src"))

from run_config import (  # noqa: E402
    ConfigError,
    RunConfig,
    load_run_config,
    n_bins_for,
    run_config_from_dict,
)

ROOT = Path(__file__).resolve().parents[1]


def write_config(tmp_path, data):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return path


def test_defaults_describe_ccz_working_point():
    cfg = RunConfig().validate()
    spec = cfg.chain_spec()
    assert cfg.target().name == "CCZ"
    assert spec.n_transmons == 3
    assert spec.g == pytest.approx(0.03)
    assert spec.eta == pytest.approx(0.2)
    assert spec.eta_prime == pytest.approx(0.6)
    assert cfg.n_bins == 26
    sussade = cfg.sussade_config()
    assert sussade.dims == 78
    assert sussade.bounds == (-2.5, 2.5)


def test_load_run_config(tmp_path):
    path = write_config(
        tmp_path,
        {
            "gate": "toffoli",
            "theta_ns": 30,
            "g_mhz": 40,
            "optimizer": {"population_size": 16, "seed": 5},
            "sweep": {"g_mhz": [20, 30]},
        },
    )
    cfg = load_run_config(path)
    assert cfg.target().name == "CCZ"
    assert cfg.chain_spec().g == pytest.approx(0.04)
    assert cfg.optimizer.population_size == 16
    assert cfg.sweep.g_mhz == (20, 30)
    assert cfg.sussade_config().seed == 5


def test_two_qubit_gate_builds_two_transmon_chain():
    cfg = run_config_from_dict({"gate": "CZ", "theta_ns": 10})
    assert cfg.chain_spec().n_transmons == 2
    assert cfg.sussade_config().dims == 20


def test_unknown_keys_are_rejected(tmp_path):
    with pytest.raises(ConfigError, match="thetaa_ns"):
        load_run_config(write_config(tmp_path, {"thetaa_ns": 20}))
    with pytest.raises(ConfigError, match="optimizer"):
        load_run_config(write_config(tmp_path, {"optimizer": {"popsize": 20}}))


@pytest.mark.parametrize(
    "data",
    [
        {"pulse_shape": "gaussian"},
        {"theta_ns": 0},
        {"dt_ns": 0},
        {"g_mhz": -5},
        {"optimizer": {"switch_s": 2.0}},
        {"noise": {"kraus_order": -1}},
        {"freq_min_ghz": 3.0},
        {"gate": "SWAP"},
        {"optimizer": []},
    ],
)
def test_invalid_values_raise_config_error(data):
    with pytest.raises(ConfigError):
        run_config_from_dict(data)


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_run_config(bad)


def test_noise_spec_uses_grid_time_unless_fixed():
    cfg = run_config_from_dict({"noise": {"t2_us": 15}})
    noise = cfg.noise_spec(30.0)
    assert noise.t1 == pytest.approx(30_000.0)
    assert noise.t2 == pytest.approx(15_000.0)
    assert noise.kraus_order == 3


def test_overrides_and_digest():
    cfg = RunConfig()
    same = RunConfig()
    assert cfg.digest() == same.digest()
    changed = cfg.with_overrides(seed=7, output_dir="out", log_level="DEBUG")
    assert changed.optimizer.seed == 7
    assert changed.output_dir == "out"
    assert changed.log_level == "DEBUG"
    assert changed.digest() != cfg.digest()
    assert cfg.with_overrides() == cfg
    assert cfg.with_overrides(output_dir="elsewhere").digest() == cfg.digest()


def test_n_bins_rounds_theta_over_dt():
    assert n_bins_for(26.0, 1.0) == 26
    assert n_bins_for(10.0, 3.0) == 3
    assert n_bins_for(0.5, 1.0) == 2


@pytest.mark.parametrize("name", ["ccz_config.json", "cz_study_config.json"])
def test_shipped_configs_load(name):
    load_run_config(ROOT / name)
