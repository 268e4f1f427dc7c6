import json
import math
import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).resolve().parents[1] / "src"))

import experiments  # noqa: E402
from experiments import (  # noqa: E402
    EXIT_BUDGET,
    EXIT_ERROR,
    EXIT_OK,
    SweepCell,
    cmd_cz_study,
    cmd_decoherence,
    cmd_optimize,
    cmd_robustness,
    deficit_coefficient,
    first_revival,
    fit_inverse_time,
    predicted_t_on,
    threshold_times,
)
from metrics import reset_metrics  # noqa: E402
from propagation import fitness  # noqa: E402
from pulses import load_pulse  # noqa: E402
from run_config import load_run_config, run_config_from_dict  # noqa: E402
from serialization import read_csv  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
slow = pytest.mark.skipif(not os.environ.get("GATESYNTH_SLOW"), reason="set GATESYNTH_SLOW=1")

SMALL_CZ = {
    "gate": "CZ",
    "theta_ns": 4,
    "dt_ns": 1,
    "optimizer": {"population_size": 8, "max_generations": 4, "seed": 3},
}


@pytest.fixture(autouse=True)
def clean_metrics():
    reset_metrics()
    yield
    reset_metrics()


def write_config(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def run(tmp_path, *argv):
    return experiments.main([*argv, "--log", str(tmp_path / "run.log")])


def test_verify_passes(tmp_path):
    out = tmp_path / "verify"
    assert run(tmp_path, "verify", "--out", str(out)) == EXIT_OK
    report = json.loads((out / "verify.json").read_text())
    assert report["passed"]
    assert report["checks"]["truncated_dimension_20"]
    assert report["checks"]["cxx_is_conjugated_czz"]
    assert (out / "metrics.json").exists()


def test_invalid_config_exits_with_message(tmp_path, capsys):
    config = write_config(tmp_path / "bad.json", {"gate": "CCZ", "popsize": 3})
    assert run(tmp_path, "verify", "--config", config) == EXIT_ERROR
    assert "Invalid configuration" in capsys.readouterr().out


def test_spectrum_uses_one_based_transmon_labels(tmp_path):
    config = write_config(
        tmp_path / "spectrum.json",
        {"spectrum": {"fixed_ghz": {"1": 4.8, "3": 6.8}, "swept_transmon": 2, "n_points": 11}},
    )
    out = tmp_path / "spectrum"
    assert run(tmp_path, "spectrum", "--config", config, "--out", str(out)) == EXIT_OK
    comment, header, rows = read_csv(out / "spectrum.csv")
    assert comment.startswith("# config_sha256=")
    assert header[0] == "epsilon_ghz"
    assert len(header) == 65
    assert len(rows) == 11
    assert float(rows[0][0]) == pytest.approx(4.5)


def test_optimize_writes_artifacts_and_reports_saved_pulse(tmp_path):
    config = write_config(tmp_path / "cz.json", SMALL_CZ)
    out = tmp_path / "opt"
    assert run(tmp_path, "optimize", "--config", config, "--out", str(out)) == EXIT_BUDGET
    for name in ("pulse.json", "history.csv", "pulse_samples.csv", "gate.json", "propagator.json"):
        assert (out / name).exists()
    report = json.loads((out / "report.json").read_text())
    assert report["stop_reason"] == "max_generations"
    assert report["synthesized_as"] == "CZ"
    cfg = run_config_from_dict(SMALL_CZ)
    again = fitness(cfg.chain_spec(), load_pulse(out / "pulse.json"), cfg.target())
    assert report["intrinsic_fidelity"] == again
    _, header, rows = read_csv(out / "history.csv")
    assert header == ["generation", "best_fitness", "mean_fitness"]
    assert [int(r[0]) for r in rows] == [0, 1, 2, 3, 4]


def test_optimize_is_reproducible(tmp_path):
    config = write_config(tmp_path / "cz.json", SMALL_CZ)
    for name in ("a", "b"):
        run(tmp_path, "optimize", "--config", config, "--out", str(tmp_path / name), "--seed", "8")
    for name in ("history.csv", "pulse_samples.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_optimize_resume_continues_run(tmp_path):
    longer = {**SMALL_CZ, "optimizer": {**SMALL_CZ["optimizer"], "max_generations": 6}}
    shorter = {**SMALL_CZ, "checkpoint_every": 2}
    run(tmp_path, "optimize", "--config", write_config(tmp_path / "full.json", longer), "--out", str(tmp_path / "full"))
    out = tmp_path / "part"
    run(tmp_path, "optimize", "--config", write_config(tmp_path / "short.json", shorter), "--out", str(out))
    assert (out / "checkpoint.json").exists()
    resumed = {**longer, "checkpoint_every": 2}
    config = write_config(tmp_path / "resume.json", resumed)
    run(tmp_path, "optimize", "--config", config, "--out", str(out), "--resume")
    assert read_csv(out / "history.csv")[2] == read_csv(tmp_path / "full" / "history.csv")[2]


def test_robustness_zero_noise_reproduces_base(tmp_path):
    cfg = run_config_from_dict({**SMALL_CZ, "robustness": {"delta_grid_khz": [0, 500], "trials_per_point": 3}})
    outcome = cmd_optimize(cfg, tmp_path)
    result = cmd_robustness(cfg, tmp_path, outcome.pulse_path)
    assert result.base_fidelity == outcome.fidelity
    delta0, mean0, min0 = result.rows[0]
    assert delta0 == 0
    assert mean0 == pytest.approx(result.base_fidelity, abs=1e-15)
    assert min0 == result.base_fidelity
    assert result.rows[1][2] <= result.rows[1][1]
    summary = json.loads((tmp_path / "robustness_summary.json").read_text())
    assert summary["trials_per_point"] == 3


def test_decoherence_deficit_grows_as_coherence_shrinks(tmp_path):
    cfg = run_config_from_dict({**SMALL_CZ, "decoherence": {"t_grid_us": [5, 10, 40]}})
    outcome = cmd_optimize(cfg, tmp_path)
    result = cmd_decoherence(cfg, tmp_path, outcome.pulse_path)
    fbars = [row[1] for row in result.rows]
    assert fbars[0] < fbars[1] < fbars[2]
    assert result.coefficient > 0
    _, header, _ = read_csv(tmp_path / "decoherence.csv")
    assert header == ["T_us", "Fbar"]


def test_deficit_coefficient_recovers_exact_slope():
    theta = 26.0
    t_us = [10.0, 20.0, 60.0]
    fbar = [1 - 0.4 * theta / (t * 1000) for t in t_us]
    assert deficit_coefficient(theta, t_us, fbar) == pytest.approx(0.4)


def test_threshold_times_and_inverse_time_fit():
    rows = [
        [20, 20, 0.9, 1, ""],
        [20, 40, 0.99995, 1, ""],
        [20, 50, 0.99999, 1, ""],
        [40, 20, 0.99992, 1, ""],
        [40, 10, 0.95, 1, ""],
        [60, 10, math.nan, 0, "error"],
    ]
    star = threshold_times(rows, 0.9999)
    assert star == {20: 40, 40: 20, 60: None}
    fit = fit_inverse_time({20: 40.0, 40: 20.0, 80: 10.0})
    assert fit["slope_per_ns_mhz"] == pytest.approx(1 / 800)
    assert fit["intercept_per_ns"] == pytest.approx(0.0, abs=1e-12)
    assert fit["r_squared"] == pytest.approx(1.0)
    assert fit_inverse_time({20: 40.0, 40: None}) is None


def test_sweep_cell_reports_failures_instead_of_raising():
    cfg = run_config_from_dict(SMALL_CZ)
    fid, evals, status = SweepCell(cfg, -5.0, 4.0, seed=1)()
    assert math.isnan(fid)
    assert evals == 0
    assert status.startswith("error")


def test_sweep_time_writes_grid(tmp_path):
    cfg = run_config_from_dict(
        {**SMALL_CZ, "sweep": {"g_mhz": [30, 40], "theta_grid_ns": [3, 4], "max_evaluations_per_cell": 24}}
    )
    outcome = experiments.cmd_sweep_time(cfg, tmp_path)
    assert len(outcome.rows) == 4
    assert all(row[3] <= 24 for row in outcome.rows)
    _, header, rows = read_csv(tmp_path / "sweep_time.csv")
    assert header[:3] == ["g_mhz", "theta_ns", "best_fitness"]
    assert len(rows) == 4
    assert (tmp_path / "sweep_fit.json").exists()


def test_predicted_on_time():
    assert predicted_t_on(0.03) == pytest.approx(1 / (2 * math.sqrt(2) * 0.03))


def test_cz_study_on_time_scales_inversely_with_coupling(tmp_path):
    # strong anharmonicity isolates the |11>-|02> pair so the sudden picture holds
    cfg = run_config_from_dict(
        {
            "cz_study": {
                "eps1_ghz": 6.5,
                "eta_mhz": 2000,
                "omega_off_ghz": 9.5,
                "omega_on_grid_ghz": [8.5],
                "t_ramp_ns": 0.05,
                "t_on_start_ns": 5.0,
                "t_on_stop_ns": 22.0,
                "t_on_points": 86,
                "g_mhz": [20, 30, 40, 50],
                "step_ns": 0.01,
            }
        }
    )
    outcome = cmd_cz_study(cfg, tmp_path)
    assert len(outcome.rows) == 4 * 86
    for g_mhz, best, t_on, omega_on, predicted, ratio in outcome.summary:
        assert best > 0.99
        assert ratio == pytest.approx(1.0, abs=0.05)
        assert predicted == pytest.approx(predicted_t_on(g_mhz * 1e-3))
    spread = json.loads((tmp_path / "cz_study.json").read_text())["relative_spread"]
    assert spread < 0.1


def test_first_revival_ignores_later_oscillations():
    assert first_revival([0.2, 0.9, 0.95, 0.3, 0.99, 0.1]) == 2
    assert first_revival([0.5, 0.5, 0.5]) == 0


def test_cz_study_at_moderate_anharmonicity(tmp_path):
    cfg = run_config_from_dict(
        {
            "eta_mhz": 200,
            "cz_study": {
                "omega_on_grid_ghz": [6.69, 6.70, 6.71],
                "t_ramp_ns": 1.0,
                "t_on_start_ns": 5.0,
                "t_on_stop_ns": 20.0,
                "t_on_points": 76,
                "g_mhz": [25, 50],
                "step_ns": 0.01,
            },
        }
    )
    outcome = cmd_cz_study(cfg, tmp_path)
    (_, best_25, t_25, _, _, ratio_25), (_, best_50, t_50, _, _, ratio_50) = outcome.summary
    assert ratio_25 == pytest.approx(1.0, abs=0.15)
    assert ratio_50 == pytest.approx(1.0, abs=0.15)
    # doubling g halves the on-time; the second revival of g=50 lies inside the scan
    assert t_25 / t_50 == pytest.approx(2.0, rel=0.1)
    assert min(best_25, best_50) > 0.95


@slow
def test_shipped_cz_study_scales_with_inverse_coupling(tmp_path):
    cfg = load_run_config(ROOT / "cz_study_config.json")
    outcome = cmd_cz_study(cfg, tmp_path)
    for g_mhz, best, t_on, omega_on, predicted, ratio in outcome.summary:
        assert ratio == pytest.approx(1.0, abs=0.15)
        if g_mhz == 30:
            assert best >= 0.99
    spread = json.loads((tmp_path / "cz_study.json").read_text())["relative_spread"]
    assert spread < 0.1


def synthesize(tmp_path, name, **overrides):
    data = {**json.loads((ROOT / "ccz_config.json").read_text()), **overrides}
    config = write_config(tmp_path / f"{name}.json", data)
    out = tmp_path / name
    code = run(tmp_path, "optimize", "--config", config, "--out", str(out), "--workers", "4")
    return code, config, out, json.loads((out / "report.json").read_text())


@pytest.fixture(scope="module")
def ccz_run(tmp_path_factory):
    if not os.environ.get("GATESYNTH_SLOW"):
        pytest.skip("set GATESYNTH_SLOW=1")
    return synthesize(tmp_path_factory.mktemp("ccz"), "ccz")


def decoherence_rows(out):
    return {float(t): float(f) for t, f in read_csv(out / "decoherence.csv")[2]}


@slow
def test_ccz_synthesis_reaches_high_fidelity(ccz_run):
    code, _, _, report = ccz_run
    assert code == EXIT_OK
    assert report["intrinsic_fidelity"] >= 0.9999
    assert max(report["leakage"]) < 1e-3
    assert np.isfinite(report["operator_norm_distance"])


@slow
def test_ccz_decoherence_follows_gate_time_over_coherence_time(ccz_run, tmp_path):
    _, config, out, _ = ccz_run
    assert run(tmp_path, "decoherence", "--config", config, "--out", str(out)) == EXIT_OK
    assert decoherence_rows(out)[30.0] == pytest.approx(0.9992, abs=5e-4)
    fit = json.loads((out / "decoherence_fit.json").read_text())
    assert all(0.8 <= c <= 1.3 for c in fit["per_point_coefficient"])


@slow
def test_ccz_tolerates_control_noise_in_the_khz_band(ccz_run, tmp_path):
    _, config, out, report = ccz_run
    assert run(tmp_path, "robustness", "--config", config, "--out", str(out)) == EXIT_OK
    summary = json.loads((out / "robustness_summary.json").read_text())
    assert summary["base_fidelity"] == pytest.approx(report["intrinsic_fidelity"], abs=1e-12)
    assert 100 <= summary["max_delta_khz"] <= 3000


@slow
def test_fredkin_synthesis_reaches_high_fidelity(tmp_path):
    code, _, _, report = synthesize(tmp_path, "fredkin", gate="FREDKIN")
    assert code in (EXIT_OK, EXIT_BUDGET)
    assert report["intrinsic_fidelity"] >= 0.999


@slow
def test_czz_synthesis_uses_93_parameters_and_survives_decoherence(tmp_path):
    code, config, out, report = synthesize(
        tmp_path, "czz", gate="CZZ", theta_ns=31, decoherence={"t_grid_us": [30]}
    )
    assert code in (EXIT_OK, EXIT_BUDGET)
    assert load_pulse(out / "pulse.json").values.shape == (3, 31)
    assert report["intrinsic_fidelity"] >= 0.999
    assert run(tmp_path, "decoherence", "--config", config, "--out", str(out)) == EXIT_OK
    assert decoherence_rows(out)[30.0] == pytest.approx(0.9990, abs=5e-4)


@slow
def test_erf_pulses_reach_the_same_ccz_fidelity(tmp_path):
    code, _, out, report = synthesize(tmp_path, "ccz_erf", pulse_shape="piecewise_erf")
    assert code in (EXIT_OK, EXIT_BUDGET)
    assert load_pulse(out / "pulse.json").values.shape == (3, 26)
    assert report["intrinsic_fidelity"] >= 0.999
