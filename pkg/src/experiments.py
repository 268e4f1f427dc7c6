#!/usr/bin/env python3
"""Command-line driver for gate synthesis and the pulse studies.

Verbs
-----
``optimize``     synthesize a pulse for the configured gate
``sweep-time``   best fidelity against gate time for several couplings
``robustness``   fidelity of a stored pulse under random control noise
``decoherence``  average state fidelity of a stored pulse against T1 = T2
``spectrum``     chain eigenvalues while one transmon is detuned
``cz-study``     avoided-crossing CZ gate on two transmons
``verify``       truth tables and model self-checks

Every table is written as CSV whose first line records the configuration
digest and seed; re-running a command with the same inputs reproduces the
files byte for byte.
"""

from __future__ import annotations

import argparse
import logging
import math
from dataclasses import dataclass, field
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from scipy.stats import linregress

from gates import GATE_NAMES, HADAMARD, export_gate_json, make_target, verify_truth_table
from metrics import get_metrics, reset_metrics, set_output_file
from model import (
    ExcitationBasis,
    TransmonChainSpec,
    build_hamiltonian,
    commutator_norm,
    number_operator,
    spectrum_sweep,
)
from noise import amplitude_damping_kraus, average_state_fidelity, phase_damping_kraus
from optimizer import (
    OptimizationAborted,
    OptimizationResult,
    load_checkpoint,
    run_sussade,
)
from propagation import (
    GateObjective,
    PhaseCompensation,
    compensated_fidelity,
    diagnostic_dump,
    operator_norm_distance,
    propagate,
    propagate_samples,
)
from pulses import CzPulseSpec, PulseTable, cz_pulse, load_pulse, perturb_pulse, sampled_rows, save_pulse
from run_config import ConfigError, RunConfig, load_run_config, n_bins_for
from run_hooks import OptimizerHooks
from serialization import write_csv, write_json
from workers import Evaluator, SerialEvaluator, make_evaluator

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BUDGET = 2

_SWEEP_STREAM = 3
_ROBUSTNESS_STREAM = 4
PULSE_SAMPLES_PER_BIN = 10

logger = logging.getLogger(__name__)


def _derived_seed(seed: int, *key: int) -> int:
    """Independent 63-bit seed for a sub-task of a run."""
    state = np.random.SeedSequence(seed, spawn_key=key).generate_state(1, dtype=np.uint64)
    return int(state[0] >> np.uint64(1))


def _csv(cfg: RunConfig, path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    write_csv(path, header, rows, config_digest=cfg.digest(), seed=cfg.optimizer.seed)
    logger.info("wrote %s (%d rows)", path, len(rows))


def evaluate_pulse(
    spec: TransmonChainSpec, p: PulseTable, cfg: RunConfig
) -> tuple[float, PhaseCompensation, Any]:
    """Intrinsic fidelity, compensation phases and evolution of a pulse for the configured gate."""
    result = propagate(spec, p, cfg.substeps_per_bin)
    fidelity, comp = compensated_fidelity(result.computational_unitary, cfg.target())
    return fidelity, comp, result


# ----------------------------------------------------------------------
# optimize


@dataclass
class OptimizeOutcome:
    result: OptimizationResult
    fidelity: float
    compensation: PhaseCompensation
    leakage: list[float]
    pulse_path: Path


def _write_optimize_artifacts(
    cfg: RunConfig, out: Path, spec: TransmonChainSpec, result: OptimizationResult
) -> OptimizeOutcome:
    target = cfg.target()
    pulse = PulseTable.from_genome(result.best_genome, spec.n_transmons, cfg.theta_ns, cfg.pulse_shape)
    pulse_path = out / "pulse.json"
    save_pulse(pulse_path, pulse)
    _csv(cfg, out / "history.csv", ["generation", "best_fitness", "mean_fitness"], result.history_rows())
    header, rows = sampled_rows(pulse, pulse.dt / PULSE_SAMPLES_PER_BIN)
    _csv(cfg, out / "pulse_samples.csv", header, rows)

    # re-evaluate from the file so the report matches what a reader recomputes
    fidelity, comp, evolution = evaluate_pulse(spec, load_pulse(pulse_path), cfg)
    leakage = [float(x) for x in evolution.leakage]
    export_gate_json(out / "gate.json", target)
    write_json(out / "propagator.json", diagnostic_dump(evolution))
    write_json(
        out / "report.json",
        {
            "gate": cfg.gate.upper(),
            "synthesized_as": target.name,
            "theta_ns": cfg.theta_ns,
            "n_bins": pulse.n_bins,
            "pulse_shape": cfg.pulse_shape,
            "intrinsic_fidelity": fidelity,
            "objective_fidelity": result.best_fitness,
            "operator_norm_distance": operator_norm_distance(
                evolution.computational_unitary, target, comp
            ),
            "leakage": leakage,
            "compensation": comp.to_json_dict(),
            "generations": result.generation,
            "evaluations": result.evaluations,
            "stop_reason": result.stop_reason,
            "target_reached": result.target_reached,
            "config_sha256": cfg.digest(),
            "seed": cfg.optimizer.seed,
        },
    )
    return OptimizeOutcome(result, fidelity, comp, leakage, pulse_path)


def cmd_optimize(
    cfg: RunConfig,
    out: Path,
    *,
    evaluator: Optional[Evaluator] = None,
    resume: bool = False,
) -> OptimizeOutcome:
    """Run the optimizer on the configured gate and write pulse, history and report."""
    spec = cfg.chain_spec()
    objective = GateObjective(
        spec,
        cfg.target(),
        cfg.theta_ns,
        cfg.pulse_shape,
        cfg.substeps_per_bin,
        cfg.compensate_phases,
    )
    sussade = cfg.sussade_config()
    warm = None
    if cfg.warm_start:
        start = load_pulse(cfg.warm_start)
        if start.values.shape != (spec.n_transmons, cfg.n_bins):
            raise ConfigError(
                f"warm start {cfg.warm_start} has shape {start.values.shape}, "
                f"expected {(spec.n_transmons, cfg.n_bins)}"
            )
        warm = start.genome()

    checkpoint = out / "checkpoint.json"
    previous = None
    if resume and checkpoint.exists():
        previous, _ = load_checkpoint(checkpoint)
    hooks = OptimizerHooks(
        on_checkpoint=lambda path: logger.debug("checkpoint written to %s", path),
    )
    logger.info(
        "optimizing %s: theta=%g ns, %d knots per transmon, %d parameters",
        cfg.target().name,
        cfg.theta_ns,
        cfg.n_bins,
        sussade.dims,
    )
    try:
        result = run_sussade(
            objective,
            sussade,
            initial_genome=warm,
            evaluator=evaluator,
            hooks=hooks,
            logger=logger,
            resume=previous,
            checkpoint_path=checkpoint if cfg.checkpoint_every else None,
            checkpoint_every=cfg.checkpoint_every,
        )
    except OptimizationAborted as exc:
        if exc.partial.history:
            _write_optimize_artifacts(cfg, out, spec, exc.partial)
        raise
    return _write_optimize_artifacts(cfg, out, spec, result)


# ----------------------------------------------------------------------
# sweep-time


@dataclass
class SweepCell:
    """One budgeted optimization at fixed ``(g, theta)``; picklable."""

    cfg: RunConfig
    g_mhz: float
    theta_ns: float
    seed: int

    def __call__(self, _: int = 0) -> tuple[float, int, str]:
        try:
            spec = self.cfg.chain_spec(self.g_mhz)
            objective = GateObjective(
                spec,
                self.cfg.target(),
                self.theta_ns,
                self.cfg.pulse_shape,
                self.cfg.substeps_per_bin,
                self.cfg.compensate_phases,
            )
            sussade = self.cfg.sussade_config(
                dims=spec.n_transmons * n_bins_for(self.theta_ns, self.cfg.dt_ns),
                seed=self.seed,
                max_evaluations=self.cfg.sweep.max_evaluations_per_cell,
            )
            result = run_sussade(objective, sussade, evaluator=SerialEvaluator())
            return result.best_fitness, result.evaluations, result.stop_reason or ""
        except Exception as exc:
            logger.error("sweep cell g=%g MHz theta=%g ns failed", self.g_mhz, self.theta_ns, exc_info=True)
            return math.nan, 0, f"error: {exc}"


@dataclass
class SweepOutcome:
    rows: list[list[Any]]
    theta_star: dict[float, Optional[float]]
    fit: Optional[dict[str, float]] = None


def threshold_times(
    rows: Sequence[Sequence[Any]], threshold: float
) -> dict[float, Optional[float]]:
    """Shortest gate time per coupling whose best fidelity reaches ``threshold``."""
    out: dict[float, Optional[float]] = {}
    for g, theta, fid, *_ in rows:
        out.setdefault(g, None)
        if fid >= threshold and (out[g] is None or theta < out[g]):
            out[g] = theta
    return out


def fit_inverse_time(theta_star: dict[float, Optional[float]]) -> Optional[dict[str, float]]:
    """Least-squares line ``1/theta* = slope * g + intercept``; ``None`` with fewer than two points."""
    pts = [(g, 1.0 / t) for g, t in theta_star.items() if t is not None]
    if len(pts) < 2:
        return None
    g, inv = zip(*pts)
    fit = linregress(g, inv)
    return {
        "slope_per_ns_mhz": float(fit.slope),
        "intercept_per_ns": float(fit.intercept),
        "r_squared": float(fit.rvalue**2),
    }


def cmd_sweep_time(cfg: RunConfig, out: Path, *, evaluator: Optional[Evaluator] = None) -> SweepOutcome:
    """Budgeted optimizations over the ``(g, theta)`` grid and the threshold-time fit."""
    evaluator = evaluator or SerialEvaluator()
    cells = [
        SweepCell(cfg, g, theta, _derived_seed(cfg.optimizer.seed, _SWEEP_STREAM, i, j))
        for i, g in enumerate(cfg.sweep.g_mhz)
        for j, theta in enumerate(cfg.sweep.theta_grid_ns)
    ]
    results = evaluator.map(_run_cell, cells)
    rows = [
        [cell.g_mhz, cell.theta_ns, fid, evals, status]
        for cell, (fid, evals, status) in zip(cells, results)
    ]
    _csv(cfg, out / "sweep_time.csv", ["g_mhz", "theta_ns", "best_fitness", "evaluations", "status"], rows)

    theta_star = threshold_times(rows, cfg.fidelity_threshold)
    star_rows = [
        [g, t if t is not None else math.nan, 1.0 / t if t else math.nan]
        for g, t in theta_star.items()
    ]
    _csv(cfg, out / "threshold_time.csv", ["g_mhz", "theta_star_ns", "inv_theta_star_per_ns"], star_rows)
    fit = fit_inverse_time(theta_star)
    write_json(out / "sweep_fit.json", {"threshold": cfg.fidelity_threshold, "fit": fit})
    if fit:
        logger.info("1/theta* vs g: slope %.6g, R^2 %.4f", fit["slope_per_ns_mhz"], fit["r_squared"])
    return SweepOutcome(rows, theta_star, fit)


def _run_cell(cell: SweepCell) -> tuple[float, int, str]:
    return cell()


# ----------------------------------------------------------------------
# robustness


@dataclass
class RobustnessTrial:
    """Fidelity of one randomly perturbed copy of a pulse; picklable."""

    cfg: RunConfig
    spec: TransmonChainSpec
    pulse: PulseTable
    delta_khz: float
    seed: int

    def __call__(self, _: int = 0) -> float:
        noisy = perturb_pulse(self.pulse, self.delta_khz, np.random.default_rng(self.seed))
        fidelity, _, _ = evaluate_pulse(self.spec, noisy, self.cfg)
        return fidelity


@dataclass
class RobustnessOutcome:
    base_fidelity: float
    rows: list[list[float]]
    max_delta_khz: Optional[float]


def cmd_robustness(
    cfg: RunConfig, out: Path, pulse_path: Path, *, evaluator: Optional[Evaluator] = None
) -> RobustnessOutcome:
    """Mean and minimum fidelity of a stored pulse against control-noise amplitude."""
    evaluator = evaluator or SerialEvaluator()
    spec = cfg.chain_spec()
    pulse = load_pulse(pulse_path)
    base, _, _ = evaluate_pulse(spec, pulse, cfg)
    trials = cfg.robustness.trials_per_point
    rows: list[list[float]] = []
    max_delta: Optional[float] = None
    holding = True
    for i, delta in enumerate(cfg.robustness.delta_grid_khz):
        tasks = [
            RobustnessTrial(cfg, spec, pulse, delta, _derived_seed(cfg.optimizer.seed, _ROBUSTNESS_STREAM, i, k))
            for k in range(trials)
        ]
        fids = np.array(evaluator.map(_run_trial, tasks))
        mean, worst = float(np.mean(fids)), float(np.min(fids))
        rows.append([delta, mean, worst])
        logger.info("delta=%g kHz: mean %.8f min %.8f", delta, mean, worst)
        if holding and mean >= cfg.fidelity_threshold:
            max_delta = delta
        else:
            holding = False
    _csv(cfg, out / "robustness.csv", ["delta_khz", "mean_fidelity", "min_fidelity"], rows)
    write_json(
        out / "robustness_summary.json",
        {
            "pulse": str(pulse_path),
            "base_fidelity": base,
            "threshold": cfg.fidelity_threshold,
            "max_delta_khz": max_delta,
            "trials_per_point": trials,
        },
    )
    return RobustnessOutcome(base, rows, max_delta)


def _run_trial(trial: RobustnessTrial) -> float:
    return trial()


# ----------------------------------------------------------------------
# decoherence


@dataclass
class DecoherenceOutcome:
    rows: list[list[float]]
    coefficient: float
    per_point: list[float] = field(default_factory=list)


def deficit_coefficient(theta_ns: float, t_us: Sequence[float], fbar: Sequence[float]) -> float:
    """Least-squares ``c`` in ``1 - Fbar = c * theta / T`` through the origin."""
    x = np.array([theta_ns / (t * 1_000.0) for t in t_us])
    y = 1.0 - np.asarray(fbar, dtype=float)
    return float(np.dot(x, y) / np.dot(x, x))


def cmd_decoherence(
    cfg: RunConfig, out: Path, pulse_path: Path, *, evaluator: Optional[Evaluator] = None
) -> DecoherenceOutcome:
    """Average state fidelity of a stored pulse over the coherence-time grid."""
    spec = cfg.chain_spec()
    pulse = load_pulse(pulse_path)
    target = cfg.target()
    fidelity, comp, _ = evaluate_pulse(spec, pulse, cfg)
    logger.info("noiseless intrinsic fidelity %.10f", fidelity)
    rows = []
    for t_us in cfg.decoherence.t_grid_us:
        fbar = average_state_fidelity(
            spec,
            pulse,
            target,
            cfg.noise_spec(t_us),
            comp,
            substeps_per_bin=cfg.substeps_per_bin,
            evaluator=evaluator,
        )
        logger.info("T=%g us: average state fidelity %.8f", t_us, fbar)
        rows.append([t_us, fbar])
    grid = [r[0] for r in rows]
    fbars = [r[1] for r in rows]
    coefficient = deficit_coefficient(pulse.theta, grid, fbars)
    per_point = [(1.0 - f) * t * 1_000.0 / pulse.theta for t, f in zip(grid, fbars)]
    _csv(cfg, out / "decoherence.csv", ["T_us", "Fbar"], rows)
    write_json(
        out / "decoherence_fit.json",
        {
            "intrinsic_fidelity": fidelity,
            "coefficient": coefficient,
            "per_point_coefficient": per_point,
        },
    )
    return DecoherenceOutcome(rows, coefficient, per_point)


# ----------------------------------------------------------------------
# spectrum


def cmd_spectrum(cfg: RunConfig, out: Path) -> list[list[float]]:
    """Eigenvalue table of the configured chain; transmons are numbered from 1."""
    sec = cfg.spectrum
    eta = cfg.eta_mhz * 1e-3
    eta_prime = 3.0 * eta if cfg.eta_prime_mhz is None else cfg.eta_prime_mhz * 1e-3
    spec = TransmonChainSpec(n_transmons=sec.n_transmons, eta=eta, eta_prime=eta_prime, g=cfg.g_mhz * 1e-3)
    table = spectrum_sweep(
        spec,
        {int(k) - 1: float(v) for k, v in sec.fixed_ghz.items()},
        sec.swept_transmon - 1,
        sec.range_ghz,
        sec.n_points,
        max_excitation=sec.max_excitation,
    )
    rows = table.rows()
    _csv(cfg, out / "spectrum.csv", table.header(), rows)
    return rows


# ----------------------------------------------------------------------
# cz-study


def cz_fidelity(
    spec: TransmonChainSpec, pulse: CzPulseSpec, eps1: float, step_ns: float
) -> float:
    """Compensated CZ fidelity of the avoided-crossing pulse on two transmons (lab frame)."""
    n_steps = max(1, int(math.ceil(pulse.t_gate / step_ns)))
    dt = pulse.t_gate / n_steps
    mids = (np.arange(n_steps) + 0.5) * dt
    freqs = np.column_stack([np.full(n_steps, eps1), cz_pulse(pulse, mids)])
    result = propagate_samples(spec, freqs, dt)
    fidelity, _ = compensated_fidelity(result.computational_unitary, make_target("CZ"))
    return fidelity


@dataclass
class CzCell:
    spec: TransmonChainSpec
    pulse: CzPulseSpec
    eps1: float
    step_ns: float

    def __call__(self, _: int = 0) -> float:
        return cz_fidelity(self.spec, self.pulse, self.eps1, self.step_ns)


def _run_cz(cell: CzCell) -> float:
    return cell()


def predicted_t_on(g_ghz: float) -> float:
    """Sudden-regime ``t_on`` (ns) for a full |11>-|02> oscillation: ``1 / (2 sqrt(2) g)``."""
    return 1.0 / (2.0 * math.sqrt(2.0) * g_ghz)


def first_revival(curve: Sequence[float]) -> int:
    """Index of the best point in the first stretch of ``curve`` above its mid level.

    Later stretches are further full |11>-|02> oscillations and are ignored.
    """
    v = np.asarray(curve, dtype=float)
    above = v >= 0.5 * (v.max() + v.min())
    start = int(np.argmax(above))
    below = np.flatnonzero(~above[start:])
    stop = start + int(below[0]) if below.size else v.size
    return start + int(np.argmax(v[start:stop]))


@dataclass
class CzStudyOutcome:
    rows: list[list[float]]
    summary: list[list[float]]


def cmd_cz_study(cfg: RunConfig, out: Path, *, evaluator: Optional[Evaluator] = None) -> CzStudyOutcome:
    """Scan ``(g, omega_on, on-time)`` for the CZ pulse and compare the best on-time with ``1/g`` scaling.

    The on-time is measured between the half-height points of the two ramps,
    so the scan grid runs over ``t_gate - t_ramp``.
    """
    evaluator = evaluator or SerialEvaluator()
    sec = cfg.cz_study
    eta = (sec.eta_mhz if sec.eta_mhz is not None else cfg.eta_mhz) * 1e-3
    eta_prime = 3.0 * eta if cfg.eta_prime_mhz is None else cfg.eta_prime_mhz * 1e-3
    t_on_grid = np.linspace(sec.t_on_start_ns, sec.t_on_stop_ns, sec.t_on_points)

    keys = []
    cells = []
    for g_mhz in sec.g_mhz:
        spec = TransmonChainSpec(n_transmons=2, eta=eta, eta_prime=eta_prime, g=g_mhz * 1e-3)
        for omega_on in sec.omega_on_grid_ghz:
            for t_on in t_on_grid:
                pulse = CzPulseSpec.from_effective_on_time(
                    float(t_on), sec.t_ramp_ns, sec.omega_off_ghz, omega_on
                )
                keys.append((g_mhz, omega_on, float(t_on)))
                cells.append(CzCell(spec, pulse, sec.eps1_ghz, sec.step_ns))
    fids = evaluator.map(_run_cz, cells)
    rows = [[g, w, t, f] for (g, w, t), f in zip(keys, fids)]
    _csv(cfg, out / "cz_study.csv", ["g_mhz", "omega_on_ghz", "t_on_ns", "fidelity"], rows)

    grid = np.asarray(fids, dtype=float).reshape(len(sec.g_mhz), len(sec.omega_on_grid_ghz), len(t_on_grid))
    summary = []
    for g_mhz, table in zip(sec.g_mhz, grid):
        ti = first_revival(table.max(axis=0))
        wi = int(np.argmax(table[:, ti]))
        t_best = float(t_on_grid[ti])
        predicted = predicted_t_on(g_mhz * 1e-3)
        summary.append(
            [g_mhz, float(table[wi, ti]), t_best, sec.omega_on_grid_ghz[wi], predicted, t_best / predicted]
        )
        logger.info(
            "g=%g MHz: best CZ fidelity %.6f at t_on=%.4g ns (predicted %.4g ns)",
            g_mhz,
            table[wi, ti],
            t_best,
            predicted,
        )
    _csv(
        cfg,
        out / "cz_study_summary.csv",
        ["g_mhz", "best_fidelity", "t_on_best_ns", "omega_on_best_ghz", "t_on_predicted_ns", "ratio"],
        summary,
    )
    products = [s[2] * s[0] * 1e-3 for s in summary]
    write_json(
        out / "cz_study.json",
        {
            "t_on_times_g": products,
            "relative_spread": (max(products) - min(products)) / float(np.mean(products)),
        },
    )
    return CzStudyOutcome(rows, summary)


# ----------------------------------------------------------------------
# verify


def cmd_verify(cfg: RunConfig, out: Path) -> bool:
    """Check every built-in truth table and a handful of model identities."""
    checks: dict[str, bool] = {}
    for name in GATE_NAMES:
        report = verify_truth_table(make_target(name))
        checks[f"truth_table_{name}"] = report.passed
        for fail in report.failures():
            logger.error(
                "%s: %s -> %s expected %s got %s",
                name,
                fail.row.input_label,
                fail.row.output_label,
                fail.row.amplitude,
                fail.actual,
            )

    hh = np.kron(np.eye(2), np.kron(HADAMARD, HADAMARD))
    checks["cxx_is_conjugated_czz"] = bool(
        np.allclose(make_target("CXX").matrix, hh @ make_target("CZZ").matrix @ hh, atol=1e-12)
    )

    rng = np.random.default_rng(cfg.optimizer.seed)
    spec = TransmonChainSpec()
    n_op = number_operator(spec.n_transmons)
    worst = 0.0
    for _ in range(100):
        h = build_hamiltonian(spec, rng.uniform(spec.freq_min, spec.freq_max, spec.n_transmons))
        worst = max(worst, commutator_norm(np.asarray(h.entries), n_op))
    checks["hamiltonian_conserves_excitations"] = worst < 1e-12
    checks["truncated_dimension_20"] = ExcitationBasis(3, 3).dim == 20
    checks["kraus_order3_complete"] = (
        amplitude_damping_kraus(1.0, 1_000.0).completeness_deficit < 1e-9
        and phase_damping_kraus(1.0, 1_000.0).completeness_deficit < 1e-9
    )
    passed = all(checks.values())
    write_json(out / "verify.json", {"passed": passed, "checks": checks})
    for name, ok in checks.items():
        logger.info("%-36s %s", name, "ok" if ok else "FAILED")
    return passed


# ----------------------------------------------------------------------
# command line


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Path to JSON configuration file")
    common.add_argument("--seed", type=int, help="Master seed (overrides optimizer.seed)")
    common.add_argument("--out", help="Output directory (overrides output_dir)")
    common.add_argument("--workers", type=int, default=1, help="Worker processes for evaluations")
    common.add_argument("--log", dest="log_path", default="gatesynth.log", help="Path to log file")
    common.add_argument("--log-level", help="Logging level (e.g. INFO, DEBUG)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(description="Pulse synthesis for three-qubit transmon gates")
    sub = parser.add_subparsers(dest="command", required=True)
    opt = sub.add_parser("optimize", parents=[common], help="Synthesize a gate pulse")
    opt.add_argument("--resume", action="store_true", help="Continue from checkpoint.json in the output directory")
    sub.add_parser("sweep-time", parents=[common], help="Fidelity against gate time")
    for name, text in (("robustness", "Control-noise robustness"), ("decoherence", "Kraus decoherence scan")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--pulse", help="Pulse JSON (defaults to the config or <out>/pulse.json)")
    sub.add_parser("spectrum", parents=[common], help="Energy spectrum sweep")
    sub.add_parser("cz-study", parents=[common], help="Avoided-crossing CZ study")
    sub.add_parser("verify", parents=[common], help="Truth tables and model checks")
    return parser


def _pulse_path(arg: Optional[str], configured: Optional[str], out: Path) -> Path:
    return Path(arg or configured or out / "pulse.json")


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    try:
        cfg = load_run_config(args.config) if args.config else RunConfig().validate()
        cfg = cfg.with_overrides(seed=args.seed, output_dir=args.out, log_level=args.log_level)
    except ConfigError as exc:
        print(f"Invalid configuration: {exc}")
        return EXIT_ERROR

    level = getattr(logging, cfg.log_level.upper(), logging.INFO)
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s: %(message)s",
        handlers=[
            RotatingFileHandler(args.log_path, maxBytes=1_000_000, backupCount=5),
            logging.StreamHandler(),
        ],
    )
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    reset_metrics()
    set_output_file(str(out / "metrics.json"))
    logger.info("%s: config sha256 %s, seed %d", args.command, cfg.digest(), cfg.optimizer.seed)

    try:
        with make_evaluator(args.workers) as evaluator:
            if args.command == "optimize":
                outcome = cmd_optimize(cfg, out, evaluator=evaluator, resume=args.resume)
                logger.info("intrinsic fidelity %.10f (%s)", outcome.fidelity, outcome.result.stop_reason)
                return EXIT_OK if outcome.result.target_reached else EXIT_BUDGET
            if args.command == "sweep-time":
                cmd_sweep_time(cfg, out, evaluator=evaluator)
            elif args.command == "robustness":
                path = _pulse_path(args.pulse, cfg.robustness.pulse, out)
                cmd_robustness(cfg, out, path, evaluator=evaluator)
            elif args.command == "decoherence":
                path = _pulse_path(args.pulse, cfg.decoherence.pulse, out)
                cmd_decoherence(cfg, out, path, evaluator=evaluator)
            elif args.command == "spectrum":
                cmd_spectrum(cfg, out)
            elif args.command == "cz-study":
                cmd_cz_study(cfg, out, evaluator=evaluator)
            elif args.command == "verify":
                return EXIT_OK if cmd_verify(cfg, out) else EXIT_ERROR
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_ERROR
    except Exception as exc:
        logger.exception("%s failed: %s", args.command, exc)
        return EXIT_ERROR
    finally:
        logger.info("metrics: %s", get_metrics())
        set_output_file(None)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
