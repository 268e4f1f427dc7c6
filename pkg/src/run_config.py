"""Run configuration loaded from JSON.

Every section is a frozen dataclass; keys that do not name a field are
rejected.  Frequencies are given in MHz or GHz as the key suffix says, times
in ns or µs likewise.  Missing keys take the working point of the
three-qubit studies (g = 30 MHz, eta = 200 MHz, 1 ns knots, +-2.5 GHz).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from gates import GateTarget, synthesis_target
from model import ParameterError, TransmonChainSpec
from noise import NoiseSpec
from optimizer import SussadeConfig
from pulses import PIECEWISE_CONSTANT, SHAPES

MHZ = 1e-3  # in GHz
# keys that do not affect results
_UNHASHED = ("output_dir", "log_level")


class ConfigError(ValueError):
    """Raised for unreadable or invalid configuration files."""


@dataclass(frozen=True)
class OptimizerSection:
    population_size: int = 32
    mu_l: float = 0.1
    mu_u: float = 0.1
    kappa1: float = 0.1
    kappa2: float = 0.9
    switch_s: float = 0.5
    subspace_m: int = 1
    max_generations: int = 2000
    max_evaluations: Optional[int] = 200_000
    target_fitness: float = 0.999
    seed: int = 0
    initial_mu: Optional[float] = None
    initial_xi: float = 0.9
    variant: str = "sussade"
    jrand: bool = False


@dataclass(frozen=True)
class NoiseSection:
    t1_us: Optional[float] = None
    t2_us: Optional[float] = None
    kraus_order: int = 3
    phase_first: bool = False
    trace_tolerance: float = 1e-6


@dataclass(frozen=True)
class SweepSection:
    g_mhz: tuple[float, ...] = (20.0, 30.0, 40.0, 50.0)
    theta_grid_ns: tuple[float, ...] = (14.0, 18.0, 22.0, 26.0, 30.0)
    max_evaluations_per_cell: int = 100_000


@dataclass(frozen=True)
class RobustnessSection:
    pulse: Optional[str] = None
    delta_grid_khz: tuple[float, ...] = (0.0, 100.0, 200.0, 400.0, 800.0, 1500.0, 3000.0)
    trials_per_point: int = 50


@dataclass(frozen=True)
class DecoherenceSection:
    pulse: Optional[str] = None
    t_grid_us: tuple[float, ...] = (10.0, 20.0, 30.0, 60.0)


@dataclass(frozen=True)
class SpectrumSection:
    n_transmons: int = 3
    fixed_ghz: dict[str, float] = field(default_factory=lambda: {"1": 4.8, "3": 6.8})
    swept_transmon: int = 2
    range_ghz: tuple[float, float] = (4.5, 7.5)
    n_points: int = 301
    max_excitation: Optional[int] = None


@dataclass(frozen=True)
class CzStudySection:
    eps1_ghz: float = 6.5
    eta_mhz: Optional[float] = None
    omega_off_ghz: float = 7.5
    omega_on_grid_ghz: tuple[float, ...] = (6.7,)
    t_ramp_ns: float = 1.0
    t_on_start_ns: float = 5.0
    t_on_stop_ns: float = 25.0
    t_on_points: int = 101
    g_mhz: tuple[float, ...] = (20.0, 30.0, 40.0, 50.0)
    step_ns: float = 0.01


_SECTIONS = {
    "optimizer": OptimizerSection,
    "noise": NoiseSection,
    "sweep": SweepSection,
    "robustness": RobustnessSection,
    "decoherence": DecoherenceSection,
    "spectrum": SpectrumSection,
    "cz_study": CzStudySection,
}


@dataclass(frozen=True)
class RunConfig:
    gate: str = "CCZ"
    theta_ns: float = 26.0
    dt_ns: float = 1.0
    g_mhz: float = 30.0
    eta_mhz: float = 200.0
    eta_prime_mhz: Optional[float] = None
    freq_min_ghz: float = -2.5
    freq_max_ghz: float = 2.5
    pulse_shape: str = PIECEWISE_CONSTANT
    substeps_per_bin: Optional[int] = None
    compensate_phases: bool = True
    warm_start: Optional[str] = None
    output_dir: str = "results"
    log_level: str = "INFO"
    fidelity_threshold: float = 0.9999
    checkpoint_every: int = 0
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    robustness: RobustnessSection = field(default_factory=RobustnessSection)
    decoherence: DecoherenceSection = field(default_factory=DecoherenceSection)
    spectrum: SpectrumSection = field(default_factory=SpectrumSection)
    cz_study: CzStudySection = field(default_factory=CzStudySection)

    @property
    def n_bins(self) -> int:
        """Knot count ``round(theta / dt)``.

        Piecewise-constant bins last ``theta / N``; erf knots sit
        ``theta / (N - 1)`` apart.
        """
        return n_bins_for(self.theta_ns, self.dt_ns)

    def target(self) -> GateTarget:
        return synthesis_target(self.gate)

    def chain_spec(self, g_mhz: Optional[float] = None) -> TransmonChainSpec:
        eta = self.eta_mhz * MHZ
        eta_prime = 3.0 * eta if self.eta_prime_mhz is None else self.eta_prime_mhz * MHZ
        return TransmonChainSpec(
            n_transmons=self.target().n_qubits,
            eta=eta,
            eta_prime=eta_prime,
            g=(self.g_mhz if g_mhz is None else g_mhz) * MHZ,
            freq_min=self.freq_min_ghz,
            freq_max=self.freq_max_ghz,
        )

    def sussade_config(self, **overrides: Any) -> SussadeConfig:
        opt = dataclasses.asdict(self.optimizer)
        opt.update(
            dims=self.target().n_qubits * self.n_bins,
            bounds=(self.freq_min_ghz, self.freq_max_ghz),
        )
        opt.update(overrides)
        return SussadeConfig(**opt)

    def noise_spec(self, t_us: float) -> NoiseSpec:
        """Noise at coherence time ``t_us``; explicit ``t1_us``/``t2_us`` win."""
        n = self.noise
        t1 = n.t1_us if n.t1_us is not None else t_us
        t2 = n.t2_us if n.t2_us is not None else t_us
        return NoiseSpec(
            t1=t1 * 1_000.0,
            t2=t2 * 1_000.0,
            kraus_order=n.kraus_order,
            phase_first=n.phase_first,
            trace_tolerance=n.trace_tolerance,
        )

    def with_overrides(
        self,
        *,
        seed: Optional[int] = None,
        output_dir: Optional[str] = None,
        log_level: Optional[str] = None,
    ) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = dataclasses.replace(cfg, optimizer=dataclasses.replace(cfg.optimizer, seed=seed))
        if output_dir is not None:
            cfg = dataclasses.replace(cfg, output_dir=output_dir)
        if log_level is not None:
            cfg = dataclasses.replace(cfg, log_level=log_level)
        return cfg

    def to_json_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON of the resolved configuration, output settings excluded."""
        data = {k: v for k, v in self.to_json_dict().items() if k not in _UNHASHED}
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def validate(self) -> "RunConfig":
        """Build the derived objects once so that bad values fail at load time."""
        if self.pulse_shape not in SHAPES:
            raise ConfigError(f"pulse_shape must be one of {', '.join(SHAPES)}")
        if not (self.theta_ns > 0 and self.dt_ns > 0):
            raise ConfigError("theta_ns and dt_ns must be positive")
        if self.n_bins < 2:
            raise ConfigError(f"theta_ns={self.theta_ns} and dt_ns={self.dt_ns} give fewer than two knots")
        try:
            self.chain_spec()
            self.sussade_config()
            self.noise_spec(1.0)
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc
        return self


def n_bins_for(theta_ns: float, dt_ns: float) -> int:
    return max(2, int(round(theta_ns / dt_ns)))


def _build(cls: type, data: Any, where: str) -> Any:
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key in _SECTIONS and cls is RunConfig:
            kwargs[key] = _build(_SECTIONS[key], value, key)
        elif isinstance(value, list):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc


def run_config_from_dict(data: dict[str, Any]) -> RunConfig:
    return _build(RunConfig, data, "top level").validate()


def load_run_config(path: str | Path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"failed to load config file {path}: {exc}") from exc
    return run_config_from_dict(data)
