"""Control pulses for the transmon frequencies.

Two parameterizations share one table of values ``eps[k, l]`` (transmon
``k``, knot ``l``, ``N`` knots per transmon):

``piecewise_constant``
    ``eps[k, l]`` holds on ``[l * dt, (l + 1) * dt)`` with ``dt = theta / N``;
    the last bin is right-closed.  Every value acts for the same time.
``piecewise_erf``
    Knots sit at ``t_l = l * dt`` with ``dt = theta / (N - 1)`` and
    consecutive knots are joined by an error-function step of width
    ``dt / 5``, the first-order model of the Gaussian line filters.

The analytic avoided-crossing pulse used for the two-transmon CZ study and
the uniform control-noise perturbation live here as well.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy.special import erf, erfc

from model import ParameterError, TransmonChainSpec

PIECEWISE_CONSTANT = "piecewise_constant"
PIECEWISE_ERF = "piecewise_erf"
SHAPES = (PIECEWISE_CONSTANT, PIECEWISE_ERF)

ERF_SHARPNESS = 5.0
KHZ = 1e-6  # in GHz
_TIME_SLACK = 1e-12

# largest deviation of an erf segment from its knot values, relative to the step
ERF_KNOT_TAIL = 0.5 * float(erfc(0.5 * ERF_SHARPNESS))


@dataclass(frozen=True, eq=False)
class PulseTable:
    """Knot values (GHz) of ``K`` transmon pulses over ``theta`` ns."""

    values: np.ndarray
    theta: float
    shape_kind: str = PIECEWISE_CONSTANT

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 2:
            raise ParameterError(f"pulse values must be a K x N matrix, got shape {vals.shape}")
        if vals.shape[1] < 2:
            raise ParameterError("a pulse needs at least two knots")
        if not np.all(np.isfinite(vals)):
            raise ParameterError("pulse values must be finite")
        if not self.theta > 0:
            raise ParameterError(f"pulse duration must be positive, got {self.theta}")
        if self.shape_kind not in SHAPES:
            raise ParameterError(f"unknown pulse shape {self.shape_kind!r}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "theta", float(self.theta))

    @property
    def n_transmons(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_bins(self) -> int:
        return int(self.values.shape[1])

    @property
    def n_intervals(self) -> int:
        """Held bins (``N``) or erf segments between knots (``N - 1``)."""
        return self.n_bins if self.shape_kind == PIECEWISE_CONSTANT else self.n_bins - 1

    @property
    def dt(self) -> float:
        return self.theta / self.n_intervals

    def knot_times(self) -> np.ndarray:
        """Knot times; for piecewise-constant pulses the start of every bin."""
        return np.arange(self.n_bins) * self.dt

    def genome(self) -> np.ndarray:
        """Flattened values, transmon-major; the optimizer's search vector."""
        return self.values.reshape(-1).copy()

    @classmethod
    def from_genome(
        cls,
        genome: Sequence[float],
        n_transmons: int,
        theta: float,
        shape_kind: str = PIECEWISE_CONSTANT,
    ) -> "PulseTable":
        flat = np.asarray(genome, dtype=float)
        if flat.size % n_transmons:
            raise ParameterError(
                f"genome of length {flat.size} does not split over {n_transmons} transmons"
            )
        return cls(flat.reshape(n_transmons, -1), theta, shape_kind)

    @classmethod
    def constant(
        cls,
        value: float | Sequence[float],
        n_transmons: int,
        n_bins: int,
        theta: float,
        shape_kind: str = PIECEWISE_CONSTANT,
    ) -> "PulseTable":
        levels = np.broadcast_to(np.asarray(value, dtype=float), (n_transmons,))
        return cls(np.repeat(levels[:, None], n_bins, axis=1), theta, shape_kind)

    def with_values(self, values: np.ndarray) -> "PulseTable":
        return PulseTable(values, self.theta, self.shape_kind)

    def out_of_bounds(self, spec: TransmonChainSpec) -> int:
        """Number of knot values outside the chain's frequency bounds."""
        v = self.values
        return int(np.count_nonzero((v < spec.freq_min) | (v > spec.freq_max)))

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "theta_ns": self.theta,
            "dt_ns": self.dt,
            "shape": self.shape_kind,
            "values": self.values.tolist(),
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "PulseTable":
        try:
            pulse = cls(data["values"], data["theta_ns"], data.get("shape", PIECEWISE_CONSTANT))
        except KeyError as exc:
            raise ParameterError(f"pulse file is missing field {exc}") from exc
        dt = data.get("dt_ns")
        if dt is not None and abs(dt - pulse.dt) > 1e-9 * max(1.0, pulse.dt):
            raise ParameterError(
                f"dt_ns={dt} disagrees with the {pulse.shape_kind} spacing {pulse.dt}"
            )
        return pulse


def save_pulse(path: str | Path, pulse: PulseTable) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(pulse.to_json_dict(), f, indent=2)
        f.write("\n")


def load_pulse(path: str | Path) -> PulseTable:
    with open(path, "r", encoding="utf-8") as f:
        return PulseTable.from_json_dict(json.load(f))


# ----------------------------------------------------------------------
# sampling


def _check_times(p: PulseTable, times: np.ndarray) -> np.ndarray:
    slack = _TIME_SLACK * p.theta
    if np.any(times < -slack) or np.any(times > p.theta + slack):
        raise ParameterError(f"sample time outside [0, {p.theta}] ns")
    return np.clip(times, 0.0, p.theta)


def sample_times(p: PulseTable, times: Sequence[float] | np.ndarray) -> np.ndarray:
    """Pulse values at ``times`` (ns); returns an array of shape ``(len(times), K)``."""
    t = _check_times(p, np.atleast_1d(np.asarray(times, dtype=float)))
    dt = p.dt
    seg = np.clip(np.floor(t / dt).astype(int), 0, p.n_intervals - 1)
    left = p.values[:, seg].T
    if p.shape_kind == PIECEWISE_CONSTANT:
        return left
    right = p.values[:, seg + 1].T
    centre = (seg + 0.5) * dt
    step = erf(ERF_SHARPNESS / dt * (t - centre))[:, None]
    return 0.5 * (left + right) + 0.5 * (right - left) * step


def sample_pulse(p: PulseTable, t: float) -> np.ndarray:
    """Per-transmon frequency vector (GHz) at time ``t`` (ns)."""
    return sample_times(p, [t])[0]


def pulse_integral(p: PulseTable) -> np.ndarray:
    """Time integral of each transmon pulse over ``[0, theta]`` (GHz ns).

    The erf step is odd around each interval centre, so both shapes reduce
    to closed forms.
    """
    v = p.values
    if p.shape_kind == PIECEWISE_CONSTANT:
        return v.sum(axis=1) * p.dt
    return 0.5 * (v[:, :-1] + v[:, 1:]).sum(axis=1) * p.dt


def _erf_antiderivative(x: np.ndarray) -> np.ndarray:
    return x * erf(x) + np.exp(-x * x) / np.sqrt(np.pi)


def window_means(p: PulseTable, starts: Sequence[float] | np.ndarray, width: float) -> np.ndarray:
    """Exact mean of each pulse over ``[s, s + width]``, shape ``(len(starts), K)``.

    Every window must lie inside one bin or erf segment; the segment is
    chosen by the window centre.
    """
    if not width > 0:
        raise ParameterError("window width must be positive")
    s = _check_times(p, np.atleast_1d(np.asarray(starts, dtype=float)))
    _check_times(p, s + width)
    dt = p.dt
    seg = np.clip(np.floor((s + 0.5 * width) / dt).astype(int), 0, p.n_intervals - 1)
    left = p.values[:, seg].T
    if p.shape_kind == PIECEWISE_CONSTANT:
        return left
    right = p.values[:, seg + 1].T
    a = ERF_SHARPNESS / dt
    x0 = a * (s - (seg + 0.5) * dt)
    x1 = x0 + a * width
    step = (_erf_antiderivative(x1) - _erf_antiderivative(x0)) / (a * width)
    return 0.5 * (left + right) + 0.5 * (right - left) * step[:, None]


def sampled_rows(p: PulseTable, resolution_ns: float) -> tuple[list[str], list[list[float]]]:
    """Header and rows ``t_ns, eps1_ghz, ...`` for plotting."""
    if not resolution_ns > 0:
        raise ParameterError("resolution must be positive")
    n = int(np.floor(p.theta / resolution_ns + 1e-9)) + 1
    times = np.minimum(np.arange(n) * resolution_ns, p.theta)
    vals = sample_times(p, times)
    header = ["t_ns"] + [f"eps{k + 1}_ghz" for k in range(p.n_transmons)]
    rows = [[float(t)] + [float(x) for x in row] for t, row in zip(times, vals)]
    return header, rows


# ----------------------------------------------------------------------
# avoided-crossing CZ pulse


@dataclass(frozen=True)
class CzPulseSpec:
    """Frequency excursion of the second transmon for the CZ gate (GHz, ns)."""

    t_ramp: float
    t_gate: float
    omega_off: float = 7.5
    omega_on: float = 6.7

    def __post_init__(self) -> None:
        if not self.t_ramp > 0:
            raise ParameterError("t_ramp must be positive")
        if not self.t_gate > 2 * self.t_ramp:
            raise ParameterError(
                f"t_gate ({self.t_gate}) must exceed 2 * t_ramp ({2 * self.t_ramp})"
            )

    @property
    def t_on(self) -> float:
        return self.t_gate - 2 * self.t_ramp

    @property
    def effective_on_time(self) -> float:
        """Time between the half-height points of the rising and falling ramps."""
        return self.t_gate - self.t_ramp

    @classmethod
    def from_effective_on_time(
        cls, on_time: float, t_ramp: float, omega_off: float = 7.5, omega_on: float = 6.7
    ) -> "CzPulseSpec":
        return cls(t_ramp=t_ramp, t_gate=on_time + t_ramp, omega_off=omega_off, omega_on=omega_on)


def cz_pulse(spec: CzPulseSpec, t: float | np.ndarray) -> float | np.ndarray:
    """Frequency of the second transmon at ``t``; accepts scalars or arrays."""
    times = np.asarray(t, dtype=float)
    slack = _TIME_SLACK * spec.t_gate
    if np.any(times < -slack) or np.any(times > spec.t_gate + slack):
        raise ParameterError(f"time outside [0, {spec.t_gate}] ns")
    rise = erf((4 * times - 2 * spec.t_ramp) / spec.t_ramp)
    fall = erf((4 * times - 4 * spec.t_gate + 2 * spec.t_ramp) / spec.t_ramp)
    out = spec.omega_off + 0.5 * (spec.omega_on - spec.omega_off) * (rise - fall)
    return float(out) if np.ndim(out) == 0 else out


# ----------------------------------------------------------------------
# control noise


def perturb_pulse(
    p: PulseTable, delta_eps_khz: float, rng: np.random.Generator
) -> PulseTable:
    """Add ``delta * U(-1, 1)`` to every knot; the result is not clipped to bounds."""
    if delta_eps_khz < 0:
        raise ParameterError("delta_eps must be non-negative")
    noise = rng.uniform(-1.0, 1.0, size=p.values.shape)
    return p.with_values(p.values + delta_eps_khz * KHZ * noise)
