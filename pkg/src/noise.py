"""Kraus decoherence of the transmon chain.

Each transmon relaxes and dephases independently.  The single-site Kraus
sets are truncated at ``kraus_order``; amplitude damping is complete at
order 3 on four levels, while phase damping leaves a Poisson tail whose
size is tracked as the completeness deficit.

Channels act on the full ``4**K`` density matrix.  The excitation-truncated
propagators used for noiseless evolution do not host single-site Kraus
products, so every bin propagator is lifted to the tensor basis (identity
outside the truncated block) and the channel of duration ``dt`` follows it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from gates import GateTarget
from metrics import record_trace_renormalization
from model import (
    LEVELS,
    ParameterError,
    TransmonChainSpec,
    embed_in_tensor_space,
    site_operator,
)
from propagation import (
    PhaseCompensation,
    bin_propagators,
    chain_terms,
    compensated_fidelity,
    propagate,
)
from pulses import PulseTable
from workers import Evaluator, SerialEvaluator

DEFAULT_KRAUS_ORDER = 3
DEFAULT_TRACE_TOLERANCE = 1e-6
NS_PER_US = 1_000.0

logger = logging.getLogger(__name__)


class NumericalIntegrityError(RuntimeError):
    """Raised when a channel step loses more trace than the tolerance allows."""


@dataclass(frozen=True)
class NoiseSpec:
    """Coherence times in ns; ``math.inf`` disables a channel."""

    t1: float
    t2: float
    kraus_order: int = DEFAULT_KRAUS_ORDER
    phase_first: bool = False
    trace_tolerance: float = DEFAULT_TRACE_TOLERANCE

    def __post_init__(self) -> None:
        if not (self.t1 > 0 and self.t2 > 0):
            raise ParameterError(f"coherence times must be positive, got T1={self.t1}, T2={self.t2}")
        if self.kraus_order < 0:
            raise ParameterError("kraus_order must be non-negative")
        if not self.trace_tolerance > 0:
            raise ParameterError("trace_tolerance must be positive")

    @classmethod
    def uniform(cls, t_ns: float, **kwargs) -> "NoiseSpec":
        """``T1 = T2 = t_ns``."""
        return cls(t1=t_ns, t2=t_ns, **kwargs)

    @classmethod
    def from_microseconds(cls, t_us: float, **kwargs) -> "NoiseSpec":
        return cls.uniform(t_us * NS_PER_US, **kwargs)


@dataclass(frozen=True, eq=False)
class KrausSet:
    """Kraus operators of one channel over ``duration`` ns.

    ``completeness_deficit`` is the largest entry of ``I - sum K^dag K``.
    """

    operators: tuple[np.ndarray, ...]
    duration: float
    completeness_deficit: float = field(init=False)

    def __post_init__(self) -> None:
        dim = self.operators[0].shape[0]
        total = sum(k.conj().T @ k for k in self.operators)
        deficit = float(np.max(np.abs(np.eye(dim) - total)))
        object.__setattr__(self, "completeness_deficit", deficit)

    def nonzero(self) -> tuple[np.ndarray, ...]:
        return tuple(k for k in self.operators if np.any(k))


def _check_time(t: float) -> None:
    if t < 0:
        raise ParameterError(f"duration must be non-negative, got {t}")


def amplitude_damping_kraus(t: float, t1: float, order: int = DEFAULT_KRAUS_ORDER) -> KrausSet:
    """Relaxation ``|j> -> |j - l>`` of one four-level transmon over ``t`` ns.

    ``A_l = sum_j sqrt(C(j, l)) p**((j - l)/2) (1 - p)**(l/2) |j - l><j|``
    with ``p = exp(-t/T1)`` and ``l = 0..order``.
    """
    _check_time(t)
    if not 0 <= order <= LEVELS - 1:
        raise ParameterError(
            f"amplitude damping order must lie in [0, {LEVELS - 1}] for {LEVELS}-level transmons"
        )
    p = math.exp(-t / t1)
    ops = []
    for l in range(order + 1):
        a = np.zeros((LEVELS, LEVELS))
        for j in range(l, LEVELS):
            a[j - l, j] = math.sqrt(math.comb(j, l)) * p ** ((j - l) / 2) * (1.0 - p) ** (l / 2)
        ops.append(a)
    return KrausSet(tuple(ops), t)


def phase_damping_kraus(t: float, t2: float, order: int = DEFAULT_KRAUS_ORDER) -> KrausSet:
    """Dephasing of one four-level transmon over ``t`` ns.

    ``D_l = sum_j exp(-j**2 t / 2T2) sqrt((j**2 t / T2)**l / l!) |j><j|`` for
    ``l = 0..order``.
    """
    _check_time(t)
    if order < 0:
        raise ParameterError("phase damping order must be non-negative")
    j2 = np.arange(LEVELS, dtype=float) ** 2
    rate = j2 * t / t2
    ops = []
    for l in range(order + 1):
        ops.append(np.diag(np.exp(-0.5 * rate) * np.sqrt(rate**l / math.factorial(l))))
    return KrausSet(tuple(ops), t)


def embed_kraus(kset: KrausSet, site: int, n_transmons: int) -> KrausSet:
    """Single-site Kraus set lifted to the chain, identity on the other sites."""
    return KrausSet(
        tuple(site_operator(k, site, n_transmons) for k in kset.operators), kset.duration
    )


def _apply_site(rho: np.ndarray, ops: Sequence[np.ndarray], site: int, n: int) -> np.ndarray:
    """``sum_l K_l rho K_l^dag`` with ``K_l`` acting on ``site`` of a ``(4,)*2n`` tensor."""
    out = np.zeros_like(rho)
    for k in ops:
        x = np.moveaxis(np.tensordot(k, rho, axes=([1], [site])), 0, site)
        x = np.moveaxis(np.tensordot(x, k.conj(), axes=([n + site], [1])), -1, n + site)
        out += x
    return out


def _channels(noise: NoiseSpec, dt: float) -> list[KrausSet]:
    amp = amplitude_damping_kraus(dt, noise.t1, min(noise.kraus_order, LEVELS - 1))
    ph = phase_damping_kraus(dt, noise.t2, noise.kraus_order)
    return [ph, amp] if noise.phase_first else [amp, ph]


def apply_channel_step(
    rho: np.ndarray,
    u_step: np.ndarray,
    noise: NoiseSpec,
    dt: float,
    *,
    channels: Optional[Sequence[KrausSet]] = None,
) -> np.ndarray:
    """Evolve ``rho`` by ``u_step`` and then apply the local damping channels.

    Parameters
    ----------
    rho:
        Density matrix in the ``4**K`` tensor basis.
    u_step:
        Unitary of the step in the same basis.
    noise:
        Coherence times and truncation order.
    dt:
        Duration of the step in ns.
    channels:
        Precomputed single-site Kraus sets, in application order.  Built
        from ``noise`` and ``dt`` when omitted.
    """
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    n = int(round(math.log(dim, LEVELS)))
    if rho.shape != (dim, dim) or LEVELS**n != dim or u_step.shape != rho.shape:
        raise ParameterError(
            f"density matrix {rho.shape} and step {u_step.shape} must be 4^K square and match"
        )
    channels = channels if channels is not None else _channels(noise, dt)

    out = (u_step @ rho @ u_step.conj().T).reshape((LEVELS,) * (2 * n))
    for kset in channels:
        ops = kset.nonzero()
        for site in range(n):
            out = _apply_site(out, ops, site, n)
    out = out.reshape(dim, dim)

    trace = float(np.real(np.trace(out)))
    deficit = 1.0 - trace
    if abs(deficit) > noise.trace_tolerance:
        raise NumericalIntegrityError(
            f"trace deficit {deficit:.3e} exceeds tolerance {noise.trace_tolerance:.1e}"
        )
    if abs(deficit) > 0.5 * noise.trace_tolerance:
        logger.warning("trace deficit %.3e is close to the tolerance", deficit)
    else:
        logger.debug("renormalizing trace deficit %.3e", deficit)
    record_trace_renormalization()
    out = out / trace
    return 0.5 * (out + out.conj().T)


def computational_tensor_indices(n_transmons: int) -> np.ndarray:
    """Tensor-basis positions of ``|b1 ... bK>`` in binary order."""
    idx = np.arange(2**n_transmons)
    shifts = np.arange(n_transmons - 1, -1, -1)
    bits = (idx[:, None] >> shifts) & 1
    return bits @ (LEVELS ** shifts)


@dataclass
class BasisTrajectory:
    """Noisy evolution of one computational basis state; picklable for worker pools."""

    steps: np.ndarray
    noise: NoiseSpec
    dt: float
    start_indices: np.ndarray
    ideal_outputs: np.ndarray

    def __call__(self, k: int) -> float:
        dim = self.steps.shape[-1]
        channels = _channels(self.noise, self.dt)
        rho = np.zeros((dim, dim), dtype=complex)
        start = self.start_indices[k]
        rho[start, start] = 1.0
        for u in self.steps:
            rho = apply_channel_step(rho, u, self.noise, self.dt, channels=channels)
        psi = self.ideal_outputs[:, k]
        return math.sqrt(abs(np.vdot(psi, rho @ psi)))


def average_state_fidelity(
    spec: TransmonChainSpec,
    p: PulseTable,
    target: GateTarget,
    noise: NoiseSpec,
    comp: Optional[PhaseCompensation] = None,
    *,
    substeps_per_bin: Optional[int] = None,
    evaluator: Optional[Evaluator] = None,
) -> float:
    """Mean root overlap of decohered basis-state outputs with the ideal gate images.

    ``comp`` defaults to the compensation found for the noiseless propagator.
    Trajectories are independent and are dispatched through ``evaluator``.
    """
    terms = chain_terms(spec)
    if comp is None:
        result = propagate(spec, p, substeps_per_bin, terms=terms)
        _, comp = compensated_fidelity(result.computational_unitary, target)
    if comp.n_qubits != spec.n_transmons or target.n_qubits != spec.n_transmons:
        raise ParameterError("target and compensation must act on every transmon of the chain")

    blocks = bin_propagators(spec, p, substeps_per_bin, terms=terms)
    steps = np.array([embed_in_tensor_space(b, terms.excitation) for b in blocks])
    indices = computational_tensor_indices(spec.n_transmons)
    ideal = np.zeros((spec.full_dim, target.dim), dtype=complex)
    ideal[indices, :] = comp.apply(target.matrix)

    task = BasisTrajectory(steps, noise, p.dt, indices, ideal)
    evaluator = evaluator or SerialEvaluator()
    per_state = evaluator.map(task, range(target.dim))
    logger.debug("basis-state fidelities: %s", ", ".join(f"{f:.6f}" for f in per_state))
    return float(np.mean(per_state))
