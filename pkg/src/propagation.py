"""Time-ordered evolution of the transmon chain and gate fidelities.

Time is in ns and Hamiltonians in GHz, so each step propagator is
``exp(-2j*pi*H*dt)``.  Each substep uses a fourth-order Magnus step: the
exact mean Hamiltonian over the substep (the pulse mean has a closed form)
plus the commutator of the Hamiltonians at the two Gauss points.  A
piecewise-constant pulse with one substep per bin is integrated exactly.
Evolution runs in the excitation-truncated basis (20 states for three
transmons), which hosts the whole computational subspace.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from gates import GateTarget
from model import (
    ExcitationBasis,
    HamiltonianTerms,
    ModelError,
    OperatorMatrix,
    ParameterError,
    TransmonChainSpec,
    hamiltonian_terms,
)
from pulses import PIECEWISE_CONSTANT, PIECEWISE_ERF, PulseTable, sample_times, window_means

UNITARITY_TOL = 1e-9
DEFAULT_SUBSTEPS = {PIECEWISE_CONSTANT: 1, PIECEWISE_ERF: 40}
COMPENSATION_STARTS = 8
COMPENSATION_TOL = 1e-10
MAX_ASCENT_SWEEPS = 200
_TWO_PI = 2.0 * np.pi
_GAUSS_POINTS = 0.5 + np.array([-1.0, 1.0]) * np.sqrt(3.0) / 6.0
_MAGNUS_WEIGHT = np.sqrt(3.0) / 12.0

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    """Propagator of a pulse and its projection onto the computational subspace."""

    full_unitary: OperatorMatrix
    computational_unitary: np.ndarray
    leakage: np.ndarray

    @property
    def excitation(self) -> ExcitationBasis:
        return self.full_unitary.excitation  # type: ignore[return-value]


@dataclass(frozen=True)
class PhaseCompensation:
    """Local z phases (radians) applied before and after the target gate."""

    beta_pre: tuple[float, ...]
    beta_post: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "beta_pre", _wrap(self.beta_pre))
        object.__setattr__(self, "beta_post", _wrap(self.beta_post))

    @classmethod
    def identity(cls, n_qubits: int) -> "PhaseCompensation":
        return cls((0.0,) * n_qubits, (0.0,) * n_qubits)

    @property
    def n_qubits(self) -> int:
        return len(self.beta_pre)

    def matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """Diagonal ``(U_pre, U_post)``."""
        bits = _bit_table(self.n_qubits)
        pre = np.diag(np.exp(-1j * bits @ np.array(self.beta_pre)))
        post = np.diag(np.exp(-1j * bits @ np.array(self.beta_post)))
        return pre, post

    def apply(self, target: np.ndarray) -> np.ndarray:
        """``U_post @ target @ U_pre``."""
        pre, post = self.matrices()
        return post @ np.asarray(target) @ pre

    def to_json_dict(self) -> dict[str, list[float]]:
        return {"beta_pre": list(self.beta_pre), "beta_post": list(self.beta_post)}

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "PhaseCompensation":
        return cls(tuple(data["beta_pre"]), tuple(data["beta_post"]))


def _wrap(angles: Any) -> tuple[float, ...]:
    out = np.mod(np.asarray(angles, dtype=float), _TWO_PI)
    # mod can round up to exactly 2*pi for tiny negative inputs
    out[out >= _TWO_PI] = 0.0
    return tuple(float(a) for a in out)


def _bit_table(n_qubits: int) -> np.ndarray:
    """Row ``j`` holds the bits of ``j``, qubit 1 first."""
    idx = np.arange(2**n_qubits)
    shifts = np.arange(n_qubits - 1, -1, -1)
    return ((idx[:, None] >> shifts) & 1).astype(float)


# ----------------------------------------------------------------------
# evolution


def step_propagators(hamiltonians: np.ndarray, dt: float) -> np.ndarray:
    """``exp(-2j*pi*H*dt)`` for a stack of Hermitian matrices."""
    w, v = np.linalg.eigh(hamiltonians)
    phases = np.exp(-1j * _TWO_PI * dt * w)
    return (v * phases[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def _resolve_substeps(p: PulseTable, substeps_per_bin: Optional[int]) -> int:
    if substeps_per_bin is None:
        return DEFAULT_SUBSTEPS[p.shape_kind]
    if substeps_per_bin < 1:
        raise ParameterError("substeps_per_bin must be at least 1")
    return int(substeps_per_bin)


def chain_terms(spec: TransmonChainSpec) -> HamiltonianTerms:
    """Hamiltonian terms truncated to ``K`` excitations, enough for every ``|b1..bK>``."""
    return hamiltonian_terms(spec, max_excitation=spec.n_transmons)


def bin_propagators(
    spec: TransmonChainSpec,
    p: PulseTable,
    substeps_per_bin: Optional[int] = None,
    *,
    terms: Optional[HamiltonianTerms] = None,
) -> np.ndarray:
    """One propagator per pulse interval, shape ``(p.n_intervals, dim, dim)``."""
    if p.n_transmons != spec.n_transmons:
        raise ParameterError(
            f"pulse drives {p.n_transmons} transmons but the chain has {spec.n_transmons}"
        )
    substeps = _resolve_substeps(p, substeps_per_bin)
    terms = terms or chain_terms(spec)
    n_intervals = p.n_intervals
    sub_dt = p.dt / substeps
    grid = np.arange(n_intervals)[:, None] * p.dt + np.arange(substeps)[None, :] * sub_dt
    starts = grid.reshape(-1)
    # Magnus exponent in units of H * dt
    exponent = terms.hamiltonians(window_means(p, starts, sub_dt)) * sub_dt
    if p.shape_kind != PIECEWISE_CONSTANT:
        early = sample_times(p, starts + _GAUSS_POINTS[0] * sub_dt)
        late = sample_times(p, starts + _GAUSS_POINTS[1] * sub_dt)
        weight = _MAGNUS_WEIGHT * _TWO_PI * sub_dt**2
        exponent = exponent - 1j * weight * terms.number_commutators(late - early)
    steps = step_propagators(exponent, 1.0)
    steps = steps.reshape(n_intervals, substeps, terms.dim, terms.dim)
    out = steps[:, 0]
    for j in range(1, substeps):
        out = steps[:, j] @ out
    return out


def propagate(
    spec: TransmonChainSpec,
    p: PulseTable,
    substeps_per_bin: Optional[int] = None,
    *,
    terms: Optional[HamiltonianTerms] = None,
) -> EvolutionResult:
    """Evolve the chain under ``p`` and project onto the computational subspace."""
    terms = terms or chain_terms(spec)
    bins = bin_propagators(spec, p, substeps_per_bin, terms=terms)
    return _project(_ordered_product(bins), terms)


def propagate_samples(
    spec: TransmonChainSpec,
    freqs: np.ndarray,
    step_dt: float,
    *,
    terms: Optional[HamiltonianTerms] = None,
) -> EvolutionResult:
    """Evolve under frequencies held for ``step_dt`` ns each, ``freqs`` of shape ``(steps, K)``."""
    freqs = np.asarray(freqs, dtype=float)
    if freqs.ndim != 2 or freqs.shape[1] != spec.n_transmons:
        raise ParameterError(f"expected frequency samples of shape (steps, {spec.n_transmons})")
    if not step_dt > 0:
        raise ParameterError("step duration must be positive")
    terms = terms or chain_terms(spec)
    steps = step_propagators(terms.hamiltonians(freqs), step_dt)
    return _project(_ordered_product(steps), terms)


def _ordered_product(steps: np.ndarray) -> np.ndarray:
    u = np.eye(steps.shape[-1], dtype=complex)
    for step in steps:
        u = step @ u
    return u


def _project(u: np.ndarray, terms: HamiltonianTerms) -> EvolutionResult:
    defect = float(np.max(np.abs(u.conj().T @ u - np.eye(terms.dim))))
    if defect > UNITARITY_TOL:
        raise ModelError(f"propagator lost unitarity (|U^dag U - I| = {defect:.3e})")
    basis = terms.excitation
    if basis is None:
        raise ParameterError("propagation needs excitation-truncated terms")
    idx = basis.computational_indices()
    u_cb = u[np.ix_(idx, idx)]
    leakage = 1.0 - np.sum(np.abs(u_cb) ** 2, axis=0)
    return EvolutionResult(
        OperatorMatrix(u, basis="excitation", excitation=basis),
        u_cb,
        leakage,
    )


# ----------------------------------------------------------------------
# fidelities


def uncompensated_fidelity(u_cb: np.ndarray, target: GateTarget) -> float:
    t = target.matrix
    return float(abs(np.trace(t.conj().T @ u_cb)) / t.shape[0])


def compensated_fidelity(
    u_cb: np.ndarray,
    target: GateTarget,
    *,
    starts: int = COMPENSATION_STARTS,
    tol: float = COMPENSATION_TOL,
    seed: int = 0,
) -> tuple[float, PhaseCompensation]:
    """Trace fidelity maximised over local z phases before and after the target.

    Every phase enters the overlap as ``|A + B*exp(i*beta)|``, whose maximum
    is at ``beta = arg(A) - arg(B)``.  Cyclic ascent over the phases with
    these exact updates is run from ``beta = 0`` and ``starts`` seeded random
    points; the best result is returned.
    """
    t = target.matrix
    u_cb = np.asarray(u_cb)
    if u_cb.shape != t.shape:
        raise ParameterError(
            f"propagator shape {u_cb.shape} does not match target shape {t.shape}"
        )
    dim = t.shape[0]
    n_qubits = int(round(np.log2(dim)))
    bits = _bit_table(n_qubits)
    overlap = u_cb * t.conj()
    rng = np.random.default_rng(seed)

    inits = [np.zeros(2 * n_qubits)]
    inits += [rng.uniform(0.0, _TWO_PI, 2 * n_qubits) for _ in range(starts)]
    best_value = -1.0
    best_beta = inits[0]
    for beta in inits:
        value = _ascend(overlap, bits, beta.copy(), tol)
        if value[0] > best_value + 1e-12:
            best_value, best_beta = value
    pre, post = best_beta[:n_qubits], best_beta[n_qubits:]
    return best_value / dim, PhaseCompensation(tuple(pre), tuple(post))


def _ascend(
    overlap: np.ndarray, bits: np.ndarray, beta: np.ndarray, tol: float
) -> tuple[float, np.ndarray]:
    n = bits.shape[1]
    pre, post = beta[:n], beta[n:]

    def total() -> float:
        return float(abs(np.exp(1j * bits @ post) @ overlap @ np.exp(1j * bits @ pre)))

    value = total()
    for _ in range(MAX_ASCENT_SWEEPS):
        for q in range(n):
            weights = np.exp(1j * bits @ post) @ overlap
            pre[q] = _best_phase(weights, bits, pre, q)
        for q in range(n):
            weights = overlap @ np.exp(1j * bits @ pre)
            post[q] = _best_phase(weights, bits, post, q)
        new_value = total()
        if new_value - value < tol:
            value = max(value, new_value)
            break
        value = new_value
    return value, np.concatenate([pre, post])


def _best_phase(weights: np.ndarray, bits: np.ndarray, phases: np.ndarray, q: int) -> float:
    """Optimal phase ``q`` with the others held fixed."""
    mask = bits[:, q]
    terms = weights * np.exp(1j * (bits @ phases - mask * phases[q]))
    a = terms[mask == 0].sum()
    b = terms[mask == 1].sum()
    if b == 0:
        return float(phases[q])
    return float(np.angle(a) - np.angle(b))


def operator_norm_distance(
    u_cb: np.ndarray, target: GateTarget, comp: Optional[PhaseCompensation] = None
) -> float:
    """Spectral-norm distance to the (compensated) target after aligning global phase."""
    t = comp.apply(target.matrix) if comp is not None else target.matrix
    phase = np.angle(np.trace(t.conj().T @ u_cb))
    return float(np.linalg.norm(u_cb - np.exp(1j * phase) * t, 2))


def fitness(
    spec: TransmonChainSpec,
    p: PulseTable,
    target: GateTarget,
    substeps_per_bin: Optional[int] = None,
    *,
    compensate: bool = True,
    terms: Optional[HamiltonianTerms] = None,
) -> float:
    """Intrinsic fidelity of the gate realized by ``p``."""
    result = propagate(spec, p, substeps_per_bin, terms=terms)
    if not compensate:
        return uncompensated_fidelity(result.computational_unitary, target)
    value, _ = compensated_fidelity(result.computational_unitary, target)
    return value


@dataclass
class GateObjective:
    """Picklable ``genome -> fidelity`` callable for the optimizer."""

    spec: TransmonChainSpec
    target: GateTarget
    theta: float
    shape_kind: str = PIECEWISE_CONSTANT
    substeps_per_bin: Optional[int] = None
    compensate: bool = True
    _terms: Optional[HamiltonianTerms] = field(default=None, init=False, repr=False)

    def pulse(self, genome: np.ndarray) -> PulseTable:
        return PulseTable.from_genome(genome, self.spec.n_transmons, self.theta, self.shape_kind)

    def __call__(self, genome: np.ndarray) -> float:
        if self._terms is None:
            self._terms = chain_terms(self.spec)
        return fitness(
            self.spec,
            self.pulse(genome),
            self.target,
            self.substeps_per_bin,
            compensate=self.compensate,
            terms=self._terms,
        )


def diagnostic_dump(result: EvolutionResult) -> dict[str, Any]:
    """Magnitudes and phases of the projected propagator, plus leakage."""
    u = result.computational_unitary
    return {
        "magnitude": np.abs(u).tolist(),
        "phase_rad": np.angle(u).tolist(),
        "leakage": result.leakage.tolist(),
    }
