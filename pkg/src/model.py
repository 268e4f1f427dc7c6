"""Hamiltonian of a chain of capacitively coupled four-level transmons.

The chain Hamiltonian is stored as ``H/h`` in GHz.  Each transmon carries a
diagonal ladder ``diag(0, eps, 2*eps - eta, 3*eps - eta')`` and neighbouring
sites are coupled through the rotating-wave XY interaction
``(g/2) * (X_k X_{k+1} + Y_k Y_{k+1})``.  That coupling preserves the total
number of excitations, so the Hamiltonian is block diagonal by excitation
number and can be truncated to the sectors holding at most ``m``
excitations without changing the dynamics inside them.

Basis conventions
-----------------
``tensor``
    The full ``4**K`` product basis in ``numpy.kron`` order, transmon 1
    being the most significant digit.
``excitation``
    Occupation tuples with total excitation ``<= m``, sorted first by total
    excitation and then lexicographically.  See :class:`ExcitationBasis`.

Computational states are labelled ``|q1 q2 q3>`` with transmon 1 the most
significant bit; every other module relies on this ordering.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

LEVELS = 4
HERMITIAN_TOL = 1e-12
COMMUTATION_TOL = 1e-9

logger = logging.getLogger(__name__)


class ParameterError(ValueError):
    """Raised when an argument is outside the accepted domain."""


class ModelError(RuntimeError):
    """Raised when a physics precondition of an operation is violated."""


@dataclass(frozen=True)
class TransmonChainSpec:
    """Physical constants of the transmon chain (GHz).

    The defaults are the working point of the three-qubit studies:
    ``eta = 0.2``, ``g = 0.03`` and control bounds of ``+-2.5`` GHz.
    Use :meth:`cubic` when ``eta_prime`` should follow the cubic
    approximation of the transmon potential.
    """

    n_transmons: int = 3
    eta: float = 0.200
    eta_prime: float = 0.600
    g: float = 0.030
    freq_min: float = -2.5
    freq_max: float = 2.5
    levels_per_transmon: int = LEVELS

    def __post_init__(self) -> None:
        if self.levels_per_transmon != LEVELS:
            raise ParameterError(
                f"only {LEVELS}-level transmons are modelled, got {self.levels_per_transmon}"
            )
        if self.n_transmons < 2:
            raise ParameterError("a chain needs at least two transmons")
        if not self.eta > 0:
            raise ParameterError(f"eta must be positive, got {self.eta}")
        if self.g < 0:
            raise ParameterError(f"coupling g must be non-negative, got {self.g}")
        if not self.freq_min < self.freq_max:
            raise ParameterError(
                f"freq_min ({self.freq_min}) must be below freq_max ({self.freq_max})"
            )

    @classmethod
    def cubic(
        cls,
        n_transmons: int = 3,
        eta: float = 0.200,
        g: float = 0.030,
        freq_min: float = -2.5,
        freq_max: float = 2.5,
    ) -> "TransmonChainSpec":
        """Build a spec with ``eta_prime = 3 * eta``."""
        return cls(
            n_transmons=n_transmons,
            eta=eta,
            eta_prime=3.0 * eta,
            g=g,
            freq_min=freq_min,
            freq_max=freq_max,
        )

    @property
    def full_dim(self) -> int:
        return self.levels_per_transmon**self.n_transmons


@dataclass(frozen=True)
class ExcitationBasis:
    """Occupation states of ``n_transmons`` sites with at most ``max_excitation`` quanta."""

    n_transmons: int
    max_excitation: int
    levels: int = LEVELS
    basis_states: tuple[tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.n_transmons < 1:
            raise ParameterError("n_transmons must be positive")
        top = (self.levels - 1) * self.n_transmons
        if not 0 <= self.max_excitation <= top:
            raise ParameterError(
                f"max_excitation must lie in [0, {top}], got {self.max_excitation}"
            )
        states = [
            occ
            for occ in itertools.product(range(self.levels), repeat=self.n_transmons)
            if sum(occ) <= self.max_excitation
        ]
        states.sort(key=lambda occ: (sum(occ), occ))
        object.__setattr__(self, "basis_states", tuple(states))

    @property
    def dim(self) -> int:
        return len(self.basis_states)

    def index(self, occupation: Sequence[int]) -> int:
        try:
            return self.basis_states.index(tuple(occupation))
        except ValueError:
            raise ParameterError(f"{tuple(occupation)} is not in the basis") from None

    def tensor_index(self, occupation: Sequence[int]) -> int:
        """Position of ``occupation`` in the full product basis."""
        idx = 0
        for n in occupation:
            idx = idx * self.levels + n
        return idx

    def computational_indices(self) -> np.ndarray:
        """Basis positions of ``|b1 ... bK>`` ordered as binary numbers, b1 most significant."""
        return np.array(
            [
                self.index(bits)
                for bits in itertools.product((0, 1), repeat=self.n_transmons)
            ],
            dtype=int,
        )

    def isometry(self) -> np.ndarray:
        """Real ``levels**K x dim`` matrix whose columns embed this basis in the tensor basis."""
        iso = np.zeros((self.levels**self.n_transmons, self.dim))
        for col, occ in enumerate(self.basis_states):
            iso[self.tensor_index(occ), col] = 1.0
        return iso


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """A square complex matrix tagged with the basis it is written in."""

    entries: np.ndarray
    basis: str = "tensor"
    excitation: Optional[ExcitationBasis] = None
    hermitian: bool = False

    def __post_init__(self) -> None:
        m = np.asarray(self.entries)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ParameterError(f"operator must be square, got shape {m.shape}")
        if self.basis not in ("tensor", "excitation"):
            raise ParameterError(f"unknown basis tag {self.basis!r}")
        if self.basis == "excitation":
            if self.excitation is None or self.excitation.dim != m.shape[0]:
                raise ParameterError("excitation-basis operator needs a matching ExcitationBasis")
        if self.hermitian:
            scale = max(1.0, float(np.max(np.abs(m))))
            if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL * scale:
                raise ModelError("operator flagged Hermitian is not Hermitian")

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])


# ----------------------------------------------------------------------
# single-site operators


def annihilation(levels: int = LEVELS) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, levels, dtype=float)), k=1)


def generalized_paulis(levels: int = LEVELS) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(X, Y)`` with ``X = a + a^dag`` and ``Y = i (a^dag - a)``."""
    a = annihilation(levels)
    x = a + a.T
    y = 1j * (a.T - a)
    return x, y


def site_operator(op: np.ndarray, site: int, n_transmons: int) -> np.ndarray:
    """Embed a single-transmon operator at ``site`` (0-based) of the chain."""
    levels = op.shape[0]
    out = np.eye(1)
    for k in range(n_transmons):
        out = np.kron(out, op if k == site else np.eye(levels))
    return out


def number_operator(n_transmons: int, levels: int = LEVELS) -> np.ndarray:
    """Total excitation number in the tensor basis."""
    n_single = np.diag(np.arange(levels, dtype=float))
    return sum(site_operator(n_single, k, n_transmons) for k in range(n_transmons))


# ----------------------------------------------------------------------
# Hamiltonian


def _check_freqs(spec: TransmonChainSpec, freqs: Sequence[float]) -> np.ndarray:
    arr = np.asarray(freqs, dtype=float)
    if arr.shape != (spec.n_transmons,):
        raise ParameterError(
            f"expected {spec.n_transmons} transmon frequencies, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ParameterError("transmon frequencies must be finite")
    return arr


def build_hamiltonian(spec: TransmonChainSpec, freqs: Sequence[float]) -> OperatorMatrix:
    """Return ``H/h`` (GHz) of the chain in the full tensor basis.

    Parameters
    ----------
    spec:
        Chain constants.
    freqs:
        One frequency per transmon in GHz.  Bounds are not enforced here so
        that spectrum studies can use lab-frame working points.
    """
    eps = _check_freqs(spec, freqs)
    k_sites = spec.n_transmons
    h = np.zeros((spec.full_dim, spec.full_dim), dtype=complex)
    for k, e in enumerate(eps):
        ladder = np.diag([0.0, e, 2.0 * e - spec.eta, 3.0 * e - spec.eta_prime])
        h += site_operator(ladder, k, k_sites)
    if spec.g:
        x, y = generalized_paulis()
        for k in range(k_sites - 1):
            h += 0.5 * spec.g * (
                site_operator(x, k, k_sites) @ site_operator(x, k + 1, k_sites)
                + site_operator(y, k, k_sites) @ site_operator(y, k + 1, k_sites)
            )
    return OperatorMatrix(h, basis="tensor", hermitian=True)


def commutator_norm(h: np.ndarray, n_op: np.ndarray) -> float:
    """Max-entry norm of ``[h, n_op]``."""
    return float(np.max(np.abs(h @ n_op - n_op @ h)))


def project_to_excitation_subspace(h: OperatorMatrix, m: int) -> OperatorMatrix:
    """Truncate a tensor-basis operator to the sectors with ``<= m`` excitations."""
    if h.basis != "tensor":
        raise ParameterError("truncation expects an operator in the tensor basis")
    n_transmons = int(round(np.log(h.dim) / np.log(LEVELS)))
    if LEVELS**n_transmons != h.dim:
        raise ParameterError(f"dimension {h.dim} is not a power of {LEVELS}")
    basis = ExcitationBasis(n_transmons, m)
    entries = np.asarray(h.entries)
    scale = max(1.0, float(np.max(np.abs(entries))))
    defect = commutator_norm(entries, number_operator(n_transmons))
    if defect > COMMUTATION_TOL * scale:
        raise ModelError(
            f"operator does not conserve excitation number (|[H, N]| = {defect:.3e}); "
            "truncation would change the dynamics"
        )
    iso = basis.isometry()
    return OperatorMatrix(
        iso.T @ entries @ iso,
        basis="excitation",
        excitation=basis,
        hermitian=h.hermitian,
    )


def embed_in_tensor_space(block: np.ndarray, basis: ExcitationBasis) -> np.ndarray:
    """Lift an excitation-basis operator to the tensor basis, identity on the complement."""
    iso = basis.isometry()
    full_dim = iso.shape[0]
    out = np.asarray(block, dtype=complex)
    return iso @ out @ iso.T + (np.eye(full_dim) - iso @ iso.T)


@dataclass(frozen=True, eq=False)
class HamiltonianTerms:
    """``H(eps) = static + sum_k eps_k * N_k`` in a fixed basis.

    Splitting the frequency-linear part off lets the propagator build one
    Hamiltonian per time step without re-assembling tensor products.
    """

    static: np.ndarray
    number_diagonals: np.ndarray
    excitation: Optional[ExcitationBasis] = None

    @property
    def dim(self) -> int:
        return int(self.static.shape[0])

    def hamiltonians(self, freqs: np.ndarray) -> np.ndarray:
        """Stack of Hamiltonians for ``freqs`` of shape ``(..., K)``."""
        freqs = np.asarray(freqs, dtype=float)
        diag = freqs @ self.number_diagonals
        out = np.broadcast_to(self.static, diag.shape[:-1] + self.static.shape).copy()
        idx = np.arange(self.dim)
        out[..., idx, idx] += diag
        return out

    def number_commutators(self, weights: np.ndarray) -> np.ndarray:
        """``sum_k w_k [N_k, static]`` for ``weights`` of shape ``(..., K)``.

        This is ``[H(eps + w), H(eps)]`` for any ``eps``, since the number
        operators commute with each other.
        """
        diag = np.asarray(weights, dtype=float) @ self.number_diagonals
        return (diag[..., :, None] - diag[..., None, :]) * self.static


def hamiltonian_terms(
    spec: TransmonChainSpec, max_excitation: Optional[int] = None
) -> HamiltonianTerms:
    """Decompose the chain Hamiltonian, truncated when ``max_excitation`` is given."""
    static = build_hamiltonian(spec, np.zeros(spec.n_transmons))
    n_single = np.diag(np.arange(LEVELS, dtype=float))
    numbers = [
        np.diag(site_operator(n_single, k, spec.n_transmons))
        for k in range(spec.n_transmons)
    ]
    if max_excitation is None:
        return HamiltonianTerms(np.asarray(static.entries), np.array(numbers))
    projected = project_to_excitation_subspace(static, max_excitation)
    iso = projected.excitation.isometry()
    numbers = [iso.T @ n for n in numbers]
    return HamiltonianTerms(
        np.asarray(projected.entries), np.array(numbers), projected.excitation
    )


# ----------------------------------------------------------------------
# spectra


@dataclass(frozen=True, eq=False)
class SpectrumTable:
    """Eigenvalues (GHz) of the chain against one swept transmon frequency."""

    epsilons: np.ndarray
    energies: np.ndarray
    swept_transmon: int

    def header(self) -> list[str]:
        return ["epsilon_ghz"] + [f"E{i}" for i in range(self.energies.shape[1])]

    def rows(self) -> list[list[float]]:
        return [
            [float(e)] + [float(v) for v in levels]
            for e, levels in zip(self.epsilons, self.energies)
        ]


def spectrum_sweep(
    spec: TransmonChainSpec,
    fixed_freqs: Mapping[int, float],
    swept_transmon: int,
    freq_range: tuple[float, float],
    n_points: int,
    *,
    max_excitation: Optional[int] = None,
) -> SpectrumTable:
    """Sorted eigenvalues of the chain while one transmon frequency is swept.

    ``fixed_freqs`` maps every other transmon index (0-based) to its
    frequency.  When ``max_excitation`` is given the truncated Hamiltonian is
    diagonalised instead of the full one.
    """
    if n_points < 2:
        raise ParameterError("n_points must be at least 2")
    lo, hi = (float(v) for v in freq_range)
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ParameterError("sweep range must be finite")
    if not 0 <= swept_transmon < spec.n_transmons:
        raise ParameterError(f"swept transmon {swept_transmon} outside the chain")
    others = set(range(spec.n_transmons)) - {swept_transmon}
    if set(fixed_freqs) != others:
        raise ParameterError(
            f"fixed frequencies must cover transmons {sorted(others)}, got {sorted(fixed_freqs)}"
        )

    terms = hamiltonian_terms(spec, max_excitation)
    sweep = np.linspace(lo, hi, n_points)
    freqs = np.zeros((n_points, spec.n_transmons))
    for k, value in fixed_freqs.items():
        freqs[:, k] = value
    freqs[:, swept_transmon] = sweep
    energies = np.linalg.eigvalsh(terms.hamiltonians(freqs))
    logger.debug(
        "spectrum sweep of transmon %d over [%g, %g] GHz: %d points, dim %d",
        swept_transmon,
        lo,
        hi,
        n_points,
        terms.dim,
    )
    return SpectrumTable(sweep, energies, swept_transmon)
