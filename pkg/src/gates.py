"""Target gates and their truth tables.

Basis labels follow the chain ordering: ``|q1 q2 q3>`` with qubit 1 the
most significant bit.  TOFFOLI and CXX are the Hadamard-conjugated forms of
CCZ and CZZ; pulses are always synthesized for the diagonal or permutation
form returned by :func:`synthesis_target`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from model import ParameterError

UNITARY_TOL = 1e-12
AMPLITUDE_TOL = 1e-9

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
GATE_NAMES = ("CZ", "CCZ", "TOFFOLI", "FREDKIN", "CZZ", "CXX")
SYNTHESIS_FORMS = {"TOFFOLI": "CCZ", "CXX": "CZZ"}


@dataclass(frozen=True)
class TruthRow:
    input_label: str
    output_label: str
    amplitude: complex


@dataclass(frozen=True, eq=False)
class GateTarget:
    """A target unitary on ``n`` qubits with its truth table."""

    name: str
    matrix: np.ndarray
    truth_table: tuple[TruthRow, ...] = field(default=())

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=complex)
        dim = m.shape[0] if m.ndim == 2 else 0
        if m.ndim != 2 or m.shape[1] != dim or dim < 2 or dim & (dim - 1):
            raise ParameterError(f"gate matrix must be 2^n x 2^n, got shape {m.shape}")
        if np.max(np.abs(m.conj().T @ m - np.eye(dim))) > UNITARY_TOL:
            raise ParameterError(f"gate {self.name} is not unitary")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if not self.truth_table:
            object.__setattr__(self, "truth_table", derive_truth_table(m))

    @classmethod
    def from_matrix(cls, name: str, matrix: np.ndarray) -> "GateTarget":
        """Target with the truth table read off ``matrix``."""
        return cls(name, np.asarray(matrix))

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def n_qubits(self) -> int:
        return self.dim.bit_length() - 1

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix],
            "truth_table": [
                {
                    "input": r.input_label,
                    "output": r.output_label,
                    "amplitude": [float(r.amplitude.real), float(r.amplitude.imag)],
                }
                for r in self.truth_table
            ],
        }


def basis_label(index: int, n_qubits: int) -> str:
    return "|" + format(index, f"0{n_qubits}b") + ">"


def derive_truth_table(matrix: np.ndarray) -> tuple[TruthRow, ...]:
    """One row per non-negligible matrix entry, ordered by input then output."""
    dim = matrix.shape[0]
    n = dim.bit_length() - 1
    rows = []
    for col in range(dim):
        for row in np.flatnonzero(np.abs(matrix[:, col]) > AMPLITUDE_TOL):
            rows.append(
                TruthRow(basis_label(col, n), basis_label(int(row), n), complex(matrix[row, col]))
            )
    return tuple(rows)


def _snap(m: np.ndarray) -> np.ndarray:
    """Round entries that are within rounding error of -1, 0 or 1."""
    out = np.array(m, dtype=complex)
    for part in (out.real, out.imag):
        near = np.abs(part - np.round(part)) < UNITARY_TOL
        part[near] = np.round(part[near])
    return out


def _kron(*ops: np.ndarray) -> np.ndarray:
    out = np.eye(1)
    for op in ops:
        out = np.kron(out, op)
    return out


def _matrix_for(name: str) -> np.ndarray:
    eye2 = np.eye(2)
    if name == "CZ":
        return np.diag([1.0, 1.0, 1.0, -1.0])
    if name == "CCZ":
        return np.diag([1.0] * 7 + [-1.0])
    if name == "CZZ":
        return np.diag([1.0, 1.0, 1.0, 1.0, 1.0, -1.0, -1.0, 1.0])
    if name == "FREDKIN":
        perm = np.eye(8)
        perm[:, [5, 6]] = perm[:, [6, 5]]
        return perm
    if name == "TOFFOLI":
        h = _kron(eye2, eye2, HADAMARD)
        return _snap(h @ _matrix_for("CCZ") @ h)
    if name == "CXX":
        h = _kron(eye2, HADAMARD, HADAMARD)
        return _snap(h @ _matrix_for("CZZ") @ h)
    raise ParameterError(f"unknown gate {name!r}; expected one of {', '.join(GATE_NAMES)}")


def make_target(name: str) -> GateTarget:
    """Built-in target by name (case-insensitive)."""
    key = name.strip().upper()
    return GateTarget(key, _matrix_for(key))


def synthesis_target(name: str) -> GateTarget:
    """Form of ``name`` that pulses are optimized for (TOFFOLI -> CCZ, CXX -> CZZ)."""
    key = name.strip().upper()
    return make_target(SYNTHESIS_FORMS.get(key, key))


@dataclass(frozen=True)
class RowCheck:
    row: TruthRow
    actual: complex
    passed: bool


@dataclass(frozen=True)
class TruthTableReport:
    gate: str
    checks: tuple[RowCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[RowCheck]:
        return [c for c in self.checks if not c.passed]


def verify_truth_table(g: GateTarget, tol: Optional[float] = None) -> TruthTableReport:
    """Apply ``g.matrix`` to each basis vector and check every truth-table row.

    A row passes when the output amplitude matches and the image of its input
    carries no weight outside the outputs the table lists for that input.
    """
    tol = AMPLITUDE_TOL if tol is None else tol
    labels = [basis_label(i, g.n_qubits) for i in range(g.dim)]
    position = {label: i for i, label in enumerate(labels)}
    listed: dict[str, set[int]] = {}
    for r in g.truth_table:
        listed.setdefault(r.input_label, set()).add(position[r.output_label])

    checks = []
    for r in g.truth_table:
        image = g.matrix @ np.eye(g.dim)[position[r.input_label]]
        actual = complex(image[position[r.output_label]])
        stray = [i for i in range(g.dim) if i not in listed[r.input_label]]
        clean = bool(np.all(np.abs(image[stray]) <= tol)) if stray else True
        checks.append(RowCheck(r, actual, abs(actual - r.amplitude) <= tol and clean))
    return TruthTableReport(g.name, tuple(checks))


def export_gate_json(path: str | Path, target: GateTarget) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(target.to_json_dict(), f, indent=2)
        f.write("\n")
