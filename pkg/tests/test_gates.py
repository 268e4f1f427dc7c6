import dataclasses
import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).resolve().parents[1] / "src"))

from gates import (  # noqa: E402
    GATE_NAMES,
    GateTarget,
    basis_label,
    export_gate_json,
    make_target,
    synthesis_target,
    verify_truth_table,
)
from model import ParameterError  # noqa: E402


def _rows(target):
    return {(r.input_label, r.output_label): r.amplitude for r in target.truth_table}


@pytest.mark.parametrize("name", GATE_NAMES)
def test_builtin_gates_pass_their_truth_tables(name):
    report = verify_truth_table(make_target(name))
    assert report.passed
    assert report.failures() == []


def test_basis_label_puts_qubit_one_first():
    assert basis_label(5, 3) == "|101>"
    assert basis_label(1, 2) == "|01>"


def test_ccz_flips_sign_of_111_only():
    rows = _rows(make_target("ccz"))
    assert len(rows) == 8
    assert rows[("|111>", "|111>")] == -1
    assert rows[("|110>", "|110>")] == 1


def test_toffoli_swaps_110_and_111():
    rows = _rows(make_target("TOFFOLI"))
    assert rows[("|110>", "|111>")] == 1
    assert rows[("|111>", "|110>")] == 1
    assert ("|110>", "|110>") not in rows
    assert rows[("|011>", "|011>")] == 1


def test_fredkin_swaps_targets_when_control_set():
    rows = _rows(make_target("FREDKIN"))
    assert rows[("|101>", "|110>")] == 1
    assert rows[("|110>", "|101>")] == 1
    assert rows[("|001>", "|001>")] == 1


def test_czz_is_product_of_two_cz():
    m = make_target("CZZ").matrix
    assert np.allclose(np.diag(m), [1, 1, 1, 1, 1, -1, -1, 1])


def test_cxx_flips_both_targets_when_control_set():
    rows = _rows(make_target("CXX"))
    assert rows[("|100>", "|111>")] == 1
    assert rows[("|101>", "|110>")] == 1
    assert rows[("|010>", "|010>")] == 1


def test_hadamard_conjugated_forms_are_synthesized_as_diagonal_gates():
    assert synthesis_target("Toffoli").name == "CCZ"
    assert synthesis_target("CXX").name == "CZZ"
    assert synthesis_target("FREDKIN").name == "FREDKIN"


def test_two_qubit_cz():
    cz = make_target("CZ")
    assert cz.n_qubits == 2
    assert cz.dim == 4


def test_unknown_gate_raises():
    with pytest.raises(ParameterError, match="unknown gate"):
        make_target("SWAP3")


def test_non_unitary_matrix_is_rejected():
    with pytest.raises(ParameterError):
        GateTarget("BAD", np.diag([1.0, 2.0]))
    with pytest.raises(ParameterError):
        GateTarget("BAD", np.eye(3))


def test_custom_target_derives_truth_table():
    iswap = np.array([[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]])
    target = GateTarget.from_matrix("ISWAP", iswap)
    rows = _rows(target)
    assert rows[("|01>", "|10>")] == 1j
    assert verify_truth_table(target).passed


def test_corrupted_matrix_fails_its_table():
    target = make_target("CCZ")
    flipped = np.array(target.matrix)
    flipped[7, 7] = 1.0
    broken = dataclasses.replace(target, matrix=flipped)
    report = verify_truth_table(broken)
    assert not report.passed
    [fail] = report.failures()
    assert fail.row.input_label == "|111>"
    assert fail.actual == 1


def test_matrix_is_read_only():
    with pytest.raises(ValueError):
        make_target("CZ").matrix[0, 0] = 2.0


def test_export_gate_json(tmp_path):
    path = tmp_path / "gate.json"
    export_gate_json(path, make_target("TOFFOLI"))
    data = json.loads(path.read_text())
    assert data["name"] == "TOFFOLI"
    assert data["matrix"][6][7] == [1.0, 0.0]
    assert len(data["truth_table"]) == 8
