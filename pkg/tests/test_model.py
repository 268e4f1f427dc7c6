import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).resolve().parents[1] / "src"))

from model import (  # noqa: E402
    ExcitationBasis,
    ModelError,
    OperatorMatrix,
    ParameterError,
    TransmonChainSpec,
    build_hamiltonian,
    commutator_norm,
    embed_in_tensor_space,
    generalized_paulis,
    hamiltonian_terms,
    number_operator,
    project_to_excitation_subspace,
    site_operator,
    spectrum_sweep,
)


@pytest.fixture
def spec():
    return TransmonChainSpec()


def _random_freqs(spec, rng):
    return rng.uniform(spec.freq_min, spec.freq_max, spec.n_transmons)


def test_default_spec_matches_working_point(spec):
    assert spec.n_transmons == 3
    assert spec.full_dim == 64
    assert spec.eta_prime == pytest.approx(3 * spec.eta)
    assert TransmonChainSpec.cubic(eta=0.25).eta_prime == pytest.approx(0.75)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"levels_per_transmon": 3},
        {"n_transmons": 1},
        {"eta": 0.0},
        {"g": -0.01},
        {"freq_min": 1.0, "freq_max": 1.0},
    ],
)
def test_spec_rejects_bad_parameters(kwargs):
    with pytest.raises(ParameterError):
        TransmonChainSpec(**kwargs)


def test_zero_coupling_is_allowed():
    h = build_hamiltonian(TransmonChainSpec(g=0.0), [0.1, 0.2, 0.3])
    assert np.count_nonzero(h.entries - np.diag(np.diag(h.entries))) == 0


def test_excitation_basis_order_and_size():
    basis = ExcitationBasis(3, 3)
    assert basis.dim == 20
    assert basis.basis_states[0] == (0, 0, 0)
    assert basis.basis_states[1:4] == ((0, 0, 1), (0, 1, 0), (1, 0, 0))
    totals = [sum(s) for s in basis.basis_states]
    assert totals == sorted(totals)
    assert ExcitationBasis(2, 2).dim == 6


def test_computational_indices_follow_binary_order():
    basis = ExcitationBasis(3, 3)
    labels = [basis.basis_states[i] for i in basis.computational_indices()]
    assert labels == [
        (0, 0, 0), (0, 0, 1), (0, 1, 0), (0, 1, 1),
        (1, 0, 0), (1, 0, 1), (1, 1, 0), (1, 1, 1),
    ]


def test_basis_rejects_unknown_occupation():
    with pytest.raises(ParameterError):
        ExcitationBasis(3, 3).index((2, 2, 0))
    with pytest.raises(ParameterError):
        ExcitationBasis(3, 10)


def test_isometry_columns_are_orthonormal():
    iso = ExcitationBasis(3, 3).isometry()
    assert iso.shape == (64, 20)
    assert np.allclose(iso.T @ iso, np.eye(20))


def test_hamiltonian_is_hermitian_and_conserves_excitations(spec):
    rng = np.random.default_rng(7)
    n_op = number_operator(spec.n_transmons)
    for _ in range(100):
        h = np.asarray(build_hamiltonian(spec, _random_freqs(spec, rng)).entries)
        assert np.allclose(h, h.conj().T, atol=1e-14)
        assert commutator_norm(h, n_op) < 1e-12


def test_ladder_energies_on_a_single_site(spec):
    eps = [0.3, -0.4, 1.1]
    h = build_hamiltonian(TransmonChainSpec(g=0.0), eps).entries
    basis = ExcitationBasis(3, 9)
    for site, e in enumerate(eps):
        for n, expected in enumerate([0.0, e, 2 * e - spec.eta, 3 * e - spec.eta_prime]):
            occ = [0, 0, 0]
            occ[site] = n
            i = basis.tensor_index(occ)
            assert h[i, i].real == pytest.approx(expected)


def test_single_excitation_splitting_is_twice_g():
    spec = TransmonChainSpec(n_transmons=2, g=0.03)
    h = hamiltonian_terms(spec, max_excitation=1).hamiltonians(np.array([0.5, 0.5]))
    energies = np.linalg.eigvalsh(h)
    assert energies[1:] == pytest.approx([0.5 - 0.03, 0.5 + 0.03])


def test_two_excitation_matrix_element_is_sqrt2_g():
    spec = TransmonChainSpec(n_transmons=2, g=0.04)
    h = build_hamiltonian(spec, [0.0, 0.0]).entries
    basis = ExcitationBasis(2, 6)
    i11 = basis.tensor_index((1, 1))
    i02 = basis.tensor_index((0, 2))
    assert h[i02, i11].real == pytest.approx(np.sqrt(2) * 0.04)


def test_generalized_paulis_build_hopping():
    x, y = generalized_paulis()
    a = np.diag(np.sqrt([1.0, 2.0, 3.0]), k=1)
    hop = 0.5 * (np.kron(x, x) + np.kron(y, y))
    assert np.allclose(hop, np.kron(a.T, a) + np.kron(a, a.T))


def test_site_operator_places_operator_at_site():
    op = np.diag([0.0, 1.0, 2.0, 3.0])
    full = site_operator(op, 1, 3)
    assert full.shape == (64, 64)
    basis = ExcitationBasis(3, 9)
    assert full[basis.tensor_index((0, 2, 0)), basis.tensor_index((0, 2, 0))] == 2.0


def test_truncated_spectrum_is_part_of_full_spectrum(spec):
    freqs = np.array([0.4, -0.2, 0.9])
    full = build_hamiltonian(spec, freqs)
    block = project_to_excitation_subspace(full, 3)
    assert block.dim == 20
    e_full = np.linalg.eigvalsh(full.entries)
    for e in np.linalg.eigvalsh(block.entries):
        assert np.min(np.abs(e_full - e)) < 1e-10


def test_truncation_rejects_non_conserving_operator():
    x, _ = generalized_paulis()
    drive = OperatorMatrix(site_operator(x, 0, 3), hermitian=True)
    with pytest.raises(ModelError):
        project_to_excitation_subspace(drive, 3)


def test_operator_matrix_validates_hermitian_flag():
    with pytest.raises(ModelError):
        OperatorMatrix(np.array([[0.0, 1.0], [0.0, 0.0]]), hermitian=True)
    with pytest.raises(ParameterError):
        OperatorMatrix(np.zeros((2, 3)))


def test_embed_in_tensor_space_is_identity_off_block():
    basis = ExcitationBasis(3, 3)
    block = np.full((20, 20), 2.0)
    full = embed_in_tensor_space(block, basis)
    outside = basis.tensor_index((3, 3, 3))
    assert full[outside, outside] == 1.0
    assert np.allclose(basis.isometry().T @ full @ basis.isometry(), block)


def test_hamiltonian_terms_reproduce_direct_build(spec):
    freqs = np.array([0.7, -1.3, 2.1])
    terms = hamiltonian_terms(spec)
    assert np.allclose(terms.hamiltonians(freqs), build_hamiltonian(spec, freqs).entries)
    truncated = hamiltonian_terms(spec, max_excitation=3)
    expected = project_to_excitation_subspace(build_hamiltonian(spec, freqs), 3).entries
    assert np.allclose(truncated.hamiltonians(freqs), expected)
    stack = truncated.hamiltonians(np.stack([freqs, freqs]))
    assert stack.shape == (2, 20, 20)


def test_number_commutators_match_hamiltonian_commutator(spec):
    terms = hamiltonian_terms(spec, max_excitation=3)
    eps = np.array([0.7, -1.3, 2.1])
    shift = np.array([[0.4, 0.0, -0.9], [0.0, 0.0, 0.0]])
    h1 = terms.hamiltonians(eps)
    h2 = terms.hamiltonians(eps + shift)
    out = terms.number_commutators(shift)
    assert out.shape == (2, 20, 20)
    assert np.allclose(out, h2 @ h1 - h1 @ h2, atol=1e-12)
    assert np.allclose(out[1], 0.0)


def test_build_hamiltonian_rejects_wrong_shape(spec):
    with pytest.raises(ParameterError):
        build_hamiltonian(spec, [0.1, 0.2])
    with pytest.raises(ParameterError):
        build_hamiltonian(spec, [0.1, np.nan, 0.2])


def test_spectrum_sweep_shape_and_order(spec):
    table = spectrum_sweep(spec, {0: 4.8, 2: 6.8}, 1, (4.5, 7.5), 31)
    assert table.energies.shape == (31, 64)
    assert np.all(np.diff(table.energies, axis=1) >= -1e-12)
    assert table.header()[:3] == ["epsilon_ghz", "E0", "E1"]
    rows = table.rows()
    assert rows[0][0] == pytest.approx(4.5)
    assert rows[-1][0] == pytest.approx(7.5)


def test_spectrum_sweep_avoided_crossing_gap(spec):
    # middle transmon swept across the third: the single-excitation gap closes to 2g
    table = spectrum_sweep(spec, {0: 4.8, 2: 6.8}, 1, (6.6, 7.0), 401, max_excitation=1)
    single = table.energies[:, 2:4]
    assert np.min(single[:, 1] - single[:, 0]) == pytest.approx(2 * spec.g, rel=1e-3)


def test_spectrum_sweep_validates_arguments(spec):
    with pytest.raises(ParameterError):
        spectrum_sweep(spec, {0: 4.8}, 1, (4.5, 7.5), 10)
    with pytest.raises(ParameterError):
        spectrum_sweep(spec, {0: 4.8, 2: 6.8}, 1, (4.5, 7.5), 1)
    with pytest.raises(ParameterError):
        spectrum_sweep(spec, {0: 4.8, 1: 6.8}, 3, (4.5, 7.5), 10)
