import numpy as np
import pytest

from pycatq.common import (
    DegenerateStateError, ImpossibleOutcomeError, InvalidArgumentError, InvalidDimensionError,
    LayoutMismatchError, TruncationError,
)
from pycatq.fockspace import (
    EVEN, ODD, CoherentComponents, SpaceLayout, StateVector, cat_norm, cat_state,
    check_truncation, coherent_amplitudes, coherent_overlap, coherent_state, components_fidelity,
    extract_field, fidelity, fock_dim_for, ladder_operators, measure_qubit, normalize,
    outcome_probability, qubit_state, rotate_field, tensor_compose,
)


def test_layout_dimensions():
    layout = SpaceLayout(2, 10, 1)
    assert layout.qubit_dim == 4
    assert layout.field_dim == 10
    assert layout.dim == 40
    assert SpaceLayout(1, 2, 0).dim == 2


def test_layout_rejects_tiny_fock_dim():
    with pytest.raises(InvalidDimensionError):
        SpaceLayout(1, 1)


@pytest.mark.parametrize('alpha', [0.5, 1.0, 1.5])
def test_cat_norm_matches_closed_form(alpha):
    assert cat_norm(alpha, EVEN) == pytest.approx(np.sqrt(2 * (1 + np.exp(-2 * alpha ** 2))))
    assert cat_norm(alpha, ODD) == pytest.approx(np.sqrt(2 * (1 - np.exp(-2 * alpha ** 2))))


@pytest.mark.parametrize('alpha', [0.4, 1.0, 1.5])
def test_even_and_odd_cats_are_orthonormal(alpha):
    even = cat_state(alpha, EVEN, 40)
    odd = cat_state(alpha, ODD, 40)
    assert even.norm() == pytest.approx(1.0, abs=1e-12)
    assert odd.norm() == pytest.approx(1.0, abs=1e-12)
    assert abs(even.inner(odd)) < 1e-12


def test_cat_parity_support():
    even = cat_state(1.2, EVEN, 40).amplitudes
    odd = cat_state(1.2, ODD, 40).amplitudes
    assert np.max(np.abs(even[1::2])) < 1e-14
    assert np.max(np.abs(odd[0::2])) < 1e-14


def test_odd_cat_of_vacuum_is_degenerate():
    with pytest.raises(DegenerateStateError):
        cat_state(0.0, ODD, 16)


def test_truncation_check():
    assert check_truncation(1.0, 40) < 1e-10
    with pytest.raises(TruncationError):
        check_truncation(4.0, 40)
    with pytest.raises(TruncationError):
        coherent_state(3.0, 16)


def test_fock_dim_for_is_adequate():
    dim = fock_dim_for(np.sqrt(10))
    assert dim >= 40
    check_truncation(np.sqrt(10), dim)


@pytest.mark.parametrize('alpha', [np.nan, np.inf, complex(np.inf, 1.0)])
def test_fock_dim_for_rejects_non_finite_amplitude(alpha):
    with pytest.raises(InvalidArgumentError):
        fock_dim_for(alpha)


def test_rotate_field_turns_coherent_amplitude():
    psi = tensor_compose([qubit_state(1), coherent_state(0.9, 32)])
    turned = rotate_field(psi, np.pi / 3)
    expected = tensor_compose([qubit_state(1), coherent_state(0.9 * np.exp(1j * np.pi / 3), 32)])
    assert fidelity(turned, expected) == pytest.approx(1.0, abs=1e-12)
    assert outcome_probability(turned, 0, 1) == pytest.approx(1.0)


def test_coherent_state_photon_number():
    alpha = 1.2
    psi = coherent_state(alpha, 40)
    _, _, n = ladder_operators(40)
    mean = psi.inner(n.apply(psi)).real
    assert mean == pytest.approx(alpha ** 2, rel=1e-10)


def test_coherent_state_is_annihilation_eigenstate():
    alpha = 0.8 - 0.3j
    psi = coherent_state(alpha, 40)
    a, _, _ = ladder_operators(40)
    assert np.allclose(a.apply(psi).amplitudes, alpha * psi.amplitudes, atol=1e-10)


def test_coherent_overlap_closed_form():
    beta, gamma = 0.7, -0.7
    psi_b = coherent_amplitudes(beta, 40)
    psi_g = coherent_amplitudes(gamma, 40)
    assert coherent_overlap(beta, gamma) == pytest.approx(np.vdot(psi_b, psi_g), abs=1e-12)
    assert abs(coherent_overlap(beta, gamma)) == pytest.approx(np.exp(-2 * 0.49))


def test_tensor_compose_orders_qubit_first():
    psi = tensor_compose([qubit_state(1), coherent_state(0.5, 16)])
    assert psi.layout == SpaceLayout(1, 16, 1)
    assert np.allclose(psi.amplitudes[:16], 0)
    assert np.allclose(psi.amplitudes[16:], coherent_amplitudes(0.5, 16))


def test_tensor_compose_rejects_field_before_qubit():
    with pytest.raises(LayoutMismatchError):
        tensor_compose([coherent_state(0.5, 16), qubit_state(0)])


def test_measurement_probabilities_and_collapse():
    field = coherent_state(0.6, 16)
    plus = StateVector(SpaceLayout(1, 2, 0), np.array([1, 1]) / np.sqrt(2))
    psi = tensor_compose([plus, field])
    assert outcome_probability(psi, 0, 0) == pytest.approx(0.5)
    prob, collapsed = measure_qubit(psi, 0, 1)
    assert prob == pytest.approx(0.5)
    assert fidelity(extract_field(collapsed, (1,)), field) == pytest.approx(1.0)


def test_impossible_outcome_raises():
    psi = tensor_compose([qubit_state(0), coherent_state(0.6, 16)])
    with pytest.raises(ImpossibleOutcomeError):
        measure_qubit(psi, 0, 1)


def test_normalize_fixes_global_phase():
    amps = -1j * coherent_amplitudes(0.5, 16)
    out = normalize(StateVector(SpaceLayout(0, 16, 1), 3 * amps))
    assert out.norm() == pytest.approx(1.0)
    assert out.amplitudes[0].imag == pytest.approx(0.0, abs=1e-15)
    assert out.amplitudes[0].real > 0


def test_components_match_fock_representation():
    alpha = 0.9
    comps = CoherentComponents.from_terms(1, [((0,), alpha, 1.0), ((1,), -alpha, 1.0)])
    vec = comps.to_state_vector(40)
    expected = normalize(StateVector(
        SpaceLayout(1, 40),
        np.concatenate([coherent_amplitudes(alpha, 40), coherent_amplitudes(-alpha, 40)]),
    ))
    assert fidelity(vec, expected) == pytest.approx(1.0, abs=1e-12)
    assert comps.norm() == pytest.approx(np.sqrt(2))
    assert comps.probability(0, 1) == pytest.approx(0.5)


def test_from_terms_merges_equal_components():
    comps = CoherentComponents.from_terms(1, [((0,), 0.5, 0.25), ((0,), 0.5, 0.75),
                                              ((1,), 0.5, 1e-20)])
    assert len(comps.components) == 1
    assert comps.components[0][2] == pytest.approx(1.0)


def test_components_fidelity_of_cat_superposition():
    alpha = 1.0
    n = cat_norm(alpha, EVEN)
    even = CoherentComponents.from_terms(0, [((), alpha, 1 / n), ((), -alpha, 1 / n)])
    assert even.norm() == pytest.approx(1.0)
    vec = even.to_state_vector(40)
    assert fidelity(vec, cat_state(alpha, EVEN, 40)) == pytest.approx(1.0, abs=1e-12)
    odd = CoherentComponents.from_terms(0, [((), alpha, 1.0), ((), -alpha, -1.0)])
    assert components_fidelity(even, odd) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize('parity, flipped', [(EVEN, ODD), (ODD, EVEN)])
def test_photon_loss_flips_logical_cat(parity, flipped):
    alpha = np.sqrt(0.4)
    a, _, _ = ladder_operators(40)
    lost = normalize(a.apply(cat_state(alpha, parity, 40)))
    assert fidelity(lost, cat_state(alpha, flipped, 40)) == pytest.approx(1.0, abs=1e-12)
