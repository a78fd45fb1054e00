import numpy as np
import pytest

from pycatq.common import (
    CalibrationError, ExtractionError, InvalidArgumentError, NumericalError, QuadratureError,
)
from pycatq.device import (
    LAB, LITERAL_COMPLEX, ROTATING, DeviceParams, FluxPulse, single_qubit_terms,
)
from pycatq.fockspace import fidelity
from pycatq.propagator import (
    BRANCH_MINUS, BRANCH_PLUS, BRANCHES, DEFAULT_G_BRACKET, INTERACTION_FRAME, PULSE_FRAME,
    EffectiveMap, PropagatorOptions, PulseFrame, approximation_error, branch_coherent_state,
    branch_weight, calibrate_pulse, calibrated, detuning_integral, dyson_expectation,
    effective_apply, effective_map_from_trace, evolve_exact, extract_theta, growth_limit,
    ideal_map, interaction_phase, pulse_frame, theta_trace,
)


def _double_integral(w, t):
    """∫_0^t ds₁ e^{−iws₁} ∫_0^{s₁} ds₂ e^{iws₂} in closed form."""
    return (t - (1 - np.exp(-1j * w * t)) / (1j * w)) / (1j * w)


def _nested_integral(a, b, t):
    """∫_0^t ds₁ e^{ias₁} ∫_0^{s₁} ds₂ e^{ibs₂} for a, b, a + b nonzero."""
    outer = (np.exp(1j * (a + b) * t) - 1) / (1j * (a + b)) - (np.exp(1j * a * t) - 1) / (1j * a)
    return outer / (1j * b)


def _toy_calibration(params, pulse):
    result = calibrate_pulse(params, pulse, bracket=(1e-3, 1e3), calibrate_phi=False)
    return result, *calibrated(params, pulse, result)


def test_options_validation():
    PropagatorOptions()
    with pytest.raises(InvalidArgumentError):
        PropagatorOptions(rel_tol=0.1)
    with pytest.raises(InvalidArgumentError):
        PropagatorOptions(dyson_order=3)
    with pytest.raises(InvalidArgumentError):
        PropagatorOptions(points_per_period=4)
    tight = PropagatorOptions().tightened()
    assert tight.quad_tol == pytest.approx(5e-4)
    assert tight.max_refinements == 6


def test_extract_theta_recovers_linear_model():
    c, theta = 0.01 - 0.02j, 0.3j
    nbars = (0.1, 0.3)
    values = [1 + c + theta * n for n in nbars]
    c_out, theta_out = extract_theta(values, nbars)
    assert c_out == pytest.approx(c)
    assert theta_out == pytest.approx(theta)


def test_extract_theta_rejects_equal_nbar():
    with pytest.raises(ExtractionError):
        extract_theta([1.0, 1.0], (0.2, 0.2))


def test_detuning_integral_constant_detuning(toy_params, weak_pulse):
    assert detuning_integral(toy_params, weak_pulse, 0.0) == 0j
    assert detuning_integral(toy_params, weak_pulse, 1.5) == pytest.approx(-16.0 * 1.5, rel=1e-9)


def test_dyson_expectation_trivial_cases(toy_params, weak_pulse):
    assert dyson_expectation(weak_pulse, toy_params, 0.5, BRANCH_MINUS, 0.0) == 1.0
    uncoupled = toy_params.with_coupling(0.0)
    assert dyson_expectation(weak_pulse, uncoupled, 0.5, BRANCH_PLUS, 1.0) == 1.0


def test_theta_matches_closed_form_for_constant_detuning(toy_params, weak_pulse):
    # Δ = −16, ω_c = 20: the − branch carries e^{−8is}, so K_{±1} oscillate at 28 and 12
    t = np.array([0.0, 0.5, 1.0, 2.0])
    trace = theta_trace(weak_pulse, toy_params, sample_times=t, field_frame=INTERACTION_FRAME)
    g2 = toy_params.g ** 2
    expected_minus = -g2 * (_double_integral(-28.0, t) + _double_integral(12.0, t))
    assert trace.theta_minus[0] == 0
    assert np.allclose(trace.theta_minus[1:], expected_minus[1:], rtol=1e-3, atol=1e-8)
    # constant detuning makes the two branches complex conjugates
    assert np.allclose(trace.theta_plus, np.conj(trace.theta_minus), rtol=1e-3, atol=1e-8)
    assert np.all(trace.theta_minus[1:].imag > 0)
    assert not trace.frame_phase.any()


def test_pulse_frame_removes_the_plus_branch_rotation(toy_params, weak_pulse):
    t = [0.0, 1.0, 2.0]
    raw = theta_trace(weak_pulse, toy_params, sample_times=t, field_frame=INTERACTION_FRAME)
    trace = theta_trace(weak_pulse, toy_params, sample_times=t)
    assert trace.field_frame == PULSE_FRAME
    assert np.all(trace.theta_plus.imag == 0)
    assert np.allclose(trace.frame_phase, raw.theta_plus.imag, rtol=1e-12, atol=0)
    assert np.allclose(trace.theta_minus, raw.theta_minus - 1j * raw.theta_plus.imag,
                       rtol=1e-12, atol=1e-15)
    assert np.allclose(trace.const_minus, raw.const_minus.real, rtol=1e-12, atol=1e-15)
    with pytest.raises(InvalidArgumentError):
        theta_trace(weak_pulse, toy_params, sample_times=t, field_frame='lab')


def test_pulse_frame_phases(toy_params, weak_pulse):
    raw = theta_trace(weak_pulse, toy_params, sample_times=[0.0, 2.0],
                      field_frame=INTERACTION_FRAME)
    frame = pulse_frame(weak_pulse, toy_params)
    assert frame.field_angle == pytest.approx(raw.theta_plus[-1].imag, rel=1e-12)
    assert frame.phase_minus == pytest.approx(raw.const_minus[-1].imag, rel=1e-12)
    assert pulse_frame(weak_pulse, toy_params.with_coupling(0.0)) == PulseFrame()
    with pytest.raises(InvalidArgumentError):
        pulse_frame(weak_pulse, toy_params, T=3.0)


def test_theta_scales_with_coupling_squared(toy_params, weak_pulse):
    t = [0.0, 1.0, 2.0]
    small = theta_trace(weak_pulse, toy_params, sample_times=t)
    large = theta_trace(weak_pulse, toy_params.with_coupling(0.6), sample_times=t)
    assert np.allclose(large.theta_minus, 9.0 * small.theta_minus, rtol=1e-9, atol=0)
    assert np.allclose(large.theta_plus, 9.0 * small.theta_plus, rtol=1e-9, atol=0)


def test_anomalous_terms_follow_the_phase_of_alpha(toy_params, weak_pulse):
    # a†a† and aa pick up α*² and α², so α and iα differ by −2α²g²(L₊ + L₋)
    t, alpha = 2.0, 0.5
    real = dyson_expectation(weak_pulse, toy_params, alpha, BRANCH_MINUS, t)
    turned = dyson_expectation(weak_pulse, toy_params, 1j * alpha, BRANCH_MINUS, t)
    L_plus = _nested_integral(28.0, 12.0, t)
    L_minus = _nested_integral(-12.0, -28.0, t)
    expected = -2 * alpha ** 2 * toy_params.g ** 2 * (L_plus + L_minus)
    assert abs(expected) > 1e-6
    assert real - turned == pytest.approx(expected, rel=1e-2)


def test_theta_does_not_depend_on_extraction_amplitudes(toy_params, toy_pulse):
    t = np.linspace(toy_pulse.t_on, toy_pulse.t_off, 5)
    default = theta_trace(toy_pulse, toy_params, sample_times=t)
    other = theta_trace(toy_pulse, toy_params, sample_times=t, nbars=(0.05, 0.5))
    assert np.allclose(other.theta_minus, default.theta_minus, rtol=1e-9, atol=1e-12)
    assert np.allclose(other.theta_plus, default.theta_plus, rtol=1e-9, atol=1e-12)


def test_linear_model_reproduces_an_unseen_amplitude(toy_params, weak_pulse):
    trace = theta_trace(weak_pulse, toy_params, sample_times=[0.0, 2.0],
                        field_frame=INTERACTION_FRAME)
    nbar = 0.2
    amp = np.sqrt(nbar)
    averaged = np.mean([dyson_expectation(weak_pulse, toy_params, amp * u, BRANCH_MINUS, 2.0)
                        for u in (1.0, 1j)])
    model = 1 + trace.const_minus[-1] + trace.theta_minus[-1] * nbar
    assert averaged == pytest.approx(model, rel=1e-9)


def test_dyson_expectation_stays_bounded_for_weak_coupling(toy_params, weak_pulse):
    for t in np.linspace(0.0, 2.0, 9):
        for branch in BRANCHES:
            value = dyson_expectation(weak_pulse, toy_params, np.sqrt(0.4), branch, t)
            assert abs(value) <= 1.05


def test_theta_trace_rejects_times_outside_window(toy_params, weak_pulse):
    with pytest.raises(InvalidArgumentError):
        theta_trace(weak_pulse, toy_params, sample_times=[0.0, 3.0])
    with pytest.raises(InvalidArgumentError):
        theta_trace(weak_pulse, toy_params, sample_times=[1.0, 0.5])


def test_quadrature_error_when_refinement_exhausted(toy_params, weak_pulse):
    opts = PropagatorOptions(quad_tol=1e-12, max_refinements=0)
    with pytest.raises(QuadratureError):
        theta_trace(weak_pulse, toy_params, opts, sample_times=[0.0, 2.0])


def test_tightened_tolerances_stay_within_error_estimate(toy_params, toy_pulse):
    t = np.linspace(toy_pulse.t_on, toy_pulse.t_off, 6)
    opts = PropagatorOptions()
    base = theta_trace(toy_pulse, toy_params, opts, t, field_frame=INTERACTION_FRAME)
    tight = theta_trace(toy_pulse, toy_params, opts.tightened(), t,
                        field_frame=INTERACTION_FRAME)
    for branch, error in ((BRANCH_PLUS, base.error_plus), (BRANCH_MINUS, base.error_minus)):
        change = np.abs(tight.theta(branch) - base.theta(branch))
        assert np.max(change) <= np.max(error) + 1e-15


def test_literal_complex_pulse_growth_is_reported():
    assert growth_limit(PropagatorOptions()) == pytest.approx(np.log(1e-3 / np.finfo(float).eps))
    pulse = FluxPulse(mode=LITERAL_COMPLEX)
    with pytest.raises(NumericalError, match='hermitized'):
        theta_trace(pulse, DeviceParams(), sample_times=[pulse.t_on, pulse.t_off])


def test_literal_complex_amplitude_plateau_rises_with_frequency():
    params = DeviceParams(E_J_over_hbar=4.0, omega_c=20.0, g=2.0)
    t_off = 4 * np.pi
    times = np.linspace(0.0, t_off, 401)
    late = times >= 2 * np.pi
    plateau = {}
    for nu in (0.5, 1.0):
        pulse = FluxPulse(A=0.5, nu=nu, phi=np.pi / 2, t_on=0.0, t_off=t_off,
                          mode=LITERAL_COMPLEX)
        trace = theta_trace(pulse, params, sample_times=times)
        plateau[nu] = float(np.mean(np.exp(trace.theta_minus[late].real)))
    assert plateau[0.5] < 1.0
    assert plateau[1.0] > plateau[0.5]


@pytest.mark.parametrize('alpha', [0.5, 0.5j, 0.35 + 0.35j])
@pytest.mark.parametrize('branch', [BRANCH_MINUS, BRANCH_PLUS])
def test_dyson_expectation_agrees_with_exact_evolution(toy_params, weak_pulse, branch, alpha):
    t = 2.0
    psi0 = branch_coherent_state(branch, alpha, 16)
    H = single_qubit_terms(toy_params, weak_pulse, ROTATING, psi0.layout)
    state = evolve_exact(H, psi0, 0.0, t).state
    D = detuning_integral(toy_params, weak_pulse, t)
    exact = psi0.inner(interaction_phase(state, 0, D))
    predicted = dyson_expectation(weak_pulse, toy_params, alpha, branch, t)
    assert abs(predicted - 1) > 1e-3
    assert abs(exact - predicted) < 3e-4


def test_evolve_exact_preserves_norm_and_checks_arguments(toy_params, weak_pulse):
    psi0 = branch_coherent_state(BRANCH_PLUS, 0.5, 16)
    H = single_qubit_terms(toy_params, weak_pulse, ROTATING, psi0.layout)
    result = evolve_exact(H, psi0, 0.0, 1.0, renormalize=False)
    assert result.norm_drift < 1e-7
    assert result.n_steps > 0
    assert evolve_exact(H, psi0, 0.5, 0.5).state is psi0
    with pytest.raises(InvalidArgumentError):
        evolve_exact(H, psi0, 1.0, 0.0)


def test_decoupled_field_rotates_freely_in_lab_frame(toy_params, weak_pulse):
    params = toy_params.with_coupling(0.0)
    alpha, t = 0.8, 0.7
    psi0 = branch_coherent_state(BRANCH_PLUS, alpha, 24)
    H = single_qubit_terms(params, weak_pulse, LAB, psi0.layout)
    state = evolve_exact(H, psi0, 0.0, t).state
    rotated = branch_coherent_state(BRANCH_PLUS, alpha * np.exp(-1j * params.omega_c * t), 24)
    assert fidelity(state, rotated) >= 1 - 1e-8


def test_rotating_frame_leaves_branch_state_alone_with_pulse_off(toy_params):
    params = toy_params.with_coupling(0.0)
    pulse = FluxPulse(A=0.7, nu=0.5, t_on=5.0, t_off=6.0)
    psi0 = branch_coherent_state(BRANCH_MINUS, 0.8, 24)
    H = single_qubit_terms(params, pulse, ROTATING, psi0.layout)
    state = evolve_exact(H, psi0, 0.0, 3.0).state
    assert fidelity(state, psi0) >= 1 - 1e-8


def test_approximation_error_small_in_dispersive_limit(toy_params, weak_pulse):
    assert approximation_error(weak_pulse, toy_params, 0.5) < 1e-2
    assert approximation_error(weak_pulse, toy_params.with_coupling(0.0), 0.5) < 1e-8
    with pytest.raises(InvalidArgumentError):
        approximation_error(weak_pulse, toy_params, 1.5)


def test_approximation_error_grows_with_photon_number(toy_params, toy_pulse):
    _, params, pulse = _toy_calibration(toy_params, toy_pulse)
    errors = [approximation_error(pulse, params, np.sqrt(n)) for n in (0.1, 0.4, 1.0)]
    assert errors[1] <= 0.1
    assert errors[0] < errors[1] < errors[2]


def test_ideal_map():
    emap = ideal_map(62.5e-9)
    assert effective_apply(emap, BRANCH_MINUS, 0.6) == pytest.approx(-0.6)
    assert effective_apply(emap, BRANCH_PLUS, 0.6) == pytest.approx(0.6)
    assert branch_weight(emap, BRANCH_MINUS, 0.6) == 1.0
    with pytest.raises(InvalidArgumentError):
        emap.theta('x')
    with pytest.raises(InvalidArgumentError):
        EffectiveMap(0j, 0j, 0.0)


def test_branch_weight_with_constants():
    emap = EffectiveMap(0j, -0.1 + 0j, 1.0, const_minus=0.05 + 0j)
    alpha = 0.8
    beta = alpha * np.exp(-0.1)
    expected = np.exp(0.05 + 0.5 * (beta ** 2 - alpha ** 2))
    assert branch_weight(emap, BRANCH_MINUS, alpha) == pytest.approx(expected)


def test_effective_map_from_trace(toy_params, weak_pulse):
    trace = theta_trace(weak_pulse, toy_params, sample_times=[0.0, 1.0, 2.0])
    emap = effective_map_from_trace(trace)
    assert emap.duration_T == pytest.approx(2.0)
    assert emap.theta_minus_T == trace.theta_minus[-1]
    assert not emap.has_constants
    assert effective_map_from_trace(trace, include_constants=True).has_constants
    frame = trace.to_frame()
    assert list(frame.columns) == ['t_s', 'theta_plus_re', 'theta_plus_im',
                                   'theta_minus_re', 'theta_minus_im', 'frame_phase']


def test_calibration_hits_conditional_phase_pi(toy_params, toy_pulse):
    result, params, pulse = _toy_calibration(toy_params, toy_pulse)
    T = np.pi / toy_pulse.nu
    assert result.T == pytest.approx(T)
    assert result.theta_minus_T.imag == pytest.approx(np.pi, rel=1e-8)
    assert result.theta_plus_T.imag == 0
    assert params.g == result.g
    trace = theta_trace(pulse, params, sample_times=[pulse.t_on, pulse.t_on + T])
    assert trace.theta_minus[-1].imag == pytest.approx(np.pi, rel=1e-6)
    # hermitized pulses split the phase evenly between the branches
    raw = theta_trace(pulse, params, sample_times=[pulse.t_on, pulse.t_on + T],
                      field_frame=INTERACTION_FRAME)
    assert raw.theta_minus[-1].imag == pytest.approx(np.pi / 2, rel=1e-6)
    assert raw.theta_plus[-1].imag == pytest.approx(-np.pi / 2, rel=1e-6)


def test_calibrated_phase_accumulates_monotonically(toy_params, toy_pulse):
    _, params, pulse = _toy_calibration(toy_params, toy_pulse)
    trace = theta_trace(pulse, params, sample_times=np.linspace(pulse.t_on, pulse.t_off, 21))
    phase = trace.theta_minus.imag
    assert phase[0] == 0
    assert np.all(np.diff(phase) >= 0)


def test_calibrated_phase_doubles_over_a_full_period(toy_params, toy_pulse):
    result, params, pulse = _toy_calibration(toy_params, toy_pulse)
    T = result.T
    pulse = pulse.replace(t_off=pulse.t_on + 2 * T)
    trace = theta_trace(pulse, params, sample_times=[pulse.t_on, pulse.t_on + T, pulse.t_off])
    assert trace.theta_minus[1].imag == pytest.approx(np.pi, rel=1e-3)
    assert trace.theta_minus[2].imag == pytest.approx(2 * np.pi, rel=0.05)


def test_doubling_calibrated_coupling_gives_four_pi(toy_params, toy_pulse):
    result, params, pulse = _toy_calibration(toy_params, toy_pulse)
    doubled = params.with_coupling(2 * result.g)
    trace = theta_trace(pulse, doubled, sample_times=[pulse.t_on, pulse.t_on + result.T])
    assert trace.theta_minus[-1].imag == pytest.approx(4 * np.pi, rel=0.1)


def test_calibration_rejects_unknown_target(toy_params, toy_pulse):
    with pytest.raises(InvalidArgumentError):
        calibrate_pulse(toy_params, toy_pulse, target='theta_plus', bracket=(1e-3, 1e3),
                        calibrate_phi=False)


def test_calibration_reports_unbracketed_target(toy_params, toy_pulse):
    with pytest.raises(CalibrationError) as info:
        calibrate_pulse(toy_params, toy_pulse, bracket=(1e-4, 1e-3), calibrate_phi=False)
    assert info.value.bracket == (1e-4, 1e-3)


@pytest.mark.slow
def test_device_scale_calibration_accumulates_pi_per_half_period():
    params, pulse = DeviceParams(), FluxPulse()
    result = calibrate_pulse(params, pulse)
    assert result.T == pytest.approx(62.5e-9)
    assert DEFAULT_G_BRACKET[0] < result.g < DEFAULT_G_BRACKET[1]
    assert result.theta_minus_T.imag == pytest.approx(np.pi, rel=1e-8)
    assert result.first_order_ratio < 1e-2
    params, pulse = calibrated(params, pulse, result)
    pulse = pulse.replace(t_off=pulse.t_on + 2 * result.T)
    trace = theta_trace(pulse, params,
                        sample_times=[pulse.t_on, pulse.t_on + result.T, pulse.t_off])
    assert trace.theta_minus[1].imag == pytest.approx(np.pi, rel=0.05)
    assert trace.theta_minus[2].imag == pytest.approx(2 * np.pi, rel=0.05)
