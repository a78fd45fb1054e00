"""
Gate verification tables: one row per input basis state (per output branch
for GHZ) with the observed outputs, probabilities and fidelities.
"""

import numpy as np
import pandas as pd

from .common import ConfigError, write_csv_atomic
from .device import NQubitParams
from .fockspace import extract_field, fidelity, measure_qubit, outcome_probability, qubit_state
from .gates import (
    EFFECTIVE, EXACT, HADAMARD, HADAMARD_MATRIX, ExactEngine, LogicalFieldQubit,
    cnot_field_control, cnot_schedule, cnot_two_qubits, ghz_generate, hadamard_field,
    rotate_qubit_classical_pump,
)
from .propagator import calibrate_pulse, calibrated, effective_map_from_trace, ideal_map, theta_trace

GATES = ('hadamard', 'cnot_field', 'cnot_qq', 'ghz', 'rotation')

_UNITS = {
    'hadamard': 'p_q0, p_q1: probability; fid_*: fidelity of the field branch with the logical state',
    'cnot_field': 'bits; match: 1 when the output equals the CNOT truth table',
    'cnot_qq': 'bits; *_probability: probability',
    'ghz': 'weight: |branch amplitude|^2; amp_re, amp_im: branch amplitude; fidelity: GHZ overlap',
    'rotation': 'p_out0, p_out1: probability; angle_rad: rad; fidelity: |<H psi|U psi>|^2',
}


def _device_and_pulse(config):
    """Device and pulse, calibrated when the config carries a [calibrate] section."""
    params, pulse = config.device, config.pulse
    if 'calibrate' in config.sections:
        cal = config.calibrate
        result = calibrate_pulse(params, pulse, cal.target, config.solver, (cal.g_min, cal.g_max),
                                 alpha=config.protocol.alpha, T=config.T,
                                 calibrate_phi=cal.calibrate_phi)
        params, pulse = calibrated(params, pulse, result)
    return params, pulse


def _engine_and_map(config):
    protocol = config.protocol
    if protocol.engine not in (EFFECTIVE, EXACT):
        raise ConfigError(f"protocol.engine must be 'effective' or 'exact', got '{protocol.engine}'")
    if protocol.map not in ('ideal', 'computed'):
        raise ConfigError(f"protocol.map must be 'ideal' or 'computed', got '{protocol.map}'")
    needs_device = protocol.engine == EXACT or protocol.map == 'computed'
    if not needs_device:
        return EFFECTIVE, ideal_map(config.T), config.device, config.pulse
    config.require('device', 'pulse')
    params, pulse = _device_and_pulse(config)
    if protocol.map == 'computed':
        window = pulse.replace(t_off=pulse.t_on + config.T)
        trace = theta_trace(window, params, config.solver, [window.t_on, window.t_off])
        emap = effective_map_from_trace(trace, include_constants=protocol.engine == EXACT)
    else:
        emap = ideal_map(config.T)
    if protocol.engine == EXACT:
        engine = ExactEngine(params, pulse, config.solver, config.layout.fock_dim)
        return engine, emap, params, pulse
    return EFFECTIVE, emap, params, pulse


def _hadamard_rows(config, engine, emap):
    alpha = config.protocol.alpha
    logical = LogicalFieldQubit(alpha)
    fock_dim = config.layout.fock_dim
    rows = []
    for atom_in in (0, 1):
        state = hadamard_field(atom_in, alpha, emap, engine, fock_dim)
        dim = state.layout.fock_dim
        row = {'input': f"|{atom_in}>|alpha>"}
        labels = []
        for k in (0, 1):
            p = outcome_probability(state, 0, k)
            row[f'p_q{k}'] = p
            field = extract_field(measure_qubit(state, 0, k)[1], (k,))
            fids = [fidelity(field, logical.basis_state(j, dim)) for j in (0, 1)]
            row[f'fid_q{k}_0L'] = fids[0]
            row[f'fid_q{k}_1L'] = fids[1]
            labels.append(f"{k}{int(np.argmax(fids))}L")
        row['output'] = '+'.join(labels)
        rows.append(row)
    return rows


def _cnot_field_rows(config, engine, emap):
    rows = []
    for atom_in in (0, 1):
        for field_in in (0, 1):
            atom_out, field_out = cnot_field_control(atom_in, field_in, emap, engine,
                                                     config.protocol.alpha)
            expected = (atom_in ^ field_in, field_in)
            rows.append({
                'atom_in': atom_in, 'field_in': field_in,
                'atom_out': atom_out, 'field_out': field_out,
                'expected_atom': expected[0], 'expected_field': expected[1],
                'match': int((atom_out, field_out) == expected),
            })
    return rows


def _cnot_qq_rows(config, engine, emap, pulse):
    protocol = config.protocol
    schedule = cnot_schedule(config.T, protocol.dt_m, pulse.t_on, pulse)
    rows = []
    for q1 in (0, 1):
        for q2 in (0, 1):
            result = cnot_two_qubits(q1, q2, protocol.alpha, schedule, emap, engine,
                                     protocol.outcome_policy, protocol.seed,
                                     config.layout.fock_dim)
            encode = result.branch_log[0]
            rows.append({
                'q1_in': q1, 'q2_in': q2,
                'q1_out': result.outputs[0], 'q2_out': result.outputs[1],
                'expected_q1': q1 ^ q2, 'expected_q2': q2,
                'output_probability': result.output_probability,
                'encode_outcome': encode.outcome,
                'encode_probability': encode.probability,
            })
    return rows


def _ghz_rows(config, engine, emap, params, pulse):
    protocol = config.protocol
    N = protocol.N
    nq = None
    if protocol.include_qq:
        tm = config.two_mode
        nq = NQubitParams.from_circuit([params.E_J_over_hbar] * N,
                                       [pulse.replace(t_off=pulse.t_on + config.T)] * N,
                                       tm.C_J, tm.C_g_a, tm.L_a, include_qq=True)
    result = ghz_generate(N, protocol.alpha, emap, protocol.simultaneous, engine, nq,
                          config.layout.fock_dim)
    rows = []
    for label, amp in zip((f"{'0' * N}|0L>", f"{'1' * N}|1L>"), result.weights):
        rows.append({
            'N': N, 'branch': label,
            'weight': abs(amp) ** 2, 'amp_re': amp.real + 0.0, 'amp_im': amp.imag + 0.0,
            'fidelity': result.fidelity,
        })
    return rows


def _rotation_rows(config):
    rows = []
    for bit in (0, 1):
        state = qubit_state(bit)
        rot = rotate_qubit_classical_pump(state, 0, 0.0, 0.0, 0.0, HADAMARD,
                                          config.device, config.two_mode)
        target = HADAMARD_MATRIX @ state.amplitudes
        overlap = abs(np.vdot(target, rot.state.amplitudes)) ** 2
        probs = np.abs(rot.state.amplitudes) ** 2
        rows.append({
            'input': bit,
            'p_out0': probs[0], 'p_out1': probs[1],
            'angle_rad': rot.angle,
            'pump_amplitude': rot.pump_amplitude,
            'duration_s': rot.duration,
            'fidelity': float(overlap),
            'regime_ok': int(rot.regime_ok),
        })
    return rows


def gate_frame(gate, config, quiet=True):
    """Build the verification table for one gate."""
    if gate not in GATES:
        raise ConfigError(f"unknown gate '{gate}' (expected one of {', '.join(GATES)})")
    if gate == 'rotation':
        config.require('device')
        return pd.DataFrame(_rotation_rows(config))
    engine, emap, params, pulse = _engine_and_map(config)
    if not quiet:
        name = engine if engine == EFFECTIVE else engine.name
        print(f"  engine = {name}, theta_minus(T) = {emap.theta_minus_T:.6g}")
    if gate == 'hadamard':
        rows = _hadamard_rows(config, engine, emap)
    elif gate == 'cnot_field':
        rows = _cnot_field_rows(config, engine, emap)
    elif gate == 'cnot_qq':
        rows = _cnot_qq_rows(config, engine, emap, pulse)
    else:
        rows = _ghz_rows(config, engine, emap, params, pulse)
    return pd.DataFrame(rows)


def run_gate(gate, config, out_path, quiet=False):
    """
    Verify one gate and write its table to *out_path*.

    Returns:
        The DataFrame written.
    """
    if not quiet:
        print(f"\n=== gate {gate} ===")
    df = gate_frame(gate, config, quiet)
    write_csv_atomic(out_path, df, _UNITS[gate])
    if not quiet:
        if 'match' in df:
            print(f"  {int(df['match'].sum())}/{len(df)} rows match the truth table")
        print(f"  {len(df)} rows -> {out_path}")
    return df


def gate_units(gate):
    return _UNITS[gate]
