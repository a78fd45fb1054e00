"""
Figure series: θ_± amplitude and phase traces, charge-qubit decay and the
sequential-pulse coherence probe, each written as one CSV file.
"""

import numpy as np
import pandas as pd

from .common import ConfigError, write_csv_atomic
from .dissipation import (
    CHANNEL_ORACLE, FULL, PAPER_FORMULA, TANH1, atom_population_probs, sequential_pulse_probs,
)
from .propagator import calibrate_pulse, ideal_map, theta_trace

THETA_AMP = 'theta_amp'
THETA_PHASE = 'theta_phase'
ATOM_DECAY = 'atom_decay'
SEQUENTIAL_PROBE = 'sequential_probe'
FIGURES = (THETA_AMP, THETA_PHASE, ATOM_DECAY, SEQUENTIAL_PROBE)

_UNITS = {
    THETA_AMP: 'nu_rad_s: rad/s; t_ns: ns; exp_re_theta_minus, exp_re_theta_plus: dimensionless',
    THETA_PHASE: 'nu_rad_s: rad/s; t_ns: ns; im_theta_minus, im_theta_plus: rad (pulse frame); '
                 'field_frame_phase: rad, field rotation removed by the pulse frame',
    ATOM_DECAY: 'temperature_K: K; t_ns: ns; P0, P1: probability; im_PT: dimensionless',
    SEQUENTIAL_PROBE: 't_over_tau: t/tau_kappa; P00_*, P10_*: probability; '
                      'nonphysical_branch: 1 where the closed form is outside its validity',
}


def _traces(config, quiet):
    """θ_± traces per configured ν, as (nu, coupling, ThetaTrace)."""
    config.require('device', 'pulse')
    fig = config.figure
    out = []
    for nu in fig.nus:
        pulse = config.pulse.replace(nu=nu, t_off=config.pulse.t_on + fig.t_max)
        params = config.device
        if fig.calibrate_g:
            result = calibrate_pulse(params, pulse, config.calibrate.target, config.solver,
                                     (config.calibrate.g_min, config.calibrate.g_max),
                                     alpha=config.protocol.alpha, calibrate_phi=False)
            params = params.with_coupling(result.g)
        if not quiet:
            print(f"  nu = {nu:.6g} rad/s, g = {params.g:.6g} rad/s")
        times = np.linspace(pulse.t_on, pulse.t_off, fig.n_points)
        out.append((nu, params.g, theta_trace(pulse, params, config.solver, times)))
    return out


def _theta_frame(config, quiet, kind):
    blocks = []
    for nu, _, trace in _traces(config, quiet):
        t_ns = (trace.times - trace.times[0]) * 1e9
        if kind == THETA_AMP:
            columns = {
                'exp_re_theta_minus': np.exp(trace.theta_minus.real),
                'exp_re_theta_plus': np.exp(trace.theta_plus.real),
            }
        else:
            columns = {
                'im_theta_minus': trace.theta_minus.imag + 0.0,
                'im_theta_plus': trace.theta_plus.imag + 0.0,
                'field_frame_phase': trace.frame_phase + 0.0,
            }
        blocks.append(pd.DataFrame({'nu_rad_s': nu, 't_ns': t_ns, **columns}))
    return pd.concat(blocks, ignore_index=True)


def _atom_decay_frame(config, quiet):
    config.require('device', 'bath')
    fig = config.figure
    t = np.linspace(0.0, fig.decay_t_max, fig.decay_points)
    blocks = []
    for temperature in fig.temperatures:
        bath = config.bath.at_temperature(temperature)
        for approximation in (FULL, TANH1):
            p0, p1, pt = atom_population_probs(t, config.device, bath, approximation)
            blocks.append(pd.DataFrame({
                'temperature_K': temperature,
                'approximation': approximation,
                't_ns': t * 1e9,
                'P0': p0,
                'P1': p1,
                'im_PT': pt.imag + 0.0,
            }))
        if not quiet:
            print(f"  T = {temperature * 1e3:.4g} mK")
    return pd.concat(blocks, ignore_index=True)


def _sequential_probe_frame(config, quiet):
    config.require('bath')
    fig = config.figure
    alpha = float(np.sqrt(fig.probe_nbar))
    emap = ideal_map(config.T)
    rows = []
    for x in np.linspace(0.0, fig.probe_max, fig.probe_points):
        t = x * config.bath.tau_kappa
        formula = sequential_pulse_probs(t, alpha, config.bath, PAPER_FORMULA)
        oracle = sequential_pulse_probs(t, alpha, config.bath, CHANNEL_ORACLE, emap)
        rows.append({
            't_over_tau': x,
            'P00_formula': formula.p00,
            'P10_formula': formula.p10,
            'P00_oracle': oracle.p00,
            'P10_oracle': oracle.p10,
            'nonphysical_branch': int(formula.nonphysical_branch),
        })
    if not quiet:
        print(f"  alpha^2 = {fig.probe_nbar:.4g}, {len(rows)} points")
    return pd.DataFrame(rows)


def figure_frame(fig, config, quiet=True):
    """Build the DataFrame for one figure series."""
    if fig in (THETA_AMP, THETA_PHASE):
        return _theta_frame(config, quiet, fig)
    if fig == ATOM_DECAY:
        return _atom_decay_frame(config, quiet)
    if fig == SEQUENTIAL_PROBE:
        return _sequential_probe_frame(config, quiet)
    raise ConfigError(f"unknown figure '{fig}' (expected one of {', '.join(FIGURES)})")


def run_figure(fig, config, out_path, quiet=False):
    """
    Compute one figure series and write it to *out_path*.

    Returns:
        The DataFrame written.
    """
    if not quiet:
        print(f"\n=== figure {fig} ===")
    df = figure_frame(fig, config, quiet)
    write_csv_atomic(out_path, df, _UNITS[fig])
    if not quiet:
        print(f"  {len(df)} rows -> {out_path}")
    return df


def figure_units(fig):
    return _UNITS[fig]
