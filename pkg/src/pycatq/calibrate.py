"""
Pulse calibration command: solve for the coupling g (and pulse phase φ) that
imprints the conditional phase π at the end of the pulse, and report the residuals.
"""

import numpy as np
import pandas as pd

from .common import write_csv_atomic
from .propagator import calibrate_pulse

CALIBRATE_UNITS = ('g_rad_s: rad/s; phi_rad: rad; T_s: s; theta_*: dimensionless; '
                   'phase_residual: |achieved - pi|/pi; first_order_ratio: first/second order term')


def calibrate_frame(config, quiet=True):
    config.require('device', 'pulse', 'calibrate')
    cal = config.calibrate
    result = calibrate_pulse(config.device, config.pulse, cal.target, config.solver,
                             (cal.g_min, cal.g_max), alpha=config.protocol.alpha,
                             T=config.protocol.T, calibrate_phi=cal.calibrate_phi)
    achieved = abs(result.theta_minus_T.imag)
    if not quiet:
        print(f"  g = {result.g:.9g} rad/s, phi = {result.phi:.6g} rad")
        if not result.phi_converged:
            print(f"WARNING: first-order ratio {result.first_order_ratio:.3g} is above 1e-3")
    return pd.DataFrame([{
        'target': cal.target,
        'g_rad_s': result.g,
        'phi_rad': result.phi,
        'T_s': result.T,
        'im_theta_minus': result.theta_minus_T.imag,
        're_theta_minus': result.theta_minus_T.real,
        'im_theta_plus': result.theta_plus_T.imag,
        're_theta_plus': result.theta_plus_T.real,
        'phase_residual': abs(achieved - np.pi) / np.pi,
        'first_order_ratio': result.first_order_ratio,
        'phi_converged': int(result.phi_converged),
    }])


def run_calibrate(config, out_path, quiet=False):
    """
    Calibrate and write one row to *out_path*.  On CalibrationError nothing is
    written.
    """
    if not quiet:
        print("\n=== calibrate ===")
    df = calibrate_frame(config, quiet)
    write_csv_atomic(out_path, df, CALIBRATE_UNITS)
    if not quiet:
        print(f"  -> {out_path}")
    return df
