"""Shared utilities: exception hierarchy, physical constants, unit parsing and CSV output."""

import os
import re
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import constants as _const

HBAR = _const.hbar
K_B = _const.k
E_CHARGE = _const.e
H_PLANCK = _const.h
# SI flux quantum h/2e; pulse fluxes themselves are expressed in units of it
PHI_0_SI = H_PLANCK / (2 * E_CHARGE)


class PycatqError(Exception):
    """Base class for every error raised by pycatq."""

    kind = 'error'


class ConfigError(PycatqError):
    kind = 'config'


class InvalidArgumentError(PycatqError, ValueError):
    kind = 'invalid-argument'


class InvalidDimensionError(InvalidArgumentError):
    kind = 'invalid-dimension'


class LayoutMismatchError(InvalidArgumentError):
    kind = 'layout-mismatch'


class DegenerateStateError(InvalidArgumentError):
    kind = 'degenerate-state'


class ImpossibleOutcomeError(PycatqError):
    kind = 'impossible-outcome'


class RepresentationError(PycatqError):
    kind = 'representation'


class ScheduleError(ConfigError):
    kind = 'schedule-validation'


class NumericalError(PycatqError):
    kind = 'numerical'


class TruncationError(NumericalError, ValueError):
    kind = 'truncation-inadequate'


class IntegrationError(NumericalError):
    kind = 'integration-failure'

    def __init__(self, message, last_good_time=None):
        super().__init__(message)
        self.last_good_time = last_good_time


class QuadratureError(NumericalError):
    kind = 'quadrature-nonconvergence'

    def __init__(self, message, error_estimate=None):
        super().__init__(message)
        self.error_estimate = error_estimate


class ExtractionError(NumericalError):
    kind = 'extraction-failure'


class CalibrationError(NumericalError):
    kind = 'calibration-failure'

    def __init__(self, message, bracket=None, values=None):
        super().__init__(message)
        self.bracket = bracket
        self.values = values


# --- unit suffixes -----------------------------------------------------------

# Frequencies quoted in Hz are read as angular frequencies (rad/s).
_UNIT_SCALE = {
    's': 1.0, 'ms': 1e-3, 'us': 1e-6, 'µs': 1e-6, 'ns': 1e-9, 'ps': 1e-12,
    'K': 1.0, 'mK': 1e-3,
    'Hz': 1.0, 'kHz': 1e3, 'MHz': 1e6, 'GHz': 1e9, 'rad/s': 1.0,
    'eV': 1.0, 'meV': 1e-3, 'ueV': 1e-6, 'µeV': 1e-6,
    'F': 1.0, 'pF': 1e-12, 'fF': 1e-15, 'aF': 1e-18,
    'm': 1.0, 'cm': 1e-2, 'mm': 1e-3, 'um': 1e-6,
    'F/m': 1.0, 'pF/m': 1e-12,
}

_QUANTITY_RE = re.compile(
    r'^\s*(?P<num>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*\*?\s*'
    r'(?P<pi>pi)?\s*(?P<unit>[A-Za-zµ/]+)?\s*$'
)


def parse_quantity(text, unit_scale=1.0):
    """
    Parse a number with an optional ``pi`` multiplier and unit suffix.

    A suffixed value is returned in multiples of *unit_scale* (SI by
    default); a bare number is taken to be in those units already.

    Examples:
        '62.5 ns'    -> 6.25e-08
        '16pi MHz'   -> 5.026548245743669e+07
        '30 mK'      -> 0.03
        '0.7'        -> 0.7
        parse_quantity('250 ueV', unit_scale=1e-6) -> 250.0

    Raises:
        ConfigError: If the text is not a recognised quantity.
    """
    if isinstance(text, (int, float)):
        return float(text)
    m = _QUANTITY_RE.match(str(text))
    if not m or (m.group('num') is None and m.group('pi') is None):
        raise ConfigError(f"Cannot parse quantity '{text}'")
    unit = m.group('unit')
    if unit == 'pi':
        unit = None
    value = float(m.group('num')) if m.group('num') else 1.0
    if m.group('pi'):
        value *= np.pi
    if unit is None:
        return value
    if unit not in _UNIT_SCALE:
        raise ConfigError(f"Unknown unit '{unit}' in '{text}'")
    return value * (_UNIT_SCALE[unit] / unit_scale)


# --- CSV output --------------------------------------------------------------

def fmt_float(value):
    """Format a float with 17 significant digits (the CSV convention)."""
    return f"{value:.17g}"


def write_csv_atomic(path, df, units_comment):
    """
    Write *df* as CSV to *path* atomically (temp file + rename).

    The file starts with one ``# `` comment line documenting column units,
    followed by the header row; floats use 17 significant digits and lines end
    with a single newline character.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = df.to_csv(index=False, float_format='%.17g', lineterminator='\n')
    fd, tmp = tempfile.mkstemp(prefix=f'.{path.name}.', dir=path.parent)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
            f.write(f"# {units_comment}\n")
            f.write(body)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_series_csv(path):
    """Read a CSV written by write_csv_atomic back into a DataFrame."""
    return pd.read_csv(path, comment='#')
