"""
Run configuration.

A config is either flat UTF-8 text::

    # device-scale parameters
    device.E_J = 15.9e10            # rad/s
    device.E_C = 250 ueV
    pulse.nu = 16pi MHz
    pulse.t_off = 62.5 ns

or a YAML mapping of the same sections and keys.  Values may carry a unit
suffix (see common.parse_quantity); bare numbers are in the key's canonical
unit, which is SI except for the µeV energies E_C and gap_delta.  Lists are
comma separated.  Unknown sections and keys are rejected.
"""

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .common import ConfigError, PycatqError, parse_quantity
from .device import DeviceParams, FluxPulse, TwoModeParams
from .dissipation import FIGURE_TEMPERATURES, BathParams
from .fockspace import SpaceLayout
from .propagator import DEFAULT_G_BRACKET, THETA_MINUS, PropagatorOptions

SECTIONS = ('device', 'pulse', 'bath', 'layout', 'protocol', 'solver', 'figure',
            'calibrate', 'two_mode', 'sweep', 'output')


@dataclass(frozen=True)
class ProtocolParams:
    alpha: float = float(np.sqrt(0.4))
    N: int = 3
    T: Optional[float] = None
    seed: int = 0
    engine: str = 'effective'
    outcome_policy: str = 'postselect'
    map: str = 'ideal'
    dt_m: float = 10e-9
    simultaneous: bool = True
    include_qq: bool = False


@dataclass(frozen=True)
class FigureParams:
    nus: tuple = (8 * np.pi * 1e6, 16 * np.pi * 1e6)
    t_max: float = 125e-9
    n_points: int = 201
    calibrate_g: bool = True
    temperatures: tuple = FIGURE_TEMPERATURES
    decay_t_max: float = 5e-9
    decay_points: int = 2001
    probe_nbar: float = 10.0
    probe_max: float = 2.0
    probe_points: int = 201


@dataclass(frozen=True)
class CalibrateParams:
    target: str = THETA_MINUS
    g_min: float = DEFAULT_G_BRACKET[0]
    g_max: float = DEFAULT_G_BRACKET[1]
    calibrate_phi: bool = True


@dataclass(frozen=True)
class SweepParams:
    key: str = 'pulse.nu'
    values: tuple = ()
    command: str = 'figure'
    name: str = 'theta_phase'
    workers: int = 1


@dataclass(frozen=True)
class OutputParams:
    path: Optional[str] = None


# key -> (attribute, kind, canonical unit scale)
_SCHEMA = {
    'device': {
        'E_J': ('E_J_over_hbar', float, 1.0),
        'E_C': ('E_C', float, 1e-6),
        'omega_c': ('omega_c', float, 1.0),
        'g': ('g', float, 1.0),
        'gap_delta': ('gap_delta', float, 1e-6),
        'temperature': ('temperature', float, 1.0),
    },
    'pulse': {k: (k, str if k == 'mode' else float, 1.0)
              for k in ('A', 'nu', 'phi', 't_on', 't_off', 'mode')},
    'bath': {k: (k, float, 1.0) for k in ('beta', 'temperature', 'tau_kappa')},
    'layout': {k: (k, int, 1.0) for k in ('n_qubits', 'fock_dim', 'n_modes')},
    'protocol': {
        'alpha': ('alpha', float, 1.0),
        'N': ('N', int, 1.0),
        'T': ('T', float, 1.0),
        'seed': ('seed', int, 1.0),
        'engine': ('engine', str, 1.0),
        'outcome_policy': ('outcome_policy', str, 1.0),
        'map': ('map', str, 1.0),
        'dt_m': ('dt_m', float, 1.0),
        'simultaneous': ('simultaneous', bool, 1.0),
        'include_qq': ('include_qq', bool, 1.0),
    },
    'solver': {
        'rel_tol': ('rel_tol', float, 1.0),
        'abs_tol': ('abs_tol', float, 1.0),
        'quad_tol': ('quad_tol', float, 1.0),
        'dyson_order': ('dyson_order', int, 1.0),
        'points_per_period': ('points_per_period', int, 1.0),
        'max_refinements': ('max_refinements', int, 1.0),
        'expansion': ('expansion', str, 1.0),
    },
    'figure': {
        'nus': ('nus', tuple, 1.0),
        't_max': ('t_max', float, 1.0),
        'n_points': ('n_points', int, 1.0),
        'calibrate_g': ('calibrate_g', bool, 1.0),
        'temperatures': ('temperatures', tuple, 1.0),
        'decay_t_max': ('decay_t_max', float, 1.0),
        'decay_points': ('decay_points', int, 1.0),
        'probe_nbar': ('probe_nbar', float, 1.0),
        'probe_max': ('probe_max', float, 1.0),
        'probe_points': ('probe_points', int, 1.0),
    },
    'calibrate': {
        'target': ('target', str, 1.0),
        'g_min': ('g_min', float, 1.0),
        'g_max': ('g_max', float, 1.0),
        'calibrate_phi': ('calibrate_phi', bool, 1.0),
    },
    'two_mode': {f.name: (f.name, float, 1.0) for f in fields(TwoModeParams)},
    'sweep': {
        'key': ('key', str, 1.0),
        'values': ('values', list, 1.0),
        'command': ('command', str, 1.0),
        'name': ('name', str, 1.0),
        'workers': ('workers', int, 1.0),
    },
    'output': {'path': ('path', str, 1.0)},
}

_FACTORIES = {
    'device': DeviceParams,
    'pulse': FluxPulse,
    'bath': BathParams,
    'layout': lambda **kw: SpaceLayout(**{'n_qubits': 1, 'fock_dim': 40, **kw}),
    'protocol': ProtocolParams,
    'solver': PropagatorOptions,
    'figure': FigureParams,
    'calibrate': CalibrateParams,
    'two_mode': TwoModeParams,
    'sweep': SweepParams,
    'output': OutputParams,
}


@dataclass(frozen=True)
class RunConfig:
    """
    Parsed configuration.  ``sections`` lists the sections the source named;
    the others hold defaults and are not written back by dump_config.
    """

    device: DeviceParams = DeviceParams()
    pulse: FluxPulse = FluxPulse()
    bath: BathParams = BathParams()
    layout: SpaceLayout = SpaceLayout(1, 40)
    protocol: ProtocolParams = ProtocolParams()
    solver: PropagatorOptions = PropagatorOptions()
    figure: FigureParams = FigureParams()
    calibrate: CalibrateParams = CalibrateParams()
    two_mode: TwoModeParams = TwoModeParams()
    sweep: SweepParams = SweepParams()
    output: OutputParams = OutputParams()
    sections: frozenset = frozenset()

    def require(self, *names):
        """
        Raises:
            ConfigError: If any of the named sections is absent from the source.
        """
        missing = [n for n in names if n not in self.sections]
        if missing:
            raise ConfigError(f"config is missing section(s): {', '.join(missing)}")

    def with_value(self, dotted_key, text):
        """Copy with one ``section.key`` replaced by a parsed value."""
        section, key = _split_key(dotted_key)
        value = _convert(section, key, text)
        current = getattr(self, section)
        attr = _SCHEMA[section][key][0]
        try:
            updated = replace(current, **{attr: value})
        except PycatqError as exc:
            raise ConfigError(f"{dotted_key}: {exc}") from exc
        return replace(self, **{section: updated, 'sections': self.sections | {section}})

    @property
    def T(self):
        """Pulse length 𝒯: protocol.T when set, otherwise the pulse window."""
        return self.protocol.T if self.protocol.T is not None else self.pulse.duration

    def digest(self):
        return hashlib.sha256(dump_config(self).encode('utf-8')).hexdigest()


def _split_key(dotted_key):
    if '.' not in dotted_key:
        raise ConfigError(f"key '{dotted_key}' must have the form section.key")
    section, key = dotted_key.split('.', 1)
    if section not in _SCHEMA:
        raise ConfigError(f"unknown config section '{section}'")
    if key not in _SCHEMA[section]:
        raise ConfigError(f"unknown config key '{section}.{key}'")
    return section, key


def _parse_bool(text):
    if isinstance(text, bool):
        return text
    lowered = str(text).strip().lower()
    if lowered in ('true', 'yes', '1', 'on'):
        return True
    if lowered in ('false', 'no', '0', 'off'):
        return False
    raise ConfigError(f"expected a boolean, got '{text}'")


def _items(text):
    if isinstance(text, (list, tuple)):
        return list(text)
    return [part.strip() for part in str(text).split(',') if part.strip()]


def _convert(section, key, text):
    _, kind, scale = _SCHEMA[section][key]
    where = f"{section}.{key}"
    try:
        if kind is str:
            return str(text).strip()
        if kind is bool:
            return _parse_bool(text)
        if kind is int:
            value = parse_quantity(text, scale)
            if value != int(value):
                raise ConfigError(f"expected an integer, got '{text}'")
            return int(value)
        if kind is float:
            return float(parse_quantity(text, scale))
        if kind is tuple:
            return tuple(float(parse_quantity(v, scale)) for v in _items(text))
        # raw list: parsed later against the key it sweeps
        return tuple(str(v).strip() for v in _items(text))
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _build(raw):
    """raw: {section: {key: text}} with every key already validated."""
    values = {}
    for section, entries in raw.items():
        kwargs = {_SCHEMA[section][k][0]: _convert(section, k, v) for k, v in entries.items()}
        try:
            values[section] = _FACTORIES[section](**kwargs)
        except PycatqError as exc:
            raise ConfigError(f"[{section}] {exc}") from exc
        except TypeError as exc:
            raise ConfigError(f"[{section}] {exc}") from exc
    return RunConfig(**values, sections=frozenset(raw))


def _strip_comment(line):
    return line.split('#', 1)[0].strip()


def parse_flat(text):
    """
    Parse ``section.key = value`` lines.

    Raises:
        ConfigError: On malformed lines, unknown or repeated keys, or values
            the parameter types reject.
    """
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = _strip_comment(line)
        if not body:
            continue
        if '=' not in body:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got '{body}'")
        lhs, rhs = (s.strip() for s in body.split('=', 1))
        section, key = _split_key(lhs)
        if key in raw.get(section, {}):
            raise ConfigError(f"line {lineno}: '{lhs}' given twice")
        raw.setdefault(section, {})[key] = rhs
    return _build(raw)


def parse_yaml(text):
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ConfigError("YAML config must be a mapping of sections")
    raw = {}
    for section, entries in data.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section '{section}'")
        if not isinstance(entries, dict):
            raise ConfigError(f"section '{section}' must be a mapping")
        for key, value in entries.items():
            _split_key(f"{section}.{key}")
            raw.setdefault(section, {})[key] = value
    return _build(raw)


def load_config(path):
    """Read a flat-text or (by .yaml/.yml suffix) YAML config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ConfigError(f"cannot read config '{path}': {exc}") from exc
    if path.suffix.lower() in ('.yaml', '.yml'):
        try:
            return parse_yaml(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in '{path}': {exc}") from exc
    return parse_flat(text)


def _format(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ', '.join(_format(v) for v in value)
    return str(value)


def dump_config(config):
    """
    Flat text for the sections present in *config*, canonical units, one key
    per line.  parse_flat(dump_config(c)) == c.
    """
    lines = []
    for section in SECTIONS:
        if section not in config.sections:
            continue
        obj = getattr(config, section)
        for key, (attr, _, _) in _SCHEMA[section].items():
            value = getattr(obj, attr)
            if value is None:
                continue
            if isinstance(value, np.floating):
                value = float(value)
            lines.append(f"{section}.{key} = {_format(value)}")
    return '\n'.join(lines) + '\n'
