"""
Parameter sweeps: one config key takes each listed value in turn, every point
runs the configured figure/gate/calibrate command in its own worker process,
and the results are concatenated in sweep-index order.
"""

from concurrent.futures import ProcessPoolExecutor

import pandas as pd

from .calibrate import CALIBRATE_UNITS, calibrate_frame
from .common import ConfigError, write_csv_atomic
from .figure import figure_frame, figure_units
from .gate_table import gate_frame, gate_units

COMMANDS = ('figure', 'gate', 'calibrate')


def _point_frame(command, name, config):
    if command == 'figure':
        return figure_frame(name, config)
    if command == 'gate':
        return gate_frame(name, config)
    return calibrate_frame(config)


def _run_point(index, command, name, config):
    return index, _point_frame(command, name, config)


def sweep_configs(config):
    """The per-point configs, in sweep order."""
    sweep = config.sweep
    if not sweep.values:
        raise ConfigError("sweep.values is empty")
    return [config.with_value(sweep.key, v) for v in sweep.values]


def sweep_frame(config, quiet=True):
    config.require('sweep')
    sweep = config.sweep
    if sweep.command not in COMMANDS:
        raise ConfigError(f"sweep.command must be one of {', '.join(COMMANDS)}")
    if sweep.workers < 1:
        raise ConfigError("sweep.workers must be at least 1")
    points = sweep_configs(config)
    results = {}
    if sweep.workers == 1:
        for i, point in enumerate(points):
            results[i] = _point_frame(sweep.command, sweep.name, point)
            if not quiet:
                print(f"  [{i + 1}/{len(points)}] {sweep.key} = {sweep.values[i]}")
    else:
        with ProcessPoolExecutor(max_workers=sweep.workers) as executor:
            futures = [executor.submit(_run_point, i, sweep.command, sweep.name, point)
                       for i, point in enumerate(points)]
            for future in futures:
                i, df = future.result()
                results[i] = df
                if not quiet:
                    print(f"  [{i + 1}/{len(points)}] {sweep.key} = {sweep.values[i]}")
    blocks = []
    for i in sorted(results):
        df = results[i].copy()
        df.insert(0, 'sweep_value', sweep.values[i])
        df.insert(0, 'sweep_index', i)
        blocks.append(df)
    return pd.concat(blocks, ignore_index=True)


def _units(config):
    sweep = config.sweep
    if sweep.command == 'figure':
        inner = figure_units(sweep.name)
    elif sweep.command == 'gate':
        inner = gate_units(sweep.name)
    else:
        inner = CALIBRATE_UNITS
    return f"sweep_value: {sweep.key} as written in the config; {inner}"


def run_sweep(config, out_path, quiet=False):
    """
    Run every sweep point and write the combined table to *out_path*.

    Returns:
        The DataFrame written.
    """
    if not quiet:
        sweep = config.sweep
        print(f"\n=== sweep {sweep.key} over {len(sweep.values)} values "
              f"({sweep.command} {sweep.name}, {sweep.workers} worker(s)) ===")
    df = sweep_frame(config, quiet)
    write_csv_atomic(out_path, df, _units(config))
    if not quiet:
        print(f"  {len(df)} rows -> {out_path}")
    return df
