"""CLI entry point for pycatq - cat-state field qubits and hybrid gates in circuit QED."""

import argparse
import sys

from .common import ConfigError, InvalidArgumentError, NumericalError, PycatqError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _add_run_options(p, engine=True):
    p.add_argument(
        '--config', '-c', required=True,
        metavar='PATH',
        help='Run config: flat "section.key = value" text, or YAML (.yaml/.yml)',
    )
    p.add_argument(
        '--out', '-o', default=None,
        metavar='PATH',
        help='Output CSV path (default: output.path from the config)',
    )
    p.add_argument(
        '--seed', type=int, default=None,
        metavar='N',
        help='Override protocol.seed',
    )
    if engine:
        p.add_argument(
            '--engine', choices=['effective', 'exact'], default=None,
            help='Override protocol.engine',
        )
    p.add_argument(
        '--quiet', '-q', action='store_true',
        help='Suppress progress output',
    )
    p.add_argument(
        '--audit-log', default='',
        metavar='DIR',
        help='Directory for per-command JSON run ledgers (default: disabled)',
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog='pycatq',
        description='Cat-state field qubits and hybrid charge-qubit/field gates: '
                    'figure series, gate tables, calibration and sweeps as CSV',
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    # --- figure subcommand ---
    figure_parser = subparsers.add_parser(
        'figure',
        help='Compute one figure series',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""\
Example:
    pycatq figure theta_phase --config device.cfg --out theta_phase.csv
    pycatq figure atom_decay -c device.cfg -o decay.csv -q

Series:
    theta_amp         e^Re(theta_-), e^Re(theta_+) vs time, per configured nu
    theta_phase       Im(theta_-), Im(theta_+) vs time, per configured nu
    atom_decay        P0, P1, Im(P_T) vs time, per temperature and approximation
    sequential_probe  P00, P10 vs t/tau_kappa, closed form and channel oracle
""",
    )
    figure_parser.add_argument(
        'name', choices=['theta_amp', 'theta_phase', 'atom_decay', 'sequential_probe'],
        help='Figure series to compute',
    )
    _add_run_options(figure_parser, engine=False)

    # --- gate subcommand ---
    gate_parser = subparsers.add_parser(
        'gate',
        help='Verify a gate and write its truth table',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""\
Example:
    pycatq gate cnot_field --config device.cfg --out cnot_field.csv
    pycatq gate ghz -c device.cfg -o ghz.csv --engine exact
    pycatq gate cnot_qq -c device.cfg -o cnot_qq.csv --seed 7
""",
    )
    gate_parser.add_argument(
        'name', choices=['hadamard', 'cnot_field', 'cnot_qq', 'ghz', 'rotation'],
        help='Gate to verify',
    )
    _add_run_options(gate_parser)

    # --- calibrate subcommand ---
    calibrate_parser = subparsers.add_parser(
        'calibrate',
        help='Calibrate the coupling g and pulse phase phi for a phase-pi pulse',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""\
Example:
    pycatq calibrate --config device.cfg --out calibration.csv
""",
    )
    _add_run_options(calibrate_parser, engine=False)

    # --- sweep subcommand ---
    sweep_parser = subparsers.add_parser(
        'sweep',
        help='Run a figure, gate or calibration for each value of one config key',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""\
Example:
    pycatq sweep --config sweep_nu.cfg --out sweep.csv

The [sweep] section names the key (sweep.key = pulse.nu), its values
(sweep.values = 8pi MHz, 16pi MHz), the command and figure/gate name, and
the number of worker processes.
""",
    )
    _add_run_options(sweep_parser)

    # --- log subcommand ---
    log_parser = subparsers.add_parser(
        'log',
        help='Print the run history from an audit directory',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""\
Example:
    pycatq log --audit-log pycatq_audit/
    pycatq log --audit-log pycatq_audit/ --command gate
""",
    )
    log_parser.add_argument(
        '--audit-log', default='pycatq_audit',
        metavar='DIR',
        help='Directory containing per-command JSON run ledgers (default: pycatq_audit/)',
    )
    log_parser.add_argument(
        '--command', dest='command_filter', default=None,
        choices=['figure', 'gate', 'calibrate', 'sweep'],
        help='Only show runs of this command',
    )
    log_parser.add_argument(
        '--digest', default=None,
        metavar='PREFIX',
        help='Only show runs whose config digest starts with PREFIX',
    )

    return parser


def _prepare_config(args):
    from .config import load_config

    config = load_config(args.config)
    if args.seed is not None:
        config = config.with_value('protocol.seed', str(args.seed))
    if getattr(args, 'engine', None):
        config = config.with_value('protocol.engine', args.engine)
    out = args.out or config.output.path
    if not out:
        raise ConfigError("no output path: pass --out or set output.path")
    return config, out


def _headline(command, df):
    headline = {'rows': int(len(df))}
    if 'match' in df:
        headline['matches'] = int(df['match'].sum())
    if command == 'calibrate':
        headline['g_rad_s'] = float(df['g_rad_s'].iloc[0])
        headline['phase_residual'] = float(df['phase_residual'].iloc[0])
    if 'fidelity' in df:
        headline['min_fidelity'] = float(df['fidelity'].min())
    return headline


def _dispatch(args):
    if args.command == 'log':
        from .log_cmd import run_log
        run_log(audit_dir=args.audit_log, command=args.command_filter, digest=args.digest)
        return

    config, out = _prepare_config(args)
    if args.command == 'figure':
        from .figure import run_figure
        df = run_figure(args.name, config, out, quiet=args.quiet)
        label = f'figure {args.name}'
    elif args.command == 'gate':
        from .gate_table import run_gate
        df = run_gate(args.name, config, out, quiet=args.quiet)
        label = f'gate {args.name}'
    elif args.command == 'calibrate':
        from .calibrate import run_calibrate
        df = run_calibrate(config, out, quiet=args.quiet)
        label = 'calibrate'
    else:
        from .sweep import run_sweep
        df = run_sweep(config, out, quiet=args.quiet)
        label = f'sweep {config.sweep.key}'

    if args.audit_log:
        from .audit import AuditLog
        log = AuditLog(args.audit_log)
        log.append_run(
            command=args.command,
            label=label,
            config_digest=config.digest(),
            output=out,
            args={'seed': config.protocol.seed, 'engine': config.protocol.engine},
            headline=_headline(args.command, df),
        )
        log.save()


def _report(exc):
    reason = ' '.join(str(exc).split())
    print(f"error={exc.kind} reason={reason}", file=sys.stderr)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _dispatch(args)
    except NumericalError as exc:
        _report(exc)
        return EXIT_NUMERICAL
    except (ConfigError, InvalidArgumentError) as exc:
        _report(exc)
        return EXIT_CONFIG
    except PycatqError as exc:
        _report(exc)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
