"""
Log query command: prints the run history from the audit directory.
"""

from pathlib import Path

from .audit import AuditLog
from .common import ConfigError


def _headline_text(headline):
    return ', '.join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                     for k, v in headline.items())


def run_log(audit_dir, command=None, digest=None):
    """
    Query the audit log directory and print a summary table.

    Args:
        audit_dir: Path to the directory containing per-label JSON ledger files
        command:   Only show runs of this command
        digest:    Only show runs whose config digest starts with this prefix

    Raises:
        ConfigError: If the directory does not exist.
    """
    directory = Path(audit_dir)
    if not directory.exists():
        raise ConfigError(f"Audit log directory not found: {directory}")

    log = AuditLog(directory)
    log.load_all()
    runs = log.query(command=command, digest=digest)

    if not runs:
        print("No records found.")
        return []

    rows = []
    for run in runs:
        args = run.get('args', {})
        rows.append([
            run.get('label', '?'),
            run.get('timestamp', '')[:19],
            run.get('config_digest', '')[:12],
            str(args.get('engine', '')),
            str(args.get('seed', '')),
            run.get('output', ''),
            _headline_text(run.get('headline', {})),
        ])

    headers = ['Label', 'Timestamp', 'Config', 'Engine', 'Seed', 'Output', 'Headline']
    widths = [
        max(len(headers[i]), max(len(str(r[i])) for r in rows))
        for i in range(len(headers))
    ]
    fmt = '  '.join(f'{{:<{w}}}' for w in widths)
    rule = '  '.join('-' * w for w in widths)

    print(fmt.format(*headers))
    print(rule)
    for row in rows:
        print(fmt.format(*[str(x) for x in row]))
    print()
    return runs
