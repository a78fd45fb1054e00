"""
Run ledger: persistent JSON record of every output file pycatq writes.

With ``--audit-log DIR`` each command appends a run to a JSON file named after
its label (e.g. figure_theta_phase.json, gate_cnot_qq.json).  The
``pycatq log`` subcommand loads all files in the directory to print the run
history.
"""

import json
import math
import re
from datetime import datetime, timezone
from pathlib import Path

_SCHEMA_VERSION = 1
_SAFE_RE = re.compile(r'[^\w\- ]')


def _safe_filename(name):
    """Convert a run label to a safe filename stem."""
    return _SAFE_RE.sub('', name).replace(' ', '_')


def _sanitize(rec):
    """Replace float NaN/Inf with None so records are valid JSON."""
    return {
        k: None if (isinstance(v, float) and not math.isfinite(v)) else v
        for k, v in rec.items()
    }


def _now_iso():
    return datetime.now(tz=timezone.utc).strftime('%Y-%m-%dT%H:%M:%SZ')


class AuditLog:
    """
    Per-label run ledger stored as one JSON file per label.

    Usage (writing)::

        log = AuditLog('pycatq_audit/')
        log.append_run(
            command='gate',
            label='gate cnot_qq',
            config_digest='3f1c...',
            output='cnot.csv',
            args={'seed': 0, 'engine': 'effective'},
            headline={'rows': 4, 'matches': 4},
        )
        log.save()   # appends to pycatq_audit/gate_cnot_qq.json

    Usage (querying)::

        log = AuditLog('pycatq_audit/')
        log.load_all()
        runs = log.query(command='gate')
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.runs = []

    def append_run(self, command, label, config_digest, output, args=None, headline=None):
        """
        Append a run entry to the log (in memory; call save() to persist).

        Args:
            command:       'figure', 'gate', 'calibrate' or 'sweep'
            label:         command plus figure/gate name (e.g. 'figure theta_phase')
            config_digest: SHA-256 of the serialized config
            output:        path of the CSV written
            args:          seed, engine and other CLI arguments of this run
            headline:      a few scalar results worth seeing in the history
        """
        self.runs.append({
            'timestamp': _now_iso(),
            'command': command,
            'label': label,
            'config_digest': config_digest,
            'output': str(output),
            'args': args or {},
            'headline': _sanitize(headline or {}),
        })

    def save(self):
        """
        Append the in-memory runs to one JSON file per label in self.directory,
        numbering them after any runs already on disk.
        """
        self.directory.mkdir(parents=True, exist_ok=True)
        by_label = {}
        for run in self.runs:
            by_label.setdefault(run['label'], []).append(run)
        for label, runs in by_label.items():
            path = self.directory / f'{_safe_filename(label)}.json'
            existing = []
            if path.exists():
                try:
                    with open(path, encoding='utf-8') as f:
                        existing = json.load(f).get('runs', [])
                except (json.JSONDecodeError, OSError):
                    existing = []
            for i, run in enumerate(runs, start=len(existing) + 1):
                run['run_id'] = i
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(
                    {'version': _SCHEMA_VERSION, 'label': label, 'runs': existing + runs},
                    f, indent=2,
                )
        self.runs = []

    def load_all(self):
        """Load all run records from the directory into self.runs for querying."""
        self.runs = []
        if not self.directory.exists():
            return
        for jf in sorted(self.directory.glob('*.json')):
            try:
                with open(jf, encoding='utf-8') as f:
                    data = json.load(f)
                self.runs.extend(data.get('runs', []))
            except (json.JSONDecodeError, OSError):
                pass

    def query(self, command=None, digest=None):
        """
        Return runs matching *command* and/or a config digest prefix, oldest
        first.  With no criteria every loaded run is returned.
        """
        results = []
        for run in self.runs:
            if command and run.get('command') != command:
                continue
            if digest and not run.get('config_digest', '').startswith(digest):
                continue
            results.append(run)
        return sorted(results, key=lambda r: (r.get('timestamp', ''), r.get('run_id', 0)))
