import numpy as np
import pytest

from pycatq.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from pycatq.common import read_series_csv

TOY_DEVICE = """\
device.E_J = 4
device.omega_c = 20
device.g = 0.2
pulse.A = 0.7
pulse.nu = 0.072
pulse.t_off = 10
"""

DECAY = """\
device.E_J = 15.9e10
bath.beta = 0.001
figure.temperatures = 10 mK, 40 mK
figure.decay_t_max = 5 ns
figure.decay_points = 11
"""


def _run(*argv):
    return main([str(a) for a in argv])


def test_atom_decay_figure(config_file, tmp_path):
    out = tmp_path / 'decay.csv'
    assert _run('figure', 'atom_decay', '-c', config_file(DECAY), '-o', out, '-q') == EXIT_OK
    assert out.read_text().startswith('# ')
    df = read_series_csv(out)
    assert list(df.columns) == ['temperature_K', 'approximation', 't_ns', 'P0', 'P1', 'im_PT']
    assert len(df) == 2 * 2 * 11
    first = df.iloc[0]
    assert first['P0'] == pytest.approx(1.0)
    assert first['P1'] == pytest.approx(0.0, abs=1e-15)
    tanh1 = df[df['approximation'] == 'tanh1']
    assert np.allclose(tanh1['P0'] + tanh1['P1'], 1.0)


def test_figure_output_is_deterministic(config_file, tmp_path):
    cfg = config_file(DECAY)
    a, b = tmp_path / 'a.csv', tmp_path / 'b.csv'
    assert _run('figure', 'atom_decay', '-c', cfg, '-o', a, '-q') == EXIT_OK
    assert _run('figure', 'atom_decay', '-c', cfg, '-o', b, '-q') == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert b'\r\n' not in a.read_bytes()


def test_sequential_probe_figure(config_file, tmp_path):
    cfg = config_file('bath.tau_kappa = 1 us\nfigure.probe_points = 5\n')
    out = tmp_path / 'probe.csv'
    assert _run('figure', 'sequential_probe', '-c', cfg, '-o', out, '-q') == EXIT_OK
    df = read_series_csv(out)
    assert df['t_over_tau'].tolist() == pytest.approx([0.0, 0.5, 1.0, 1.5, 2.0])
    assert df['P00_formula'].iloc[0] == pytest.approx(1.0)
    early = df[df['t_over_tau'] <= 1.0]
    assert np.allclose(early['P00_oracle'], early['P00_formula'], atol=1e-12)
    assert df['nonphysical_branch'].tolist() == [0, 0, 0, 1, 1]


def test_theta_phase_figure_on_toy_device(config_file, tmp_path):
    cfg = config_file(TOY_DEVICE + 'figure.nus = 0.072, 0.144\nfigure.t_max = 20\n'
                      'figure.n_points = 5\nfigure.calibrate_g = false\n')
    out = tmp_path / 'phase.csv'
    assert _run('figure', 'theta_phase', '-c', cfg, '-o', out, '-q') == EXIT_OK
    df = read_series_csv(out)
    assert len(df) == 10
    assert sorted(df['nu_rad_s'].unique()) == pytest.approx([0.072, 0.144])
    assert df['t_ns'].iloc[-1] == pytest.approx(20e9)
    starts = df[df['t_ns'] == 0.0]
    assert (starts['im_theta_minus'] == 0.0).all()


@pytest.mark.parametrize('gate', ['cnot_field', 'hadamard', 'ghz'])
def test_effective_gate_tables(config_file, tmp_path, gate):
    out = tmp_path / f'{gate}.csv'
    cfg = config_file('protocol.alpha = 0.6324555320336759\nprotocol.N = 2\n')
    assert _run('gate', gate, '-c', cfg, '-o', out, '-q') == EXIT_OK
    df = read_series_csv(out)
    if gate == 'cnot_field':
        assert df['match'].tolist() == [1, 1, 1, 1]
    elif gate == 'hadamard':
        assert df['p_q0'].tolist() == pytest.approx([(1 + np.exp(-0.8)) / 2,
                                                     (1 - np.exp(-0.8)) / 2])
        assert df['output'].tolist() == ['00L+11L', '01L+10L']
    else:
        assert df['weight'].tolist() == pytest.approx([(1 + np.exp(-0.8)) / 2,
                                                       (1 - np.exp(-0.8)) / 2])


def test_cnot_qq_table(config_file, tmp_path):
    out = tmp_path / 'cnot_qq.csv'
    assert _run('gate', 'cnot_qq', '-c', config_file('protocol.dt_m = 10 ns\n'),
                '-o', out, '-q') == EXIT_OK
    df = read_series_csv(out)
    assert (df['q1_out'] == df['expected_q1']).all()
    assert (df['q2_out'] == df['expected_q2']).all()


def test_malformed_schedule_exits_with_config_code(config_file, tmp_path, capsys):
    out = tmp_path / 'cnot_qq.csv'
    code = _run('gate', 'cnot_qq', '-c', config_file('protocol.dt_m = -5 ns\n'), '-o', out, '-q')
    assert code == EXIT_CONFIG
    assert not out.exists()
    err = capsys.readouterr().err
    assert err.startswith('error=schedule-validation reason=')
    assert err.count('\n') == 1


def test_unknown_key_exits_with_config_code(config_file, tmp_path, capsys):
    code = _run('figure', 'atom_decay', '-c', config_file('device.flux = 3\n'),
                '-o', tmp_path / 'x.csv')
    assert code == EXIT_CONFIG
    assert capsys.readouterr().err.startswith('error=config reason=')


def test_missing_section_and_output(config_file, tmp_path):
    cfg = config_file('bath.beta = 0.001\n')
    assert _run('figure', 'atom_decay', '-c', cfg, '-o', tmp_path / 'x.csv', '-q') == EXIT_CONFIG
    assert _run('figure', 'sequential_probe', '-c', cfg, '-q') == EXIT_CONFIG


def test_calibrate_command(config_file, tmp_path):
    cfg = config_file(TOY_DEVICE + 'calibrate.g_min = 1e-3\ncalibrate.g_max = 1e3\n'
                      'calibrate.calibrate_phi = false\n')
    out = tmp_path / 'cal.csv'
    assert _run('calibrate', '-c', cfg, '-o', out, '-q') == EXIT_OK
    df = read_series_csv(out)
    assert df['phase_residual'].iloc[0] < 1e-8
    assert df['T_s'].iloc[0] == pytest.approx(np.pi / 0.072)
    assert df['im_theta_minus'].iloc[0] == pytest.approx(np.pi, rel=1e-8)
    assert df['im_theta_plus'].iloc[0] == 0.0


def test_failed_calibration_leaves_no_file(config_file, tmp_path, capsys):
    cfg = config_file(TOY_DEVICE + 'calibrate.g_min = 1e-4\ncalibrate.g_max = 1e-3\n'
                      'calibrate.calibrate_phi = false\n')
    out = tmp_path / 'cal.csv'
    assert _run('calibrate', '-c', cfg, '-o', out, '-q') == EXIT_NUMERICAL
    assert not out.exists()
    assert list(tmp_path.glob('.cal.csv.*')) == []
    assert capsys.readouterr().err.startswith('error=calibration-failure reason=')


def test_sweep_over_alpha(config_file, tmp_path):
    text = ('sweep.key = protocol.alpha\nsweep.values = 0.5, 0.8\n'
            'sweep.command = gate\nsweep.name = ghz\nprotocol.N = 1\n')
    serial, parallel = tmp_path / 'serial.csv', tmp_path / 'parallel.csv'
    assert _run('sweep', '-c', config_file(text), '-o', serial, '-q') == EXIT_OK
    assert _run('sweep', '-c', config_file(text + 'sweep.workers = 2\n', 'par.cfg'),
                '-o', parallel, '-q') == EXIT_OK
    assert serial.read_bytes() == parallel.read_bytes()
    df = read_series_csv(serial)
    assert df['sweep_index'].tolist() == [0, 0, 1, 1]
    even = df[df['branch'] == '0|0L>']
    assert even['weight'].tolist() == pytest.approx([(1 + np.exp(-0.5)) / 2,
                                                     (1 + np.exp(-1.28)) / 2])


def test_audit_log_and_query(config_file, tmp_path, capsys):
    audit = tmp_path / 'audit'
    cfg = config_file('protocol.seed = 3\n')
    for name in ('cnot_field', 'ghz'):
        assert _run('gate', name, '-c', cfg, '-o', tmp_path / f'{name}.csv', '-q',
                    '--audit-log', audit) == EXIT_OK
    assert sorted(p.name for p in audit.iterdir()) == ['gate_cnot_field.json', 'gate_ghz.json']
    capsys.readouterr()
    assert _run('log', '--audit-log', audit) == EXIT_OK
    printed = capsys.readouterr().out
    assert 'gate cnot_field' in printed and 'gate ghz' in printed
    assert 'matches=4' in printed


def test_log_without_directory(tmp_path, capsys):
    assert _run('log', '--audit-log', tmp_path / 'nowhere') == EXIT_CONFIG
    assert 'error=config' in capsys.readouterr().err


def test_calibrated_theta_phase_reaches_pi_and_two_pi(config_file, tmp_path):
    two_half_periods = 2 * np.pi / 0.072
    cfg = config_file(TOY_DEVICE + f'figure.nus = 0.072\nfigure.t_max = {two_half_periods!r}\n'
                      'figure.n_points = 5\nfigure.calibrate_g = true\n'
                      'calibrate.g_min = 1e-3\ncalibrate.g_max = 1e3\n')
    out = tmp_path / 'phase.csv'
    assert _run('figure', 'theta_phase', '-c', cfg, '-o', out, '-q') == EXIT_OK
    df = read_series_csv(out)
    assert list(df.columns) == ['nu_rad_s', 't_ns', 'im_theta_minus', 'im_theta_plus',
                                'field_frame_phase']
    phase = df['im_theta_minus'].to_numpy()
    assert np.all(np.diff(phase) >= 0)
    assert phase[2] == pytest.approx(np.pi, rel=1e-3)
    assert phase[4] == pytest.approx(2 * np.pi, rel=0.05)
    assert (df['im_theta_plus'] == 0.0).all()


@pytest.mark.parametrize('command', [
    ('calibrate',),
    ('gate', 'cnot_field'),
    ('gate', 'hadamard'),
])
def test_command_output_is_deterministic(config_file, tmp_path, command):
    cfg = config_file(TOY_DEVICE + 'calibrate.g_min = 1e-3\ncalibrate.g_max = 1e3\n'
                      'calibrate.calibrate_phi = false\nprotocol.seed = 5\n')
    a, b = tmp_path / 'a.csv', tmp_path / 'b.csv'
    assert _run(*command, '-c', cfg, '-o', a, '-q') == EXIT_OK
    assert _run(*command, '-c', cfg, '-o', b, '-q') == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_exact_cnot_field_table_on_calibrated_toy_device(config_file, tmp_path):
    device = TOY_DEVICE.replace('pulse.t_off = 10', f'pulse.t_off = {np.pi / 0.072!r}')
    cfg = config_file(device + 'calibrate.g_min = 1e-3\ncalibrate.g_max = 1e3\n'
                      'calibrate.calibrate_phi = false\nprotocol.engine = exact\n'
                      'protocol.map = computed\nprotocol.alpha = 0.6324555320336759\n'
                      'layout.fock_dim = 16\n')
    out = tmp_path / 'cnot_field.csv'
    assert _run('gate', 'cnot_field', '-c', cfg, '-o', out, '-q') == EXIT_OK
    assert read_series_csv(out)['match'].tolist() == [1, 1, 1, 1]
