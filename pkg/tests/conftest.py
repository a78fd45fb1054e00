import numpy as np
import pytest

from pycatq.device import DeviceParams, FluxPulse


@pytest.fixture
def toy_params():
    """Dimensionless toy device: ω_c = 20, E_J = 4 (Δ ≈ −16), weak coupling."""
    return DeviceParams(E_J_over_hbar=4.0, omega_c=20.0, g=0.2)


@pytest.fixture
def weak_pulse():
    """A pulse too weak to move the qubit: the detuning stays at E_J − ω_c."""
    return FluxPulse(A=1e-6, nu=0.5, t_on=0.0, t_off=2.0)


@pytest.fixture
def toy_pulse():
    nu = 0.072
    return FluxPulse(A=0.7, nu=nu, t_on=0.0, t_off=np.pi / nu)


def write_config(tmp_path, text, name='run.cfg'):
    path = tmp_path / name
    path.write_text(text, encoding='utf-8')
    return path


@pytest.fixture
def config_file(tmp_path):
    def _make(text, name='run.cfg'):
        return write_config(tmp_path, text, name)
    return _make
