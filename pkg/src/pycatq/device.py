"""
Device parameters, the classical flux pulse and Hamiltonian constructors.

Every Hamiltonian is returned divided by ℏ, i.e. in angular-frequency units
(rad/s).  Fluxes are in units of the flux quantum.

Qubit conventions (storage basis is the computational |0>, |1>):

  * single-qubit lab and rotating frames use the dressed basis
    |+> = (|0> − |1>)/√2, |−> = (|0> + |1>)/√2 in which the detuning term is
    diagonal; ``SIGMA_Z_DRESSED`` has |±> as its ±1 eigenvectors and
    ``SIGMA_PLUS`` = |+><−|.  The Josephson term is −ν_a σ_z, so |−> is the
    upper level and the lab Hamiltonian equals ν_a X + g Z(a + a†) in the
    computational basis.
  * the two-mode and N-qubit Hamiltonians use the plain computational Pauli
    matrices, as written in their source form.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .common import E_CHARGE, HBAR, K_B, PHI_0_SI, InvalidArgumentError, LayoutMismatchError
from .fockspace import DenseOperator, SpaceLayout, embed_field_matrix, embed_qubit_matrix

LITERAL_COMPLEX = 'literal_complex'
HERMITIZED = 'hermitized'
PULSE_MODES = (LITERAL_COMPLEX, HERMITIZED)

EXACT_COS = 'exact_cos'
QUADRATIC = 'quadratic'
EXPANSIONS = (EXACT_COS, QUADRATIC)

LAB = 'lab'
ROTATING = 'rotating'

FULL = 'full'
CLASSICAL_PUMP = 'classical_pump'
REDUCED = 'reduced'

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

PLUS = np.array([1, -1], dtype=complex) / np.sqrt(2)
MINUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
SIGMA_Z_DRESSED = np.outer(PLUS, PLUS.conj()) - np.outer(MINUS, MINUS.conj())
SIGMA_PLUS = np.outer(PLUS, MINUS.conj())
SIGMA_MINUS = SIGMA_PLUS.conj().T
# σ₊ + σ₋ equals the computational Z
SIGMA_X_DRESSED = SIGMA_PLUS + SIGMA_MINUS


# --- parameter records ---------------------------------------------------------

@dataclass(frozen=True)
class DeviceParams:
    """
    Single-qubit device constants.

    Angular frequencies in rad/s; ``E_C`` and ``gap_delta`` in µeV (used only
    by the regime diagnostic); ``temperature`` in kelvin.
    """

    E_J_over_hbar: float = 15.9e10
    E_C: float = 250.0
    omega_c: float = 70.7e10
    g: float = 1e9
    gap_delta: float = 458.3
    temperature: float = 0.03

    def __post_init__(self):
        for name in ('E_J_over_hbar', 'E_C', 'omega_c', 'gap_delta', 'temperature'):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"DeviceParams.{name} must be positive")
        # g = 0 is the decoupled reference case
        if self.g < 0:
            raise InvalidArgumentError("DeviceParams.g must be nonnegative")

    def with_coupling(self, g):
        return DeviceParams(self.E_J_over_hbar, self.E_C, self.omega_c, g,
                            self.gap_delta, self.temperature)


@dataclass(frozen=True)
class FluxPulse:
    A: float = 0.7
    nu: float = 16 * np.pi * 1e6
    phi: float = 0.0
    t_on: float = 0.0
    t_off: float = 62.5e-9
    mode: str = HERMITIZED

    def __post_init__(self):
        if not 0 < self.A <= 1:
            raise InvalidArgumentError(f"pulse strength A must be in (0, 1], got {self.A}")
        if not self.t_off > self.t_on:
            raise InvalidArgumentError("pulse window needs t_off > t_on")
        if self.nu < 0:
            raise InvalidArgumentError("pulse frequency nu must be nonnegative")
        if self.mode not in PULSE_MODES:
            raise InvalidArgumentError(f"pulse mode must be one of {PULSE_MODES}, got {self.mode!r}")

    @property
    def duration(self):
        return self.t_off - self.t_on

    @property
    def half_period(self):
        """π/ν, the time for the modulation phase to advance by π."""
        if self.nu == 0:
            raise InvalidArgumentError("half period undefined for nu = 0")
        return np.pi / self.nu

    def replace(self, **changes):
        values = dict(A=self.A, nu=self.nu, phi=self.phi, t_on=self.t_on,
                      t_off=self.t_off, mode=self.mode)
        values.update(changes)
        return FluxPulse(**values)


@dataclass(frozen=True)
class TwoModeParams:
    omega_a: float = 7.07e11
    omega_b: float = 7.07e11
    C_J: float = 2e-15
    C_g_a: float = 1e-16
    C_g_b: float = 1e-16
    L_a: float = 1e-2
    L_b: float = 1e-2
    c_a: float = 1.6e-10
    c_b: float = 1.6e-10
    b_amp: float = 0.0

    def __post_init__(self):
        for name in ('omega_a', 'omega_b', 'C_J', 'C_g_a', 'C_g_b', 'L_a', 'L_b', 'c_a', 'c_b'):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"TwoModeParams.{name} must be positive")
        if self.b_amp < 0:
            raise InvalidArgumentError("pump amplitude b_amp must be nonnegative")


def inductive_energy(C_J, C_q, L):
    """E_L/ℏ = C_J Φ₀²/(C_qb π² L ℏ) with C_qb = C_J C_q/(C_J + C_q)."""
    for name, v in (('C_J', C_J), ('C_q', C_q), ('L', L)):
        if not v > 0:
            raise InvalidArgumentError(f"{name} must be positive")
    C_qb = C_J * C_q / (C_J + C_q)
    return C_J * PHI_0_SI ** 2 / (C_qb * np.pi ** 2 * L) / HBAR


@dataclass(frozen=True)
class NQubitParams:
    E_J: tuple
    pulses: tuple
    E_L: float = 1e20
    include_qq: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'E_J', tuple(float(e) for e in self.E_J))
        object.__setattr__(self, 'pulses', tuple(self.pulses))
        if len(self.E_J) < 1:
            raise InvalidArgumentError("NQubitParams needs at least one qubit")
        if len(self.pulses) != len(self.E_J):
            raise InvalidArgumentError(
                f"pulse list length {len(self.pulses)} does not match {len(self.E_J)} qubits"
            )
        if not self.E_L > 0:
            raise InvalidArgumentError("E_L must be positive")

    @property
    def n_qubits(self):
        return len(self.E_J)

    @classmethod
    def from_circuit(cls, E_J, pulses, C_J, C_q, L, include_qq=True):
        return cls(E_J, pulses, inductive_energy(C_J, C_q, L), include_qq)


# --- pulse and frequencies -----------------------------------------------------

def flux_at(pulse, t):
    """
    Applied flux (units of Φ₀): (A/2)·exp(i(ν(t − t_on) + φ)) inside
    [t_on, t_off], zero outside.  Hermitized pulses return the real part.
    Accepts scalars or arrays.
    """
    t = np.asarray(t, dtype=float)
    inside = (t >= pulse.t_on) & (t <= pulse.t_off)
    value = 0.5 * pulse.A * np.exp(1j * (pulse.nu * (t - pulse.t_on) + pulse.phi))
    if pulse.mode == HERMITIZED:
        value = value.real + 0j
    value = np.where(inside, value, 0j)
    return complex(value) if value.ndim == 0 else value


def _josephson_factor(flux, expansion):
    if expansion == EXACT_COS:
        return np.cos(np.pi * flux)
    if expansion == QUADRATIC:
        return 1.0 - 0.5 * (np.pi * flux) ** 2
    raise InvalidArgumentError(f"expansion must be one of {EXPANSIONS}, got {expansion!r}")


def qubit_frequency(params, pulse, t, expansion=EXACT_COS):
    """ν_a(t) = (E_J/ℏ)·cos(π Φ_x(t)), or its quadratic expansion."""
    value = params.E_J_over_hbar * _josephson_factor(flux_at(pulse, t), expansion)
    return complex(value) if np.ndim(value) == 0 else value


def detuning(params, pulse, t, expansion=EXACT_COS):
    """Δ(t) = ν_a(t) − ω_c."""
    value = qubit_frequency(params, pulse, t, expansion) - params.omega_c
    return complex(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class RegimeDiagnostic:
    """Energies in µeV; ``ok`` when k_B T < E_J < E_C < δ."""

    kT: float
    E_J: float
    E_C: float
    gap_delta: float
    ok: bool


def regime_diagnostic(params):
    to_ueV = 1e6 / E_CHARGE
    kT = K_B * params.temperature * to_ueV
    e_j = HBAR * params.E_J_over_hbar * to_ueV
    ok = kT < e_j < params.E_C < params.gap_delta
    return RegimeDiagnostic(kT, e_j, params.E_C, params.gap_delta, bool(ok))


# --- time-dependent Hamiltonians -------------------------------------------------

@dataclass(frozen=True)
class TimeDependentHamiltonian:
    """H(t) = Σ_k f_k(t) M_k with fixed matrices and a coefficient callback."""

    layout: SpaceLayout
    matrices: tuple = field(repr=False)
    coefficients: Callable = field(repr=False)
    hermitian: bool = False

    def matrix(self, t):
        coeffs = self.coefficients(t)
        out = np.zeros((self.layout.dim, self.layout.dim), dtype=complex)
        for c, m in zip(coeffs, self.matrices):
            if c != 0:
                out += c * m
        return out

    def at(self, t):
        return DenseOperator(self.layout, self.matrix(t), hermitian=self.hermitian)

    def __call__(self, t):
        return self.at(t)


def _ladder(fock_dim):
    a = np.diag(np.sqrt(np.arange(1, fock_dim, dtype=float)), k=1).astype(complex)
    return a, a.conj().T


@lru_cache(maxsize=32)
def _dressed_qubit_basis(layout, qubit_index):
    """(a†a, σ_z, σ₊a†, σ₊a, σ₋a†, σ₋a, σ_x(a + a†)) on *layout* for one dressed qubit."""
    a, a_dag = _ladder(layout.fock_dim)
    num = embed_field_matrix(layout, a_dag @ a)
    A = embed_field_matrix(layout, a)
    Ad = embed_field_matrix(layout, a_dag)
    sz = embed_qubit_matrix(layout, qubit_index, SIGMA_Z_DRESSED)
    sp = embed_qubit_matrix(layout, qubit_index, SIGMA_PLUS)
    sm = embed_qubit_matrix(layout, qubit_index, SIGMA_MINUS)
    sx = embed_qubit_matrix(layout, qubit_index, SIGMA_X_DRESSED)
    mats = (num, sz, sp @ Ad, sp @ A, sm @ Ad, sm @ A, sx @ (A + Ad))
    for m in mats:
        m.setflags(write=False)
    return mats


def single_qubit_terms(params, pulse, frame, layout, qubit_index=0, expansion=EXACT_COS):
    """
    Time-dependent single-qubit Hamiltonian for qubit *qubit_index* of
    *layout* (other qubits idle).

    lab:       ω_c a†a − ν_a(t) σ_z + g σ_x (a + a†)
    rotating:  −Δ(t) σ_z + g (σ₊e^{−2iω_c t} + σ₋e^{2iω_c t})(a†e^{iω_c t} + a e^{−iω_c t})

    The rotating frame is exp(iω_c t(a†a − σ_z)).
    """
    if layout.n_modes != 1:
        raise LayoutMismatchError("single-qubit Hamiltonian needs exactly one field mode")
    if not 0 <= qubit_index < layout.n_qubits:
        raise LayoutMismatchError(f"qubit index {qubit_index} out of range for {layout}")
    mats = _dressed_qubit_basis(layout, qubit_index)
    g = params.g
    wc = params.omega_c
    hermitian = pulse.mode == HERMITIZED

    if frame == LAB:
        def coeffs(t):
            return (wc, -qubit_frequency(params, pulse, t, expansion), 0, 0, 0, 0, g)
    elif frame == ROTATING:
        def coeffs(t):
            e1 = np.exp(1j * wc * t)
            e3 = e1 ** 3
            return (0, -detuning(params, pulse, t, expansion),
                    g / e1, g / e3, g * e3, g * e1, 0)
    else:
        raise InvalidArgumentError(f"frame must be 'lab' or 'rotating', got {frame!r}")
    return TimeDependentHamiltonian(layout, mats, coeffs, hermitian)


def build_single_qubit_hamiltonian(params, pulse, t, frame, layout, expansion=EXACT_COS):
    if layout.n_qubits != 1:
        raise LayoutMismatchError(f"single-qubit Hamiltonian needs n_qubits = 1, got {layout.n_qubits}")
    return single_qubit_terms(params, pulse, frame, layout, 0, expansion).at(t)


# --- two-mode and N-qubit forms ------------------------------------------------

def two_mode_couplings(p):
    """
    Return (g_a, g_b, g_ab) in rad/s from the capacitive circuit formulas:

        g_a  = e C_g^a / (ℏ(C_J + C_g^a)) · sqrt(ℏω_a / (L_a c_a))
        g_ab = e² C_g^a C_g^b / (ℏ(C_J + C_g^a)) · sqrt(ℏ²ω_a ω_b / (L_a L_b c_a c_b))

    g_ab is evaluated exactly as written; only its ratio to g_b is meaningful.
    """
    if not isinstance(p, TwoModeParams):
        raise InvalidArgumentError("two_mode_couplings expects TwoModeParams")
    g_a = E_CHARGE * p.C_g_a / (HBAR * (p.C_J + p.C_g_a)) * np.sqrt(HBAR * p.omega_a / (p.L_a * p.c_a))
    g_b = E_CHARGE * p.C_g_b / (HBAR * (p.C_J + p.C_g_b)) * np.sqrt(HBAR * p.omega_b / (p.L_b * p.c_b))
    g_ab = (E_CHARGE ** 2 * p.C_g_a * p.C_g_b / (HBAR * (p.C_J + p.C_g_a))
            * np.sqrt(HBAR ** 2 * p.omega_a * p.omega_b / (p.L_a * p.L_b * p.c_a * p.c_b)))
    return float(g_a), float(g_b), float(g_ab)


def build_two_mode_hamiltonian(p, params, pulse, t, variant, layout):
    """
    Charge qubit coupled to modes a and b (``full``), or with b replaced by the
    classical pump ⟨b⟩e^{−iω_b t} (``classical_pump``), optionally without the
    mode-mode term (``reduced``).
    """
    g_a, g_b, g_ab = two_mode_couplings(p)
    if layout.n_qubits != 1:
        raise LayoutMismatchError("two-mode Hamiltonian needs n_qubits = 1")
    a, a_dag = _ladder(layout.fock_dim)
    josephson = params.E_J_over_hbar * np.cos(np.pi * flux_at(pulse, t))
    X = embed_qubit_matrix(layout, 0, PAULI_X)
    Z = embed_qubit_matrix(layout, 0, PAULI_Z)

    if variant == FULL:
        if layout.n_modes != 2:
            raise LayoutMismatchError("full two-mode Hamiltonian needs two field modes")
        xa = embed_field_matrix(layout, a + a_dag, 0)
        xb = embed_field_matrix(layout, a + a_dag, 1)
        H = (p.omega_a * embed_field_matrix(layout, a_dag @ a, 0)
             + josephson * X
             + g_a * Z @ xa
             + p.omega_b * embed_field_matrix(layout, a_dag @ a, 1)
             + g_b * Z @ xb
             + g_ab * xa @ xb)
    elif variant in (CLASSICAL_PUMP, REDUCED):
        if layout.n_modes != 1:
            raise LayoutMismatchError(f"{variant} two-mode Hamiltonian needs one field mode")
        xa = embed_field_matrix(layout, a + a_dag)
        drive = np.cos(p.omega_b * t)
        H = (p.omega_a * embed_field_matrix(layout, a_dag @ a)
             + p.omega_b * p.b_amp ** 2 * np.eye(layout.dim)
             + josephson * X
             + g_a * Z @ xa
             + 2 * g_b * p.b_amp * drive * Z)
        if variant == CLASSICAL_PUMP:
            H = H + 2 * p.b_amp * g_ab * drive * xa
    else:
        raise InvalidArgumentError(f"unknown two-mode variant {variant!r}")
    return DenseOperator(layout, H, hermitian=pulse.mode == HERMITIZED)


def qq_coupling(nq, t):
    """Return the N−1 nearest-neighbour strengths 4E_J^j E_J^{j+1} cos_j cos_{j+1} / E_L."""
    cos = [np.cos(np.pi * flux_at(p, t)) for p in nq.pulses]
    return [4 * nq.E_J[j] * nq.E_J[j + 1] * cos[j] * cos[j + 1] / nq.E_L
            for j in range(nq.n_qubits - 1)]


def build_qq_hamiltonian(nq, t, layout):
    """H_qq = −Σ_j strength_j σ_y^j σ_y^{j+1}."""
    H = np.zeros((layout.dim, layout.dim), dtype=complex)
    for j, s in enumerate(qq_coupling(nq, t)):
        H -= s * embed_qubit_matrix(layout, j, PAULI_Y) @ embed_qubit_matrix(layout, j + 1, PAULI_Y)
    return H


def build_n_qubit_hamiltonian(nq, params, t, layout):
    """
    ω a†a + Σ_j E_J^j cos(πΦ_x^j) σ_x^j + g Σ_j σ_z^j (a + a†) [+ H_qq].

    ω and g come from *params*; the per-qubit Josephson energies and pulses
    from *nq*.
    """
    if layout.n_qubits != nq.n_qubits:
        raise LayoutMismatchError(
            f"layout has {layout.n_qubits} qubits, parameters describe {nq.n_qubits}"
        )
    if layout.n_modes != 1:
        raise LayoutMismatchError("N-qubit Hamiltonian needs one field mode")
    a, a_dag = _ladder(layout.fock_dim)
    xa = embed_field_matrix(layout, a + a_dag)
    H = params.omega_c * embed_field_matrix(layout, a_dag @ a)
    for j in range(nq.n_qubits):
        cos_j = np.cos(np.pi * flux_at(nq.pulses[j], t))
        H = H + nq.E_J[j] * cos_j * embed_qubit_matrix(layout, j, PAULI_X)
        H = H + params.g * embed_qubit_matrix(layout, j, PAULI_Z) @ xa
    if nq.include_qq:
        H = H + build_qq_hamiltonian(nq, t, layout)
    hermitian = all(p.mode == HERMITIZED for p in nq.pulses)
    return DenseOperator(layout, H, hermitian=hermitian)


def classical_pump_qubit_terms(E, drive_amplitude, omega_b, chi=0.0, t_start=0.0):
    """
    Qubit block of the reduced two-mode Hamiltonian with the field coupling
    dropped: E σ_x + h_d cos(ω_b (t − t_start) + χ) σ_z, with h_d = 2 g_b ⟨b⟩.
    """
    layout = SpaceLayout(1, 2, 0)

    def coeffs(t):
        return (E, drive_amplitude * np.cos(omega_b * (t - t_start) + chi))

    return TimeDependentHamiltonian(layout, (PAULI_X, PAULI_Z), coeffs, hermitian=True)
