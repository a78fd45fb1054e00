"""
Finite-dimensional Hilbert-space algebra for qubits coupled to bosonic modes.

Convention: qubit factors come first (qubit 0 is the most significant bit of
the basis index), field modes come last, so for one qubit and one mode the
basis index is ``bit * fock_dim + n``.  All values are immutable after
construction.
"""

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np
from scipy.stats import poisson

from .common import (
    DegenerateStateError,
    ImpossibleOutcomeError,
    InvalidArgumentError,
    InvalidDimensionError,
    LayoutMismatchError,
    TruncationError,
)

TAIL_TOLERANCE = 1e-10
PHASE_THRESHOLD = 1e-12
HERMITIAN_TOLERANCE = 1e-12

EVEN = 'even'
ODD = 'odd'


@dataclass(frozen=True)
class SpaceLayout:
    """
    Shape of a composite space: ``n_qubits`` two-level factors followed by
    ``n_modes`` bosonic modes truncated at ``fock_dim`` levels each.
    """

    n_qubits: int
    fock_dim: int
    n_modes: int = 1

    def __post_init__(self):
        if self.n_qubits < 0 or self.n_modes < 0:
            raise InvalidDimensionError("n_qubits and n_modes must be nonnegative")
        if self.fock_dim < 2:
            raise InvalidDimensionError(f"fock_dim must be >= 2, got {self.fock_dim}")

    @property
    def qubit_dim(self):
        return 2 ** self.n_qubits

    @property
    def field_dim(self):
        return self.fock_dim ** self.n_modes

    @property
    def dim(self):
        return self.qubit_dim * self.field_dim


def field_layout(fock_dim):
    return SpaceLayout(0, fock_dim, 1)


def qubit_layout(n_qubits=1):
    return SpaceLayout(n_qubits, 2, 0)


@dataclass(frozen=True)
class StateVector:
    layout: SpaceLayout
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != self.layout.dim:
            raise LayoutMismatchError(
                f"amplitude vector has length {amps.shape[0]}, layout needs {self.layout.dim}"
            )
        if not np.all(np.isfinite(amps)):
            raise InvalidArgumentError("amplitudes must be finite")
        amps.setflags(write=False)
        object.__setattr__(self, 'amplitudes', amps)

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def inner(self, other):
        """Return <self|other>."""
        _check_same_layout(self, other)
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class DenseOperator:
    """Complex square matrix over a layout; entries in angular-frequency units for Hamiltonians."""

    layout: SpaceLayout
    entries: np.ndarray = field(repr=False)
    hermitian: bool = False

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.shape != (self.layout.dim, self.layout.dim):
            raise LayoutMismatchError(
                f"operator shape {m.shape} does not match layout dimension {self.layout.dim}"
            )
        if self.hermitian and not is_hermitian(m):
            raise InvalidArgumentError("operator flagged Hermitian fails the Hermiticity check")
        m.setflags(write=False)
        object.__setattr__(self, 'entries', m)

    def apply(self, state):
        _check_same_layout(self, state)
        return StateVector(self.layout, self.entries @ state.amplitudes)

    def __add__(self, other):
        _check_same_layout(self, other)
        return DenseOperator(self.layout, self.entries + other.entries)

    def __sub__(self, other):
        _check_same_layout(self, other)
        return DenseOperator(self.layout, self.entries - other.entries)


def is_hermitian(m, tol=HERMITIAN_TOLERANCE):
    """‖M − M†‖_max below *tol*, relative to the largest entry when that exceeds 1."""
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    return float(np.max(np.abs(m - m.conj().T), initial=0.0)) < tol * scale


def _check_same_layout(a, b):
    if a.layout != b.layout:
        raise LayoutMismatchError(f"layout mismatch: {a.layout} vs {b.layout}")


@dataclass(frozen=True)
class CatState:
    alpha: complex
    parity: str
    norm_constant: float


def cat_norm(alpha, parity):
    """N_± = sqrt(2(1 ± e^(−2|α|²)))."""
    if parity not in (EVEN, ODD):
        raise InvalidArgumentError(f"parity must be 'even' or 'odd', got {parity!r}")
    overlap = np.exp(-2.0 * abs(alpha) ** 2)
    if parity == ODD:
        if abs(alpha) == 0:
            raise DegenerateStateError("odd cat state with alpha = 0 has zero norm")
        return float(np.sqrt(2.0 * (1.0 - overlap)))
    return float(np.sqrt(2.0 * (1.0 + overlap)))


def describe_cat(alpha, parity):
    return CatState(complex(alpha), parity, cat_norm(alpha, parity))


# --- states --------------------------------------------------------------------

def normalize(state):
    """
    Scale to unit norm and rotate the global phase so the first amplitude
    above PHASE_THRESHOLD (relative) is real and positive.
    """
    amps = state.amplitudes
    n = np.linalg.norm(amps)
    if n == 0:
        raise DegenerateStateError("cannot normalize the zero vector")
    amps = amps / n
    mags = np.abs(amps)
    first = int(np.argmax(mags > PHASE_THRESHOLD * mags.max()))
    amps = amps * (abs(amps[first]) / amps[first])
    return StateVector(state.layout, amps)


def basis_state(layout, index):
    amps = np.zeros(layout.dim, dtype=complex)
    amps[index] = 1.0
    return StateVector(layout, amps)


def qubit_state(bit):
    """|0> or |1> of a single bare qubit."""
    if bit not in (0, 1):
        raise InvalidArgumentError(f"qubit bit must be 0 or 1, got {bit!r}")
    return basis_state(qubit_layout(1), bit)


def qubit_register(bits):
    return tensor_compose([qubit_state(b) for b in bits])


def check_truncation(alpha, fock_dim):
    """
    Truncation adequacy: |α|² ≤ fock_dim/4 and Poisson tail mass beyond the
    truncation below TAIL_TOLERANCE.  Returns the tail mass.
    """
    nbar = abs(alpha) ** 2
    tail = float(poisson.sf(fock_dim - 1, nbar)) if nbar > 0 else 0.0
    if nbar > fock_dim / 4 or tail >= TAIL_TOLERANCE:
        raise TruncationError(
            f"fock_dim={fock_dim} inadequate for |alpha|^2={nbar:.6g} (tail mass {tail:.3g})"
        )
    return tail


def fock_dim_for(alpha, minimum=16):
    """Smallest power of two (at least *minimum*) that passes check_truncation."""
    if not np.isfinite(abs(alpha)):
        raise InvalidArgumentError(f"coherent amplitude must be finite, got {alpha!r}")
    dim = minimum
    while True:
        try:
            check_truncation(alpha, dim)
            return dim
        except TruncationError:
            dim *= 2


def coherent_amplitudes(alpha, fock_dim):
    """c_n = e^(−|α|²/2) αⁿ/√(n!), n < fock_dim, renormalized."""
    c = np.empty(fock_dim, dtype=complex)
    c[0] = np.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, fock_dim):
        c[n] = c[n - 1] * alpha / np.sqrt(n)
    return c / np.linalg.norm(c)


def coherent_state(alpha, fock_dim):
    check_truncation(alpha, fock_dim)
    return StateVector(field_layout(fock_dim), coherent_amplitudes(alpha, fock_dim))


def cat_state(alpha, parity, fock_dim):
    """
    even -> (|α> + |−α>)/N₊ ;  odd -> (|−α> − |α>)/N₋, then normalize()
    (so for real α > 0 the odd cat reads (|α> − |−α>)/N₋ after the phase fix).
    """
    nc = cat_norm(alpha, parity)
    check_truncation(alpha, fock_dim)
    plus = coherent_amplitudes(alpha, fock_dim)
    minus = coherent_amplitudes(-alpha, fock_dim)
    amps = (plus + minus) if parity == EVEN else (minus - plus)
    return normalize(StateVector(field_layout(fock_dim), amps / nc))


def tensor_compose(parts: Sequence[StateVector]):
    """Kronecker product in the given order; qubit factors must precede field modes."""
    if not parts:
        raise InvalidArgumentError("tensor_compose needs at least one part")
    n_qubits = 0
    n_modes = 0
    fock_dim = None
    for p in parts:
        if p.layout.n_qubits and n_modes:
            raise LayoutMismatchError("qubit factors must come before field modes")
        if p.layout.n_modes:
            if fock_dim is not None and p.layout.fock_dim != fock_dim:
                raise LayoutMismatchError("all field modes must share one fock_dim")
            fock_dim = p.layout.fock_dim
        n_qubits += p.layout.n_qubits
        n_modes += p.layout.n_modes
    layout = SpaceLayout(n_qubits, fock_dim or 2, n_modes)
    amps = reduce(np.kron, [p.amplitudes for p in parts])
    return StateVector(layout, amps)


# --- operators -----------------------------------------------------------------

def ladder_operators(fock_dim):
    """Return (a, a†, a†a) on the truncated single-mode space."""
    if fock_dim < 2:
        raise InvalidDimensionError(f"fock_dim must be >= 2, got {fock_dim}")
    layout = field_layout(fock_dim)
    a = np.diag(np.sqrt(np.arange(1, fock_dim, dtype=float)), k=1).astype(complex)
    a_dag = a.conj().T
    return (
        DenseOperator(layout, a),
        DenseOperator(layout, a_dag),
        DenseOperator(layout, a_dag @ a, hermitian=True),
    )


def embed_qubit_matrix(layout, qubit_index, matrix):
    """Lift a 2×2 matrix acting on qubit *qubit_index* to the full layout."""
    if not 0 <= qubit_index < layout.n_qubits:
        raise LayoutMismatchError(f"qubit index {qubit_index} out of range for {layout}")
    factors = [np.eye(2)] * layout.n_qubits
    factors[qubit_index] = np.asarray(matrix, dtype=complex)
    return np.kron(reduce(np.kron, factors), np.eye(layout.field_dim))


def embed_field_matrix(layout, matrix, mode=0):
    """Lift a fock_dim × fock_dim matrix acting on field *mode* to the full layout."""
    if not 0 <= mode < layout.n_modes:
        raise LayoutMismatchError(f"mode {mode} out of range for {layout}")
    factors = [np.eye(layout.fock_dim)] * layout.n_modes
    factors[mode] = np.asarray(matrix, dtype=complex)
    return np.kron(np.eye(layout.qubit_dim), reduce(np.kron, factors))


def apply_field_operator(state, op, mode=0):
    """Apply a single-mode operator (e.g. the annihilation operator) to *state*."""
    if op.layout.fock_dim != state.layout.fock_dim or op.layout.n_qubits or op.layout.n_modes != 1:
        raise LayoutMismatchError("field operator does not match the state's field")
    if state.layout.n_qubits == 0 and state.layout.n_modes == 1:
        return StateVector(state.layout, op.entries @ state.amplitudes)
    return StateVector(state.layout, embed_field_matrix(state.layout, op.entries, mode) @ state.amplitudes)


def rotate_field(state, angle, mode=0):
    """Apply e^{i·angle·a†a} on one field mode: |β> -> |βe^{i·angle}>."""
    phases = np.exp(1j * angle * np.arange(state.layout.fock_dim))
    U = embed_field_matrix(state.layout, np.diag(phases), mode)
    return StateVector(state.layout, U @ state.amplitudes)


def apply_qubit_matrix(state, qubit_index, matrix):
    return StateVector(
        state.layout, embed_qubit_matrix(state.layout, qubit_index, matrix) @ state.amplitudes
    )


# --- measurement ---------------------------------------------------------------

def _qubit_projector_mask(layout, qubit_index, outcome):
    if not 0 <= qubit_index < layout.n_qubits:
        raise LayoutMismatchError(f"qubit index {qubit_index} out of range for {layout}")
    if outcome not in (0, 1):
        raise InvalidArgumentError(f"outcome must be 0 or 1, got {outcome!r}")
    idx = np.arange(layout.dim) // layout.field_dim
    shift = layout.n_qubits - 1 - qubit_index
    return ((idx >> shift) & 1) == outcome


def outcome_probability(state, qubit_index, outcome):
    mask = _qubit_projector_mask(state.layout, qubit_index, outcome)
    total = np.vdot(state.amplitudes, state.amplitudes).real
    return float(np.vdot(state.amplitudes[mask], state.amplitudes[mask]).real / total)


def measure_qubit(state, qubit_index, outcome):
    """
    Project qubit *qubit_index* on |outcome>.

    Returns:
        (probability, collapsed) with the collapsed state renormalized.

    Raises:
        ImpossibleOutcomeError: If the outcome has zero probability.
    """
    mask = _qubit_projector_mask(state.layout, qubit_index, outcome)
    projected = np.where(mask, state.amplitudes, 0.0)
    total = np.vdot(state.amplitudes, state.amplitudes).real
    prob = float(np.vdot(projected, projected).real / total)
    if prob <= 1e-15:
        err = ImpossibleOutcomeError(
            f"outcome {outcome} on qubit {qubit_index} has zero probability"
        )
        err.probability = prob
        raise err
    return prob, normalize(StateVector(state.layout, projected))


def extract_field(state, bits):
    """Field state conditioned on the qubit register being |bits>, normalized."""
    layout = state.layout
    if len(bits) != layout.n_qubits:
        raise LayoutMismatchError(f"expected {layout.n_qubits} bits, got {len(bits)}")
    index = int(''.join(str(b) for b in bits), 2) if bits else 0
    block = state.amplitudes[index * layout.field_dim:(index + 1) * layout.field_dim]
    sub = SpaceLayout(0, layout.fock_dim, layout.n_modes)
    return normalize(StateVector(sub, block))


def fidelity(a, b):
    """|<a|b>|² for normalized states."""
    _check_same_layout(a, b)
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))


# --- closed-form coherent registers ---------------------------------------------

def coherent_overlap(beta, gamma):
    """<β|γ> = exp(−|β|²/2 − |γ|²/2 + β*γ)."""
    return complex(np.exp(-0.5 * abs(beta) ** 2 - 0.5 * abs(gamma) ** 2 + np.conj(beta) * gamma))


_KEY_DIGITS = 12


@dataclass(frozen=True)
class CoherentComponents:
    """
    Closed-form register Σ_k c_k |bits_k> ⊗ |β_k> over n_qubits qubits and one
    field mode.  Components are not orthogonal; inner products use the
    coherent-state overlap.
    """

    n_qubits: int
    components: tuple = ()

    @classmethod
    def product(cls, bits, beta):
        return cls(len(bits), ((tuple(int(b) for b in bits), complex(beta), 1.0 + 0j),))

    @classmethod
    def from_terms(cls, n_qubits, terms):
        merged = {}
        order = []
        for bits, beta, coeff in terms:
            key = (tuple(bits), round(beta.real, _KEY_DIGITS) + 0.0, round(beta.imag, _KEY_DIGITS) + 0.0)
            if key not in merged:
                merged[key] = [tuple(bits), complex(beta), 0j]
                order.append(key)
            merged[key][2] += coeff
        comps = tuple(
            (merged[k][0], merged[k][1], merged[k][2])
            for k in order if abs(merged[k][2]) > 1e-15
        )
        return cls(n_qubits, comps)

    def inner(self, other):
        """<self|other>."""
        total = 0j
        for bits_a, beta_a, c_a in self.components:
            for bits_b, beta_b, c_b in other.components:
                if bits_a == bits_b:
                    total += np.conj(c_a) * c_b * coherent_overlap(beta_a, beta_b)
        return complex(total)

    def norm(self):
        return float(np.sqrt(max(self.inner(self).real, 0.0)))

    def scaled(self, factor):
        return CoherentComponents(
            self.n_qubits, tuple((b, beta, c * factor) for b, beta, c in self.components)
        )

    def normalized(self):
        n = self.norm()
        if n == 0:
            raise DegenerateStateError("cannot normalize an empty coherent register")
        return self.scaled(1.0 / n)

    def map_terms(self, fn):
        """Rebuild from fn(bits, beta, coeff) -> iterable of (bits, beta, coeff)."""
        terms = []
        for bits, beta, c in self.components:
            terms.extend(fn(bits, beta, c))
        return CoherentComponents.from_terms(self.n_qubits, terms)

    def apply_qubit_matrix(self, qubit_index, matrix):
        m = np.asarray(matrix, dtype=complex)

        def _lift(bits, beta, c):
            for new in (0, 1):
                amp = m[new, bits[qubit_index]]
                if amp != 0:
                    nb = list(bits)
                    nb[qubit_index] = new
                    yield tuple(nb), beta, c * amp

        return self.map_terms(_lift)

    def apply_register_matrix(self, matrix):
        """Apply a 2^n × 2^n matrix on the qubit register."""
        m = np.asarray(matrix, dtype=complex)
        n = self.n_qubits

        def _lift(bits, beta, c):
            col = int(''.join(map(str, bits)), 2) if n else 0
            for row in np.nonzero(np.abs(m[:, col]) > 0)[0]:
                nb = tuple(int(x) for x in format(int(row), f'0{n}b')) if n else ()
                yield nb, beta, c * m[row, col]

        return self.map_terms(_lift)

    def projected(self, qubit_index, outcome):
        return CoherentComponents(
            self.n_qubits,
            tuple(t for t in self.components if t[0][qubit_index] == outcome),
        )

    def probability(self, qubit_index, outcome):
        p = self.projected(qubit_index, outcome)
        return float(p.inner(p).real / self.inner(self).real)

    def to_state_vector(self, fock_dim, normalize_result=True):
        layout = SpaceLayout(self.n_qubits, fock_dim, 1)
        amps = np.zeros(layout.dim, dtype=complex)
        for bits, beta, c in self.components:
            check_truncation(beta, fock_dim)
            index = int(''.join(map(str, bits)), 2) if bits else 0
            amps[index * fock_dim:(index + 1) * fock_dim] += c * _raw_coherent(beta, fock_dim)
        state = StateVector(layout, amps)
        return normalize(state) if normalize_result else state

    def max_amplitude(self):
        return max((abs(beta) for _, beta, _ in self.components), default=0.0)


def _raw_coherent(beta, fock_dim):
    # un-renormalized so closed-form and Fock representations agree on norms
    c = np.empty(fock_dim, dtype=complex)
    c[0] = np.exp(-0.5 * abs(beta) ** 2)
    for n in range(1, fock_dim):
        c[n] = c[n - 1] * beta / np.sqrt(n)
    return c


def components_fidelity(a, b):
    """|<a|b>|² / (<a|a><b|b>) for two closed-form registers."""
    return float(abs(a.inner(b)) ** 2 / (a.inner(a).real * b.inner(b).real))
