"""
Hybrid charge-qubit / field-qubit protocols.

Two engines share one interface:

* ``EFFECTIVE``: the register is a CoherentComponents sum and every pulse is
  the closed-form conditional map |±>|β> → |±>|βe^{θ_±}>.
* ``ExactEngine``: the register is a StateVector and every pulse is integrated
  in the rotating frame, moved to the interaction picture of −Δσ_z and then to
  the pulse frame the effective maps are written in.

Qubit bits are computational (|0>, |1>); the pulse acts through the dressed
states with |0> = (|−> + |+>)/√2 and |1> = (|−> − |+>)/√2.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import expm, polar

from .common import (
    DegenerateStateError,
    ImpossibleOutcomeError,
    InvalidArgumentError,
    InvalidDimensionError,
    RepresentationError,
    ScheduleError,
)
from .device import (
    PAULI_X,
    PAULI_Y,
    ROTATING,
    DeviceParams,
    FluxPulse,
    TimeDependentHamiltonian,
    TwoModeParams,
    classical_pump_qubit_terms,
    qq_coupling,
    single_qubit_terms,
    two_mode_couplings,
)
from .fockspace import (
    EVEN,
    ODD,
    CoherentComponents,
    SpaceLayout,
    StateVector,
    apply_qubit_matrix,
    cat_norm,
    components_fidelity,
    embed_qubit_matrix,
    extract_field,
    fidelity,
    fock_dim_for,
    measure_qubit,
    normalize,
    outcome_probability,
)
from .propagator import (
    BRANCH_MINUS,
    BRANCH_PLUS,
    EffectiveMap,
    PropagatorOptions,
    branch_weight,
    detuning_integral,
    effective_apply,
    evolve_exact,
    ideal_map,
    interaction_phase,
    pulse_frame,
    to_pulse_frame,
)

EFFECTIVE = 'effective'
EXACT = 'exact'

SAMPLE = 'sample'
BOTH_BRANCHES = 'both_branches'
POSTSELECT = 'postselect'

DEFAULT_T = 62.5e-9


@dataclass(frozen=True)
class ExactEngine:
    """Fock-space engine: pulses are integrated with evolve_exact."""

    params: DeviceParams
    pulse: FluxPulse
    opts: PropagatorOptions = PropagatorOptions()
    fock_dim: Optional[int] = None
    _frames: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    name = EXACT

    def frame(self, pulse, T):
        """PulseFrame of *pulse* over T, computed once per (pulse, T)."""
        key = (pulse, float(T))
        if key not in self._frames:
            self._frames[key] = pulse_frame(pulse, self.params, T, self.opts)
        return self._frames[key]


def engine_name(engine):
    return EFFECTIVE if engine == EFFECTIVE else getattr(engine, 'name', str(engine))


# --- logical field qubit -------------------------------------------------------

@dataclass(frozen=True)
class LogicalFieldQubit:
    """|0>_L = even cat, |1>_L = odd cat, both for the same α."""

    alpha: complex

    def __post_init__(self):
        if abs(self.alpha) == 0:
            raise DegenerateStateError("a logical field qubit needs alpha != 0")

    def basis_components(self, k):
        """|k>_L as a field-only coherent register, in the cat_state phase convention."""
        a = complex(self.alpha)
        if k == 0:
            n = cat_norm(a, EVEN)
            terms = [((), a, 1 / n), ((), -a, 1 / n)]
        elif k == 1:
            n = cat_norm(a, ODD)
            terms = [((), a, 1 / n), ((), -a, -1 / n)]
        else:
            raise InvalidArgumentError(f"logical value must be 0 or 1, got {k!r}")
        return CoherentComponents.from_terms(0, terms)

    def basis_state(self, k, fock_dim):
        return self.basis_components(k).to_state_vector(fock_dim)

    def attach(self, bits, k, coeff=1.0):
        """|bits> ⊗ |k>_L scaled by *coeff*."""
        field_part = self.basis_components(k)
        return CoherentComponents.from_terms(
            len(bits), [(tuple(bits), beta, coeff * c) for _, beta, c in field_part.components]
        )

    def readout(self, field_part):
        """Probabilities (p(0_L), p(1_L)) of a field-only register."""
        norm2 = field_part.inner(field_part).real
        p = [abs(self.basis_components(k).inner(field_part)) ** 2 / norm2 for k in (0, 1)]
        return float(p[0]), float(p[1])


def field_of(components, bits):
    """Field-only register conditioned on the qubits reading |bits>."""
    bits = tuple(bits)
    return CoherentComponents(0, tuple(((), beta, c) for b, beta, c in components.components
                                       if b == bits))


def product_components(bits, alpha):
    return CoherentComponents.product(bits, alpha)


# --- results -------------------------------------------------------------------

@dataclass(frozen=True)
class BranchRecord:
    label: str
    qubit_index: int
    outcome: int
    probability: float
    outcome_probabilities: tuple


@dataclass(frozen=True)
class BranchOutcome:
    outcome: int
    probability: float
    state: Optional[StateVector]
    field: Optional[StateVector] = None


@dataclass(frozen=True)
class ProtocolResult:
    final_state: StateVector
    branch_log: tuple
    engine: str
    branches: tuple = ()
    components: Optional[CoherentComponents] = field(default=None, repr=False)
    outputs: Optional[tuple] = None
    output_probability: Optional[float] = None
    fidelity: Optional[float] = None
    weights: Optional[tuple] = None


# --- engine primitives ---------------------------------------------------------

def _pulse_terms(emap, qubit_index):
    def lift(bits, beta, c):
        s = 1.0 if bits[qubit_index] == 0 else -1.0
        beta_m = effective_apply(emap, BRANCH_MINUS, beta)
        beta_p = effective_apply(emap, BRANCH_PLUS, beta)
        w_m = branch_weight(emap, BRANCH_MINUS, beta)
        w_p = branch_weight(emap, BRANCH_PLUS, beta)
        for out, parity in ((0, 1.0), (1, -1.0)):
            nb = list(bits)
            nb[qubit_index] = out
            nb = tuple(nb)
            yield nb, beta_m, 0.5 * c * w_m
            yield nb, beta_p, 0.5 * c * s * parity * w_p
    return lift


def _register_fock_dim(components, emap=None, minimum=16):
    amp = components.max_amplitude()
    if emap is not None:
        amp *= max(1.0, abs(np.exp(emap.theta_minus_T)), abs(np.exp(emap.theta_plus_T)))
    return fock_dim_for(amp, minimum) if amp > 0 else minimum


def as_state_vector(state, fock_dim=None):
    if isinstance(state, StateVector):
        return state
    return state.to_state_vector(fock_dim or _register_fock_dim(state))


def conditional_pulse(state, qubit_index, emap, engine=EFFECTIVE, pulse=None):
    """
    One conditional-phase pulse on qubit *qubit_index*.

    effective: each |±>⊗|β> component becomes |±>⊗|βe^{θ_±(T)}> (with the
    branch weights when the map carries constants).
    exact: evolve the full register under the rotating-frame Hamiltonian of
    the pulsed qubit for T = emap.duration_T starting at pulse.t_on, then
    remove the interaction-picture and pulse-frame phases.

    Raises:
        RepresentationError: If the effective engine is handed a state that is
            not a coherent-component register.
    """
    if engine == EFFECTIVE:
        if not isinstance(state, CoherentComponents):
            raise RepresentationError(
                "effective engine needs a CoherentComponents register; use the exact engine "
                "for arbitrary StateVector inputs"
            )
        if not 0 <= qubit_index < state.n_qubits:
            raise InvalidArgumentError(f"qubit index {qubit_index} out of range")
        return state.map_terms(_pulse_terms(emap, qubit_index))

    if not isinstance(engine, ExactEngine):
        raise InvalidArgumentError(f"unknown engine {engine!r}")
    pulse = pulse or engine.pulse
    if isinstance(state, CoherentComponents):
        state = state.to_state_vector(engine.fock_dim or _register_fock_dim(state, emap))
    T = emap.duration_T
    H = single_qubit_terms(engine.params, pulse, ROTATING, state.layout, qubit_index,
                           engine.opts.expansion)
    evolved = evolve_exact(H, state, pulse.t_on, pulse.t_on + T, engine.opts).state
    D = detuning_integral(engine.params, pulse, pulse.t_on + T, engine.opts.expansion)
    state = interaction_phase(evolved, qubit_index, D)
    return to_pulse_frame(state, qubit_index, engine.frame(pulse, T))


def _probability(state, qubit_index, outcome):
    if isinstance(state, CoherentComponents):
        return state.probability(qubit_index, outcome)
    return outcome_probability(state, qubit_index, outcome)


def _collapse(state, qubit_index, outcome):
    if isinstance(state, CoherentComponents):
        p = state.probability(qubit_index, outcome)
        if p <= 1e-15:
            raise ImpossibleOutcomeError(
                f"outcome {outcome} on qubit {qubit_index} has zero probability"
            )
        return state.projected(qubit_index, outcome).normalized()
    return measure_qubit(state, qubit_index, outcome)[1]


def _flip(state, qubit_index):
    if isinstance(state, CoherentComponents):
        return state.apply_qubit_matrix(qubit_index, PAULI_X)
    return apply_qubit_matrix(state, qubit_index, PAULI_X)


def _measure(state, qubit_index, label, policy, rng, forced=None):
    p0 = _probability(state, qubit_index, 0)
    probs = (p0, 1.0 - p0)
    if policy == SAMPLE:
        outcome = 0 if rng.random() < p0 else 1
    elif forced is not None:
        outcome = forced
    else:
        raise InvalidArgumentError(f"unsupported measurement policy {policy!r}")
    collapsed = _collapse(state, qubit_index, outcome)
    return collapsed, BranchRecord(label, qubit_index, outcome, probs[outcome], probs)


def _initial_register(bits, alpha, engine, emap):
    comps = product_components(bits, alpha)
    if engine == EFFECTIVE:
        return comps
    return comps.to_state_vector(engine.fock_dim or _register_fock_dim(comps, emap))


# --- single-qubit protocols ----------------------------------------------------

def encode_field_qubit(alpha, emap=None, outcome_policy=BOTH_BRANCHES, seed=None,
                       engine=EFFECTIVE, fock_dim=None):
    """
    Pulse |0>|α>, then measure the charge qubit.

    Outcome 0 leaves the field in |0>_L with probability (1 + e^{−2|α|²})/2,
    outcome 1 leaves |1>_L with probability (1 − e^{−2|α|²})/2.  With
    ``both_branches`` the result carries both collapsed branches and
    ``final_state`` is the pre-measurement register; with ``sample`` one
    outcome is drawn from a generator seeded with *seed*.
    """
    if abs(alpha) == 0:
        raise ImpossibleOutcomeError("alpha = 0 leaves the odd branch with zero probability")
    emap = emap or ideal_map(DEFAULT_T)
    state = conditional_pulse(_initial_register((0,), alpha, engine, emap), 0, emap, engine)
    dim = fock_dim or (engine.fock_dim if engine != EFFECTIVE else None)

    if outcome_policy == BOTH_BRANCHES:
        p0 = _probability(state, 0, 0)
        branches = []
        for outcome, p in ((0, p0), (1, 1.0 - p0)):
            collapsed = as_state_vector(_collapse(state, 0, outcome), dim)
            branches.append(BranchOutcome(outcome, p, collapsed,
                                          extract_field(collapsed, (outcome,))))
        log = (BranchRecord('encode', 0, 0, p0, (p0, 1.0 - p0)),)
        comps = state if engine == EFFECTIVE else None
        return ProtocolResult(as_state_vector(state, dim), log, engine_name(engine),
                              tuple(branches), comps)
    if outcome_policy == SAMPLE:
        rng = np.random.default_rng(seed)
        collapsed, record = _measure(state, 0, 'encode', SAMPLE, rng)
        sv = as_state_vector(collapsed, dim)
        branch = BranchOutcome(record.outcome, record.probability, sv,
                               extract_field(sv, (record.outcome,)))
        comps = collapsed if engine == EFFECTIVE else None
        return ProtocolResult(sv, (record,), engine_name(engine), (branch,), comps)
    raise InvalidArgumentError("outcome_policy must be 'sample' or 'both_branches'")


def hadamard_field(atom_in, alpha, emap=None, engine=EFFECTIVE, fock_dim=None):
    """
    |a>|α> → Σ_k |k> ⊗ (weighted logical field state), before any measurement.
    For atom_in = 0 the weights are sqrt((1 ± e^{−2|α|²})/2).
    """
    if atom_in not in (0, 1):
        raise InvalidArgumentError(f"atom_in must be 0 or 1, got {atom_in!r}")
    if abs(alpha) == 0:
        raise ImpossibleOutcomeError("alpha = 0 leaves the odd branch with zero probability")
    emap = emap or ideal_map(DEFAULT_T)
    state = conditional_pulse(_initial_register((atom_in,), alpha, engine, emap), 0, emap, engine)
    return as_state_vector(state, fock_dim)


def cnot_field_control(atom_in, field_in, emap=None, engine=EFFECTIVE, alpha=np.sqrt(0.4)):
    """
    CNOT with the field qubit as control: (a, k_L) → (a ⊕ k, k_L).

    Returns:
        (atom_out, field_out) read out as the most likely values.
    """
    if atom_in not in (0, 1):
        raise InvalidArgumentError(f"atom_in must be 0 or 1, got {atom_in!r}")
    if field_in not in (0, 1):
        raise InvalidArgumentError(
            "field_in must be a logical basis value 0 or 1; use conditional_pulse for "
            "general field inputs"
        )
    emap = emap or ideal_map(DEFAULT_T)
    logical = LogicalFieldQubit(alpha)
    state = logical.attach((atom_in,), field_in)
    if engine != EFFECTIVE:
        state = state.to_state_vector(engine.fock_dim or _register_fock_dim(state, emap))
    out = conditional_pulse(state, 0, emap, engine)
    if engine != EFFECTIVE:
        return _readout_exact(out, logical)
    p1 = out.probability(0, 1)
    atom_out = 1 if p1 > 0.5 else 0
    pf = logical.readout(field_of(out.projected(0, atom_out), (atom_out,)))
    return atom_out, int(np.argmax(pf))


def _readout_exact(state, logical):
    p1 = outcome_probability(state, 0, 1)
    atom_out = 1 if p1 > 0.5 else 0
    field_state = extract_field(state, (atom_out,))
    dim = field_state.layout.fock_dim
    pf = [fidelity(field_state, logical.basis_state(k, dim)) for k in (0, 1)]
    return atom_out, int(np.argmax(pf))


# --- pulse schedules -----------------------------------------------------------

MEASURE_NONE = 'none'
PROJECT_0 = 'project-0'
PROJECT_1 = 'project-1'
MEASUREMENTS = (MEASURE_NONE, PROJECT_0, PROJECT_1, SAMPLE)


@dataclass(frozen=True)
class ScheduleStep:
    """
    A pulse on one qubit (``pulse`` set, ``measurement`` 'none') or a
    measurement of one qubit over ``window`` = (start, end).
    """

    qubit_index: int
    pulse: Optional[FluxPulse] = None
    measurement: str = MEASURE_NONE
    window: Optional[tuple] = None

    def __post_init__(self):
        if self.measurement not in MEASUREMENTS:
            raise ScheduleError(f"unknown measurement kind {self.measurement!r}")
        if (self.pulse is None) == (self.measurement == MEASURE_NONE):
            raise ScheduleError("a step is either a pulse or a measurement")
        if self.pulse is None and (self.window is None or self.window[1] < self.window[0]):
            raise ScheduleError("measurement steps need a window (start, end) with end >= start")

    @property
    def is_pulse(self):
        return self.pulse is not None

    @property
    def start(self):
        return self.pulse.t_on if self.is_pulse else self.window[0]

    @property
    def end(self):
        return self.pulse.t_off if self.is_pulse else self.window[1]


@dataclass(frozen=True)
class PulseSchedule:
    steps: tuple

    def __post_init__(self):
        object.__setattr__(self, 'steps', tuple(self.steps))
        self.check_overlaps()

    def check_overlaps(self):
        by_qubit = {}
        for step in self.steps:
            by_qubit.setdefault(step.qubit_index, []).append(step)
        for q, steps in by_qubit.items():
            steps = sorted(steps, key=lambda s: s.start)
            for a, b in zip(steps, steps[1:]):
                if b.start < a.end - 1e-15:
                    raise ScheduleError(f"steps on qubit {q} overlap in time")

    @property
    def pulses(self):
        return [s for s in self.steps if s.is_pulse]


def cnot_schedule(T=DEFAULT_T, dt_m=10e-9, t0=0.0, pulse=None):
    """
    Four-step sequence for the two-qubit CNOT: pulse q1 on [t0, t1], measure q1
    on [t1, t2], pulse q2 on [t2, t3], pulse q1 on [t3, t4], all pulses of length T.
    """
    pulse = pulse or FluxPulse(t_on=0.0, t_off=T)
    t1 = t0 + T
    t2 = t1 + dt_m
    t3 = t2 + T
    t4 = t3 + T
    return PulseSchedule((
        ScheduleStep(0, pulse.replace(t_on=t0, t_off=t1)),
        ScheduleStep(0, None, SAMPLE, (t1, t2)),
        ScheduleStep(1, pulse.replace(t_on=t2, t_off=t3)),
        ScheduleStep(0, pulse.replace(t_on=t3, t_off=t4)),
    ))


def validate_cnot_schedule(schedule):
    """Check the pulse(q1), measure(q1), pulse(q2), pulse(q1) shape with equal T."""
    steps = schedule.steps
    expected = ((0, True), (0, False), (1, True), (0, True))
    shape = tuple((s.qubit_index, s.is_pulse) for s in steps)
    if shape != expected:
        raise ScheduleError(
            "CNOT schedule must be pulse(q1), measure(q1), pulse(q2), pulse(q1); "
            f"got {[('pulse' if p else 'measure', f'q{q + 1}') for q, p in shape]}"
        )
    durations = [s.pulse.duration for s in schedule.pulses]
    if max(durations) - min(durations) > 1e-9 * max(durations):
        raise ScheduleError(f"CNOT pulses must share one duration T, got {durations}")
    for a, b in zip(steps, steps[1:]):
        if b.start < a.end - 1e-15:
            raise ScheduleError(
                f"step on q{b.qubit_index + 1} starts at {b.start:.6g} before the previous "
                f"step ends at {a.end:.6g}"
            )
    return durations[0]


# --- two-qubit CNOT and GHZ ----------------------------------------------------

def _register_probabilities(state, n_qubits):
    """Joint distribution of the qubit register as {bits: probability}."""
    if isinstance(state, CoherentComponents):
        total = state.inner(state).real
        probs = {}
        for bits in {b for b, _, _ in state.components}:
            part = CoherentComponents(state.n_qubits,
                                      tuple(t for t in state.components if t[0] == bits))
            probs[bits] = part.inner(part).real / total
        return probs
    block = state.layout.field_dim
    amps = state.amplitudes.reshape(2 ** n_qubits, block)
    weights = np.sum(np.abs(amps) ** 2, axis=1)
    weights = weights / weights.sum()
    return {tuple(int(x) for x in format(i, f'0{n_qubits}b')): float(w)
            for i, w in enumerate(weights) if w > 0}


def cnot_two_qubits(q1_in, q2_in, alpha, schedule=None, emap=None, engine=EFFECTIVE,
                    outcome_policy=POSTSELECT, seed=None, fock_dim=None):
    """
    CNOT between two charge qubits through the field bus, q2 as control.

    Starting from |0>₁|0>₂|α>: the first pulse and the measurement of q1
    encode the control value k in the field (k = q2_in when post-selecting,
    sampled otherwise), q1 is reset to q1_in, then the q2 pulse copies k to
    q2 and the final q1 pulse flips q1 when k = 1.  ``outputs`` holds the
    most likely (q1, q2) readout.
    """
    for name, v in (('q1_in', q1_in), ('q2_in', q2_in)):
        if v not in (0, 1):
            raise InvalidArgumentError(f"{name} must be 0 or 1, got {v!r}")
    schedule = schedule or cnot_schedule()
    T = validate_cnot_schedule(schedule)
    emap = emap or ideal_map(T)
    rng = np.random.default_rng(seed)
    p_q1a, measure, p_q2, p_q1b = schedule.steps

    state = _initial_register((0, 0), alpha, engine, emap)
    state = conditional_pulse(state, 0, emap, engine, p_q1a.pulse)
    if outcome_policy == POSTSELECT:
        state, record = _measure(state, 0, 'encode', POSTSELECT, rng, forced=q2_in)
    elif outcome_policy == SAMPLE:
        state, record = _measure(state, 0, 'encode', SAMPLE, rng)
    else:
        raise InvalidArgumentError("outcome_policy must be 'postselect' or 'sample'")
    if record.outcome != q1_in:
        state = _flip(state, 0)
    state = conditional_pulse(state, 1, emap, engine, p_q2.pulse)
    state = conditional_pulse(state, 0, emap, engine, p_q1b.pulse)

    probs = _register_probabilities(state, 2)
    outputs = max(probs, key=probs.get)
    comps = state if engine == EFFECTIVE else None
    return ProtocolResult(as_state_vector(state, fock_dim), (record,), engine_name(engine),
                          components=comps, outputs=outputs,
                          output_probability=float(probs[outputs]))


def ghz_target(N, alpha):
    """(|0…0>|0>_L + (−1)^N |1…1>|1>_L)/√2."""
    logical = LogicalFieldQubit(alpha)
    zero = logical.attach((0,) * N, 0, 1 / np.sqrt(2))
    one = logical.attach((1,) * N, 1, (-1) ** N / np.sqrt(2))
    return CoherentComponents.from_terms(N, zero.components + one.components)


def _qq_step(nq, t_start, t_end, n_points=2001):
    """exp(−i∫H_qq dt) on the qubit register; the σ_yσ_y bonds commute."""
    ts = np.linspace(t_start, t_end, n_points)
    strengths = np.array([qq_coupling(nq, t) for t in ts])
    layout = SpaceLayout(nq.n_qubits, 2, 0)
    H = np.zeros((layout.dim, layout.dim), dtype=complex)
    for j in range(nq.n_qubits - 1):
        integral = simpson(strengths[:, j], x=ts)
        H -= integral * embed_qubit_matrix(layout, j, PAULI_Y) @ embed_qubit_matrix(layout, j + 1, PAULI_Y)
    return expm(-1j * H)


def _combined_terms(params, pulses, layout, expansion):
    parts = [single_qubit_terms(params, p, ROTATING, layout, j, expansion)
             for j, p in enumerate(pulses)]
    matrices = tuple(m for part in parts for m in part.matrices)

    def coeffs(t):
        return tuple(c for part in parts for c in part.coefficients(t))

    return TimeDependentHamiltonian(layout, matrices, coeffs, all(p.hermitian for p in parts))


def ghz_generate(N, alpha, maps=None, simultaneous=True, engine=EFFECTIVE, nq=None,
                 fock_dim=None, max_qubits=12):
    """
    Pulse every qubit of |0…0>|α> once.

    The output is w₊|0…0>|0>_L + (−1)^N w₋|1…1>|1>_L with
    w_± = sqrt((1 ± e^{−2|α|²})/2) for the ideal map; ``weights`` holds the
    two branch amplitudes and ``fidelity`` the overlap with the equal-weight
    GHZ state.  *nq* with include_qq adds the qubit-qubit coupling as a split
    step over the pulse window(s).
    """
    if N < 1:
        raise InvalidDimensionError("GHZ generation needs N >= 1")
    if N > max_qubits:
        raise InvalidDimensionError(f"N = {N} exceeds the register capacity of {max_qubits} qubits")
    if maps is None or isinstance(maps, EffectiveMap):
        maps = [maps or ideal_map(DEFAULT_T)] * N
    if len(maps) != N:
        raise InvalidArgumentError(f"expected {N} maps, got {len(maps)}")
    pulses = list(nq.pulses) if nq is not None else None
    if pulses is not None and len(pulses) != N:
        raise InvalidArgumentError("NQubitParams describes a different number of qubits")
    if pulses is not None:
        if simultaneous and len({(p.t_on, p.t_off) for p in pulses}) != 1:
            raise ScheduleError("simultaneous GHZ pulses must share one window")
        if not simultaneous:
            PulseSchedule(tuple(ScheduleStep(0, p) for p in pulses))

    state = _initial_register((0,) * N, alpha, engine, maps[0])
    if engine != EFFECTIVE and simultaneous:
        pulse = pulses[0] if pulses else engine.pulse
        H = _combined_terms(engine.params, [pulses[j] if pulses else pulse for j in range(N)],
                            state.layout, engine.opts.expansion)
        T = maps[0].duration_T
        state = evolve_exact(H, state, pulse.t_on, pulse.t_on + T, engine.opts).state
        for j in range(N):
            p = pulses[j] if pulses else pulse
            D = detuning_integral(engine.params, p, p.t_on + T, engine.opts.expansion)
            state = interaction_phase(state, j, D)
            state = to_pulse_frame(state, j, engine.frame(p, T))
    else:
        for j in range(N):
            state = conditional_pulse(state, j, maps[j], engine, pulses[j] if pulses else None)

    if nq is not None and nq.include_qq and N > 1:
        U = _qq_step(nq, min(p.t_on for p in pulses), max(p.t_off for p in pulses))
        if engine == EFFECTIVE:
            state = state.apply_register_matrix(U)
        else:
            full = np.kron(U, np.eye(state.layout.field_dim))
            state = StateVector(state.layout, full @ state.amplitudes)

    target = ghz_target(N, alpha)
    logical = LogicalFieldQubit(alpha)
    if engine == EFFECTIVE:
        state = state.normalized()
        fid = components_fidelity(state, target)
        w_plus = logical.attach((0,) * N, 0).inner(state)
        w_minus = logical.attach((1,) * N, 1).inner(state)
        sv = as_state_vector(state, fock_dim)
        comps = state
    else:
        sv = normalize(state)
        dim = sv.layout.fock_dim
        fid = fidelity(sv, target.to_state_vector(dim))
        w_plus = np.vdot(logical.attach((0,) * N, 0).to_state_vector(dim, False).amplitudes,
                         sv.amplitudes)
        w_minus = np.vdot(logical.attach((1,) * N, 1).to_state_vector(dim, False).amplitudes,
                          sv.amplitudes)
        comps = None
    return ProtocolResult(sv, (), engine_name(engine), components=comps, fidelity=float(fid),
                          weights=(complex(w_plus), complex(w_minus)))


# --- classical-pump rotation ---------------------------------------------------

GENERIC = 'generic'
HADAMARD = 'hadamard'
HADAMARD_MATRIX = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
REGIME_FACTOR = 10.0


@dataclass(frozen=True)
class QubitRotation:
    """
    Result of a classical-pump rotation.  ``unitary_lab`` acts on the
    computational qubit basis; ``unitary_rotating`` = e^{iEτσ_x}·unitary_lab
    and ``angle`` is its rotation angle in [0, π].
    """

    state: StateVector
    unitary_lab: np.ndarray = field(repr=False)
    unitary_rotating: np.ndarray = field(repr=False)
    angle: float
    pump_amplitude: float
    omega_b: float
    duration: float
    regime_ok: bool


def _pump_unitary(E, h_d, omega_b, chi, duration, opts):
    """
    Propagator of E σ_x + h_d cos(ω_b t + χ) σ_z over *duration*.  H is periodic
    in 2π/ω_b, so whole periods are a matrix power of the one-period propagator.
    """
    layout = SpaceLayout(1, 2, 0)
    H = classical_pump_qubit_terms(E, h_d, omega_b, chi)

    def propagate(t):
        cols = []
        for k in (0, 1):
            e = np.zeros(2, dtype=complex)
            e[k] = 1.0
            cols.append(evolve_exact(H, StateVector(layout, e), 0.0, t, opts).state.amplitudes)
        return polar(np.column_stack(cols))[0]

    if omega_b == 0 or h_d == 0:
        return expm(-1j * (E * PAULI_X + h_d * np.cos(chi) * np.diag([1.0, -1.0])) * duration)
    period = 2 * np.pi / omega_b
    n_periods = int(duration // period)
    rest = duration - n_periods * period
    U = np.eye(2, dtype=complex)
    if n_periods:
        U = np.linalg.matrix_power(propagate(period), n_periods)
    if rest > 0:
        U = propagate(rest) @ U
    return U


def _rotation_angle(U):
    phase = np.sqrt(np.linalg.det(U))
    return float(2 * np.arccos(min(1.0, abs(np.trace(U / phase)) / 2)))


def hadamard_pump_settings(E, g_b, ratio=1e-5):
    """
    Resonant pump (ω_b = 2E, χ = −π/2) giving U ∝ X·R_y(π/2) = H: the duration
    is an odd multiple of π/(2E) so the free part is ∝ X, and h_d τ = π/2 with
    h_d/E ≤ *ratio*.

    Returns:
        (pump_amplitude ⟨b⟩, omega_b, duration, chi)
    """
    m = int(np.ceil((1.0 / ratio - 1) / 2))
    duration = (2 * m + 1) * np.pi / (2 * E)
    h_d = np.pi / (2 * duration)
    return h_d / (2 * g_b), 2 * E, duration, -np.pi / 2


def rotate_qubit_classical_pump(state, qubit_index, pump_amplitude, omega_b, duration,
                                gate=GENERIC, params=None, two_mode=None, chi=-np.pi / 2,
                                opts=None):
    """
    Rotate one charge qubit with the classical pump drive 2g_b⟨b⟩cos(ω_b t)σ_z
    on top of its Josephson term E_J σ_x (pulse off).

    ``gate='hadamard'`` ignores the amplitude, frequency and duration
    arguments and uses hadamard_pump_settings.  ``regime_ok`` reports
    g_a ≪ g_b⟨b⟩ (by a factor REGIME_FACTOR).
    """
    params = params or DeviceParams()
    two_mode = two_mode or TwoModeParams()
    opts = opts or PropagatorOptions(rel_tol=1e-12, abs_tol=1e-14)
    g_a, g_b, _ = two_mode_couplings(two_mode)
    E = params.E_J_over_hbar
    if gate == HADAMARD:
        pump_amplitude, omega_b, duration, chi = hadamard_pump_settings(E, g_b)
    elif gate != GENERIC:
        raise InvalidArgumentError(f"gate must be 'generic' or 'hadamard', got {gate!r}")
    if duration < 0 or pump_amplitude < 0:
        raise InvalidArgumentError("pump amplitude and duration must be nonnegative")
    h_d = 2 * g_b * pump_amplitude
    U_lab = _pump_unitary(E, h_d, omega_b, chi, duration, opts)
    U_rot = expm(1j * E * duration * PAULI_X) @ U_lab
    out = apply_qubit_matrix(state, qubit_index, U_lab)
    return QubitRotation(out, U_lab, U_rot, _rotation_angle(U_rot), float(pump_amplitude),
                         float(omega_b), float(duration),
                         bool(g_a * REGIME_FACTOR < g_b * pump_amplitude))
