"""
Time evolution for the pulsed qubit and resonator.

Two engines live here:

* ``evolve_exact`` integrates the Schrödinger equation with dense matrices
  (adaptive DOP853 on the complex state vector).
* The second-order Dyson expansion in the interaction picture of
  H₀ = −Δ(t)σ_z.  Projected on a dressed branch |±> it reads

      <α,±| U(t) |α,±> ≈ 1 − g²[K₋₁ + (K₊₁ + K₋₁)|α|² + α*²L₊ + α²L₋]

  where, with E(t) = exp(iσ(2ω_c t + 2D(t))) and D(t) = ∫₀ᵗ Δ,

      K_k(t) = ∫₀ᵗ dt₁ e^{ikω_c t₁}/E(t₁) ∫₀^{t₁} dt₂ E(t₂) e^{−ikω_c t₂},

  and L_± are the same double integral with e^{±iω_c} on both times (the
  a†a† and aa terms).  σ = −1 for the |−> branch and +1 for |+>.  The
  α-phase independent part gives c_± = −g²K₋₁ and θ_± = −g²(K₊₁ + K₋₁);
  resumming 1 + θ a†a ≈ e^{θ a†a} gives |±>|α> → |±>|αe^{θ_±}>.

θ traces are reported in the pulse frame by default: the field is referred to
the |+> branch, so θ₊ is real and Im θ₋ is the conditional phase, and the
qubit carries no Stark phases.  ``INTERACTION_FRAME`` returns the raw
interaction-picture values.

The kernels are integrated with cumulative trapezoids on a grid resolving the
fastest phase (3ω_c + 2|Δ|) and Richardson-extrapolated against the
every-other-point grid; the difference gives the reported error estimate.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, simpson, solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .common import (
    CalibrationError,
    ExtractionError,
    IntegrationError,
    InvalidArgumentError,
    NumericalError,
    QuadratureError,
)
from .device import (
    EXACT_COS,
    EXPANSIONS,
    MINUS,
    PLUS,
    ROTATING,
    SIGMA_Z_DRESSED,
    TimeDependentHamiltonian,
    detuning,
    single_qubit_terms,
)
from .fockspace import (
    SpaceLayout,
    StateVector,
    apply_qubit_matrix,
    coherent_amplitudes,
    fidelity,
    fock_dim_for,
    normalize,
    rotate_field,
)

BRANCH_PLUS = '+'
BRANCH_MINUS = '-'
BRANCHES = (BRANCH_PLUS, BRANCH_MINUS)

# σ in E(t) = exp(iσ(2ω_c t + 2D)); σ₊ leaves |−> with e^{−2iω_c t}, so |−> has σ = −1
_BRANCH_SIGN = {BRANCH_MINUS: -1.0, BRANCH_PLUS: 1.0}

EXTRACTION_NBAR = (0.1, 0.3)
# α and iα have opposite α², so their mean drops the a†a† and aa terms
_EXTRACTION_PHASES = (1.0, 1j)

PULSE_FRAME = 'pulse'
INTERACTION_FRAME = 'interaction'
FIELD_FRAMES = (PULSE_FRAME, INTERACTION_FRAME)

THETA_MINUS = 'theta_minus'
CALIBRATION_TARGETS = (THETA_MINUS,)
DEFAULT_G_BRACKET = (1e6, 1e10)


@dataclass(frozen=True)
class PropagatorOptions:
    """
    Numerical knobs for both engines.

    ``rel_tol``/``abs_tol``/``max_step`` drive the ODE integrator;
    ``quad_tol`` is the relative error target for the Dyson kernels and
    ``points_per_period`` their starting resolution.
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float = np.inf
    dyson_order: int = 2
    quad_tol: float = 1e-3
    points_per_period: int = 32
    max_refinements: int = 4
    expansion: str = EXACT_COS

    def __post_init__(self):
        for name in ('rel_tol', 'abs_tol', 'quad_tol'):
            v = getattr(self, name)
            if not 0 < v <= 1e-3:
                raise InvalidArgumentError(f"{name} must be in (0, 1e-3], got {v}")
        if not self.max_step > 0:
            raise InvalidArgumentError("max_step must be positive")
        if self.dyson_order not in (1, 2):
            raise InvalidArgumentError("dyson_order must be 1 or 2")
        if self.points_per_period < 8:
            raise InvalidArgumentError("points_per_period must be at least 8")
        if self.expansion not in EXPANSIONS:
            raise InvalidArgumentError(f"expansion must be one of {EXPANSIONS}")

    def tightened(self, factor=0.5):
        return PropagatorOptions(
            self.rel_tol * factor, self.abs_tol * factor, self.max_step, self.dyson_order,
            self.quad_tol * factor, self.points_per_period, self.max_refinements + 2,
            self.expansion,
        )


# --- exact engine ----------------------------------------------------------------

@dataclass(frozen=True)
class EvolutionResult:
    state: StateVector
    norm_drift: float
    n_steps: int


def evolve_exact(hamiltonian_fn, psi0, t0, t1, opts=PropagatorOptions(), renormalize=None):
    """
    Solve i dψ/dt = H(t)ψ (H in rad/s) from t0 to t1.

    Args:
        hamiltonian_fn: TimeDependentHamiltonian, or any callable t -> DenseOperator.
        renormalize: Rescale the final state to unit norm.  Defaults to True for
            Hermitian Hamiltonians; for non-Hermitian ones the norm drift is kept.

    Returns:
        EvolutionResult with the final state, |‖ψ(t1)‖ − 1| and the number of
        accepted steps.

    Raises:
        IntegrationError: When the integrator cannot advance, with the last
            time it reached.
    """
    if t1 < t0:
        raise InvalidArgumentError("evolve_exact needs t1 >= t0")
    if abs(psi0.norm() - 1.0) > 1e-8:
        raise InvalidArgumentError("initial state must be normalized")
    if isinstance(hamiltonian_fn, TimeDependentHamiltonian):
        matrix = hamiltonian_fn.matrix
        hermitian = hamiltonian_fn.hermitian
    else:
        def matrix(t):
            return hamiltonian_fn(t).entries
        hermitian = bool(getattr(hamiltonian_fn(t0), 'hermitian', False))
    if renormalize is None:
        renormalize = hermitian
    if t1 == t0:
        return EvolutionResult(psi0, 0.0, 0)

    def rhs(t, y):
        return -1j * (matrix(t) @ y)

    sol = solve_ivp(rhs, (t0, t1), np.asarray(psi0.amplitudes), method='DOP853',
                    rtol=opts.rel_tol, atol=opts.abs_tol, max_step=opts.max_step)
    if not sol.success:
        last = float(sol.t[-1]) if sol.t.size else t0
        raise IntegrationError(f"integration stopped at t={last:.6g}: {sol.message}", last)
    y = sol.y[:, -1]
    norm = float(np.linalg.norm(y))
    drift = abs(norm - 1.0)
    if renormalize:
        y = y / norm
    return EvolutionResult(StateVector(psi0.layout, y), drift, int(sol.t.size - 1))


def branch_vector(branch):
    if branch == BRANCH_PLUS:
        return PLUS
    if branch == BRANCH_MINUS:
        return MINUS
    raise InvalidArgumentError(f"branch must be '+' or '-', got {branch!r}")


def branch_coherent_state(branch, alpha, fock_dim):
    """|±> ⊗ |α> with the dressed qubit first."""
    layout = SpaceLayout(1, fock_dim, 1)
    return StateVector(layout, np.kron(branch_vector(branch), coherent_amplitudes(alpha, fock_dim)))


def interaction_phase(state, qubit_index, D):
    """Apply exp(−iσ_z D) on one qubit: rotating frame -> interaction picture of −Δσ_z."""
    w, v = np.linalg.eigh(SIGMA_Z_DRESSED)
    U = v @ np.diag(np.exp(-1j * w * D)) @ v.conj().T
    return apply_qubit_matrix(state, qubit_index, U)


def detuning_integral(params, pulse, t, expansion=EXACT_COS, n_points=20001):
    """D(t) = ∫_{t_on}^t Δ(t′) dt′ by Simpson's rule."""
    if t <= pulse.t_on:
        return 0j
    s = np.linspace(pulse.t_on, t, n_points)
    return complex(simpson(detuning(params, pulse, s, expansion), x=s))


# --- Dyson kernels -------------------------------------------------------------

@dataclass(frozen=True)
class _Kernels:
    """Unit-coupling kernels for one branch at the sample times."""

    K_plus: np.ndarray      # K_{+1}
    K_minus: np.ndarray     # K_{−1}
    L_plus: np.ndarray      # a†a† term, multiplies α*²
    L_minus: np.ndarray     # aa term, multiplies α²
    F_conj: np.ndarray      # −i∫E e^{+iω_c t}, multiplies α*
    F_lin: np.ndarray       # −i∫E e^{−iω_c t}, multiplies α
    error: np.ndarray       # estimate on K_{+1} + K_{−1}
    D: np.ndarray


def _window_check(pulse, times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise InvalidArgumentError("sample_times must be a nonempty 1-D sequence")
    if np.any(np.diff(times) < 0):
        raise InvalidArgumentError("sample_times must be ascending")
    if times[0] < pulse.t_on or times[-1] > pulse.t_off + 1e-12 * pulse.duration:
        raise InvalidArgumentError("sample_times must lie within the pulse window")
    return np.minimum(times, pulse.t_off)


def _max_frequency(params, pulse, expansion):
    grid = np.linspace(pulse.t_on, pulse.t_off, 2001)
    delta = detuning(params, pulse, grid, expansion)
    return 3 * params.omega_c + 2 * float(np.max(np.abs(delta)))


def _grid(t_on, times, omega_max, ppp):
    """Piecewise-uniform grid with every sample on it at an even index."""
    breaks = np.unique(np.concatenate([[t_on], times]))
    h = 2 * np.pi / (omega_max * ppp)
    pieces = [breaks[:1]]
    starts = [0]
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = max(2, int(np.ceil((b - a) / h)))
        n += n % 2
        pieces.append(np.linspace(a, b, n + 1)[1:])
        starts.append(starts[-1] + n)
    grid = np.concatenate(pieces)
    index = np.asarray(starts)[np.searchsorted(breaks, times)]
    return grid, index


def _integrals(s, E, wc):
    up = np.exp(1j * wc * s)
    down = 1.0 / up

    def nested(outer, inner):
        partial = cumulative_trapezoid(E * inner, s, initial=0)
        return cumulative_trapezoid(partial / E * outer, s, initial=0)

    f_conj = -1j * cumulative_trapezoid(E * up, s, initial=0)
    f_lin = -1j * cumulative_trapezoid(E * down, s, initial=0)
    return (nested(up, down), nested(down, up), nested(up, up), nested(down, down),
            f_conj, f_lin)


def _richardson(fine, coarse):
    return fine + (fine - coarse) / 3.0, np.abs(fine - coarse) / 3.0


def growth_limit(opts):
    """Largest spread of 2 Im D(t) whose e^{spread} rounding still meets quad_tol."""
    return float(np.log(opts.quad_tol / np.finfo(float).eps))


def _check_growth(D, opts):
    spread = 2 * float(np.ptp(D.imag))
    limit = growth_limit(opts)
    if spread > limit:
        raise NumericalError(
            f"complex detuning scales the Dyson integrands by e^{spread:.4g}, beyond the "
            f"e^{limit:.3g} double precision resolves at quad_tol={opts.quad_tol:g}; use the "
            "hermitized pulse mode or a weaker pulse"
        )


def _branch_kernels(params, pulse, times, opts, branch):
    times = _window_check(pulse, times)
    sign = _BRANCH_SIGN.get(branch)
    if sign is None:
        raise InvalidArgumentError(f"branch must be '+' or '-', got {branch!r}")
    omega_max = _max_frequency(params, pulse, opts.expansion)
    wc = params.omega_c
    ppp = opts.points_per_period
    last_err = None
    for _ in range(opts.max_refinements + 1):
        grid, idx = _grid(pulse.t_on, times, omega_max, ppp)
        delta = detuning(params, pulse, grid, opts.expansion)
        D = cumulative_trapezoid(delta, grid, initial=0)
        _check_growth(D, opts)
        s = grid - pulse.t_on
        E = np.exp(1j * sign * (2 * wc * s + 2 * D))
        fine = [x[idx] for x in _integrals(s, E, wc)]
        coarse = [x[idx // 2] for x in _integrals(s[::2], E[::2], wc)]
        Kp, Km, Lp, Lm, Fc, Fl = [_richardson(f, c)[0] for f, c in zip(fine, coarse)]
        err = np.abs((fine[0] + fine[1]) - (coarse[0] + coarse[1])) / 3.0
        scale = float(np.max(np.abs(Kp + Km)))
        if scale == 0 or float(np.max(err)) <= opts.quad_tol * scale:
            # the anomalous and first-order terms see absolute time through e^{±iω_c t}
            on = np.exp(1j * wc * pulse.t_on)
            return _Kernels(Kp, Km, Lp * on ** 2, Lm / on ** 2, Fc * on, Fl / on, err, D[idx])
        last_err = float(np.max(err)) / scale
        ppp *= 2
    raise QuadratureError(
        f"Dyson kernels did not converge (relative error estimate {last_err:.3g})", last_err
    )


# --- θ traces ------------------------------------------------------------------

@dataclass(frozen=True)
class ThetaTrace:
    """
    θ_±(t) at the sample times, with the constant parts c_±(t), the
    first-order transition amplitude for α = 1, and quadrature error
    estimates on θ.  ``detuning_integral`` is D(t) = ∫Δ from t_on.

    In the pulse frame ``frame_phase`` is the field rotation Im θ₊ removed
    from both branches; it is zero in the interaction frame.
    """

    times: np.ndarray
    theta_plus: np.ndarray
    theta_minus: np.ndarray
    const_plus: np.ndarray = field(repr=False, default=None)
    const_minus: np.ndarray = field(repr=False, default=None)
    first_order_plus: np.ndarray = field(repr=False, default=None)
    first_order_minus: np.ndarray = field(repr=False, default=None)
    error_plus: np.ndarray = field(repr=False, default=None)
    error_minus: np.ndarray = field(repr=False, default=None)
    detuning_integral: np.ndarray = field(repr=False, default=None)
    frame_phase: np.ndarray = field(repr=False, default=None)
    field_frame: str = PULSE_FRAME

    def __post_init__(self):
        if not (len(self.times) == len(self.theta_plus) == len(self.theta_minus)):
            raise InvalidArgumentError("ThetaTrace lists must have equal length")

    def theta(self, branch):
        return self.theta_minus if branch == BRANCH_MINUS else self.theta_plus

    def const(self, branch):
        return self.const_minus if branch == BRANCH_MINUS else self.const_plus

    def to_frame(self):
        import pandas as pd
        frame_phase = self.frame_phase if self.frame_phase is not None else np.zeros(len(self.times))
        return pd.DataFrame({
            't_s': self.times,
            'theta_plus_re': self.theta_plus.real,
            'theta_plus_im': self.theta_plus.imag,
            'theta_minus_re': self.theta_minus.real,
            'theta_minus_im': self.theta_minus.imag,
            'frame_phase': frame_phase,
        })


def extract_theta(values, nbars):
    """
    Solve value_i = 1 + c + θ·n̄_i for (c, θ) from two evaluations.

    Raises:
        ExtractionError: If the two n̄ values are too close to separate.
    """
    (v1, v2), (n1, n2) = values, nbars
    if abs(n1 - n2) < 1e-6 * max(abs(n1), abs(n2), 1.0):
        raise ExtractionError(f"extraction needs distinct |alpha|^2, got {n1} and {n2}")
    v1 = np.asarray(v1) - 1.0
    v2 = np.asarray(v2) - 1.0
    theta = (v2 - v1) / (n2 - n1)
    const = v1 - theta * n1
    return const, theta


def _expectation_from_kernels(kern, g, alpha, dyson_order):
    if dyson_order < 2:
        # the diagonal first-order term vanishes identically
        return np.ones_like(kern.K_plus)
    nbar = abs(alpha) ** 2
    anomalous = np.conj(alpha) ** 2 * kern.L_plus + alpha ** 2 * kern.L_minus
    return 1.0 - g ** 2 * (kern.K_minus + (kern.K_plus + kern.K_minus) * nbar + anomalous)


def dyson_expectation(pulse, params, alpha, branch, t, opts=PropagatorOptions()):
    """<α,±|U(t)|α,±> through the configured Dyson order, in the interaction picture."""
    if t == pulse.t_on or params.g == 0:
        return 1.0 + 0j
    kern = _branch_kernels(params, pulse, [t], opts, branch)
    return complex(_expectation_from_kernels(kern, params.g, complex(alpha), opts.dyson_order)[0])


def _phase_averaged(kern, g, nbar):
    amplitude = np.sqrt(nbar)
    return np.mean([_expectation_from_kernels(kern, g, amplitude * u, 2)
                    for u in _EXTRACTION_PHASES], axis=0)


def theta_trace(pulse, params, opts=PropagatorOptions(), sample_times=None,
                field_frame=PULSE_FRAME, nbars=EXTRACTION_NBAR):
    """
    θ_±(t) on *sample_times* (default: 201 points across the pulse window),
    extracted from Dyson expectations at the two |α|² in *nbars*, each
    averaged over α and iα.

    *field_frame* is ``pulse`` (θ₊ real, c_± real) or ``interaction``.
    """
    if field_frame not in FIELD_FRAMES:
        raise InvalidArgumentError(f"field_frame must be one of {FIELD_FRAMES}, got {field_frame!r}")
    if sample_times is None:
        sample_times = np.linspace(pulse.t_on, pulse.t_off, 201)
    times = _window_check(pulse, sample_times)
    g = params.g
    at_on = times == pulse.t_on
    result = {}
    for branch in BRANCHES:
        kern = _branch_kernels(params, pulse, times, opts, branch)
        values = [_phase_averaged(kern, g, n) for n in nbars]
        const, theta = extract_theta(values, nbars)
        theta = np.where(at_on, 0j, theta)
        const = np.where(at_on, 0j, const)
        result[branch] = (theta, const, g * (kern.F_conj + kern.F_lin), g ** 2 * kern.error, kern.D)
    tp, cp, fp, ep, _ = result[BRANCH_PLUS]
    tm, cm, fm, em, D = result[BRANCH_MINUS]
    if field_frame == PULSE_FRAME:
        frame_phase = tp.imag.copy()
        tp, tm = tp - 1j * frame_phase, tm - 1j * frame_phase
        cp, cm = cp.real + 0j, cm.real + 0j
    else:
        frame_phase = np.zeros(len(times))
    return ThetaTrace(times, tp, tm, cp, cm, fp, fm, ep, em, D, frame_phase, field_frame)


@dataclass(frozen=True)
class PulseFrame:
    """
    Interaction-picture phases one pulse of length T leaves behind: the
    field rotation ``field_angle`` (Im θ₊) and the branch phases Im c_±.
    """

    field_angle: float = 0.0
    phase_plus: float = 0.0
    phase_minus: float = 0.0


def pulse_frame(pulse, params, T=None, opts=PropagatorOptions()):
    """PulseFrame of *pulse* at t_on + T (default: the whole window)."""
    if T is None:
        T = pulse.duration
    if params.g == 0:
        return PulseFrame()
    if T > pulse.duration * (1 + 1e-12):
        raise InvalidArgumentError(f"pulse frame needs T <= pulse duration, got {T:.6g}")
    trace = theta_trace(pulse, params, opts, [pulse.t_on, min(pulse.t_on + T, pulse.t_off)],
                        field_frame=INTERACTION_FRAME)
    return PulseFrame(float(trace.theta_plus[-1].imag), float(trace.const_plus[-1].imag),
                      float(trace.const_minus[-1].imag))


def to_pulse_frame(state, qubit_index, frame):
    """Remove a PulseFrame from an interaction-picture register."""
    U = (np.exp(-1j * frame.phase_plus) * np.outer(PLUS, PLUS.conj())
         + np.exp(-1j * frame.phase_minus) * np.outer(MINUS, MINUS.conj()))
    return rotate_field(apply_qubit_matrix(state, qubit_index, U), -frame.field_angle)


# --- effective map -------------------------------------------------------------

@dataclass(frozen=True)
class EffectiveMap:
    """
    Conditional map |±>|α> → |±>|αe^{θ_±}> for a pulse of length duration_T.
    ``const_plus``/``const_minus`` carry the resummed constants c_±; zero for
    the idealized map.
    """

    theta_plus_T: complex
    theta_minus_T: complex
    duration_T: float
    const_plus: complex = 0j
    const_minus: complex = 0j

    def __post_init__(self):
        if not self.duration_T > 0:
            raise InvalidArgumentError("EffectiveMap duration must be positive")

    def theta(self, branch):
        if branch == BRANCH_MINUS:
            return self.theta_minus_T
        if branch == BRANCH_PLUS:
            return self.theta_plus_T
        raise InvalidArgumentError(f"branch must be '+' or '-', got {branch!r}")

    def const(self, branch):
        return self.const_minus if branch == BRANCH_MINUS else self.const_plus

    @property
    def has_constants(self):
        return self.const_plus != 0 or self.const_minus != 0


def ideal_map(duration_T):
    """θ₋ = iπ, θ₊ = 0: the phase-flip map the protocols are designed around."""
    return EffectiveMap(1j * np.pi, 0j, duration_T)


def effective_map_from_trace(trace, include_constants=False):
    """Map at the last sample of *trace*."""
    T = float(trace.times[-1] - trace.times[0])
    if include_constants:
        return EffectiveMap(complex(trace.theta_plus[-1]), complex(trace.theta_minus[-1]), T,
                            complex(trace.const_plus[-1]), complex(trace.const_minus[-1]))
    return EffectiveMap(complex(trace.theta_plus[-1]), complex(trace.theta_minus[-1]), T)


def effective_apply(emap, atom_branch, alpha):
    """Output coherent amplitude α·e^{θ_±(T)}."""
    return complex(alpha * np.exp(emap.theta(atom_branch)))


def branch_weight(emap, branch, alpha):
    """
    Scalar prefactor of e^{c + θa†a}|α> = w·|αe^θ>:
    w = e^c · exp((|αe^θ|² − |α|²)/2).  Exactly 1 for the idealized map.
    """
    if not emap.has_constants:
        return 1.0 + 0j
    beta = effective_apply(emap, branch, alpha)
    return complex(np.exp(emap.const(branch) + 0.5 * (abs(beta) ** 2 - abs(alpha) ** 2)))


def approximation_error(pulse, params, alpha, T=None, opts=PropagatorOptions(), fock_dim=None):
    """
    1 − fidelity between the exact rotating-frame evolution of |±>|α> and the
    effective product-state prediction |±>|αe^{θ_±(T)}>, worse branch.  θ is
    taken in the interaction frame; the branch phase is global per branch.
    """
    if abs(alpha) ** 2 > 1 + 1e-12:
        raise InvalidArgumentError("approximation_error expects |alpha|^2 <= 1")
    if T is None:
        T = pulse.duration
    t_end = pulse.t_on + T
    if params.g == 0:
        trace_theta = {BRANCH_PLUS: 0j, BRANCH_MINUS: 0j}
    else:
        trace = theta_trace(pulse, params, opts, [pulse.t_on, t_end],
                            field_frame=INTERACTION_FRAME)
        trace_theta = {b: complex(trace.theta(b)[-1]) for b in BRANCHES}
    worst = 0.0
    for branch in BRANCHES:
        beta = alpha * np.exp(trace_theta[branch])
        dim = fock_dim or fock_dim_for(max(abs(alpha), abs(beta)))
        psi0 = branch_coherent_state(branch, alpha, dim)
        H = single_qubit_terms(params, pulse, ROTATING, psi0.layout, 0, opts.expansion)
        exact = evolve_exact(H, psi0, pulse.t_on, t_end, opts).state
        predicted = branch_coherent_state(branch, beta, dim)
        worst = max(worst, 1.0 - fidelity(normalize(exact), predicted))
    return float(max(worst, 0.0))


# --- calibration ---------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationResult:
    """
    Calibrated coupling and pulse phase.  ``first_order_ratio`` is
    |first-order transition| / |second-order term| at T for the calibration
    α; ``phi_converged`` reports whether it met the 1e-3 target.
    """

    g: float
    phi: float
    T: float
    theta_plus_T: complex
    theta_minus_T: complex
    first_order_ratio: float
    phi_converged: bool


def _target_response(kp, km, target):
    """Unit-g response of the pulse-frame phase Im θ₋ = Im(θ₋ − θ₊) at T."""
    if target == THETA_MINUS:
        theta_m = -(km.K_plus[-1] + km.K_minus[-1])
        theta_p = -(kp.K_plus[-1] + kp.K_minus[-1])
        return abs((theta_m - theta_p).imag)
    raise InvalidArgumentError(f"calibration target must be one of {CALIBRATION_TARGETS}")


def _first_order_ratio(kern, g, alpha):
    first = g * abs(np.conj(alpha) * kern.F_conj[-1] + alpha * kern.F_lin[-1])
    second = abs(_expectation_from_kernels(kern, g, complex(alpha), 2)[-1] - 1.0)
    return float(first / second) if second > 0 else np.inf


def calibrate_pulse(params, pulse_template, target=THETA_MINUS, opts=PropagatorOptions(),
                    bracket=DEFAULT_G_BRACKET, alpha=np.sqrt(0.4), T=None, calibrate_phi=True):
    """
    Choose g so the pulse-frame phase Im θ₋ at T (default: the half period
    π/ν) equals π, and φ to suppress the first-order Dyson term at T.  The
    result carries θ_±(T) in the pulse frame, so θ₊(T) is real.

    θ scales exactly as g², so the unit-coupling response is computed once and
    the root solve runs on the scaled value over *bracket*.

    Raises:
        CalibrationError: If the target is not bracketed.
    """
    if T is None:
        T = pulse_template.half_period
    pulse = pulse_template.replace(t_off=pulse_template.t_on + T)
    times = [pulse.t_on, pulse.t_on + T]
    unit = params.with_coupling(1.0)

    def solve_g(p):
        kp = _branch_kernels(unit, p, times, opts, BRANCH_PLUS)
        km = _branch_kernels(unit, p, times, opts, BRANCH_MINUS)
        response = _target_response(kp, km, target)

        def f(g):
            return g ** 2 * response - np.pi

        lo, hi = bracket
        f_lo, f_hi = f(lo), f(hi)
        if not f_lo * f_hi < 0:
            raise CalibrationError(
                f"target phase pi not bracketed by g in [{lo:.3g}, {hi:.3g}] "
                f"(phase at ends {f_lo + np.pi:.3g}, {f_hi + np.pi:.3g})",
                bracket=(lo, hi), values=(f_lo + np.pi, f_hi + np.pi),
            )
        return brentq(f, lo, hi, xtol=1e-12 * hi, rtol=1e-12), kp, km

    g, kp, km = solve_g(pulse)
    phi = pulse.phi
    ratio = _first_order_ratio(km, g, alpha)
    if calibrate_phi:
        def objective(phi_value):
            k = _branch_kernels(unit, pulse.replace(phi=phi_value), times, opts, BRANCH_MINUS)
            return _first_order_ratio(k, g, alpha)

        candidates = {0.0: objective(0.0), pulse.phi: ratio}
        best = minimize_scalar(objective, bounds=(-np.pi, np.pi), method='bounded',
                               options={'xatol': 1e-4})
        candidates[float(best.x)] = float(best.fun)
        phi = min(candidates, key=candidates.get)
        if phi != pulse.phi:
            pulse = pulse.replace(phi=phi)
            g, kp, km = solve_g(pulse)
        ratio = _first_order_ratio(km, g, alpha)
    theta_p = -g ** 2 * (kp.K_plus[-1] + kp.K_minus[-1])
    theta_m = -g ** 2 * (km.K_plus[-1] + km.K_minus[-1])
    theta_p, theta_m = theta_p - 1j * theta_p.imag, theta_m - 1j * theta_p.imag
    return CalibrationResult(float(g), float(phi), float(T), complex(theta_p), complex(theta_m),
                             float(ratio), bool(ratio < 1e-3))


def calibrated(params, pulse, result):
    """Return (params, pulse) updated with a CalibrationResult."""
    return params.with_coupling(result.g), pulse.replace(phi=result.phi)
