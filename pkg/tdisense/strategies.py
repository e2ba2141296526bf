"""
Free-evolution (FE) and control-enhanced (CE) sensing strategies.

A strategy is an ordered list of timed segments acting on the joint register
(ancilla, system, environment...). Pulses are instantaneous rotations whose
phase is dilated, precessions evolve under the full Hamiltonian for a dilated
duration. Each segment reads its dilation from a slot of a DilationDraw;
segments may share a slot only when they are adjacent.
"""
from dataclasses import dataclass, replace
import logging
import math

import numpy as np

from tdisense.errors import (DecouplingViolation, DrawLengthMismatch, EstimatorDomain,
                             ValidationError)
from tdisense.model import (CNOT_MATRIX, PAULI_X, PAULI_Z, PhysicalParams,
                            des_preparation, electron_phonon, gate_from_spec, gate_library,
                            h_cnot, h_swap, rotation, with_ancilla,
                            DEFAULT_DIMENSION_CAP)
from tdisense.qcore import (Operator, StateVector, basis_state, embed,
                            expectation, marginal_probabilities,
                            operator_norm, sample_counts)
from tdisense.tdi import DilationDraw, tensor_quadrature

logger = logging.getLogger('tdisense.strategies')

DECOUPLING_TOL = 1e-9
DURATION_TOL = 1e-9

# Fitted constants of the CNOT control-enhanced estimator
CNOT_GAIN = 0.99443
CNOT_AMPLITUDE = 0.499971519
CNOT_OFFSET = 197.427242
CNOT_CONTROL_PHASE_BOUND = 4.366657005

ANSATZ_LAYOUT = (('RY', (0,)), ('RY', (1,)), ('RXX', (0, 1)),
                 ('RX', (0,)), ('RX', (1,)), ('RZZ', (0, 1)))


@dataclass(frozen=True, eq=False)
class Segment:
    """exp(-i * nominal * (1 + u) * generator) with u read from `slot`"""
    label: str
    generator: Operator
    nominal: float
    slot: int

    kind = 'segment'

    def apply(self, vector, dilation=0.0):
        return self.generator.evolve(vector, self.nominal * (1.0 + dilation))

    def unitary(self, dilation=0.0):
        values, vectors = self.generator.spectrum
        return (vectors * np.exp(-1j * self.nominal * (1.0 + dilation) * values)) @ vectors.conj().T

    @property
    def spectral_width(self):
        values, _ = self.generator.spectrum
        return float(values[-1] - values[0])

    def average(self, rho, law):
        """Dilation-averaged conjugation E_f[U(u) rho U(u)^dagger], exact in the generator eigenbasis"""
        values, vectors = self.generator.spectrum
        rotated = vectors.conj().T @ rho @ vectors
        k = self.nominal * np.subtract.outer(values, values)
        factors = np.exp(-1j * k) * law.characteristic(k)
        return vectors @ (rotated * factors) @ vectors.conj().T


@dataclass(frozen=True, eq=False)
class Pulse(Segment):
    kind = 'pulse'

    def __post_init__(self):
        norm = operator_norm(self.generator)
        if abs(norm - 1.0) > 1e-10:
            raise ValidationError(f"Pulse {self.label} generator has norm {norm}, expected 1")

    @property
    def phase(self):
        return self.nominal


@dataclass(frozen=True, eq=False)
class Precession(Segment):
    kind = 'precession'

    def __post_init__(self):
        if self.nominal < 0:
            raise ValidationError(f"Precession {self.label} has negative duration {self.nominal}")

    @property
    def duration(self):
        return self.nominal


@dataclass(frozen=True)
class ArccosEstimator:
    """omega_hat = scale * arccos(x)"""
    scale: float

    def __call__(self, x):
        value = self.scale * np.arccos(np.clip(x, -1.0, 1.0))
        return float(value) if np.ndim(value) == 0 else value

    def derivative(self, x):
        x = np.clip(x, -1.0 + 1e-15, 1.0 - 1e-15)
        return -self.scale / np.sqrt(1.0 - x ** 2)

    def out_of_domain(self, x):
        return bool(np.any(np.abs(x) > 1.0))


@dataclass(frozen=True)
class FittedCnotEstimator:
    """Fitted estimator of the CNOT control-enhanced strategy on branch K"""
    T: float
    branch: int
    clamp: bool = True
    gain: float = CNOT_GAIN
    amplitude: float = CNOT_AMPLITUDE
    offset: float = CNOT_OFFSET

    def _ratio(self, x):
        ratio = np.asarray(x, dtype=float) / self.amplitude
        if np.any(np.abs(ratio) > 1.0):
            if not self.clamp:
                raise EstimatorDomain(f"|x/{self.amplitude}| exceeds 1 for x={x}")
            ratio = np.clip(ratio, -1.0, 1.0)
        return ratio

    def __call__(self, x):
        ratio = self._ratio(x)
        value = self.gain * (2 * math.pi - np.arccos(ratio) + 2 * math.pi * self.branch - self.offset) / self.T
        return float(value) if np.ndim(value) == 0 else value

    def derivative(self, x):
        ratio = np.clip(self._ratio(x), -1.0 + 1e-15, 1.0 - 1e-15)
        return self.gain / (self.T * self.amplitude * np.sqrt(1.0 - ratio ** 2))

    def out_of_domain(self, x):
        return bool(np.any(np.abs(np.asarray(x)) > self.amplitude))


def cnot_branch(omega, T):
    """Prior-knowledge branch index K of the fitted CNOT estimator"""
    return int(math.floor((omega * T + CNOT_OFFSET) / (2 * math.pi)))


def cnot_forward_model(omega, T):
    """Mean outcome predicted by the fitted CNOT law"""
    return CNOT_AMPLITUDE * math.cos(CNOT_OFFSET + omega * T / CNOT_GAIN)


@dataclass(frozen=True, eq=False)
class Strategy:
    name: str
    params: PhysicalParams
    segments: tuple
    initial_state: StateVector
    measured: tuple
    outcome_values: np.ndarray
    observable: Operator
    estimator: object
    nominal_time: float

    def __post_init__(self):
        values = np.array(self.outcome_values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, 'outcome_values', values)
        object.__setattr__(self, 'segments', tuple(self.segments))

        dims = self.initial_state.subsystem_dims
        expected = int(np.prod([dims[i] for i in self.measured]))
        if values.size != expected:
            raise ValidationError(f"{values.size} outcome codes for {expected} outcomes")

        seen, previous = set(), None
        for segment in self.segments:
            if segment.slot != previous and segment.slot in seen:
                raise ValidationError(f"Slot {segment.slot} is shared by non-adjacent segments")
            seen.add(segment.slot)
            previous = segment.slot
        if seen != set(range(len(seen))):
            raise ValidationError(f"Slots {sorted(seen)} are not numbered 0..n-1")

        total = self.total_duration
        if abs(total - self.nominal_time) > DURATION_TOL * max(1.0, self.nominal_time):
            raise ValidationError(f"Precessions last {total}, expected {self.nominal_time}")

    @property
    def timed_op_count(self):
        return len({segment.slot for segment in self.segments})

    @property
    def total_duration(self):
        return sum(s.nominal for s in self.segments if s.kind == 'precession')

    @property
    def subsystem_dims(self):
        return self.initial_state.subsystem_dims

    def segment(self, label):
        for segment in self.segments:
            if segment.label == label:
                return segment
        raise ValidationError(f"Strategy {self.name} has no segment '{label}'")

    def with_duration(self, label, duration):
        """Copy with one precession stretched to `duration`"""
        old = self.segment(label)
        segments = tuple(replace(s, nominal=float(duration)) if s is old else s for s in self.segments)
        return replace(self, segments=segments,
                       nominal_time=self.nominal_time - old.nominal + float(duration))

    def slot_runs(self):
        runs = []
        for segment in self.segments:
            if runs and runs[-1][0].slot == segment.slot:
                runs[-1].append(segment)
            else:
                runs.append([segment])
        return runs

    def describe(self):
        return {
            'name': self.name,
            'params': self.params.to_dict(),
            'timed_op_count': self.timed_op_count,
            'segments': [{'label': s.label, 'kind': s.kind, 'nominal': s.nominal, 'slot': s.slot}
                         for s in self.segments],
        }


@dataclass(frozen=True)
class RunOutcome:
    mean_outcome: float
    shots: int
    omega_hat: float
    exact_probabilities: np.ndarray = None
    clamped: bool = False


class _Builder:
    """Accumulates segments on a fixed register"""

    def __init__(self, dims, shared_slot=False):
        self.dims = tuple(dims)
        self.shared_slot = shared_slot
        self.segments = []

    def _next_slot(self):
        return 0 if self.shared_slot else len(self.segments)

    def pulse(self, gate, targets, label):
        generator = Operator(embed(gate.generator, targets, self.dims), self.dims, hermitian=True)
        self.segments.append(Pulse(label, generator, gate.phase, self._next_slot()))

    def precess(self, hamiltonian, duration, label):
        self.segments.append(Precession(label, hamiltonian, float(duration), self._next_slot()))


def _observable(matrix, targets, dims):
    return Operator(embed(matrix, targets, dims), dims, hermitian=True)


def _fe_observable(dims):
    """O_FE = CNOT_01 X_0 CNOT_01"""
    matrix = CNOT_MATRIX @ np.kron(PAULI_X, np.eye(2)) @ CNOT_MATRIX
    return _observable(matrix, (0, 1), dims)


def _bell_probe(name, p, hamiltonian, dims, initial, estimator, shared_draws=False, preparation=()):
    """Bell pair on (ancilla, system), one precession, Bell readout of X_0"""
    gates = gate_library()
    builder = _Builder(dims, shared_slot=shared_draws)
    for gate, targets, label in preparation:
        builder.pulse(gate, targets, label)
    builder.pulse(gates['H'], (0,), 'prep-h')
    builder.pulse(gates['CNOT'], (0, 1), 'prep-cnot')
    builder.precess(hamiltonian, p.T, 'precession')
    builder.pulse(gates['CNOT'], (0, 1), 'readout-cnot')
    builder.pulse(gates['H'], (0,), 'readout-h')
    return Strategy(name, p, builder.segments, initial, (0, 1),
                    np.array([1.0, 1.0, -1.0, -1.0]), _fe_observable(dims), estimator, p.T)


def build_fe_swap(p, shared_draws=False):
    """Bell-probe free evolution under SWAP coupling, read out at a decoupling time"""
    violation = math.sin(p.g * p.T) ** 2
    if violation > DECOUPLING_TOL:
        raise DecouplingViolation(f"sin(gT)^2 = {violation:.3e}; T must be a multiple of pi/g")
    dims = (2, 2, 2)
    # Zeno dynamics halves the phase, hence the factor 2
    return _bell_probe('fe_swap', p, with_ancilla(h_swap(p)), dims,
                       basis_state((0, 0, 0), dims), ArccosEstimator(2.0 / p.T), shared_draws)


def build_fe_cnot(p, shared_draws=False):
    violation = math.sin(p.g * p.T / 2) ** 2
    if violation > DECOUPLING_TOL:
        raise DecouplingViolation(f"sin(gT/2)^2 = {violation:.3e}; T must be a multiple of 2*pi/g")
    dims = (2, 2, 2)
    return _bell_probe('fe_cnot', p, with_ancilla(h_cnot(p)), dims,
                       basis_state((0, 0, 0), dims), ArccosEstimator(1.0 / p.T), shared_draws)


def build_ce_swap(p):
    """
    Control-enhanced strategy on the SWAP degenerate eigen-subspace.

    The system starts excited, so a single RY on the ancilla prepares the
    probe |+>|1>|0>. It is rotated by half a SWAP period into |01>+i|10>,
    mapped by S X on the system onto |00>+|11> where the interaction only
    contributes a global phase, precesses for T', and is read out after a
    Y0X1 rotation and a quarter SWAP period. Outcomes are ordered
    |0+>, |0->, |1+>, |1-> on (ancilla, system).
    """
    gates = gate_library()
    dims = (2, 2, 2)
    hamiltonian = with_ancilla(h_swap(p))
    builder = _Builder(dims)
    builder.pulse(rotation('RY', math.pi / 2), (0,), 'prep-ry')
    builder.precess(hamiltonian, math.pi / (4 * p.g), 'precession-in')
    builder.pulse(gates['X'], (1,), 'control-x')
    builder.pulse(gates['S'], (1,), 'control-s')
    builder.precess(hamiltonian, p.T_prime, 'precession')
    builder.pulse(gates['YX'], (0, 1), 'control-yx')
    builder.precess(hamiltonian, math.pi / (2 * p.g), 'precession-out')
    builder.pulse(gates['H'], (1,), 'readout-h')

    observable = _observable(-np.kron(PAULI_Z, PAULI_X), (0, 1), dims)
    return Strategy('ce_swap', p, builder.segments, basis_state((0, 1, 0), dims), (0, 1),
                    np.array([-1.0, 1.0, 1.0, -1.0]), observable,
                    ArccosEstimator(1.0 / p.T_prime), p.T)


def _ansatz_gates(ansatz, inverse=False):
    layers = [rotation(name, float(theta)) for (name, _), theta in zip(ANSATZ_LAYOUT, ansatz)]
    targets = [t for _, t in ANSATZ_LAYOUT]
    if inverse:
        layers = [rotation(g.name, -2 * g.phase if g.name in ('RX', 'RY') else -g.phase)
                  for g in reversed(layers)]
        targets = list(reversed(targets))
    return list(zip(layers, targets))


def build_ce_cnot(p, ansatz, control=(), branch=None, clamp=True):
    """
    Control-enhanced strategy under CNOT coupling.

    U(p) prepares the probe, an intermediate control V splits the
    interrogation in two halves, and U(p)^dagger precedes the measurement of
    Z0 Z1 / 2. The fitted estimator is used on the prior-knowledge branch K.
    """
    ansatz = [float(a) for a in ansatz]
    if len(ansatz) != len(ANSATZ_LAYOUT):
        raise ValidationError(f"CNOT ansatz needs {len(ANSATZ_LAYOUT)} parameters, got {len(ansatz)}")

    dims = (2, 2, 2)
    hamiltonian = with_ancilla(h_cnot(p))
    builder = _Builder(dims)
    for i, (gate, targets) in enumerate(_ansatz_gates(ansatz)):
        builder.pulse(gate, targets, f'prep-{i}')
    builder.precess(hamiltonian, p.T / 2, 'precession-a')
    for i, spec in enumerate(control):
        gate, targets = gate_from_spec(spec)
        builder.pulse(gate, targets, f'control-{i}')
    builder.precess(hamiltonian, p.T / 2, 'precession-b')
    readout = _ansatz_gates(ansatz, inverse=True)
    for i, (gate, targets) in enumerate(readout):
        builder.pulse(gate, targets, f'readout-{i}')

    frame = np.eye(8, dtype=complex)
    for gate, targets in readout:
        frame = embed(gate.unitary(), targets, dims) @ frame
    measured = embed(np.kron(PAULI_Z, PAULI_Z) / 2, (0, 1), dims)
    observable = frame.conj().T @ measured @ frame
    observable = Operator((observable + observable.conj().T) / 2, dims, hermitian=True)

    if branch is None:
        branch = cnot_branch(p.omega, p.T)
    return Strategy('ce_cnot', p, builder.segments, basis_state((0, 0, 0), dims), (0, 1),
                    np.array([0.5, -0.5, -0.5, 0.5]), observable,
                    FittedCnotEstimator(p.T, int(branch), clamp=clamp), p.T)


def _multilevel(name, p, env, stabilized_modes, dimension_cap):
    if env.kind != 'phonon':
        raise ValidationError("Multi-level strategies need a phonon environment")
    modes = env.mode_count
    stabilized = int(stabilized_modes)
    if not 0 <= stabilized <= modes:
        raise ValidationError(f"Cannot stabilize {stabilized} of {modes} modes")

    dims = (2, 2) + (env.fock_dim,) * modes
    hamiltonian = with_ancilla(electron_phonon(p.omega, env.couplings, env.fock_dim, dimension_cap))

    # couplings are sorted, so the first modes are the largest
    preparation = []
    if stabilized:
        gate = des_preparation(env.fock_dim)
        preparation = [(gate, (2 + nu,), f'prep-des-{nu}') for nu in range(stabilized)]

    logger.info(f"Built {name} on {modes} phonon mode(s)",
                extra={'fock_dim': env.fock_dim, 'stabilized_modes': stabilized,
                       'dimension': int(np.prod(dims))})
    return _bell_probe(name, p, hamiltonian, dims, basis_state((0,) * len(dims), dims),
                       ArccosEstimator(1.0 / p.T), preparation=preparation)


def build_ce_multilevel(p, env, stabilized_modes=1, dimension_cap=DEFAULT_DIMENSION_CAP):
    """Bell probe with the `stabilized_modes` largest-coupling phonon modes rotated into their degenerate eigen-subspace"""
    return _multilevel('ce_multilevel', p, env, stabilized_modes, dimension_cap)


def build_fe_multilevel(p, env, dimension_cap=DEFAULT_DIMENSION_CAP):
    """Bell probe with every phonon mode in vacuum"""
    return _multilevel('fe_multilevel', p, env, 0, dimension_cap)


BUILDERS = {
    'fe_swap': build_fe_swap,
    'ce_swap': build_ce_swap,
    'fe_cnot': build_fe_cnot,
    'ce_cnot': build_ce_cnot,
    'ce_multilevel': build_ce_multilevel,
    'fe_multilevel': build_fe_multilevel,
}


def _check_draw(strategy, draw):
    if draw is None:
        return DilationDraw.zeros(strategy.timed_op_count)
    if len(draw) != strategy.timed_op_count:
        raise DrawLengthMismatch(f"{strategy.name} needs {strategy.timed_op_count} dilations, got {len(draw)}")
    return draw


def trajectory(strategy, draw=None):
    """Yield (segment, state) after every segment of the dilated circuit"""
    draw = _check_draw(strategy, draw)
    vector = strategy.initial_state.amplitudes
    for segment in strategy.segments:
        vector = segment.apply(vector, draw[segment.slot])
        yield segment, StateVector(vector / np.linalg.norm(vector), strategy.subsystem_dims)


def state_after(strategy, label, draw=None):
    for segment, state in trajectory(strategy, draw):
        if segment.label == label:
            return state
    raise ValidationError(f"Strategy {strategy.name} has no segment '{label}'")


def final_state(strategy, draw=None):
    draw = _check_draw(strategy, draw)
    vector = strategy.initial_state.amplitudes
    for segment in strategy.segments:
        vector = segment.apply(vector, draw[segment.slot])
    return StateVector(vector / np.linalg.norm(vector), strategy.subsystem_dims)


def outcome_probabilities(strategy, draw=None):
    """Outcome law of the measured subsystems for one dilation draw"""
    state = final_state(strategy, draw)
    return marginal_probabilities(state, strategy.measured)


def _shared_average(run, rho, law, nodes):
    width = sum(abs(s.nominal) * s.spectral_width for s in run)
    knots, weights = law.nodes(law.node_count(width, nodes))
    averaged = np.zeros_like(rho)
    for u, weight in zip(knots, weights):
        unitary = np.eye(rho.shape[0], dtype=complex)
        for segment in run:
            unitary = segment.unitary(u) @ unitary
        averaged += weight * (unitary @ rho @ unitary.conj().T)
    return averaged


def averaged_probabilities(strategy, law, nodes=8, method='channel'):
    """
    Outcome law averaged over i.i.d. dilations drawn from `law`.

    'channel' composes the averaged channel of every slot; 'tensor' applies a
    tensor-product rule over all slots and is meant for cross-checks.
    """
    if method == 'tensor':
        integrand = lambda u: outcome_probabilities(strategy, DilationDraw(u))
        p = tensor_quadrature(law, integrand, strategy.timed_op_count, nodes)
        return np.clip(np.real(p), 0.0, None)
    if method != 'channel':
        raise ValidationError(f"Unknown averaging method '{method}'")

    psi = strategy.initial_state.amplitudes
    rho = np.outer(psi, psi.conj())
    for run in strategy.slot_runs():
        if len(run) == 1:
            rho = run[0].average(rho, law)
        else:
            rho = _shared_average(run, rho, law, nodes)
    p = marginal_probabilities(rho, strategy.measured, strategy.subsystem_dims)
    return np.clip(np.real(p), 0.0, None)


def mean_outcome(strategy, probabilities):
    return float(np.dot(probabilities, strategy.outcome_values))


def run_once(strategy, draw, shots, rng=None, mode='sampled'):
    """
    One nu-shot experiment under a dilation draw.

    `draw` may also be a sequence of draws; the outcome law is then the
    average over the pool, i.e. every shot sees one of the pooled dilations.
    """
    if shots < 1:
        raise ValidationError(f"Shot count must be at least 1, got {shots}")

    draws = [draw] if draw is None or isinstance(draw, DilationDraw) else list(draw)
    p = np.mean([outcome_probabilities(strategy, d) for d in draws], axis=0)

    if mode == 'exact':
        x_bar = mean_outcome(strategy, p)
    elif mode == 'sampled':
        if rng is None:
            raise ValidationError("Sampled runs need a random generator")
        counts = sample_counts(p, shots, rng)
        x_bar = float(np.dot(counts, strategy.outcome_values) / shots)
    else:
        raise ValidationError(f"Unknown run mode '{mode}'")

    clamped = strategy.estimator.out_of_domain(x_bar)
    if clamped:
        logger.warning(f"Clamped mean outcome {x_bar:.6f} for {strategy.name}",
                       extra={'strategy': strategy.name, 'mean_outcome': x_bar})
    return RunOutcome(x_bar, int(shots), strategy.estimator(x_bar),
                      p if mode == 'exact' else None, clamped)


def observable_value(strategy, draw=None):
    """<O> on the state right after the last precession, the quantity the estimator inverts"""
    last = [s.label for s in strategy.segments if s.kind == 'precession'][-1]
    return expectation(state_after(strategy, last, draw), strategy.observable)


def observable_trace(strategy, label, durations):
    """<O> at u = 0 as the named precession is stretched over `durations`"""
    return np.array([observable_value(strategy.with_duration(label, duration))
                     for duration in durations])


def bell_probe_qfi(build, p, label='precession', step=1e-6):
    """Pure-state QFI with respect to omega of the probe right after `label`"""
    def state(omega):
        return state_after(build(p.with_omega(omega)), label).amplitudes

    psi = state(p.omega)
    derivative = (state(p.omega + step) - state(p.omega - step)) / (2 * step)
    return float(4 * (np.vdot(derivative, derivative).real - abs(np.vdot(psi, derivative)) ** 2))


def ideal_ce_probabilities(omega, T_prime):
    """Outcome law of the CE-SWAP circuit without leakage or TDI"""
    s = math.sin(omega * T_prime / 2) ** 2
    c = math.cos(omega * T_prime / 2) ** 2
    return np.array([s / 2, c / 2, c / 2, s / 2])
