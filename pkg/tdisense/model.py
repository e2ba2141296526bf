"""
Physical parameters, Hamiltonians and the gate library.

Three settings are covered: a qubit environment coupled through SWAP or CNOT,
and a single electron level coupled to truncated phonon modes.
"""
from dataclasses import dataclass, replace
import logging
import math

import numpy as np

from tdisense.errors import DimensionOverflow, ValidationError
from tdisense.qcore import Operator, identity, kron, matexp_hermitian, operator_norm

logger = logging.getLogger('tdisense.model')

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
NUMBER = np.diag([0.0, 1.0]).astype(complex)

SWAP_MATRIX = np.array([[1, 0, 0, 0],
                        [0, 0, 1, 0],
                        [0, 1, 0, 0],
                        [0, 0, 0, 1]], dtype=complex)
CNOT_MATRIX = np.array([[1, 0, 0, 0],
                        [0, 1, 0, 0],
                        [0, 0, 0, 1],
                        [0, 0, 1, 0]], dtype=complex)

STRONG_COUPLING_RATIO = 100.0
DEFAULT_DIMENSION_CAP = 4096
ZERO_EIGENVALUE_TOL = 1e-10


@dataclass(frozen=True)
class PhysicalParams:
    """Frequency omega, coupling g and interrogation time T"""
    omega: float
    g: float
    T: float

    def __post_init__(self):
        if not self.g > 0:
            raise ValidationError(f"Coupling g must be positive, got {self.g}")
        if not self.T > 3 * math.pi / (4 * self.g):
            raise ValidationError(f"T={self.T} must exceed 3*pi/(4g)={3 * math.pi / (4 * self.g):.6g}")

    @property
    def Omega(self):
        return math.sqrt(self.g ** 2 + self.omega ** 2 / 4)

    @property
    def Omega_prime(self):
        return math.sqrt(4 * self.g ** 2 + self.omega ** 2)

    @property
    def T_prime(self):
        """Duration of the long protected precession in the CE-SWAP circuit"""
        return self.T - 3 * math.pi / (4 * self.g)

    @property
    def eps_star(self):
        """TDI level above which free evolution cannot hold the decoupling time"""
        return math.pi / (2 * self.Omega * self.T)

    @property
    def strong_coupling(self):
        return self.g >= STRONG_COUPLING_RATIO * abs(self.omega)

    def with_omega(self, omega):
        return replace(self, omega=float(omega))

    def to_dict(self):
        return {'omega': self.omega, 'g': self.g, 'T': self.T}


@dataclass(frozen=True, eq=False)
class Gate:
    """exp(-i * phase * generator) with a unit-norm Hermitian generator"""
    name: str
    generator: np.ndarray
    phase: float

    def __post_init__(self):
        generator = Operator(self.generator, hermitian=True)
        norm = operator_norm(generator)
        if abs(norm - 1.0) > 1e-12:
            raise ValidationError(f"Gate {self.name} generator has norm {norm}, expected 1")
        object.__setattr__(self, 'generator', generator.entries)

    @property
    def qubits(self):
        return int(round(math.log2(self.generator.shape[0])))

    def unitary(self, dilation=0.0):
        return matexp_hermitian(Operator(self.generator, hermitian=True),
                                self.phase * (1.0 + dilation)).entries


def rotation(name, theta):
    """R_X, R_Y (exp(-i theta P/2)) and R_XX, R_ZZ (exp(-i theta PP))"""
    if name == 'RX':
        return Gate('RX', PAULI_X, theta / 2)
    if name == 'RY':
        return Gate('RY', PAULI_Y, theta / 2)
    if name == 'RXX':
        return Gate('RXX', np.kron(PAULI_X, PAULI_X), theta)
    if name == 'RZZ':
        return Gate('RZZ', np.kron(PAULI_Z, PAULI_Z), theta)
    raise ValidationError(f"Unknown rotation '{name}'")


def _fixed_gates():
    minus = np.array([[1, -1], [-1, 1]], dtype=complex) / 2
    return {
        'H': Gate('H', (PAULI_X + PAULI_Z) / math.sqrt(2), math.pi / 2),
        'S': Gate('S', PAULI_Z, math.pi / 4),
        'X': Gate('X', PAULI_X, math.pi / 2),
        'Y': Gate('Y', PAULI_Y, math.pi / 2),
        'Z': Gate('Z', PAULI_Z, math.pi / 2),
        'CNOT': Gate('CNOT', np.kron(NUMBER, minus), math.pi),
        'SWAP': Gate('SWAP', (np.eye(4) - SWAP_MATRIX) / 2, math.pi),
        'YX': Gate('YX', np.kron(PAULI_Y, PAULI_X), math.pi / 4),
    }


_GATES = _fixed_gates()


def gate_library():
    """Named gates plus rotation factories, each carrying generator and nominal phase"""
    library = dict(_GATES)
    for name in ('RX', 'RY', 'RXX', 'RZZ'):
        library[name] = (lambda theta, name=name: rotation(name, theta))
    return library


def gate_from_spec(spec):
    """Build (gate, targets) from a config entry such as {'gate': 'RX', 'theta': 0.3, 'targets': [1]}"""
    name = spec.get('gate')
    targets = tuple(spec.get('targets', ()))
    if name in ('RX', 'RY', 'RXX', 'RZZ'):
        gate = rotation(name, float(spec['theta']))
    elif name in _GATES:
        gate = _GATES[name]
    else:
        raise ValidationError(f"Unknown gate '{name}'")
    if len(targets) != gate.qubits:
        raise ValidationError(f"Gate {name} acts on {gate.qubits} qubit(s), got targets {list(targets)}")
    return gate, targets


def h_swap(p):
    """(omega/2) Z x I + g SWAP on system x environment"""
    entries = 0.5 * p.omega * np.kron(PAULI_Z, I2) + p.g * SWAP_MATRIX
    return Operator(entries, (2, 2), hermitian=True)


def h_cnot(p):
    """(omega/2) Z x I + g CNOT, control on the system qubit"""
    entries = 0.5 * p.omega * np.kron(PAULI_Z, I2) + p.g * CNOT_MATRIX
    return Operator(entries, (2, 2), hermitian=True)


def annihilation(fock_dim):
    return np.diag(np.sqrt(np.arange(1, fock_dim)), k=1).astype(complex)


def quadrature_operator(fock_dim):
    """Truncated b + b^dagger"""
    b = annihilation(fock_dim)
    return b + b.conj().T


def electron_phonon(omega, couplings, fock_dim, dimension_cap=DEFAULT_DIMENSION_CAP):
    """omega n x I + sum_nu g_nu n x (b_nu + b_nu^dagger) on electron x phonon modes"""
    couplings = [float(c) for c in couplings]
    if fock_dim < 2:
        raise ValidationError(f"Fock truncation must be at least 2, got {fock_dim}")
    if any(c < 0 for c in couplings):
        raise ValidationError("Phonon couplings must be non-negative")

    modes = len(couplings)
    dim = 2 * fock_dim ** modes
    if dim > dimension_cap:
        raise DimensionOverflow(f"Electron-phonon space has dimension {dim} > cap {dimension_cap}")

    bath_dim = fock_dim ** modes
    quad = quadrature_operator(fock_dim)
    coupling = np.zeros((bath_dim, bath_dim), dtype=complex)
    for nu, g_nu in enumerate(couplings):
        left = np.eye(fock_dim ** nu)
        right = np.eye(fock_dim ** (modes - nu - 1))
        coupling += g_nu * np.kron(np.kron(left, quad), right)

    entries = omega * np.kron(NUMBER, np.eye(bath_dim)) + np.kron(NUMBER, coupling)
    logger.debug(f"Built electron-phonon Hamiltonian of dimension {dim}",
                 extra={'modes': modes, 'fock_dim': fock_dim})
    return Operator(entries, (2,) + (fock_dim,) * modes, hermitian=True)


def des_mode_state(fock_dim):
    """Zero-eigenvalue eigenvector of the truncated quadrature b + b^dagger"""
    values, vectors = np.linalg.eigh(quadrature_operator(fock_dim))
    index = int(np.argmin(np.abs(values)))
    if abs(values[index]) > ZERO_EIGENVALUE_TOL:
        raise ValidationError(f"Truncation {fock_dim} has no zero quadrature eigenvalue; use an odd dimension")
    vector = vectors[:, index]
    pivot = vector[np.argmax(np.abs(vector))]
    return vector * (abs(pivot) / pivot)


def vacuum_state(fock_dim):
    vector = np.zeros(fock_dim, dtype=complex)
    vector[0] = 1.0
    return vector


def des_preparation(fock_dim):
    """
    Rotation of one mode from vacuum onto its zero quadrature eigenvector.

    The generator acts as Y on span{|0>, |w>}, where |w> is the part of the
    target orthogonal to vacuum, so the rotation angle never exceeds pi/2.
    """
    vacuum = vacuum_state(fock_dim)
    target = des_mode_state(fock_dim)
    overlap = np.vdot(vacuum, target)
    target = target * (abs(overlap) / overlap)
    c = min(1.0, abs(overlap))
    residual = target - c * vacuum
    w = residual / np.linalg.norm(residual)
    generator = 1j * np.outer(w, vacuum.conj()) - 1j * np.outer(vacuum, w.conj())
    return Gate('DES', generator, math.acos(c))


@dataclass(frozen=True)
class EnvironmentSpec:
    """Qubit environment or a set of truncated phonon modes"""
    kind: str = 'qubit'
    couplings: tuple = ()
    fock_dim: int = 3

    def __post_init__(self):
        if self.kind not in ('qubit', 'phonon'):
            raise ValidationError(f"Unknown environment kind '{self.kind}'")
        if self.kind == 'phonon':
            couplings = tuple(float(c) for c in self.couplings)
            if not couplings:
                raise ValidationError("Phonon environment needs at least one mode")
            if self.fock_dim < 2:
                raise ValidationError(f"Fock truncation must be at least 2, got {self.fock_dim}")
            if any(c <= 0 for c in couplings):
                raise ValidationError("Phonon couplings must be strictly positive")
            if any(a < b for a, b in zip(couplings, couplings[1:])):
                raise ValidationError("Phonon couplings must be listed in decreasing order")
            object.__setattr__(self, 'couplings', couplings)

    @classmethod
    def qubit(cls):
        return cls('qubit')

    @classmethod
    def phonon_modes(cls, couplings, fock_dim=3):
        return cls('phonon', tuple(couplings), int(fock_dim))

    @property
    def mode_count(self):
        return len(self.couplings) if self.kind == 'phonon' else 1

    def with_fock_dim(self, fock_dim):
        return replace(self, fock_dim=int(fock_dim))

    def to_dict(self):
        return {'kind': self.kind, 'couplings': list(self.couplings), 'fock_dim': self.fock_dim}


def with_ancilla(h, ancilla_dim=2):
    """Idle ancilla in front of a system x environment Hamiltonian"""
    return kron(identity(ancilla_dim), h)
