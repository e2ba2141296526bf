"""
Dense complex linear algebra and quantum-state primitives.

Joint states are ordered (ancilla, system, environment...) and every type is
an immutable value after construction, so the helpers below can be shared
freely between worker threads.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from tdisense.errors import (BadSubsystemIndex, DimMismatch, InvalidDistribution,
                             NonHermitianInput, NonUnitaryInput)

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
NORM_TOL = 1e-10
IMAG_TOL = 1e-10
PROBABILITY_SUM_TOL = 1e-8
PROBABILITY_NEGATIVE_TOL = 1e-10


def _frozen_array(values, ndim):
    array = np.array(values, dtype=complex, copy=True)
    if array.ndim != ndim:
        raise DimMismatch(f"Expected a {ndim}-d array, got shape {array.shape}")
    array.setflags(write=False)
    return array


def _resolve_dims(subsystem_dims, dim):
    if subsystem_dims is None:
        return (dim,)
    dims = tuple(int(d) for d in subsystem_dims)
    if any(d < 1 for d in dims) or int(np.prod(dims)) != dim:
        raise DimMismatch(f"Subsystem dims {dims} do not multiply to {dim}")
    return dims


def _is_hermitian(entries):
    scale = max(1.0, float(np.max(np.abs(entries))))
    return bool(np.allclose(entries, entries.conj().T, rtol=0.0, atol=HERMITIAN_TOL * scale))


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense square matrix tagged with its subsystem structure"""
    entries: np.ndarray
    subsystem_dims: tuple = None
    hermitian: bool = False
    unitary: bool = False

    # numpy scalars defer to __rmul__
    __array_ufunc__ = None

    def __post_init__(self):
        entries = _frozen_array(self.entries, 2)
        if entries.shape[0] != entries.shape[1]:
            raise DimMismatch(f"Operator must be square, got shape {entries.shape}")
        object.__setattr__(self, 'entries', entries)
        object.__setattr__(self, 'subsystem_dims', _resolve_dims(self.subsystem_dims, entries.shape[0]))

        if self.hermitian and not _is_hermitian(entries):
            raise NonHermitianInput()
        if self.unitary:
            deviation = operator_norm(entries @ entries.conj().T - np.eye(self.dim))
            if deviation > UNITARY_TOL:
                raise NonUnitaryInput(f"U U^dagger deviates from identity by {deviation:.3e}")

    @property
    def dim(self):
        return self.entries.shape[0]

    def dag(self):
        return Operator(self.entries.conj().T, self.subsystem_dims, self.hermitian, self.unitary)

    @cached_property
    def spectrum(self):
        """Eigenvalues and eigenvectors of a Hermitian operator (cached)"""
        require_hermitian(self)
        return np.linalg.eigh(self.entries)

    def evolve(self, vector, phase):
        """Apply exp(-i*phase*self) to a raw amplitude vector or matrix of columns"""
        values, vectors = self.spectrum
        rotated = vectors.conj().T @ vector
        factors = np.exp(-1j * phase * values)
        if rotated.ndim == 1:
            return vectors @ (factors * rotated)
        return vectors @ (factors[:, None] * rotated)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            if other.dim != self.dim:
                raise DimMismatch(f"Cannot multiply {self.dim}x{self.dim} by {other.dim}x{other.dim}")
            return Operator(self.entries @ other.entries, self.subsystem_dims,
                            unitary=self.unitary and other.unitary)
        if isinstance(other, StateVector):
            if other.dim != self.dim:
                raise DimMismatch(f"Cannot apply {self.dim}-dim operator to {other.dim}-dim state")
            return StateVector(self.entries @ other.amplitudes, other.subsystem_dims)
        return NotImplemented

    def __add__(self, other):
        if other.dim != self.dim:
            raise DimMismatch(f"Cannot add {self.dim}- and {other.dim}-dim operators")
        return Operator(self.entries + other.entries, self.subsystem_dims,
                        hermitian=self.hermitian and other.hermitian)

    def __mul__(self, scalar):
        hermitian = self.hermitian and np.isreal(scalar)
        return Operator(self.entries * scalar, self.subsystem_dims, hermitian=bool(hermitian))

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state of the joint register"""
    amplitudes: np.ndarray
    subsystem_dims: tuple = None

    def __post_init__(self):
        amplitudes = _frozen_array(self.amplitudes, 1)
        object.__setattr__(self, 'amplitudes', amplitudes)
        object.__setattr__(self, 'subsystem_dims', _resolve_dims(self.subsystem_dims, amplitudes.shape[0]))
        norm = np.linalg.norm(amplitudes)
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidDistribution(f"State norm {norm:.12f} differs from 1")

    @property
    def dim(self):
        return self.amplitudes.shape[0]

    def density(self):
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.subsystem_dims)

    def overlap(self, other):
        """Global-phase invariant overlap |<self|other>|"""
        if other.dim != self.dim:
            raise DimMismatch(f"Cannot compare {self.dim}- and {other.dim}-dim states")
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray
    subsystem_dims: tuple = None

    def __post_init__(self):
        entries = _frozen_array(self.entries, 2)
        if entries.shape[0] != entries.shape[1]:
            raise DimMismatch(f"Density matrix must be square, got shape {entries.shape}")
        object.__setattr__(self, 'entries', entries)
        object.__setattr__(self, 'subsystem_dims', _resolve_dims(self.subsystem_dims, entries.shape[0]))

        trace = np.trace(entries)
        if abs(trace - 1.0) > NORM_TOL:
            raise InvalidDistribution(f"Density matrix trace {trace.real:.12f} differs from 1")
        if not _is_hermitian(entries):
            raise NonHermitianInput("Density matrix is not Hermitian")
        if np.min(np.linalg.eigvalsh(entries)) < -PROBABILITY_NEGATIVE_TOL:
            raise InvalidDistribution("Density matrix has a negative eigenvalue")

    @property
    def dim(self):
        return self.entries.shape[0]


def identity(dim, subsystem_dims=None):
    return Operator(np.eye(dim), subsystem_dims, hermitian=True, unitary=True)


def basis_state(indices, subsystem_dims):
    """Computational basis state |i0 i1 ...> over the given factors"""
    if len(indices) != len(subsystem_dims):
        raise DimMismatch(f"{len(indices)} indices for {len(subsystem_dims)} subsystems")
    flat = int(np.ravel_multi_index(tuple(indices), tuple(subsystem_dims)))
    amplitudes = np.zeros(int(np.prod(subsystem_dims)), dtype=complex)
    amplitudes[flat] = 1.0
    return StateVector(amplitudes, subsystem_dims)


def require_hermitian(op):
    if not op.hermitian and not _is_hermitian(op.entries):
        raise NonHermitianInput()


def kron(a, b):
    """Tensor product of two operators, states or density matrices"""
    dims = tuple(a.subsystem_dims) + tuple(b.subsystem_dims)
    if isinstance(a, Operator) and isinstance(b, Operator):
        return Operator(np.kron(a.entries, b.entries), dims,
                        hermitian=a.hermitian and b.hermitian,
                        unitary=a.unitary and b.unitary)
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector(np.kron(a.amplitudes, b.amplitudes), dims)
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(np.kron(a.entries, b.entries), dims)
    raise DimMismatch(f"Cannot take kron of {type(a).__name__} and {type(b).__name__}")


def embed(matrix, targets, subsystem_dims):
    """Lift a matrix acting on `targets` (in the given order) to the full register"""
    dims = tuple(subsystem_dims)
    targets = tuple(targets)
    n = len(dims)
    if len(set(targets)) != len(targets) or any(t < 0 or t >= n for t in targets):
        raise BadSubsystemIndex(f"Targets {targets} invalid for {n} subsystems")

    rest = tuple(i for i in range(n) if i not in targets)
    local_dim = int(np.prod([dims[t] for t in targets]))
    if matrix.shape != (local_dim, local_dim):
        raise DimMismatch(f"Matrix of shape {matrix.shape} does not act on targets {targets}")

    rest_dim = int(np.prod([dims[i] for i in rest])) if rest else 1
    full = np.kron(matrix, np.eye(rest_dim))
    order = targets + rest
    permuted_dims = [dims[i] for i in order]
    tensor = full.reshape(permuted_dims + permuted_dims)
    axes = [order.index(i) for i in range(n)]
    tensor = tensor.transpose(axes + [n + a for a in axes])
    total = int(np.prod(dims))
    return tensor.reshape(total, total)


def matexp_hermitian(h, phase):
    """exp(-i*phase*h) through the eigendecomposition of h"""
    require_hermitian(h)
    if not np.isfinite(phase):
        raise NonHermitianInput(f"Phase must be finite, got {phase}")
    values, vectors = np.linalg.eigh(h.entries)
    entries = (vectors * np.exp(-1j * phase * values)) @ vectors.conj().T
    return Operator(entries, h.subsystem_dims, unitary=True)


def _check_keep(keep, n):
    keep = tuple(sorted(set(int(k) for k in keep)))
    if not keep or keep[0] < 0 or keep[-1] >= n:
        raise BadSubsystemIndex(f"Cannot keep subsystems {keep} of {n}")
    return keep


def partial_trace(rho, keep):
    """Reduced density matrix over the kept subsystems (ascending order)"""
    if isinstance(rho, StateVector):
        rho = rho.density()
    dims = rho.subsystem_dims
    n = len(dims)
    keep = _check_keep(keep, n)

    tensor = rho.entries.reshape(dims + dims)
    rows = list(range(n))
    cols = [n + i if i in keep else i for i in range(n)]
    out = [i for i in keep] + [n + i for i in keep]
    reduced = np.einsum(tensor, rows + cols, out)
    kept_dims = tuple(dims[i] for i in keep)
    size = int(np.prod(kept_dims))
    return DensityMatrix(reduced.reshape(size, size), kept_dims)


def marginal_probabilities(state, keep, subsystem_dims=None):
    """Computational-basis outcome law of the kept subsystems"""
    if isinstance(state, StateVector):
        weights, dims = np.abs(state.amplitudes) ** 2, state.subsystem_dims
    elif isinstance(state, DensityMatrix):
        weights, dims = np.real(np.diag(state.entries)), state.subsystem_dims
    else:
        array = np.asarray(state)
        weights = np.real(np.diag(array)) if array.ndim == 2 else np.abs(array) ** 2
        dims = tuple(subsystem_dims)
    keep = _check_keep(keep, len(dims))
    traced = tuple(i for i in range(len(dims)) if i not in keep)
    return weights.reshape(dims).sum(axis=traced).reshape(-1)


def expectation(state, obs):
    """Tr(rho O) for a Hermitian observable"""
    if state.dim != obs.dim:
        raise DimMismatch(f"State dimension {state.dim} does not match observable {obs.dim}")
    require_hermitian(obs)

    if isinstance(state, StateVector):
        value = np.vdot(state.amplitudes, obs.entries @ state.amplitudes)
    else:
        value = np.einsum('ij,ji->', state.entries, obs.entries)

    if abs(value.imag) > IMAG_TOL * max(1.0, operator_norm(obs)):
        raise NonHermitianInput(f"Expectation value has imaginary part {value.imag:.3e}")
    return float(value.real)


def _validated_probabilities(probabilities):
    p = np.asarray(probabilities, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidDistribution("Probabilities must be a non-empty vector")
    if np.any(p < -PROBABILITY_NEGATIVE_TOL):
        raise InvalidDistribution(f"Negative probability {p.min():.3e}")
    if abs(p.sum() - 1.0) > PROBABILITY_SUM_TOL:
        raise InvalidDistribution(f"Probabilities sum to {p.sum():.12f}")
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def sample_outcome(probabilities, rng):
    """Draw a single outcome index"""
    p = _validated_probabilities(probabilities)
    return int(rng.choice(p.size, p=p))


def sample_counts(probabilities, shots, rng):
    """Outcome counts of `shots` independent draws"""
    p = _validated_probabilities(probabilities)
    return rng.multinomial(int(shots), p)


def operator_norm(a):
    """Largest singular value"""
    entries = a.entries if isinstance(a, (Operator, DensityMatrix)) else np.asarray(a)
    return float(np.linalg.norm(entries, 2))
