"""
Time-domain imperfections (TDI).

Every experimenter-set duration or pulse phase t is replaced by t(1+u), with u
drawn from a bounded law f supported on [-eps, eps].
"""
from dataclasses import dataclass
import itertools
import math

import numpy as np

from tdisense.errors import InvalidDistribution

DELTA = 'delta'
UNIFORM = 'uniform'
DISCRETE = 'discrete'
KINDS = (DELTA, UNIFORM, DISCRETE)

SUPPORT_TOL = 1e-15
WEIGHT_TOL = 1e-12
MAX_NODES = 256


def _within_support(values, epsilon):
    return bool(np.all(np.abs(values) <= epsilon * (1.0 + 1e-12) + SUPPORT_TOL))


@dataclass(frozen=True, eq=False)
class TdiDistribution:
    """Bounded law of the dilation u"""
    kind: str
    epsilon: float
    xi: float = 0.0
    points: tuple = ()
    weights: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidDistribution(f"Unknown distribution kind '{self.kind}'")
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise InvalidDistribution(f"Support bound must be finite and non-negative, got {self.epsilon}")

        if self.kind == DELTA and not _within_support(self.xi, self.epsilon):
            raise InvalidDistribution(f"Delta at {self.xi} lies outside [-{self.epsilon}, {self.epsilon}]")

        if self.kind == DISCRETE:
            points = tuple(float(p) for p in self.points)
            weights = tuple(float(w) for w in self.weights)
            if not points or len(points) != len(weights):
                raise InvalidDistribution("Discrete law needs matching, non-empty points and weights")
            if not _within_support(np.array(points), self.epsilon):
                raise InvalidDistribution("Discrete support leaves [-eps, eps]")
            if min(weights) < 0 or abs(sum(weights) - 1.0) > WEIGHT_TOL:
                raise InvalidDistribution(f"Weights must be non-negative and sum to 1, got {sum(weights)!r}")
            object.__setattr__(self, 'points', points)
            object.__setattr__(self, 'weights', weights)

    @classmethod
    def delta(cls, xi, epsilon=None):
        return cls(DELTA, abs(xi) if epsilon is None else epsilon, xi=float(xi))

    @classmethod
    def uniform(cls, epsilon):
        return cls(UNIFORM, float(epsilon))

    @classmethod
    def discrete(cls, points, weights, epsilon=None):
        if epsilon is None:
            epsilon = float(np.max(np.abs(points)))
        return cls(DISCRETE, float(epsilon), points=tuple(points), weights=tuple(weights))

    @property
    def is_point_mass(self):
        return (self.kind == DELTA
                or (self.kind == UNIFORM and self.epsilon == 0.0)
                or (self.kind == DISCRETE and len(set(self.points)) == 1))

    @property
    def label(self):
        if self.kind == DELTA:
            return f"delta(xi={self.xi:.6g})"
        if self.kind == UNIFORM:
            return f"uniform(eps={self.epsilon:.6g})"
        return f"discrete(n={len(self.points)}, eps={self.epsilon:.6g})"

    def nodes(self, count=8):
        """Quadrature points and weights of f (Gauss-Legendre for the uniform law)"""
        if self.kind == DELTA:
            return np.array([self.xi]), np.array([1.0])
        if self.kind == DISCRETE:
            return np.array(self.points), np.array(self.weights)
        if self.epsilon == 0.0:
            return np.array([0.0]), np.array([1.0])
        knots, weights = np.polynomial.legendre.leggauss(int(count))
        return self.epsilon * knots, 0.5 * weights

    def node_count(self, phase_rate, base=8):
        """Nodes needed to resolve an integrand oscillating at `phase_rate` per unit u"""
        excursion = abs(phase_rate) * self.epsilon
        return int(min(MAX_NODES, base + math.ceil(2.0 * excursion)))

    def characteristic(self, k):
        """E_f[exp(-i k u)], elementwise over k"""
        k = np.asarray(k, dtype=float)
        if self.kind == DELTA:
            return np.exp(-1j * k * self.xi)
        if self.kind == UNIFORM:
            return np.sinc(k * self.epsilon / np.pi).astype(complex)
        points = np.array(self.points)
        weights = np.array(self.weights)
        return np.tensordot(np.exp(-1j * np.multiply.outer(k, points)), weights, axes=([-1], [0]))

    def to_dict(self):
        data = {'kind': self.kind, 'epsilon': self.epsilon}
        if self.kind == DELTA:
            data['xi'] = self.xi
        elif self.kind == DISCRETE:
            data['points'] = list(self.points)
            data['weights'] = list(self.weights)
        return data

    @classmethod
    def from_dict(cls, data):
        kind = data.get('kind')
        if kind == DELTA:
            return cls.delta(data['xi'], data.get('epsilon'))
        if kind == UNIFORM:
            return cls.uniform(data['epsilon'])
        if kind == DISCRETE:
            return cls.discrete(data['points'], data['weights'], data.get('epsilon'))
        raise InvalidDistribution(f"Unknown distribution kind '{kind}'")


@dataclass(frozen=True, eq=False)
class DilationDraw:
    """One dilation per timed operation (slot) of a strategy"""
    values: np.ndarray
    source_seed: int = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise InvalidDistribution("Dilation values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    def __len__(self):
        return self.values.size

    def __getitem__(self, index):
        return float(self.values[index])

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(int(n)))

    @classmethod
    def constant(cls, n, u):
        return cls(np.full(int(n), float(u)))


def sample(f, n, rng, source_seed=None):
    """n i.i.d. dilations from f"""
    n = int(n)
    if n < 1:
        raise InvalidDistribution(f"Need at least one draw, got {n}")

    if f.kind == DELTA:
        values = np.full(n, f.xi)
    elif f.kind == UNIFORM:
        values = rng.uniform(-f.epsilon, f.epsilon, size=n)
    else:
        values = rng.choice(np.array(f.points), size=n, p=np.array(f.weights))

    # hard support check
    if not _within_support(values, f.epsilon):
        raise InvalidDistribution(f"Sampled dilation outside [-{f.epsilon}, {f.epsilon}]")
    return DilationDraw(values, source_seed)


def dilate(t, u):
    """Actual duration t(1+u) of a nominal duration t"""
    if np.any(np.asarray(t) < 0):
        raise InvalidDistribution(f"Durations must be non-negative, got {t}")
    return t * (1.0 + u)


def quadrature(f, integrand, nodes=8):
    """Integral of f(u) * integrand(u) du; the integrand may be vector valued"""
    knots, weights = f.nodes(nodes)
    values = np.array([integrand(float(u)) for u in knots])
    result = np.tensordot(weights, values, axes=(0, 0))
    return result.item() if result.ndim == 0 else result


def tensor_quadrature(f, integrand, dimension, nodes=8):
    """Tensor-product rule over `dimension` independent dilations"""
    counts = [nodes] * dimension if np.isscalar(nodes) else list(nodes)
    if len(counts) != dimension:
        raise InvalidDistribution(f"Got {len(counts)} node counts for {dimension} dimensions")

    rules = [f.nodes(c) for c in counts]
    total = 0.0
    for combo in itertools.product(*(range(len(rule[0])) for rule in rules)):
        u = np.array([rules[d][0][i] for d, i in enumerate(combo)])
        weight = np.prod([rules[d][1][i] for d, i in enumerate(combo)])
        total = total + weight * np.asarray(integrand(u))
    return total


def worst_case_family(epsilon, rng, delta_points=41, mixtures=64, support=3):
    """Candidate laws for the worst-case bias search"""
    family = [TdiDistribution.delta(xi, epsilon) for xi in np.linspace(-epsilon, epsilon, delta_points)]
    family.append(TdiDistribution.uniform(epsilon))
    if epsilon == 0.0:
        return family

    for _ in range(mixtures):
        points = rng.uniform(-epsilon, epsilon, size=support)
        weights = rng.dirichlet(np.ones(support))
        weights = weights / weights.sum()
        family.append(TdiDistribution.discrete(points, weights, epsilon))
    return family
