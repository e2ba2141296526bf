"""
Analytic bounds for frequency estimation under time-domain imperfections.

Everything here is a pure function of the physical parameters. Returned
values keep the leading terms of each bound; the dropped higher-order
corrections are reported next to them where a caller may want to show them.
"""
from dataclasses import asdict, dataclass
import logging
import math
from typing import NamedTuple

import numpy as np

from tdisense.errors import (CscSingularity, DegenerateKraus, DomainEdge, NonpositiveFisher,
                             ValidationError)
from tdisense.strategies import CNOT_CONTROL_PHASE_BOUND

logger = logging.getLogger('tdisense.bounds')

DEGENERATE_TOL = 1e-12
CSC_TOL = 1e-6
EXPANSION_LIMIT = 0.1
FISHER_FLOOR = 1e-12

# Pulse phases of the CE-SWAP circuit entering the error budget
PREP_PHASE = math.pi / 4
CONTROL_PHASES = 5 * math.pi / 4
READOUT_PHASE = math.pi / 2
HALF_SWAP_PHASES = 3 * math.pi / 4


def hardware_limit(epsilon, omega):
    """Residual systematic error eps^2 omega^2 left by dilating the total interrogation time"""
    return (epsilon * omega) ** 2


def if_reference_mse(shots, T, epsilon, omega):
    """Interaction-free reference 1/(nu T^2) + eps^2 omega^2"""
    return 1.0 / (shots * T ** 2) + hardware_limit(epsilon, omega)


def biased_crb(fisher, shots, bias=0.0, db_domega=0.0):
    """(1 + db/domega)^2 / (nu F) + b^2"""
    if not fisher > 0:
        raise NonpositiveFisher(f"Fisher information must be positive, got {fisher}")
    if shots < 1:
        raise ValidationError(f"Shot count must be at least 1, got {shots}")
    return (1.0 + db_domega) ** 2 / (shots * fisher) + bias ** 2


def opt_bias_mse_lower(fisher, shots, omega, omega0=0.0):
    """
    Minimum of the biased CRB over linear biases b = m (omega - omega0).

    Returns (mse, m*). At omega == omega0 the minimum is 0, reached by the
    fully biased estimator m* = -1.
    """
    if not fisher > 0:
        raise NonpositiveFisher(f"Fisher information must be positive, got {fisher}")
    offset = omega - omega0
    if offset == 0:
        return 0.0, -1.0
    information = shots * fisher
    slope = -1.0 / (1.0 + information * offset ** 2)
    return 1.0 / (information + offset ** -2), slope


@dataclass(frozen=True)
class KrausPair:
    """
    Kraus operators K1 = diag(b, c), K2 = [[0, a], [0, 0]] of the SWAP channel
    with the environment starting in |0>, and their omega-derivatives.
    """
    a: complex
    b: complex
    c: complex
    da: complex
    db: complex
    dc: complex

    def operators(self):
        return (np.array([[self.b, 0], [0, self.c]], dtype=complex),
                np.array([[0, self.a], [0, 0]], dtype=complex))

    def derivatives(self):
        return (np.array([[self.db, 0], [0, self.dc]], dtype=complex),
                np.array([[0, self.da], [0, 0]], dtype=complex))

    @property
    def completeness_error(self):
        total = sum(k.conj().T @ k for k in self.operators())
        return float(np.max(np.abs(total - np.eye(2))))


def kraus_pair(p, xi=0.0):
    t = p.T * (1.0 + xi)
    g, omega, Omega = p.g, p.omega, p.Omega
    s, co = math.sin(t * Omega), math.cos(t * Omega)

    b = np.exp(-0.5j * t * (2 * g + omega))
    c = co + 1j * omega * s / (2 * Omega)
    a = -1j * g * s / Omega

    db = -0.5j * t * b
    da = 1j * g * omega * (s - t * Omega * co) / (4 * Omega ** 3)
    dc = (-t * omega * s / (4 * Omega) + 1j * s / (2 * Omega)
          + 1j * omega ** 2 * t * co / (8 * Omega ** 2) - 1j * omega ** 2 * s / (8 * Omega ** 3))
    return KrausPair(complex(a), complex(b), complex(c), complex(da), complex(db), complex(dc))


def kraus_channel_matrix(kraus, h):
    """A = sum_j dK~_j^dagger dK~_j with dK~_j = dK_j - i sum_k h_jk K_k"""
    h = np.asarray(h, dtype=complex)
    if h.shape != (2, 2) or not np.allclose(h, h.conj().T, atol=1e-12):
        raise ValidationError("Gauge h must be a 2x2 Hermitian matrix")
    operators, derivatives = kraus.operators(), kraus.derivatives()
    A = np.zeros((2, 2), dtype=complex)
    for j in range(2):
        shifted = derivatives[j] - 1j * sum(h[j, k] * operators[k] for k in range(2))
        A += shifted.conj().T @ shifted
    return A


def kraus_trace(kraus, h11, h12, h22):
    """Tr A over (arrays of) gauge parameters; h12 may be complex"""
    h11, h22 = np.asarray(h11, dtype=float), np.asarray(h22, dtype=float)
    h12 = np.asarray(h12, dtype=complex)
    norm = abs(kraus.a) ** 2 + abs(kraus.b) ** 2 + abs(kraus.c) ** 2
    return (np.abs(h12) ** 2 * norm
            + np.abs(kraus.da - 1j * kraus.a * h22) ** 2
            + np.abs(kraus.db - 1j * kraus.b * h11) ** 2
            + np.abs(kraus.dc - 1j * kraus.c * h11) ** 2)


def optimal_gauge(kraus):
    """Gauge minimizing Tr A (h12 = 0)"""
    diagonal = abs(kraus.b) ** 2 + abs(kraus.c) ** 2
    h11 = -(np.conj(kraus.db) * kraus.b + np.conj(kraus.dc) * kraus.c).imag / diagonal
    a2 = abs(kraus.a) ** 2
    h22 = -(np.conj(kraus.da) * kraus.a).imag / a2 if a2 > DEGENERATE_TOL ** 2 else 0.0
    return np.array([[h11, 0.0], [0.0, h22]], dtype=complex)


def kraus_qfi_min(p, xi=0.0, strict=False):
    """4 min_h Tr A, an upper bound on the QFI of every FE strategy under Delta(xi)"""
    k = kraus_pair(p, xi)
    if abs(k.a) < DEGENERATE_TOL:
        if strict:
            raise DegenerateKraus(f"|a| = {abs(k.a):.3e} at xi={xi}; sin(T Omega) vanishes")
        logger.debug(f"Degenerate Kraus amplitude at xi={xi}, using the limit expression",
                     extra={'omega': p.omega, 'g': p.g, 'T': p.T})
        leakage = abs(k.da) ** 2
    else:
        # Re(a* da)^2 / |a|^2
        leakage = abs(k.da) ** 2 - (np.conj(k.da) * k.a).imag ** 2 / abs(k.a) ** 2

    diagonal = abs(k.b) ** 2 + abs(k.c) ** 2
    phase = (np.conj(k.db) * k.b + np.conj(k.dc) * k.c).imag
    coherent = abs(k.db) ** 2 + abs(k.dc) ** 2 - phase ** 2 / diagonal
    return float(4 * (leakage + coherent))


def kraus_qfi_closed_form(p, xi=0.0):
    """Fully substituted form of kraus_qfi_min"""
    t = p.T * (1.0 + xi)
    g, w = p.g, p.omega
    root = math.sqrt(4 * g ** 2 + w ** 2)
    cos2, sin2 = math.cos(2 * t * p.Omega), math.sin(2 * t * p.Omega)
    numerator = (8 * g ** 6 * t ** 2
                 + g ** 4 * (22 * t ** 2 * w ** 2 + 8)
                 + g ** 2 * (2 * g ** 2 + w ** 2) * (t ** 2 * (4 * g ** 2 + w ** 2) - 4) * cos2
                 + g ** 2 * w ** 2 * (9 * t ** 2 * w ** 2 + 4)
                 + 8 * g ** 4 * t * root * sin2
                 + t ** 2 * w ** 6)
    denominator = (4 * g ** 2 + w ** 2) ** 2 * (g ** 2 * cos2 + 3 * g ** 2 + w ** 2)
    return 2 * numerator / denominator


def qfi_fe_upper(p, xi=0.0):
    """Leading term 2 t^2 cos^2(t Omega) / (cos(2 t Omega) + 3), t = T(1+xi)"""
    t = p.T * (1.0 + xi)
    return 2 * t ** 2 * math.cos(t * p.Omega) ** 2 / (math.cos(2 * t * p.Omega) + 3)


def qfi_fe_concise(p, xi=0.0):
    t = p.T * (1.0 + xi)
    angle = t * p.Omega
    return (2 * (p.g * t * math.cos(angle) + math.sin(angle)) ** 2
            / (p.g ** 2 * (math.cos(2 * angle) + 3)))


def qfi_fe_envelope(p, xi=0.0):
    """Leading term plus the omega^2 t^2 / g^2 leakage contribution"""
    t = p.T * (1.0 + xi)
    return qfi_fe_upper(p, xi) + (p.omega / p.g) ** 2 * t ** 2


def qfi_fe_below_threshold(p, epsilon):
    """Minimum over admissible laws of the FE QFI bound when eps < eps*"""
    return p.T ** 2 * (1 + (p.omega / p.g) ** 2 - 2 / (math.cos(2 * p.T * p.Omega * epsilon) + 3))


def fe_protocol_channel_bound(p):
    """4 sigma_max(A) at h11 = -T/4, h12 = h22 = 0; T^2/4 at decoupling times"""
    A = kraus_channel_matrix(kraus_pair(p), np.diag([-p.T / 4, 0.0]))
    return float(4 * np.max(np.linalg.eigvalsh(A)))


class LowerBound(NamedTuple):
    value: float
    regime: str
    dropped: str


def loss_fe_lower(p, shots, epsilon):
    """Lower bound on the FE loss, branching on the threshold eps*"""
    if shots < 1:
        raise ValidationError(f"Shot count must be at least 1, got {shots}")
    g, w, T = p.g, p.omega, p.T
    if epsilon >= p.eps_star:
        value = g ** 2 * w ** 2 / (shots * w ** 4 * T ** 2 + g ** 2)
        return LowerBound(value, 'above_threshold', 'O(omega^4 T^2 / g^4)')
    if w == 0:
        return LowerBound(0.0, 'below_threshold', 'O(omega^2 / g^2)')
    value = 1.0 / (shots * T ** 2 * ((w / g) ** 2 + math.cos(epsilon * T * p.Omega) ** 2) + w ** -2)
    return LowerBound(value, 'below_threshold', 'O(omega^2 / g^2)')


@dataclass(frozen=True)
class ErrorBudget:
    """Leakage, pulse-phase and precession-dilation contributions to the CE bias"""
    epsilon_1: float
    epsilon_2: float
    epsilon_3: float
    epsilon_prime: float

    @classmethod
    def from_params(cls, p, epsilon):
        epsilon_prime = epsilon * PREP_PHASE + epsilon * CONTROL_PHASES
        return cls(
            epsilon_1=3 * math.pi * abs(p.omega) / (8 * p.g),
            epsilon_2=epsilon * abs(p.omega) * p.T_prime / 2 + epsilon_prime,
            epsilon_3=epsilon * READOUT_PHASE + epsilon * HALF_SWAP_PHASES,
            epsilon_prime=epsilon_prime,
        )

    @property
    def eta(self):
        return self.epsilon_1 + self.epsilon_2 + self.epsilon_3


def _csc_squared(p):
    s = math.sin(p.omega * p.T_prime)
    if abs(s) < CSC_TOL:
        raise CscSingularity(f"|sin(omega T')| = {abs(s):.3e}; the CE bound diverges")
    return 1.0 / s ** 2


def _budget(p, epsilon):
    budget = ErrorBudget.from_params(p, epsilon)
    if budget.eta >= EXPANSION_LIMIT:
        logger.warning(f"eta = {budget.eta:.3g} is outside the validity of the CE expansion",
                       extra={'epsilon': epsilon, 'eta': budget.eta})
    return budget


def loss_ce_upper(p, shots, epsilon):
    """1/(nu T'^2) + 16 csc^2(omega T') eta^2 / T'^2"""
    if shots < 1:
        raise ValidationError(f"Shot count must be at least 1, got {shots}")
    csc2 = _csc_squared(p)
    eta = _budget(p, epsilon).eta
    return 1.0 / (shots * p.T_prime ** 2) + 16 * csc2 * eta ** 2 / p.T_prime ** 2


def ce_bias_bound(p, epsilon):
    """4 |csc(omega T')| eta / T'"""
    csc = math.sqrt(_csc_squared(p))
    return 4 * csc * _budget(p, epsilon).eta / p.T_prime


def cnot_bias_bound(p, epsilon, o_ce):
    if abs(o_ce) >= 0.5:
        raise DomainEdge(f"|<O_CE>| = {abs(o_ce)} must stay below 1/2")
    phases = abs(p.omega) * p.T / 2 + CNOT_CONTROL_PHASE_BOUND
    return 8 * epsilon * phases / (p.T * math.sqrt(1 - 4 * o_ce ** 2))


def classical_fisher_information(law, omega, step=1e-6):
    """Fisher information of an omega -> probabilities map by central differences"""
    p0 = np.asarray(law(omega), dtype=float)
    slope = (np.asarray(law(omega + step)) - np.asarray(law(omega - step))) / (2 * step)
    mask = p0 > FISHER_FLOOR
    return float(np.sum(slope[mask] ** 2 / p0[mask]))


def propagated_variance(var_x, shots, derivative):
    """Var(omega_hat) = Var(x)/nu * (d omega_hat / dx)^2"""
    return float(var_x / shots * derivative ** 2)


@dataclass(frozen=True)
class BoundReport:
    epsilon: float
    eta: float
    eps_star: float
    above_threshold: bool
    hardware_limit: float
    if_reference: float
    xi_grid: list
    qfi_fe_upper: list
    loss_fe_lower: float
    fe_regime: str
    loss_ce_upper: float
    ce_bias_bound: float
    opt_bias_lower: float

    def to_dict(self):
        return asdict(self)


def bound_report(p, shots, epsilon, xi_points=11):
    """Every analytic quantity at one (params, nu, eps) point"""
    xi_grid = np.linspace(-epsilon, epsilon, xi_points) if epsilon > 0 else np.zeros(1)
    fe = loss_fe_lower(p, shots, epsilon)
    opt_bias, _ = opt_bias_mse_lower(p.T_prime ** 2, shots, p.omega)
    return BoundReport(
        epsilon=float(epsilon),
        eta=ErrorBudget.from_params(p, epsilon).eta,
        eps_star=p.eps_star,
        above_threshold=bool(epsilon >= p.eps_star),
        hardware_limit=hardware_limit(epsilon, p.omega),
        if_reference=if_reference_mse(shots, p.T, epsilon, p.omega),
        xi_grid=[float(x) for x in xi_grid],
        qfi_fe_upper=[qfi_fe_upper(p, x) for x in xi_grid],
        loss_fe_lower=fe.value,
        fe_regime=fe.regime,
        loss_ce_upper=loss_ce_upper(p, shots, epsilon),
        ce_bias_bound=ce_bias_bound(p, epsilon),
        opt_bias_lower=opt_bias,
    )
