"""
Input validators for experiment configurations and API payloads.

Each validator returns (ok, message) so callers can collect every problem
before raising.
"""
import math

STRATEGY_NAMES = ('fe_swap', 'ce_swap', 'fe_cnot', 'ce_cnot', 'if')
MODES = ('mc', 'exact')


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def validate_positive(value, field_name):
    if not _is_number(value):
        return False, f"{field_name} must be a finite number"
    if value <= 0:
        return False, f"{field_name} must be positive"
    return True, f"Valid {field_name}"


def validate_count(value, field_name, minimum=1):
    """Integer count of at least `minimum`"""
    if isinstance(value, bool) or not isinstance(value, int):
        return False, f"{field_name} must be an integer"
    if value < minimum:
        return False, f"{field_name} must be at least {minimum}"
    return True, f"Valid {field_name}"


def validate_epsilons(epsilons):
    """Non-empty, non-negative and strictly increasing"""
    if not epsilons:
        return False, "At least one epsilon is required"
    if not all(_is_number(e) for e in epsilons):
        return False, "Epsilons must be finite numbers"
    if min(epsilons) < 0:
        return False, "Epsilons must be non-negative"
    if any(b <= a for a, b in zip(epsilons, epsilons[1:])):
        return False, "Epsilon grid must be strictly increasing"
    return True, "Valid epsilon grid"


def validate_interval(interval):
    if not isinstance(interval, (list, tuple)) or len(interval) != 2:
        return False, "omega_interval must be a [low, high] pair"
    low, high = interval
    if not (_is_number(low) and _is_number(high)) or low >= high:
        return False, "omega_interval must satisfy low < high"
    return True, "Valid interval"


def validate_strategies(names):
    if not names:
        return False, "At least one strategy is required"
    unknown = [n for n in names if n not in STRATEGY_NAMES]
    if unknown:
        return False, f"Unknown strategies: {', '.join(unknown)}"
    return True, "Valid strategies"


def validate_mode(mode):
    if mode not in MODES:
        return False, f"Mode must be one of {', '.join(MODES)}"
    return True, "Valid mode"


def validate_ansatz(ansatz):
    if ansatz is None:
        return True, "No ansatz"
    if len(ansatz) != 6 or not all(_is_number(a) for a in ansatz):
        return False, "ansatz must contain six real parameters"
    return True, "Valid ansatz"


def validate_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        return False, "seed must be a 64-bit non-negative integer"
    return True, "Valid seed"


def validate_bounds_request(data):
    """Validate a bounds request body: omega, g, T, shots and epsilon(s)"""
    if not isinstance(data, dict):
        return False, "Request body must be a JSON object"
    for field_name in ('g', 'T'):
        ok, message = validate_positive(data.get(field_name), field_name)
        if not ok:
            return ok, message
    if not _is_number(data.get('omega')):
        return False, "omega must be a finite number"
    ok, message = validate_count(data.get('shots', 10000), 'shots')
    if not ok:
        return ok, message
    epsilons = data.get('epsilons', [data.get('epsilon', 0.0)])
    return validate_epsilons(list(epsilons))
