"""
Experiment engine: MSE estimation, epsilon sweeps, worst-case bias search,
multi-level environment sweeps and result persistence.
"""
from concurrent.futures import ThreadPoolExecutor
import csv
import io
from dataclasses import asdict, dataclass, field, replace
import json
import logging
import math
import os
import time
from typing import NamedTuple

import numpy as np
from scipy import stats

from tdisense import bounds
from tdisense.errors import CscSingularity, DimensionOverflow, IoError, ValidationError
from tdisense.model import DEFAULT_DIMENSION_CAP, EnvironmentSpec, PhysicalParams
from tdisense.strategies import (averaged_probabilities, build_ce_cnot, build_ce_multilevel,
                                 build_ce_swap, build_fe_cnot, build_fe_multilevel,
                                 build_fe_swap, mean_outcome, run_once)
from tdisense.tdi import DilationDraw, TdiDistribution, sample, worst_case_family
from tdisense.utils import (canonical_json, content_hash, derive_rng, ensure_directory,
                            format_float, log_grid, utc_timestamp)
from tdisense.validators import (validate_ansatz, validate_count, validate_epsilons,
                                 validate_interval, validate_mode, validate_positive,
                                 validate_seed, validate_strategies)

logger = logging.getLogger('tdisense.experiment')

IF_REFERENCE = 'if'
OMEGA_STREAM = 2 ** 32
WORST_CASE_STREAM = 2 ** 32 + 1
CONVERGENCE_TOL = 0.01
MAX_LADDER_STEPS = 4

DEFAULT_COUPLINGS = (10.0, 2.5, 1.25)

# Experiment key -> Flask configuration key supplying its default
APP_DEFAULTS = {
    'seed': 'TDI_SEED',
    'threads': 'TDI_THREADS',
    'mode': 'TDI_MODE',
    'quadrature_nodes': 'TDI_QUADRATURE_NODES',
    'dilation_samples': 'TDI_DILATION_SAMPLES',
    'dimension_cap': 'TDI_DIMENSION_CAP',
    'fock_dim': 'TDI_FOCK_DIM',
    'out_dir': 'TDI_OUTPUT_DIR',
}

CSV_COLUMNS = ('strategy', 'modes', 'epsilon', 'omega', 'mse', 'bias', 'variance',
               'if_reference', 'loss_fe_lower', 'loss_ce_upper', 'ce_bias_bound', 'clamped')


@dataclass(frozen=True)
class ExperimentConfig:
    omega: float = None
    omega_interval: tuple = None
    omega_samples: int = 1
    g: float = 10.0
    T: float = 80 * math.pi
    shots: int = 10000
    repetitions: int = 100
    epsilons: tuple = (0.0,)
    distribution: str = 'uniform'
    strategies: tuple = ('fe_swap', 'ce_swap', IF_REFERENCE)
    ansatz: tuple = None
    control: tuple = ()
    branch: int = None
    clamp: bool = True
    environment: dict = field(default_factory=dict)
    seed: int = 20240917
    mode: str = 'mc'
    threads: int = 1
    dilation_samples: int = 16
    quadrature_nodes: int = 8
    shared_fe_draws: bool = False
    worst_case: dict = field(default_factory=dict)
    fock_dim: int = 9
    dimension_cap: int = DEFAULT_DIMENSION_CAP
    out_dir: str = 'results'

    @classmethod
    def from_dict(cls, data, defaults=None):
        """Build from a JSON mapping; missing keys fall back to `defaults` (a Flask config)"""
        data = dict(data)
        if 'epsilon_grid' in data:
            grid = data.pop('epsilon_grid')
            data['epsilons'] = log_grid(grid['start'], grid['stop'], grid['num'])
        if defaults is not None:
            for key, config_key in APP_DEFAULTS.items():
                if key not in data and config_key in defaults:
                    data[key] = defaults[config_key]

        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValidationError(f"Unknown configuration keys: {', '.join(unknown)}")

        for key in ('omega_interval', 'epsilons', 'strategies', 'ansatz', 'control'):
            if data.get(key) is not None:
                data[key] = tuple(data[key])
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path, defaults=None):
        try:
            with open(path, 'r', encoding='utf-8') as handle:
                data = json.load(handle)
        except OSError as e:
            raise IoError(f"Cannot read configuration {path}: {e}")
        except json.JSONDecodeError as e:
            raise ValidationError(f"Configuration {path} is not valid JSON: {e}")
        return cls.from_dict(data, defaults)

    def validate(self):
        checks = [
            validate_positive(self.g, 'g'),
            validate_positive(self.T, 'T'),
            validate_count(self.shots, 'shots'),
            validate_count(self.repetitions, 'repetitions'),
            validate_count(self.omega_samples, 'omega_samples'),
            validate_count(self.threads, 'threads'),
            validate_count(self.dilation_samples, 'dilation_samples'),
            validate_count(self.quadrature_nodes, 'quadrature_nodes'),
            validate_epsilons(list(self.epsilons)),
            validate_strategies(list(self.strategies)),
            validate_mode(self.mode),
            validate_ansatz(self.ansatz),
            validate_seed(self.seed),
        ]
        if self.omega_interval is not None:
            checks.append(validate_interval(self.omega_interval))
        elif self.omega is None:
            checks.append((False, "Either omega or omega_interval is required"))
        if self.distribution not in ('uniform', 'delta'):
            checks.append((False, "distribution must be 'uniform' or 'delta'"))
        if 'ce_cnot' in self.strategies and self.ansatz is None:
            checks.append((False, "ce_cnot needs the six ansatz parameters"))

        problems = [message for ok, message in checks if not ok]
        if problems:
            raise ValidationError('; '.join(problems))

    def with_overrides(self, **overrides):
        """Copy with every non-None override applied (CLI flags)"""
        changes = {k: v for k, v in overrides.items() if v is not None}
        if not changes:
            return self
        cfg = replace(self, **changes)
        cfg.validate()
        return cfg

    def params(self, omega):
        return PhysicalParams(float(omega), self.g, self.T)

    def omega_values(self):
        """The fixed omega, or `omega_samples` uniform draws from the interval"""
        if self.omega_interval is None:
            return [float(self.omega)]
        low, high = self.omega_interval
        rng = derive_rng(self.seed, OMEGA_STREAM)
        return [float(w) for w in rng.uniform(low, high, size=self.omega_samples)]

    def distribution_for(self, epsilon):
        if self.distribution == 'delta':
            return TdiDistribution.delta(epsilon, epsilon)
        return TdiDistribution.uniform(epsilon)

    def to_dict(self):
        return asdict(self)


class MseEstimate(NamedTuple):
    mse: float
    bias: float
    variance: float
    clamped: int = 0


@dataclass(frozen=True)
class SweepRecord:
    strategy: str
    epsilon: float
    omega: float
    mse: float
    bias: float
    variance: float
    modes: int = None
    if_reference: float = None
    loss_fe_lower: float = None
    loss_ce_upper: float = None
    ce_bias_bound: float = None
    clamped: int = 0

    def to_row(self):
        return [self.strategy, '' if self.modes is None else str(self.modes)] + [
            format_float(getattr(self, name)) for name in CSV_COLUMNS[2:-1]
        ] + [str(self.clamped)]


@dataclass
class SweepResult:
    records: list
    config: ExperimentConfig
    runtime: float = 0.0
    extra: dict = field(default_factory=dict)

    def select(self, strategy, epsilon=None, modes=None):
        return [r for r in self.records
                if r.strategy == strategy
                and (epsilon is None or r.epsilon == epsilon)
                and (modes is None or r.modes == modes)]

    def mean_mse(self, strategy, epsilon, modes=None):
        return float(np.mean([r.mse for r in self.select(strategy, epsilon, modes)]))

    def aggregates(self):
        """Mean, standard deviation and standard error of the MSE over omega samples"""
        groups = {}
        for record in self.records:
            groups.setdefault((record.strategy, record.modes, record.epsilon), []).append(record.mse)
        rows = []
        for (strategy, modes, epsilon), values in groups.items():
            values = np.array(values)
            rows.append({
                'strategy': strategy,
                'modes': modes,
                'epsilon': epsilon,
                'count': int(values.size),
                'mean_mse': float(values.mean()),
                'std_mse': float(values.std()),
                'sem_mse': float(stats.sem(values)) if values.size > 1 else 0.0,
            })
        return rows


def build_strategy(cfg, name, omega):
    """Strategy for `name` at the given frequency, or None for the IF reference"""
    p = cfg.params(omega)
    if name == IF_REFERENCE:
        return None
    if name == 'fe_swap':
        return build_fe_swap(p, shared_draws=cfg.shared_fe_draws)
    if name == 'ce_swap':
        return build_ce_swap(p)
    if name == 'fe_cnot':
        return build_fe_cnot(p, shared_draws=cfg.shared_fe_draws)
    if name == 'ce_cnot':
        return build_ce_cnot(p, cfg.ansatz, cfg.control, cfg.branch, clamp=cfg.clamp)
    raise ValidationError(f"Unknown strategy '{name}'")


def _reference_estimate(cfg, epsilon, omega):
    variance = 1.0 / (cfg.shots * cfg.T ** 2)
    bias = epsilon * abs(omega)
    return MseEstimate(variance + bias ** 2, bias, variance)


def _exact_estimate(cfg, strategy, law, omega):
    p = averaged_probabilities(strategy, law, nodes=cfg.quadrature_nodes)
    values = strategy.outcome_values
    x = mean_outcome(strategy, p)
    var_x = max(float(np.dot(p, values ** 2)) - x ** 2, 0.0)

    clamped = int(strategy.estimator.out_of_domain(x))
    if clamped:
        logger.warning(f"Clamped exact mean outcome {x:.6f} for {strategy.name}",
                       extra={'strategy': strategy.name, 'mean_outcome': x})
    bias = strategy.estimator(x) - omega
    variance = bounds.propagated_variance(var_x, cfg.shots, strategy.estimator.derivative(x))
    return MseEstimate(variance + bias ** 2, bias, variance, clamped)


def _monte_carlo_estimate(cfg, strategy, law, omega, point):
    n = strategy.timed_op_count
    fixed = None
    if law.is_point_mass:
        knots, _ = law.nodes(1)
        fixed = [DilationDraw.constant(n, knots[0])]

    estimates = np.empty(cfg.repetitions)
    clamped = 0
    for rep in range(cfg.repetitions):
        rng = derive_rng(cfg.seed, point, rep)
        if fixed is not None:
            pool = fixed
        else:
            pool = [sample(law, n, rng) for _ in range(cfg.dilation_samples)]
        outcome = run_once(strategy, pool, cfg.shots, rng)
        estimates[rep] = outcome.omega_hat
        clamped += int(outcome.clamped)

    errors = estimates - omega
    return MseEstimate(float(np.mean(errors ** 2)), float(np.mean(errors)),
                       float(np.var(estimates)), clamped)


def estimate_mse(cfg, strategy, epsilon, omega, point=0):
    """
    (mse, bias, variance) of one strategy at one (eps, omega) point.

    Monte-Carlo mode repeats a nu-shot experiment `repetitions` times with
    streams keyed by (seed, point, repetition). Exact mode uses the averaged
    outcome law for the bias and error propagation for the variance.
    """
    if strategy is None or strategy == IF_REFERENCE:
        return _reference_estimate(cfg, epsilon, omega)
    law = cfg.distribution_for(epsilon)
    if cfg.mode == 'exact':
        return _exact_estimate(cfg, strategy, law, omega)
    return _monte_carlo_estimate(cfg, strategy, law, omega, point)


def _bound_columns(cfg, p, epsilon):
    columns = {
        'if_reference': bounds.if_reference_mse(cfg.shots, p.T, epsilon, p.omega),
        'loss_fe_lower': bounds.loss_fe_lower(p, cfg.shots, epsilon).value,
    }
    try:
        columns['loss_ce_upper'] = bounds.loss_ce_upper(p, cfg.shots, epsilon)
        columns['ce_bias_bound'] = bounds.ce_bias_bound(p, epsilon)
    except CscSingularity:
        logger.debug(f"No CE bound at omega={p.omega}", extra={'epsilon': epsilon})
    return columns


def _run_tasks(cfg, tasks, worker):
    """Evaluate tasks, in parallel when configured; results keep task order"""
    if cfg.threads <= 1 or len(tasks) <= 1:
        return [worker(task) for task in tasks]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(worker, tasks))


def sweep_epsilon(cfg):
    """MSE of every configured strategy over the epsilon grid and omega samples"""
    started = time.perf_counter()
    omegas = cfg.omega_values()
    tasks = []
    for epsilon in cfg.epsilons:
        for omega in omegas:
            for name in cfg.strategies:
                tasks.append((len(tasks), name, float(epsilon), omega))

    logger.info(f"Starting sweep over {len(cfg.epsilons)} epsilon(s) and {len(omegas)} omega(s)",
                extra={'tasks': len(tasks), 'mode': cfg.mode, 'threads': cfg.threads, 'seed': cfg.seed})

    def worker(task):
        point, name, epsilon, omega = task
        estimate = estimate_mse(cfg, build_strategy(cfg, name, omega), epsilon, omega, point)
        return SweepRecord(name, epsilon, omega, estimate.mse, estimate.bias, estimate.variance,
                           clamped=estimate.clamped, **_bound_columns(cfg, cfg.params(omega), epsilon))

    records = _run_tasks(cfg, tasks, worker)
    runtime = time.perf_counter() - started
    logger.info(f"Sweep finished in {runtime:.2f}s", extra={'records': len(records)})
    return SweepResult(records, cfg, runtime)


class WorstCase(NamedTuple):
    value: float
    distribution: TdiDistribution
    table: list


def worst_case_bias(cfg, name, epsilon, omega=None):
    """max |b(f, s) / omega| over the candidate family of bounded laws"""
    omega = cfg.omega_values()[0] if omega is None else float(omega)
    if omega == 0:
        raise ValidationError("Relative bias is undefined at omega = 0")
    strategy = build_strategy(cfg, name, omega)
    if strategy is None:
        raise ValidationError("The IF reference has no simulated bias")

    options = cfg.worst_case or {}
    family = worst_case_family(epsilon, derive_rng(cfg.seed, WORST_CASE_STREAM),
                               delta_points=options.get('delta_points', 41),
                               mixtures=options.get('mixtures', 64),
                               support=options.get('mixture_support', 3))

    table = []
    for law in family:
        p = averaged_probabilities(strategy, law, nodes=cfg.quadrature_nodes)
        bias = strategy.estimator(mean_outcome(strategy, p)) - omega
        table.append((law.label, abs(bias / omega)))

    index = int(np.argmax([value for _, value in table]))
    logger.info(f"Worst case for {name} at eps={epsilon:g}: {table[index][0]}",
                extra={'strategy': name, 'epsilon': epsilon, 'relative_bias': table[index][1]})
    return WorstCase(table[index][1], family[index], table)


def _environment(cfg):
    env = dict(cfg.environment or {})
    couplings = tuple(env.get('couplings', DEFAULT_COUPLINGS))
    mode_counts = tuple(env.get('mode_counts', range(1, len(couplings) + 1)))
    if any(n < 1 or n > len(couplings) for n in mode_counts):
        raise ValidationError(f"mode_counts {list(mode_counts)} exceed {len(couplings)} couplings")
    return couplings, mode_counts, env.get('fock_dim', cfg.fock_dim), env.get('stabilized_modes', 1)


def _multilevel_builder(name, stabilized, dimension_cap):
    if name == 'ce_multilevel':
        return lambda p, env: build_ce_multilevel(p, env, stabilized, dimension_cap)
    return lambda p, env: build_fe_multilevel(p, env, dimension_cap)


def convergence_ladder(cfg, p, couplings, fock_dim, stabilized, epsilon):
    """
    Step the Fock truncation d -> 2d - 1 for both multi-level strategies.

    A strategy converges once its MSE moves by less than CONVERGENCE_TOL.
    Ladders that exhaust MAX_LADDER_STEPS or hit the dimension cap first are
    reported with converged=False; a cap hit has relative_change None.
    """
    exact = replace(cfg, mode='exact')
    modes = len(couplings)
    steps = []
    for name in ('ce_multilevel', 'fe_multilevel'):
        build = _multilevel_builder(name, stabilized, cfg.dimension_cap)
        env = EnvironmentSpec.phonon_modes(couplings, fock_dim)
        current = estimate_mse(exact, build(p, env), epsilon, p.omega).mse
        converged = False
        for _ in range(MAX_LADDER_STEPS):
            wider = env.with_fock_dim(2 * env.fock_dim - 1)
            step = {'strategy': name, 'modes': modes, 'fock_dim': env.fock_dim,
                    'next_fock_dim': wider.fock_dim}
            try:
                strategy = build(p, wider)
            except DimensionOverflow as e:
                logger.warning(f"Truncation ladder for {name} stopped: {e.message}",
                               extra={'modes': modes, 'fock_dim': env.fock_dim})
                steps.append({**step, 'relative_change': None, 'converged': False})
                break
            refined = estimate_mse(exact, strategy, epsilon, p.omega).mse
            change = abs(refined - current) / max(abs(current), 1e-300)
            converged = change < CONVERGENCE_TOL
            steps.append({**step, 'relative_change': change, 'converged': converged})
            logger.info(f"{name} truncation {env.fock_dim} -> {wider.fock_dim}: change {change:.3e}",
                        extra={'modes': modes, 'relative_change': change})
            if converged:
                break
            env, current = wider, refined
        if not converged:
            logger.warning(f"{name} MSE did not converge in the Fock truncation",
                           extra={'modes': modes, 'fock_dim': env.fock_dim})
    return steps


def multilevel_sweep(cfg):
    """CE, FE and IF MSE for an electron coupled to 1..N phonon modes"""
    started = time.perf_counter()
    couplings, mode_counts, fock_dim, stabilized = _environment(cfg)
    omegas = cfg.omega_values()

    tasks = []
    for modes in mode_counts:
        for epsilon in cfg.epsilons:
            for omega in omegas:
                for name in ('ce_multilevel', 'fe_multilevel', IF_REFERENCE):
                    tasks.append((len(tasks), modes, name, float(epsilon), omega))

    logger.info(f"Starting multi-level sweep for mode counts {list(mode_counts)}",
                extra={'tasks': len(tasks), 'fock_dim': fock_dim, 'seed': cfg.seed})

    def worker(task):
        point, modes, name, epsilon, omega = task
        p = cfg.params(omega)
        env = EnvironmentSpec.phonon_modes(couplings[:modes], fock_dim)
        if name == 'ce_multilevel':
            strategy = build_ce_multilevel(p, env, min(stabilized, modes), cfg.dimension_cap)
        elif name == 'fe_multilevel':
            strategy = build_fe_multilevel(p, env, cfg.dimension_cap)
        else:
            strategy = None
        estimate = estimate_mse(cfg, strategy, epsilon, omega, point)
        return SweepRecord(name, epsilon, omega, estimate.mse, estimate.bias, estimate.variance,
                           modes=modes, clamped=estimate.clamped,
                           if_reference=bounds.if_reference_mse(cfg.shots, cfg.T, epsilon, omega))

    records = _run_tasks(cfg, tasks, worker)

    ladder = []
    for modes in mode_counts:
        p = cfg.params(omegas[0])
        ladder.extend(convergence_ladder(cfg, p, couplings[:modes], fock_dim, min(stabilized, modes),
                                         max(cfg.epsilons)))

    runtime = time.perf_counter() - started
    logger.info(f"Multi-level sweep finished in {runtime:.2f}s", extra={'records': len(records)})
    return SweepResult(records, cfg, runtime, extra={'convergence': ladder})


def render_csv(result):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(CSV_COLUMNS)
    for record in result.records:
        writer.writerow(record.to_row())
    return buffer.getvalue()


def emit(result, out_dir=None, stem='sweep'):
    """Write <stem>.csv and <stem>.json (manifest) and return their paths"""
    out_dir = out_dir or result.config.out_dir
    body = render_csv(result)
    manifest = {
        'config': result.config.to_dict(),
        'seed': result.config.seed,
        'csv_sha256': content_hash(body),
        'rows': len(result.records),
        'runtime_seconds': result.runtime,
        'created': utc_timestamp(),
        'aggregates': result.aggregates(),
        'extra': result.extra,
    }
    csv_path = os.path.join(out_dir, f'{stem}.csv')
    manifest_path = os.path.join(out_dir, f'{stem}.json')
    try:
        ensure_directory(out_dir)
        with open(csv_path, 'w', encoding='utf-8', newline='') as handle:
            handle.write(body)
        with open(manifest_path, 'w', encoding='utf-8') as handle:
            handle.write(canonical_json(manifest, indent=2))
    except OSError as e:
        raise IoError(f"Failed to write results to {out_dir}: {e}")
    logger.info(f"Wrote {len(result.records)} rows to {csv_path}",
                extra={'csv_sha256': manifest['csv_sha256']})
    return {'csv': csv_path, 'manifest': manifest_path}


def emit_json(payload, path):
    """Write a JSON document (bound reports, worst-case tables)"""
    try:
        ensure_directory(os.path.dirname(path) or '.')
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write(canonical_json(payload, indent=2))
    except OSError as e:
        raise IoError(f"Failed to write {path}: {e}")
    return path

