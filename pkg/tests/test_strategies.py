"""Tests for the FE and CE circuits, their execution and estimators."""
import math

import numpy as np
import pytest

from tdisense.bounds import CONTROL_PHASES, PREP_PHASE, READOUT_PHASE, classical_fisher_information
from tdisense.errors import (DecouplingViolation, DimensionOverflow, DrawLengthMismatch,
                             EstimatorDomain, ValidationError)
from tdisense.model import EnvironmentSpec, PhysicalParams, des_mode_state
from tdisense.qcore import marginal_probabilities, partial_trace
from tdisense.strategies import (ArccosEstimator, FittedCnotEstimator, averaged_probabilities,
                                 bell_probe_qfi, build_ce_cnot, build_ce_multilevel, build_ce_swap,
                                 build_fe_cnot, build_fe_multilevel, build_fe_swap, cnot_branch,
                                 cnot_forward_model, ideal_ce_probabilities, mean_outcome,
                                 observable_trace, observable_value, outcome_probabilities,
                                 run_once, state_after)
from tdisense.tdi import DilationDraw, TdiDistribution


def leakage_scale(p):
    """Zeno leakage amplitude of the two short SWAP precessions"""
    return 3 * math.pi * abs(p.omega) / (8 * p.g)


class TestStructure:

    def test_timed_operation_counts(self, swap_params, cnot_params):
        assert build_fe_swap(swap_params).timed_op_count == 5
        assert build_ce_swap(swap_params).timed_op_count == 8
        assert build_fe_cnot(cnot_params).timed_op_count == 5
        assert build_fe_swap(swap_params, shared_draws=True).timed_op_count == 1

    def test_ce_cnot_counts_control_pulses(self, cnot_params):
        control = [{'gate': 'X', 'targets': [1]}, {'gate': 'RZZ', 'theta': 0.4, 'targets': [0, 1]}]
        strategy = build_ce_cnot(cnot_params, [0.1] * 6, control)
        # six prep pulses, two precessions, two controls, six readout pulses
        assert strategy.timed_op_count == 16

    def test_precessions_sum_to_total_time(self, swap_params, cnot_params):
        assert build_ce_swap(swap_params).total_duration == pytest.approx(swap_params.T)
        assert build_ce_cnot(cnot_params, [0.0] * 6).total_duration == pytest.approx(cnot_params.T)

    def test_ce_swap_segment_order(self, swap_params):
        labels = [s.label for s in build_ce_swap(swap_params).segments]
        assert labels == ['prep-ry', 'precession-in', 'control-x', 'control-s', 'precession',
                          'control-yx', 'precession-out', 'readout-h']

    def test_pulse_phases_within_budget(self, swap_params):
        pulses = [s for s in build_ce_swap(swap_params).segments if s.kind == 'pulse']

        def spent(prefix):
            return sum(s.phase for s in pulses if s.label.startswith(prefix))

        assert spent('prep') == pytest.approx(PREP_PHASE)
        assert spent('prep') <= math.pi / 2
        assert spent('control') <= CONTROL_PHASES
        assert spent('readout') == pytest.approx(READOUT_PHASE)

    def test_decoupling_time_required(self):
        with pytest.raises(DecouplingViolation):
            build_fe_swap(PhysicalParams(1 / 300, 10.0, 80 * math.pi + 0.1))
        with pytest.raises(DecouplingViolation):
            build_fe_cnot(PhysicalParams(0.01, 10.0, 80 * math.pi + math.pi / 10))

    def test_ansatz_length(self, cnot_params):
        with pytest.raises(ValidationError):
            build_ce_cnot(cnot_params, [0.0] * 5)

    def test_unknown_segment(self, swap_params):
        with pytest.raises(ValidationError):
            build_ce_swap(swap_params).segment('missing')

    def test_describe(self, swap_params):
        info = build_fe_swap(swap_params).describe()
        assert info['name'] == 'fe_swap'
        assert [s['kind'] for s in info['segments']] == ['pulse', 'pulse', 'precession', 'pulse', 'pulse']


class TestFreeEvolution:

    def test_fe_swap_exact_at_zero_tdi(self, swap_params):
        outcome = run_once(build_fe_swap(swap_params), None, 10000, mode='exact')
        assert outcome.omega_hat == pytest.approx(swap_params.omega, abs=1e-8)

    def test_fe_swap_zero_frequency(self):
        p = PhysicalParams(0.0, 10.0, 80 * math.pi)
        outcome = run_once(build_fe_swap(p), None, 10000, mode='exact')
        assert outcome.omega_hat == pytest.approx(0.0, abs=1e-7)

    def test_fe_cnot_exact_at_zero_tdi(self, cnot_params):
        outcome = run_once(build_fe_cnot(cnot_params), None, 10000, mode='exact')
        assert outcome.omega_hat == pytest.approx(cnot_params.omega, abs=1e-8)

    def test_fe_swap_estimator_variance(self, swap_params):
        strategy = build_fe_swap(swap_params)
        rng = np.random.default_rng(5)
        shots = 10000
        estimates = [run_once(strategy, None, shots, rng).omega_hat for _ in range(3000)]
        expected = 4 / (shots * swap_params.T ** 2)
        assert np.var(estimates) == pytest.approx(expected, rel=0.1)

    def test_fe_collapses_under_dilation(self, swap_params):
        # sin^2(T Omega xi) is close to 1 at xi = 6e-4
        draw = DilationDraw.constant(5, 6e-4)
        outcome = run_once(build_fe_swap(swap_params), draw, 10000, mode='exact')
        assert abs(outcome.omega_hat - swap_params.omega) > 0.5 * swap_params.omega


class TestControlEnhanced:

    def test_probabilities_match_ideal_law(self, swap_params):
        p = outcome_probabilities(build_ce_swap(swap_params))
        ideal = ideal_ce_probabilities(swap_params.omega, swap_params.T_prime)
        assert np.allclose(p, ideal, atol=5 * leakage_scale(swap_params))

    def test_estimator_error_within_leakage_bound(self, swap_params):
        p = swap_params
        outcome = run_once(build_ce_swap(p), None, 10000, mode='exact')
        limit = 4 * leakage_scale(p) / (p.T_prime * abs(math.sin(p.omega * p.T_prime)))
        assert abs(outcome.omega_hat - p.omega) <= limit + 1e-8

    def test_state_stays_in_degenerate_subspace(self, swap_params):
        state = state_after(build_ce_swap(swap_params), 'precession')
        p = marginal_probabilities(state, (1, 2))
        assert p[0] + p[3] >= 1 - leakage_scale(swap_params) ** 2 - 1e-9

    def test_ideal_law_fisher_information(self, swap_params):
        T_prime = swap_params.T_prime
        fisher = classical_fisher_information(lambda w: ideal_ce_probabilities(w, T_prime), swap_params.omega)
        assert fisher == pytest.approx(T_prime ** 2, rel=1e-6)

    def test_insensitive_to_readout_time(self, swap_params):
        strategy = build_ce_swap(swap_params)
        window = swap_params.T_prime + np.linspace(0.0, math.pi / swap_params.g, 21)
        trace = observable_trace(strategy, 'precession', window)
        assert np.max(np.abs(np.diff(trace))) <= 0.01
        assert np.ptp(trace) <= 0.01

    def test_fe_sensitive_to_readout_time(self, swap_params):
        strategy = build_fe_swap(swap_params)
        window = swap_params.T + np.linspace(0.0, math.pi / swap_params.g, 21)
        trace = observable_trace(strategy, 'precession', window)
        assert np.ptp(trace) >= 0.5


PHONONS = EnvironmentSpec.phonon_modes([10.0, 2.5], fock_dim=3)

BUILDS = {
    'fe_swap': lambda sp, cp: build_fe_swap(sp),
    'ce_swap': lambda sp, cp: build_ce_swap(sp),
    'fe_cnot': lambda sp, cp: build_fe_cnot(cp),
    'ce_cnot': lambda sp, cp: build_ce_cnot(cp, [0.1] * 6),
    'ce_multilevel': lambda sp, cp: build_ce_multilevel(cp, PHONONS),
    'fe_multilevel': lambda sp, cp: build_fe_multilevel(cp, PHONONS),
}


class TestObservables:

    @pytest.mark.parametrize('name', sorted(BUILDS))
    def test_observable_matches_outcome_codes(self, name, swap_params, cnot_params):
        strategy = BUILDS[name](swap_params, cnot_params)
        expected = mean_outcome(strategy, outcome_probabilities(strategy))
        assert observable_value(strategy) == pytest.approx(expected, abs=1e-9)

    def test_ce_swap_expectation(self, swap_params):
        p = swap_params
        value = observable_value(build_ce_swap(p))
        assert value > 0
        assert value == pytest.approx(math.cos(p.omega * p.T_prime), abs=5 * leakage_scale(p))

    def test_ce_swap_reduced_state(self, swap_params):
        p = swap_params
        coherence = np.exp(-1j * p.omega * p.T_prime) / 4
        # block diagonal in the ancilla, opposite coherences in the two blocks
        expected = np.array([[0.25, -coherence, 0, 0],
                             [-coherence.conjugate(), 0.25, 0, 0],
                             [0, 0, 0.25, coherence],
                             [0, 0, coherence.conjugate(), 0.25]])

        rho = partial_trace(state_after(build_ce_swap(p), 'precession-out'), (0, 1))
        assert rho.subsystem_dims == (2, 2)
        assert np.allclose(rho.entries, expected, atol=5 * leakage_scale(p))


class TestCnotEstimator:

    def test_forward_model_round_trip(self, cnot_params):
        p = cnot_params
        estimator = FittedCnotEstimator(p.T, cnot_branch(p.omega, p.T))
        assert estimator(cnot_forward_model(p.omega, p.T)) == pytest.approx(p.omega, abs=1e-9)

    def test_branch(self, cnot_params):
        assert cnot_branch(cnot_params.omega, cnot_params.T) == 31

    def test_domain_without_clamp(self):
        estimator = FittedCnotEstimator(80 * math.pi, 31, clamp=False)
        with pytest.raises(EstimatorDomain):
            estimator(0.6)

    def test_clamped_value_is_finite(self):
        estimator = FittedCnotEstimator(80 * math.pi, 31)
        assert estimator.out_of_domain(0.6)
        assert math.isfinite(estimator(0.6))

    def test_zero_ansatz_is_frequency_blind(self, cnot_params):
        first = outcome_probabilities(build_ce_cnot(cnot_params, [0.0] * 6))
        second = outcome_probabilities(build_ce_cnot(cnot_params.with_omega(0.02), [0.0] * 6))
        assert np.allclose(first, [1, 0, 0, 0])
        assert np.allclose(first, second)


class TestArccosEstimator:

    def test_inverts_cosine(self):
        estimator = ArccosEstimator(1 / 250)
        assert estimator(math.cos(0.8)) == pytest.approx(0.8 / 250)

    def test_derivative(self):
        estimator = ArccosEstimator(2.0)
        assert estimator.derivative(0.6) == pytest.approx(-2.0 / 0.8)

    def test_domain(self):
        assert ArccosEstimator(1.0).out_of_domain(1.0000001)
        assert not ArccosEstimator(1.0).out_of_domain(-1.0)


class TestExecution:

    def test_draw_length_checked(self, swap_params):
        with pytest.raises(DrawLengthMismatch):
            outcome_probabilities(build_ce_swap(swap_params), DilationDraw.zeros(5))

    def test_shots_checked(self, swap_params):
        with pytest.raises(ValidationError):
            run_once(build_fe_swap(swap_params), None, 0, mode='exact')

    def test_sampled_needs_generator(self, swap_params):
        with pytest.raises(ValidationError):
            run_once(build_fe_swap(swap_params), None, 100)

    def test_sampled_run_is_reproducible(self, swap_params):
        strategy = build_ce_swap(swap_params)
        first = run_once(strategy, None, 1000, np.random.default_rng(1))
        second = run_once(strategy, None, 1000, np.random.default_rng(1))
        assert first.mean_outcome == second.mean_outcome

    def test_sampled_mean_concentrates(self, swap_params):
        strategy = build_ce_swap(swap_params)
        exact = run_once(strategy, None, 10000, mode='exact').mean_outcome
        for seed in range(20):
            sampled = run_once(strategy, None, 10000, np.random.default_rng(seed)).mean_outcome
            assert abs(sampled - exact) <= 4 / math.sqrt(10000)

    def test_pooled_draws_average_laws(self, swap_params):
        strategy = build_fe_swap(swap_params)
        draws = [DilationDraw.constant(5, 1e-4), DilationDraw.constant(5, -2e-4)]
        outcome = run_once(strategy, draws, 100, mode='exact')
        expected = np.mean([outcome_probabilities(strategy, d) for d in draws], axis=0)
        assert np.allclose(outcome.exact_probabilities, expected)

    def test_delta_channel_matches_single_draw(self, swap_params):
        strategy = build_ce_swap(swap_params)
        law = TdiDistribution.delta(3e-4, 1e-3)
        averaged = averaged_probabilities(strategy, law)
        direct = outcome_probabilities(strategy, DilationDraw.constant(9, 3e-4))
        assert np.allclose(averaged, direct, atol=1e-10)

    def test_channel_matches_tensor_rule(self, swap_params):
        strategy = build_fe_swap(swap_params)
        law = TdiDistribution.uniform(1e-4)
        channel = averaged_probabilities(strategy, law)
        tensor = averaged_probabilities(strategy, law, nodes=4, method='tensor')
        assert np.allclose(channel, tensor, atol=1e-6)

    def test_shared_slot_matches_tensor_rule(self, swap_params):
        strategy = build_fe_swap(swap_params, shared_draws=True)
        law = TdiDistribution.uniform(1e-3)
        channel = averaged_probabilities(strategy, law, nodes=32)
        tensor = averaged_probabilities(strategy, law, nodes=32, method='tensor')
        assert np.allclose(channel, tensor, atol=1e-8)

    def test_unknown_method(self, swap_params):
        with pytest.raises(ValidationError):
            averaged_probabilities(build_fe_swap(swap_params), TdiDistribution.uniform(1e-3), method='mc')

    def test_mean_outcome(self, swap_params):
        strategy = build_ce_swap(swap_params)
        assert mean_outcome(strategy, [0.25, 0.25, 0.25, 0.25]) == 0.0


class TestQuantumFisher:

    def test_fe_swap_probe(self, swap_params):
        qfi = bell_probe_qfi(build_fe_swap, swap_params)
        assert qfi == pytest.approx(swap_params.T ** 2 / 4, rel=1e-4)

    def test_fe_cnot_probe(self, cnot_params):
        qfi = bell_probe_qfi(build_fe_cnot, cnot_params)
        assert qfi == pytest.approx(cnot_params.T ** 2, rel=1e-4)


class TestMultilevel:

    @pytest.fixture
    def params(self):
        return PhysicalParams(0.01, 10.0, 80 * math.pi)

    def test_ce_exact_with_one_mode(self, params):
        env = EnvironmentSpec.phonon_modes([10.0], fock_dim=3)
        outcome = run_once(build_ce_multilevel(params, env), None, 10000, mode='exact')
        assert outcome.omega_hat == pytest.approx(params.omega, abs=1e-8)

    def test_fe_loses_coherence(self, params):
        env = EnvironmentSpec.phonon_modes([10.0], fock_dim=3)
        ce = run_once(build_ce_multilevel(params, env), None, 10000, mode='exact')
        fe = run_once(build_fe_multilevel(params, env), None, 10000, mode='exact')
        assert abs(fe.omega_hat - params.omega) > 100 * abs(ce.omega_hat - params.omega)
        assert abs(fe.omega_hat - params.omega) > 5e-4

    def test_register_layout(self, params):
        env = EnvironmentSpec.phonon_modes([10.0, 2.5], fock_dim=3)
        strategy = build_ce_multilevel(params, env)
        assert strategy.subsystem_dims == (2, 2, 3, 3)
        # one dilated preparation of the largest-coupling mode ahead of the Bell probe
        assert strategy.timed_op_count == 6
        assert [s.label for s in strategy.segments][:2] == ['prep-des-0', 'prep-h']

    def test_default_stabilizes_largest_mode(self, params):
        env = EnvironmentSpec.phonon_modes([10.0, 2.5], fock_dim=3)
        strategy = build_ce_multilevel(params, env)
        assert np.allclose(strategy.initial_state.amplitudes[1:], 0.0)
        amplitudes = state_after(strategy, 'prep-des-0').amplitudes.reshape(2, 2, 3, 3)
        assert abs(np.vdot(des_mode_state(3), amplitudes[0, 0, :, 0])) == pytest.approx(1.0, abs=1e-10)
        # second mode stays in vacuum
        assert np.allclose(amplitudes[0, 0, :, 1:], 0.0)

    def test_stabilizing_every_mode(self, params):
        env = EnvironmentSpec.phonon_modes([10.0, 2.5], fock_dim=3)
        strategy = build_ce_multilevel(params, env, stabilized_modes=2)
        assert [s.label for s in strategy.segments][:2] == ['prep-des-0', 'prep-des-1']
        assert strategy.timed_op_count == 7
        outcome = run_once(strategy, None, 10000, mode='exact')
        assert outcome.omega_hat == pytest.approx(params.omega, abs=1e-8)

    def test_unstabilized_mode_leaves_residual(self, params):
        env = EnvironmentSpec.phonon_modes([10.0, 2.5], fock_dim=3)
        partial = run_once(build_ce_multilevel(params, env), None, 10000, mode='exact')
        fe = run_once(build_fe_multilevel(params, env), None, 10000, mode='exact')
        assert abs(partial.omega_hat - params.omega) > 1e-4
        assert abs(partial.omega_hat - params.omega) < abs(fe.omega_hat - params.omega)

    def test_stabilized_count_checked(self, params):
        env = EnvironmentSpec.phonon_modes([10.0, 2.5], fock_dim=3)
        with pytest.raises(ValidationError):
            build_ce_multilevel(params, env, stabilized_modes=3)

    def test_preparation_is_dilated(self, params):
        env = EnvironmentSpec.phonon_modes([10.0], fock_dim=3)
        strategy = build_ce_multilevel(params, env)
        values = np.zeros(strategy.timed_op_count)
        values[strategy.segment('prep-des-0').slot] = 0.2
        dilated = run_once(strategy, DilationDraw(values), 10000, mode='exact')
        assert abs(dilated.omega_hat - params.omega) > 1e-6

    def test_dimension_cap(self, params):
        env = EnvironmentSpec.phonon_modes([10.0, 2.5, 1.25], fock_dim=17)
        with pytest.raises(DimensionOverflow):
            build_ce_multilevel(params, env)

    def test_even_truncation_rejected(self, params):
        env = EnvironmentSpec.phonon_modes([10.0], fock_dim=4)
        with pytest.raises(ValidationError):
            build_ce_multilevel(params, env)

    def test_qubit_environment_rejected(self, params):
        with pytest.raises(ValidationError):
            build_fe_multilevel(params, EnvironmentSpec.qubit())
