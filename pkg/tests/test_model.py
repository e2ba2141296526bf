"""Tests for physical parameters, Hamiltonians and gates."""
import math

import numpy as np
import pytest

from tdisense.errors import DimensionOverflow, ValidationError
from tdisense.model import (CNOT_MATRIX, PAULI_X, PAULI_Z, SWAP_MATRIX, EnvironmentSpec, Gate,
                            PhysicalParams, des_mode_state, electron_phonon, gate_from_spec,
                            des_preparation, gate_library, h_cnot, h_swap, quadrature_operator, rotation,
                            vacuum_state)

HADAMARD = np.array([[1, 1], [1, -1]]) / math.sqrt(2)


class TestPhysicalParams:

    def test_derived_quantities(self, swap_params):
        assert swap_params.T_prime == pytest.approx(251.091793, abs=1e-6)
        assert swap_params.eps_star == pytest.approx(6.25e-4, rel=1e-7)
        assert swap_params.Omega_prime == pytest.approx(2 * swap_params.Omega)
        assert swap_params.strong_coupling

    @pytest.mark.parametrize('omega, g, T', [
        (0.01, 0.0, 10.0),
        (0.01, -1.0, 10.0),
        (0.01, 10.0, 0.2),
    ])
    def test_invalid(self, omega, g, T):
        with pytest.raises(ValidationError):
            PhysicalParams(omega, g, T)

    def test_with_omega(self, swap_params):
        moved = swap_params.with_omega(0.02)
        assert moved.omega == 0.02
        assert moved.g == swap_params.g and moved.T == swap_params.T


class TestHamiltonians:

    def test_h_swap_entries(self):
        p = PhysicalParams(0.4, 2.0, 5.0)
        expected = np.array([[2.2, 0, 0, 0],
                             [0, 0.2, 2.0, 0],
                             [0, 2.0, -0.2, 0],
                             [0, 0, 0, 1.8]])
        assert np.allclose(h_swap(p).entries, expected)

    def test_des_states_are_eigenvectors(self, swap_params):
        h = h_swap(swap_params).entries
        p = swap_params
        up = np.array([1, 0, 0, 0])
        down = np.array([0, 0, 0, 1])
        assert np.allclose(h @ up, (p.g + p.omega / 2) * up)
        assert np.allclose(h @ down, (p.g - p.omega / 2) * down)

    def test_h_cnot(self, cnot_params):
        h = h_cnot(cnot_params)
        assert h.hermitian and h.subsystem_dims == (2, 2)
        expected = 0.5 * cnot_params.omega * np.kron(PAULI_Z, np.eye(2)) + cnot_params.g * CNOT_MATRIX
        assert np.allclose(h.entries, expected)

    def test_electron_phonon_structure(self):
        h = electron_phonon(0.01, [1.0, 0.5], 3)
        assert h.hermitian
        assert h.subsystem_dims == (2, 3, 3)
        # electron ground state is decoupled
        assert np.allclose(h.entries[:9, :9], 0.0)

    def test_dimension_cap(self):
        with pytest.raises(DimensionOverflow):
            electron_phonon(0.01, [10.0, 2.5, 1.25], 17)

    def test_negative_coupling(self):
        with pytest.raises(ValidationError):
            electron_phonon(0.01, [-1.0], 3)


class TestModeStates:

    @pytest.mark.parametrize('fock_dim', [3, 5, 7])
    def test_des_state_is_null_vector(self, fock_dim):
        state = des_mode_state(fock_dim)
        assert np.linalg.norm(state) == pytest.approx(1.0)
        assert np.allclose(quadrature_operator(fock_dim) @ state, 0.0, atol=1e-10)

    def test_even_truncation_rejected(self):
        with pytest.raises(ValidationError):
            des_mode_state(4)

    def test_vacuum(self):
        assert np.array_equal(vacuum_state(3), [1, 0, 0])

    @pytest.mark.parametrize('fock_dim', [3, 5, 9])
    def test_des_preparation_rotates_vacuum(self, fock_dim):
        gate = des_preparation(fock_dim)
        prepared = gate.unitary() @ vacuum_state(fock_dim)
        assert 0 < gate.phase <= math.pi / 2
        assert abs(np.vdot(des_mode_state(fock_dim), prepared)) == pytest.approx(1.0, abs=1e-10)
        assert np.allclose(quadrature_operator(fock_dim) @ prepared, 0.0, atol=1e-10)

    def test_des_preparation_angle(self):
        # null vector of the d=3 quadrature is (sqrt 2, 0, -1) / sqrt 3
        assert des_preparation(3).phase == pytest.approx(math.acos(math.sqrt(2 / 3)))

    def test_dilated_preparation_leaves_vacuum(self):
        gate = des_preparation(3)
        prepared = gate.unitary(0.2) @ vacuum_state(3)
        assert abs(np.vdot(des_mode_state(3), prepared)) == pytest.approx(math.cos(0.2 * gate.phase))


class TestGates:

    def test_hadamard_up_to_phase(self):
        assert np.allclose(gate_library()['H'].unitary(), -1j * HADAMARD)

    def test_cnot_and_swap_exact(self):
        library = gate_library()
        assert np.allclose(library['CNOT'].unitary(), CNOT_MATRIX)
        assert np.allclose(library['SWAP'].unitary(), SWAP_MATRIX)

    def test_s_gate(self):
        assert np.allclose(gate_library()['S'].unitary(), np.exp(-0.25j * math.pi) * np.diag([1, 1j]))

    def test_x_gate(self):
        assert np.allclose(gate_library()['X'].unitary(), -1j * PAULI_X)

    def test_dilation_scales_phase(self):
        gate = rotation('RX', 0.6)
        assert np.allclose(gate.unitary(0.5), rotation('RX', 0.9).unitary())

    def test_generator_norm_checked(self):
        with pytest.raises(ValidationError):
            Gate('bad', 2 * PAULI_X, 1.0)

    def test_library_factories(self):
        gate = gate_library()['RZZ'](0.3)
        assert gate.qubits == 2
        assert gate.phase == 0.3

    def test_gate_from_spec(self):
        gate, targets = gate_from_spec({'gate': 'RY', 'theta': 0.2, 'targets': [1]})
        assert gate.name == 'RY' and targets == (1,)

    @pytest.mark.parametrize('spec', [
        {'gate': 'RX', 'theta': 0.1, 'targets': [0, 1]},
        {'gate': 'CNOT', 'targets': [0]},
        {'gate': 'T', 'targets': [0]},
    ])
    def test_gate_from_spec_rejects(self, spec):
        with pytest.raises(ValidationError):
            gate_from_spec(spec)


class TestEnvironmentSpec:

    def test_phonon_modes(self):
        env = EnvironmentSpec.phonon_modes([10, 2.5], fock_dim=5)
        assert env.mode_count == 2
        assert env.with_fock_dim(7).fock_dim == 7

    def test_couplings_must_decrease(self):
        with pytest.raises(ValidationError):
            EnvironmentSpec.phonon_modes([1.0, 2.0])

    @pytest.mark.parametrize('couplings', [[0.0], [10.0, 0.0]])
    def test_couplings_must_be_positive(self, couplings):
        with pytest.raises(ValidationError):
            EnvironmentSpec.phonon_modes(couplings)

    def test_qubit_environment(self):
        assert EnvironmentSpec.qubit().mode_count == 1
