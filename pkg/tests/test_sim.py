import math

import numpy as np
import pytest
from scipy.linalg import expm

from qdistill import sim
from qdistill.errors import ArgumentError, ConfigError, NumericalError
from qdistill.sim import GateKind, GateOp, StateVector


def dense_operator(n, matrix, targets):
    """Full 2^n x 2^n operator built entry by entry from the local matrix"""
    dim = 2 ** n
    full = np.zeros((dim, dim), dtype=np.complex128)
    others = [q for q in range(n) if q not in targets]

    def local(index):
        value = 0
        for t in targets:
            value = (value << 1) | ((index >> t) & 1)
        return value

    for i in range(dim):
        for j in range(dim):
            if all(((i >> q) & 1) == ((j >> q) & 1) for q in others):
                full[i, j] = matrix[local(i), local(j)]
    return full


def random_state(n, rng):
    amps = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return StateVector(n, amps / np.linalg.norm(amps))


def random_gate(n, rng):
    kinds = [k for k in GateKind if k.arity <= n]
    kind = kinds[int(rng.integers(len(kinds)))]
    targets = tuple(int(t) for t in rng.choice(n, size=kind.arity, replace=False))
    angle = float(rng.uniform(-2 * math.pi, 2 * math.pi)) if kind.parameterized else None
    return GateOp(kind, targets, angle)


class TestGateMatrices:
    @pytest.mark.parametrize("kind,pauli", [
        (GateKind.RX, sim.PAULI_X), (GateKind.RY, sim.PAULI_Y), (GateKind.RZ, sim.PAULI_Z),
        (GateKind.RZZ, sim.ZZ_MATRIX),
    ])
    def test_rotation_is_exponential_of_generator(self, kind, pauli):
        for theta in (-2.1, -0.3, 0.0, 0.7, math.pi):
            expected = expm(-0.5j * theta * pauli)
            targets = (0,) if kind.arity == 1 else (0, 1)
            actual = sim.gate_matrix(GateOp(kind, targets, theta))
            np.testing.assert_allclose(actual, expected, atol=1e-12)

    def test_rzz_equals_kron_of_z(self):
        theta = 0.83
        np.testing.assert_allclose(
            sim.rzz(theta), expm(-0.5j * theta * np.kron(sim.PAULI_Z, sim.PAULI_Z)), atol=1e-12
        )

    def test_all_matrices_unitary(self):
        for gate in [GateOp(GateKind.H, (0,)), GateOp(GateKind.CNOT, (0, 1)), GateOp(GateKind.RY, (0,), 1.3)]:
            u = sim.gate_matrix(gate)
            np.testing.assert_allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=1e-12)


class TestApplyGate:
    def test_matches_dense_operator_on_random_cases(self):
        rng = np.random.default_rng(2024)
        for case in range(600):
            n = 1 + case % 3
            state = random_state(n, rng)
            gate = random_gate(n, rng)
            expected = dense_operator(n, sim.gate_matrix(gate), gate.targets) @ state.amplitudes
            actual = sim.apply_gate(state, gate).amplitudes
            np.testing.assert_allclose(actual, expected, rtol=0, atol=1e-12)

    def test_single_qubit_matches_kron_layout(self, rng):
        # qubit 0 is the least-significant bit, so it is the rightmost kron factor
        state = random_state(3, rng)
        u = sim.ry(0.4)
        expected = np.kron(np.eye(2), np.kron(u, np.eye(2))) @ state.amplitudes
        np.testing.assert_allclose(sim.apply_gate(state, GateOp(GateKind.RY, (1,), 0.4)).amplitudes, expected,
                                   atol=1e-12)

    def test_cnot_flips_target_when_control_set(self):
        state = sim.init_zero_state(2)
        state = sim.apply_gate(state, GateOp(GateKind.X, (0,)))
        state = sim.apply_gate(state, GateOp(GateKind.CNOT, (0, 1)))
        expected = np.zeros(4)
        expected[3] = 1.0
        np.testing.assert_allclose(state.amplitudes, expected, atol=1e-12)

    def test_cnot_leaves_target_when_control_clear(self):
        state = sim.apply_gate(sim.init_zero_state(2), GateOp(GateKind.X, (1,)))
        state = sim.apply_gate(state, GateOp(GateKind.CNOT, (0, 1)))
        assert abs(state.amplitudes[2]) == pytest.approx(1.0)

    def test_apply_gate_does_not_modify_input(self, rng):
        state = random_state(2, rng)
        before = state.amplitudes.copy()
        sim.apply_gate(state, GateOp(GateKind.RX, (1,), 0.9))
        np.testing.assert_array_equal(state.amplitudes, before)

    def test_norm_preserved(self, rng):
        state = random_state(3, rng)
        for _ in range(50):
            state = sim.apply_gate(state, random_gate(3, rng))
        assert state.norm() == pytest.approx(1.0, abs=1e-12)
        sim.check_normalized(state)

    def test_inverse_undoes_gate(self, rng):
        state = random_state(3, rng)
        gate = GateOp(GateKind.RZZ, (2, 0), 1.1)
        restored = sim.apply_gate(sim.apply_gate(state, gate), gate.inverse())
        np.testing.assert_allclose(restored.amplitudes, state.amplitudes, atol=1e-12)

    def test_target_out_of_range(self):
        with pytest.raises(ArgumentError):
            sim.apply_gate(sim.init_zero_state(2), GateOp(GateKind.H, (2,)))


class TestGateOp:
    def test_rotation_needs_angle(self):
        with pytest.raises(ArgumentError):
            GateOp(GateKind.RX, (0,))

    def test_fixed_gate_rejects_angle(self):
        with pytest.raises(ArgumentError):
            GateOp(GateKind.H, (0,), 0.5)

    def test_two_qubit_targets_distinct(self):
        with pytest.raises(ArgumentError):
            GateOp(GateKind.CNOT, (1, 1))

    def test_wrong_arity(self):
        with pytest.raises(ArgumentError):
            GateOp(GateKind.RZZ, (0,), 0.1)


class TestState:
    def test_zero_state(self):
        state = sim.init_zero_state(3)
        assert state.amplitudes[0] == 1.0
        assert state.norm() == pytest.approx(1.0)

    @pytest.mark.parametrize("n", [0, sim.MAX_QUBITS + 1])
    def test_qubit_cap(self, n):
        with pytest.raises(ConfigError):
            sim.init_zero_state(n)

    def test_z_expectations_basis_state(self):
        state = sim.apply_gate(sim.init_zero_state(3), GateOp(GateKind.X, (1,)))
        np.testing.assert_allclose(sim.z_expectations(state), [1.0, -1.0, 1.0])

    def test_z_expectation_after_rx(self):
        theta = 0.77
        state = sim.apply_gate(sim.init_zero_state(2), GateOp(GateKind.RX, (1,), theta))
        np.testing.assert_allclose(sim.z_expectations(state), [1.0, math.cos(theta)], atol=1e-12)

    def test_hadamard_gives_zero_expectation(self):
        state = sim.apply_gate(sim.init_zero_state(1), GateOp(GateKind.H, (0,)))
        assert sim.z_expectations(state)[0] == pytest.approx(0.0, abs=1e-12)

    def test_check_normalized_detects_drift(self):
        state = StateVector(1, np.array([1.0, 1.0]))
        with pytest.raises(NumericalError):
            sim.check_normalized(state)

    def test_amplitude_count_checked(self):
        with pytest.raises(ArgumentError):
            StateVector(2, np.zeros(3))


class TestRotationProperties:
    @pytest.mark.parametrize("kind", [GateKind.RX, GateKind.RY, GateKind.RZ])
    def test_angles_add(self, kind, rng):
        for a, b in rng.uniform(-2 * math.pi, 2 * math.pi, size=(20, 2)):
            product = sim.gate_matrix(GateOp(kind, (0,), float(a))) @ sim.gate_matrix(GateOp(kind, (0,), float(b)))
            np.testing.assert_allclose(product, sim.gate_matrix(GateOp(kind, (0,), float(a + b))), atol=1e-12)

    def test_random_parameterized_gates_unitary(self):
        rng = np.random.default_rng(77)
        kinds = [k for k in GateKind if k.parameterized]
        for _ in range(1000):
            kind = kinds[int(rng.integers(len(kinds)))]
            targets = (0,) if kind.arity == 1 else (0, 1)
            u = sim.gate_matrix(GateOp(kind, targets, float(rng.uniform(-4 * math.pi, 4 * math.pi))))
            np.testing.assert_allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
    def test_norm_preserved_over_long_circuits(self, n):
        rng = np.random.default_rng(100 + n)
        gates = [random_gate(n, rng) for _ in range(100)]
        state = sim.apply_circuit(random_state(n, rng), gates)
        assert state.norm() == pytest.approx(1.0, abs=1e-10)
        sim.check_normalized(state)


class TestKnownStates:
    def test_rx_pi_on_zero(self):
        state = sim.apply_gate(sim.init_zero_state(1), GateOp(GateKind.RX, (0,), math.pi))
        np.testing.assert_allclose(state.amplitudes, [0.0, -1j], atol=1e-12)

    @pytest.mark.parametrize("delta", [-1.3, 0.0, 0.4, math.pi])
    def test_rzz_on_zero_is_global_phase(self, delta):
        state = sim.apply_gate(sim.init_zero_state(2), GateOp(GateKind.RZZ, (0, 1), delta))
        np.testing.assert_allclose(state.amplitudes, [np.exp(-0.5j * delta), 0, 0, 0], atol=1e-12)

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_hadamard_everywhere_gives_zero_expectations(self, n):
        state = sim.apply_circuit(sim.init_zero_state(n), [GateOp(GateKind.H, (q,)) for q in range(n)])
        np.testing.assert_allclose(sim.z_expectations(state), np.zeros(n), atol=1e-12)
        np.testing.assert_allclose(state.probabilities(), np.full(2 ** n, 2.0 ** -n), atol=1e-12)
