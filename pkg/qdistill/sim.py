"""
Dense Statevector Simulator

Holds the joint state of an n-qubit register as 2^n complex amplitudes and
applies the gate set used by the student circuit: Pauli X/Y/Z, H, CNOT, CZ
and the rotations RX, RY, RZ, RZZ.

Bit convention: qubit 0 is the least-significant bit of the basis-state
index, so basis state |q_{n-1} ... q_1 q_0> has index sum(q_k * 2^k).
Two-qubit matrices are written in the local basis |t0 t1> where targets[0]
is the more significant bit (the textbook CNOT layout, control first).
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ArgumentError, ConfigError, NumericalError

logger = logging.getLogger(__name__)

MAX_QUBITS = 24
NORM_TOLERANCE = 1e-10


class GateKind(str, Enum):
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    RZZ = "RZZ"
    CNOT = "CNOT"
    CZ = "CZ"
    X = "X"
    Y = "Y"
    Z = "Z"
    H = "H"

    @property
    def arity(self) -> int:
        return 2 if self in (GateKind.RZZ, GateKind.CNOT, GateKind.CZ) else 1

    @property
    def parameterized(self) -> bool:
        return self in (GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.RZZ)


_SQRT2_INV = 1 / math.sqrt(2)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) * _SQRT2_INV
CNOT_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
)
CZ_MATRIX = np.diag([1, 1, 1, -1]).astype(np.complex128)
ZZ_MATRIX = np.diag([1, -1, -1, 1]).astype(np.complex128)

_FIXED_MATRICES = {
    GateKind.X: PAULI_X,
    GateKind.Y: PAULI_Y,
    GateKind.Z: PAULI_Z,
    GateKind.H: HADAMARD,
    GateKind.CNOT: CNOT_MATRIX,
    GateKind.CZ: CZ_MATRIX,
}

# Every rotation is exp(-i angle/2 * P) for the Pauli string P below.
GENERATORS = {
    GateKind.RX: PAULI_X,
    GateKind.RY: PAULI_Y,
    GateKind.RZ: PAULI_Z,
    GateKind.RZZ: ZZ_MATRIX,
}


@dataclass(frozen=True)
class GateOp:
    """One gate of a circuit: kind, target qubits and (for rotations) an angle"""

    kind: GateKind
    targets: Tuple[int, ...]
    angle: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if len(self.targets) != self.kind.arity:
            raise ArgumentError(
                f"{self.kind.value} acts on {self.kind.arity} qubit(s), got targets {self.targets}"
            )
        if len(set(self.targets)) != len(self.targets):
            raise ArgumentError(f"{self.kind.value} targets must be distinct, got {self.targets}")
        if any(t < 0 for t in self.targets):
            raise ArgumentError(f"Negative qubit index in {self.targets}")
        if self.kind.parameterized:
            if self.angle is None or not math.isfinite(self.angle):
                raise ArgumentError(f"{self.kind.value} needs a finite angle, got {self.angle}")
            object.__setattr__(self, "angle", float(self.angle))
        elif self.angle is not None:
            raise ArgumentError(f"{self.kind.value} takes no angle, got {self.angle}")

    def inverse(self) -> "GateOp":
        """Adjoint gate; the fixed gates of the set are all self-inverse"""
        if self.kind.parameterized:
            return GateOp(self.kind, self.targets, -self.angle)
        return self

    def label(self) -> str:
        qubits = ",".join(f"q{t}" for t in self.targets)
        if self.kind.parameterized:
            return f"{self.kind.value}({self.angle:+.6f}) {qubits}"
        return f"{self.kind.value} {qubits}"


def rx(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def rzz(theta: float) -> np.ndarray:
    a, b = np.exp(-0.5j * theta), np.exp(0.5j * theta)
    return np.diag([a, b, b, a])


_ROTATIONS = {GateKind.RX: rx, GateKind.RY: ry, GateKind.RZ: rz, GateKind.RZZ: rzz}


def gate_matrix(gate: GateOp) -> np.ndarray:
    """2x2 or 4x4 unitary realizing the gate"""
    if gate.kind.parameterized:
        return _ROTATIONS[gate.kind](gate.angle)
    return _FIXED_MATRICES[gate.kind]


@dataclass
class StateVector:
    """Pure state of an n-qubit register"""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if self.amplitudes.shape[0] != 2 ** self.n_qubits:
            raise ArgumentError(
                f"{self.n_qubits} qubits need {2 ** self.n_qubits} amplitudes, "
                f"got {self.amplitudes.shape[0]}"
            )

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())


def init_zero_state(n: int) -> StateVector:
    """|0...0> on n qubits"""
    if not 1 <= n <= MAX_QUBITS:
        raise ConfigError(f"Qubit count must be in [1, {MAX_QUBITS}] (desk-scale cap), got {n}")
    amplitudes = np.zeros(2 ** n, dtype=np.complex128)
    amplitudes[0] = 1.0
    return StateVector(n, amplitudes)


def check_targets(n_qubits: int, targets: Sequence[int]):
    for t in targets:
        if not 0 <= t < n_qubits:
            raise ArgumentError(f"Qubit index {t} out of range for {n_qubits} qubits")


def apply_matrix_inplace(amplitudes: np.ndarray, n_qubits: int, matrix: np.ndarray, targets: Sequence[int]):
    """Overwrite amplitudes with matrix applied on the target qubits"""
    if len(targets) == 1:
        k = targets[0]
        view = amplitudes.reshape(2 ** (n_qubits - 1 - k), 2, 2 ** k)
        amplitudes[:] = np.einsum("ab,ibj->iaj", matrix, view).reshape(-1)
        return amplitudes

    axes = (n_qubits - 1 - targets[0], n_qubits - 1 - targets[1])
    tensor = np.moveaxis(amplitudes.reshape((2,) * n_qubits), axes, (0, 1))
    rest = tensor.shape[2:]
    out = (matrix @ tensor.reshape(4, -1)).reshape((2, 2) + rest)
    amplitudes[:] = np.moveaxis(out, (0, 1), axes).reshape(-1)
    return amplitudes


def apply_gate_inplace(amplitudes: np.ndarray, n_qubits: int, gate: GateOp) -> np.ndarray:
    """Apply one gate to a working amplitude buffer owned by the caller"""
    check_targets(n_qubits, gate.targets)
    return apply_matrix_inplace(amplitudes, n_qubits, gate_matrix(gate), gate.targets)


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    """Return the state after applying gate; the input state is left untouched"""
    result = state.copy()
    apply_gate_inplace(result.amplitudes, result.n_qubits, gate)
    return result


def apply_circuit(state: StateVector, gates: Sequence[GateOp]) -> StateVector:
    result = state.copy()
    for gate in gates:
        apply_gate_inplace(result.amplitudes, result.n_qubits, gate)
    return result


def z_expectations(state: StateVector) -> np.ndarray:
    """<Z_i> for every qubit i; +1 contributions come from basis states with bit i = 0"""
    n = state.n_qubits
    probs = state.probabilities()
    values = np.empty(n)
    for k in range(n):
        view = probs.reshape(2 ** (n - 1 - k), 2, 2 ** k)
        values[k] = view[:, 0, :].sum() - view[:, 1, :].sum()
    return np.clip(values, -1.0, 1.0)


def check_normalized(state: StateVector, tolerance: float = NORM_TOLERANCE):
    norm = state.norm()
    if not math.isfinite(norm) or abs(norm - 1.0) > tolerance:
        raise NumericalError(f"State norm drifted to {norm!r} (tolerance {tolerance})")
