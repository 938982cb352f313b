"""
Gradients of the distillation loss

loss_gradient runs one forward sweep per example, then one reverse sweep
that carries the adjoint state back through the circuit (adjoint
differentiation). The loss enters through the observable
H = sum_j (dL/ds_j) Z_{r_j}, where s_j are the readout expectations, so a
single reverse sweep yields every angle derivative.

parameter_shift_gradient and finite_diff_gradient are independent oracles
used to check the fast path.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import sim
from .errors import ArgumentError, DataError, NumericalError
from .loss import LossSpec, LossTriple, combined_loss, example_loss, example_loss_grad, one_hot
from .model import (
    FrozenEmbedding,
    GradientVector,
    ModelConfig,
    StudentParams,
    ansatz_schedule,
    encoding_angles,
    encoding_gates,
    forward,
    readout_distribution,
)
from .sim import GateOp

logger = logging.getLogger(__name__)

SHIFT = math.pi / 2


def _check_batch(batch: Sequence, loss_spec: LossSpec):
    if len(batch) == 0:
        raise ArgumentError("Cannot differentiate over an empty batch")
    if loss_spec.mode.needs_teacher:
        missing = [ex.id for ex in batch if ex.teacher is None]
        if missing:
            raise DataError(f"{loss_spec.mode.value} loss needs teacher distributions; missing for {missing}")


def _readout_observable(n_qubits: int, readout: Sequence[int], coefficients: np.ndarray) -> np.ndarray:
    """Diagonal of sum_j c_j Z_{r_j} in the computational basis"""
    index = np.arange(2 ** n_qubits)
    diag = np.zeros(2 ** n_qubits)
    for qubit, c in zip(readout, coefficients):
        diag += c * (1 - 2 * ((index >> qubit) & 1))
    return diag


def _readout_sensitivity(f, q, y, loss_spec: LossSpec) -> np.ndarray:
    """dL/ds through the softmax: q * (g - <q, g>)"""
    g = example_loss_grad(f, q, y, loss_spec)
    return q * (g - np.dot(q, g))


def _full_gate_list(angles: np.ndarray, params: StudentParams) -> Tuple[List[GateOp], List[Optional[int]]]:
    """Encoding gates followed by the ansatz; slot = -1 - i marks encoding angle i"""
    gates, slots = [], []
    for i, gate in enumerate(encoding_gates(angles)):
        gates.append(gate)
        slots.append(-1 - i)
    for item in ansatz_schedule(params):
        gates.append(item.gate)
        slots.append(item.param_index)
    return gates, slots


def _run_gates(n_qubits: int, gates: Sequence[GateOp]) -> np.ndarray:
    amplitudes = sim.init_zero_state(n_qubits).amplitudes
    for gate in gates:
        sim.apply_gate_inplace(amplitudes, n_qubits, gate)
    return amplitudes


def _scatter(flat: np.ndarray, slot: int, value: float, encoding_grad: np.ndarray):
    if slot < 0:
        encoding_grad[-1 - slot] += value
    else:
        flat[slot] += value


def _chain_encoding(flat: np.ndarray, encoding_grad: np.ndarray, pooled: np.ndarray, config: ModelConfig):
    """dL/dw = (dL/dz) E^T and dL/db = dL/dz"""
    n, m = config.n_qubits, config.embed_dim
    flat[: n * m] += np.outer(encoding_grad, pooled).ravel()
    flat[n * m: n * m + n] += encoding_grad


def _example_triple(example, q: np.ndarray, config: ModelConfig):
    return example.teacher, q, one_hot(example.label, config.n_classes)


def _adjoint_example(example, params: StudentParams, config: ModelConfig, loss_spec: LossSpec,
                     embedding: FrozenEmbedding) -> Tuple[float, np.ndarray]:
    n = config.n_qubits
    angles, pooled = encoding_angles(example.tokens, embedding, params)
    gates, slots = _full_gate_list(angles, params)

    psi = _run_gates(n, gates)
    state = sim.StateVector(n, psi)
    sim.check_normalized(state)
    q = readout_distribution(sim.z_expectations(state), config)
    f, q, y = _example_triple(example, q, config)
    value = example_loss(f, q, y, loss_spec)
    if not math.isfinite(value):
        raise NumericalError(f"Non-finite loss {value} for example '{example.id}'")

    coefficients = _readout_sensitivity(f, q, y, loss_spec)
    adjoint = _readout_observable(n, config.readout, coefficients) * psi
    phi = psi.copy()

    flat = np.zeros(params.size())
    encoding_grad = np.zeros(n)
    scratch = np.empty_like(phi)
    last = len(gates) - 1
    for position in range(last, -1, -1):
        gate = gates[position]
        if gate.kind.parameterized:
            scratch[:] = phi
            sim.apply_matrix_inplace(scratch, n, sim.GENERATORS[gate.kind], gate.targets)
            _scatter(flat, slots[position], float(np.vdot(adjoint, scratch).imag), encoding_grad)
        if position > 0:
            inverse = gate.inverse()
            sim.apply_gate_inplace(phi, n, inverse)
            sim.apply_gate_inplace(adjoint, n, inverse)

    _chain_encoding(flat, encoding_grad, pooled, config)
    if not np.all(np.isfinite(flat)):
        raise NumericalError(f"Non-finite gradient for example '{example.id}'")
    return value, flat


def _map_examples(fn: Callable, batch: Sequence, workers: int) -> List:
    if workers > 1 and len(batch) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, batch))
    return [fn(example) for example in batch]


def loss_gradient(batch: Sequence, params: StudentParams, config: ModelConfig, loss_spec: LossSpec,
                  embedding: FrozenEmbedding, workers: int = 1) -> Tuple[float, GradientVector]:
    """Batch-mean loss and its gradient for every trainable value"""
    _check_batch(batch, loss_spec)
    results = _map_examples(
        lambda ex: _adjoint_example(ex, params, config, loss_spec, embedding), batch, workers
    )
    total = 0.0
    flat = np.zeros(params.size())
    # fixed example order keeps the reduction bit-reproducible
    for value, grad in results:
        total += value
        flat += grad
    size = len(batch)
    return total / size, StudentParams.from_flat(config, flat / size)


def batch_triples(batch: Sequence, params: StudentParams, config: ModelConfig, loss_spec: LossSpec,
                  embedding: FrozenEmbedding) -> List[LossTriple]:
    """(teacher, student, one-hot label) per example from one forward pass"""
    _check_batch(batch, loss_spec)
    return [_example_triple(ex, forward(ex.tokens, embedding, params, config), config) for ex in batch]


def batch_loss(batch: Sequence, params: StudentParams, config: ModelConfig, loss_spec: LossSpec,
               embedding: FrozenEmbedding) -> float:
    return combined_loss(batch_triples(batch, params, config, loss_spec, embedding), loss_spec)


def finite_diff_gradient(batch: Sequence, params: StudentParams, config: ModelConfig, loss_spec: LossSpec,
                         embedding: FrozenEmbedding, h: float = 1e-4) -> GradientVector:
    """Central differences (L(x+h) - L(x-h)) / 2h per coordinate"""
    if not 0 < h <= 1e-2:
        raise ArgumentError(f"Finite-difference step must lie in (0, 1e-2], got {h}")
    base = params.flatten()
    grad = np.zeros_like(base)
    for i in range(base.size):
        shifted = base.copy()
        shifted[i] = base[i] + h
        plus = batch_loss(batch, StudentParams.from_flat(config, shifted), config, loss_spec, embedding)
        shifted[i] = base[i] - h
        minus = batch_loss(batch, StudentParams.from_flat(config, shifted), config, loss_spec, embedding)
        grad[i] = (plus - minus) / (2 * h)
    return StudentParams.from_flat(config, grad)


def _shifted(gate: GateOp, delta: float) -> GateOp:
    return GateOp(gate.kind, gate.targets, gate.angle + delta)


def parameter_shift_gradient(batch: Sequence, params: StudentParams, config: ModelConfig, loss_spec: LossSpec,
                             embedding: FrozenEmbedding) -> GradientVector:
    """Two-term shift rule on the readout expectations, chained through softmax and loss

    Every rotation is exp(-i angle/2 P) with P a Pauli string, so
    ds/dangle = (s(angle + pi/2) - s(angle - pi/2)) / 2 exactly.
    """
    _check_batch(batch, loss_spec)
    n = config.n_qubits
    readout = list(config.readout)
    flat = np.zeros(params.size())
    for example in batch:
        angles, pooled = encoding_angles(example.tokens, embedding, params)
        gates, slots = _full_gate_list(angles, params)
        expectations = sim.z_expectations(sim.StateVector(n, _run_gates(n, gates)))
        q = readout_distribution(expectations, config)
        f, q, y = _example_triple(example, q, config)
        coefficients = _readout_sensitivity(f, q, y, loss_spec)

        example_flat = np.zeros_like(flat)
        encoding_grad = np.zeros(n)
        for position, gate in enumerate(gates):
            if not gate.kind.parameterized:
                continue
            values = []
            for delta in (SHIFT, -SHIFT):
                trial = list(gates)
                trial[position] = _shifted(gate, delta)
                values.append(sim.z_expectations(sim.StateVector(n, _run_gates(n, trial)))[readout])
            ds = 0.5 * (values[0] - values[1])
            _scatter(example_flat, slots[position], float(np.dot(coefficients, ds)), encoding_grad)
        _chain_encoding(example_flat, encoding_grad, pooled, config)
        flat += example_flat
    return StudentParams.from_flat(config, flat / len(batch))
