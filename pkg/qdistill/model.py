"""
Quantum Student Model

Frozen token embedding -> mean pooling -> linear projection z = wE + b ->
RX(z_i) encoding on |0>^n -> p ansatz layers -> Z expectations of the
readout qubits -> softmax over classes.

One ansatz layer, in order:
  UY on every qubit      (three RY gates, angles uy[i, 0..2])
  RZZ on pairs (i, i+1)  (angle zz[i])
  UZ on every qubit      (three RZ gates, angles uz[i, 0..2])
  CNOT on pairs (i, i+1) (control i, target i+1)
"""

import hashlib
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import softmax

from . import sim
from .errors import ArgumentError, ConfigError, FormatError, InputError
from .sim import GateKind, GateOp, StateVector

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelConfig:
    """Circuit shape: qubits n, embedding dim m, depth p, classes C, readout qubits"""

    n_qubits: int = 11
    embed_dim: int = 32
    depth: int = 2
    n_classes: int = 2
    readout: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        for name in ("n_qubits", "embed_dim", "n_classes"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 1 <= self.n_qubits <= sim.MAX_QUBITS:
            raise ConfigError(f"n_qubits must be in [1, {sim.MAX_QUBITS}], got {self.n_qubits}")
        if self.depth < 0:
            raise ConfigError(f"depth must be >= 0, got {self.depth}")
        if self.n_classes < 2:
            raise ConfigError(f"n_classes must be >= 2, got {self.n_classes}")
        if self.n_classes > self.n_qubits:
            raise ConfigError(
                f"n_classes ({self.n_classes}) cannot exceed n_qubits ({self.n_qubits}): "
                f"each class reads one qubit"
            )
        readout = tuple(range(self.n_classes)) if self.readout is None else tuple(int(r) for r in self.readout)
        if len(readout) != self.n_classes:
            raise ConfigError(f"readout needs {self.n_classes} qubit indices, got {readout}")
        if len(set(readout)) != len(readout):
            raise ConfigError(f"readout indices must be distinct, got {readout}")
        if any(not 0 <= r < self.n_qubits for r in readout):
            raise ConfigError(f"readout index out of range for {self.n_qubits} qubits: {readout}")
        object.__setattr__(self, "readout", readout)

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "embed_dim": self.embed_dim,
            "depth": self.depth,
            "n_classes": self.n_classes,
            "readout": list(self.readout),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(
            n_qubits=data["n_qubits"],
            embed_dim=data["embed_dim"],
            depth=data["depth"],
            n_classes=data["n_classes"],
            readout=data.get("readout"),
        )


def param_count(config: ModelConfig) -> int:
    """n*m + n + p*(6n + n-1)"""
    n, m, p = config.n_qubits, config.embed_dim, config.depth
    return n * m + n + p * (6 * n + n - 1)


@dataclass
class StudentParams:
    """All trainable values of the student

    proj_weight: (n, m)     w of z = wE + b
    proj_bias:   (n,)       b
    uy:          (p, n, 3)  three RY angles per qubit per layer
    zz:          (p, n-1)   one RZZ angle per adjacent pair per layer
    uz:          (p, n, 3)  three RZ angles per qubit per layer

    The same shape doubles as the gradient container.
    """

    proj_weight: np.ndarray
    proj_bias: np.ndarray
    uy: np.ndarray
    zz: np.ndarray
    uz: np.ndarray

    def __post_init__(self):
        self.proj_weight = np.asarray(self.proj_weight, dtype=np.float64)
        self.proj_bias = np.asarray(self.proj_bias, dtype=np.float64)
        self.uy = np.asarray(self.uy, dtype=np.float64)
        self.zz = np.asarray(self.zz, dtype=np.float64)
        self.uz = np.asarray(self.uz, dtype=np.float64)
        n, m = self.proj_weight.shape
        p = self.uy.shape[0]
        expected = {
            "proj_bias": (n,),
            "uy": (p, n, 3),
            "zz": (p, max(n - 1, 0)),
            "uz": (p, n, 3),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ArgumentError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def n_qubits(self) -> int:
        return self.proj_weight.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.proj_weight.shape[1]

    @property
    def depth(self) -> int:
        return self.uy.shape[0]

    @classmethod
    def zeros(cls, config: ModelConfig) -> "StudentParams":
        n, m, p = config.n_qubits, config.embed_dim, config.depth
        return cls(np.zeros((n, m)), np.zeros(n), np.zeros((p, n, 3)), np.zeros((p, n - 1)), np.zeros((p, n, 3)))

    @classmethod
    def initialize(cls, config: ModelConfig, rng: np.random.Generator) -> "StudentParams":
        """Angles ~ U(-0.1, 0.1), weights ~ U(-sqrt(1/m), sqrt(1/m)), bias = 0"""
        n, m, p = config.n_qubits, config.embed_dim, config.depth
        bound = math.sqrt(1.0 / m)
        proj_weight = rng.uniform(-bound, bound, size=(n, m))
        uy = rng.uniform(-0.1, 0.1, size=(p, n, 3))
        zz = rng.uniform(-0.1, 0.1, size=(p, n - 1))
        uz = rng.uniform(-0.1, 0.1, size=(p, n, 3))
        return cls(proj_weight, np.zeros(n), uy, zz, uz)

    def flatten(self) -> np.ndarray:
        """proj_weight, proj_bias, then per layer: uy, zz, uz"""
        parts = [self.proj_weight.ravel(), self.proj_bias]
        for k in range(self.depth):
            parts.extend([self.uy[k].ravel(), self.zz[k], self.uz[k].ravel()])
        return np.concatenate(parts)

    @classmethod
    def from_flat(cls, config: ModelConfig, values: np.ndarray) -> "StudentParams":
        return cls._unflatten(config.n_qubits, config.embed_dim, config.depth, values)

    def with_values(self, values: np.ndarray) -> "StudentParams":
        """New parameters of this shape holding the given flat values"""
        return self._unflatten(self.n_qubits, self.embed_dim, self.depth, values)

    @classmethod
    def _unflatten(cls, n: int, m: int, p: int, values: np.ndarray) -> "StudentParams":
        values = np.asarray(values, dtype=np.float64)
        expected = n * m + n + p * (6 * n + n - 1)
        if values.shape != (expected,):
            raise ArgumentError(f"Expected {expected} values for n={n}, m={m}, p={p}, got {values.shape}")
        pos = 0

        def take(count):
            nonlocal pos
            chunk = values[pos:pos + count]
            pos += count
            return chunk

        proj_weight = take(n * m).reshape(n, m)
        proj_bias = take(n)
        uy, zz, uz = np.zeros((p, n, 3)), np.zeros((p, n - 1)), np.zeros((p, n, 3))
        for k in range(p):
            uy[k] = take(3 * n).reshape(n, 3)
            zz[k] = take(n - 1)
            uz[k] = take(3 * n).reshape(n, 3)
        return cls(proj_weight.copy(), proj_bias.copy(), uy, zz, uz)

    def copy(self) -> "StudentParams":
        return StudentParams(
            self.proj_weight.copy(), self.proj_bias.copy(), self.uy.copy(), self.zz.copy(), self.uz.copy()
        )

    def size(self) -> int:
        return self.flatten().size

    def digest(self) -> str:
        """sha256 of the little-endian float64 flat values"""
        return hashlib.sha256(self.flatten().astype("<f8").tobytes()).hexdigest()


GradientVector = StudentParams


class FrozenEmbedding:
    """Non-trainable token embedding table

    Row for token t is drawn from U(-1, 1) by a generator seeded with
    (seed, t), so the table is reproducible without being stored. A `.npy`
    matrix with one row per token id can replace the generated rows.
    """

    def __init__(self, embed_dim: int, seed: int = 0, table: Optional[np.ndarray] = None):
        self.embed_dim = int(embed_dim)
        self.seed = int(seed)
        self.table = None
        if table is not None:
            table = np.asarray(table, dtype=np.float64)
            if table.ndim != 2 or table.shape[1] != self.embed_dim:
                raise ConfigError(
                    f"Embedding table has shape {table.shape}, expected (vocab, {self.embed_dim})"
                )
            self.table = table
        self._rows: Dict[int, np.ndarray] = {}

    @classmethod
    def from_file(cls, path, embed_dim: int, seed: int = 0) -> "FrozenEmbedding":
        try:
            table = np.load(Path(path), allow_pickle=False)
        except FileNotFoundError:
            raise ConfigError(f"Embedding file not found: {path}")
        except ValueError as e:
            raise FormatError(f"Cannot read embedding file {path}: {e}")
        return cls(embed_dim, seed, table)

    def vector(self, token_id: int) -> np.ndarray:
        token_id = int(token_id)
        if token_id < 0:
            raise ArgumentError(f"Token ids are non-negative, got {token_id}")
        if self.table is not None:
            if token_id >= self.table.shape[0]:
                raise ArgumentError(f"Token id {token_id} beyond embedding table of {self.table.shape[0]} rows")
            return self.table[token_id]
        row = self._rows.get(token_id)
        if row is None:
            row = np.random.default_rng([self.seed, token_id]).uniform(-1.0, 1.0, self.embed_dim)
            row.flags.writeable = False
            self._rows[token_id] = row
        return row

    def pool(self, tokens: Sequence[int]) -> np.ndarray:
        """Arithmetic mean of the token vectors"""
        if len(tokens) == 0:
            raise InputError("Cannot embed an empty token sequence")
        return np.mean([self.vector(t) for t in tokens], axis=0)


def _check_embedding(embedding: FrozenEmbedding, params: StudentParams):
    if embedding.embed_dim != params.embed_dim:
        raise ConfigError(
            f"Embedding dimension {embedding.embed_dim} does not match projection input {params.embed_dim}"
        )


def encoding_angles(tokens: Sequence[int], embedding: FrozenEmbedding, params: StudentParams) -> Tuple[np.ndarray, np.ndarray]:
    """Return (z, E): the RX angles and the pooled embedding they came from"""
    if len(tokens) == 0:
        raise InputError("Cannot encode an empty token sequence")
    _check_embedding(embedding, params)
    pooled = embedding.pool(tokens)
    return params.proj_weight @ pooled + params.proj_bias, pooled


def encoding_gates(angles: np.ndarray) -> List[GateOp]:
    return [GateOp(GateKind.RX, (i,), float(a)) for i, a in enumerate(angles)]


def encode_angles(angles: np.ndarray) -> StateVector:
    state = sim.init_zero_state(len(angles))
    for gate in encoding_gates(angles):
        sim.apply_gate_inplace(state.amplitudes, state.n_qubits, gate)
    return state


def encode(tokens: Sequence[int], embedding: FrozenEmbedding, params: StudentParams) -> StateVector:
    """prod_i RX(z_i) |0>^n"""
    angles, _ = encoding_angles(tokens, embedding, params)
    return encode_angles(angles)


@dataclass(frozen=True)
class ScheduledGate:
    """An ansatz gate plus the flat parameter index driving it (None for CNOT)"""

    layer: int
    block: str
    gate: GateOp
    param_index: Optional[int] = None


def ansatz_schedule(params: StudentParams) -> List[ScheduledGate]:
    """Gate-by-gate ansatz in application order, tied to flat parameter indices"""
    n, m, p = params.n_qubits, params.embed_dim, params.depth
    schedule = []
    offset = n * m + n
    per_layer = 6 * n + n - 1
    for k in range(p):
        base = offset + k * per_layer
        for i in range(n):
            for j in range(3):
                schedule.append(ScheduledGate(k, "UY", GateOp(GateKind.RY, (i,), params.uy[k, i, j]), base + 3 * i + j))
        base_zz = base + 3 * n
        for i in range(n - 1):
            schedule.append(ScheduledGate(k, "RZZ", GateOp(GateKind.RZZ, (i, i + 1), params.zz[k, i]), base_zz + i))
        base_uz = base_zz + n - 1
        for i in range(n):
            for j in range(3):
                schedule.append(ScheduledGate(k, "UZ", GateOp(GateKind.RZ, (i,), params.uz[k, i, j]), base_uz + 3 * i + j))
        for i in range(n - 1):
            schedule.append(ScheduledGate(k, "CNOT", GateOp(GateKind.CNOT, (i, i + 1))))
    return schedule


def apply_ansatz(state: StateVector, params: StudentParams) -> StateVector:
    if state.n_qubits != params.n_qubits:
        raise ConfigError(f"State has {state.n_qubits} qubits, ansatz expects {params.n_qubits}")
    return sim.apply_circuit(state, [item.gate for item in ansatz_schedule(params)])


def readout_distribution(expectations: np.ndarray, config: ModelConfig) -> np.ndarray:
    return softmax(expectations[list(config.readout)])


def forward_state(tokens: Sequence[int], embedding: FrozenEmbedding, params: StudentParams) -> StateVector:
    return apply_ansatz(encode(tokens, embedding, params), params)


def forward(tokens: Sequence[int], embedding: FrozenEmbedding, params: StudentParams, config: ModelConfig) -> np.ndarray:
    """Class distribution q = softmax(<Z_r> for r in readout)"""
    if params.n_qubits != config.n_qubits or params.embed_dim != config.embed_dim or params.depth != config.depth:
        raise ConfigError("Parameters do not match the model configuration")
    state = forward_state(tokens, embedding, params)
    return readout_distribution(sim.z_expectations(state), config)


def predict(tokens: Sequence[int], embedding: FrozenEmbedding, params: StudentParams, config: ModelConfig) -> Tuple[int, np.ndarray]:
    """argmax class (lowest index on ties) and the full distribution"""
    q = forward(tokens, embedding, params, config)
    return int(np.argmax(q)), q


def describe_circuit(config: ModelConfig) -> List[str]:
    """Human-readable gate schedule with parameter accounting"""
    n, m, p = config.n_qubits, config.embed_dim, config.depth
    lines = [
        f"Student circuit: {n} qubits, embedding dim {m}, depth {p}, {config.n_classes} classes",
        f"Readout qubits: {', '.join(f'q{r}' for r in config.readout)}",
        "",
        f"Projection      z = wE + b   w: {n}x{m} ({n * m} values)  b: {n} values",
        f"Encoding        RX(z_i) on q0..q{n - 1}",
    ]
    for k in range(p):
        lines.append(f"Layer {k + 1}:")
        lines.append(f"  UY   {3 * n:>4} RY angles   " + " ".join(f"UY(q{i})" for i in range(n)))
        lines.append(f"  RZZ  {n - 1:>4} angles      " + " ".join(f"RZZ(q{i},q{i + 1})" for i in range(n - 1)))
        lines.append(f"  UZ   {3 * n:>4} RZ angles   " + " ".join(f"UZ(q{i})" for i in range(n)))
        lines.append(f"  CNOT {n - 1:>4} gates       " + " ".join(f"CNOT(q{i}->q{i + 1})" for i in range(n - 1)))
    lines.append("Measurement     Z on readout qubits -> softmax")
    lines.append("")
    lines.append(f"Trainable parameters: {param_count(config)}")
    return lines
