"""
Adam optimizer over the flattened student parameters
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import ArgumentError, NumericalError
from .model import GradientVector, StudentParams

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """Step counter, moment estimates and hyperparameters of one Adam run"""

    step: int
    first_moment: np.ndarray
    second_moment: np.ndarray
    lr: float = 0.06
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        self.first_moment = np.asarray(self.first_moment, dtype=np.float64)
        self.second_moment = np.asarray(self.second_moment, dtype=np.float64)
        if self.first_moment.shape != self.second_moment.shape or self.first_moment.ndim != 1:
            raise ArgumentError(
                f"Moment shapes differ: {self.first_moment.shape} vs {self.second_moment.shape}"
            )
        if self.step < 0:
            raise ArgumentError(f"Adam step must be >= 0, got {self.step}")
        if np.any(self.second_moment < 0):
            raise ArgumentError("Second moment estimates must be non-negative")

    @classmethod
    def fresh(cls, size: int, lr: float = 0.06, beta1: float = 0.9, beta2: float = 0.999,
              epsilon: float = 1e-8) -> "AdamState":
        return cls(0, np.zeros(size), np.zeros(size), lr, beta1, beta2, epsilon)

    def hyperparameters(self) -> dict:
        return {"step": self.step, "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "epsilon": self.epsilon}


def adam_update(values: np.ndarray, grads: np.ndarray, state: AdamState) -> Tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam step on flat vectors; inputs are not modified"""
    values = np.asarray(values, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if values.shape != grads.shape or values.shape != state.first_moment.shape:
        raise ArgumentError(
            f"Shape mismatch: params {values.shape}, grads {grads.shape}, moments {state.first_moment.shape}"
        )
    bad = np.flatnonzero(~np.isfinite(grads))
    if bad.size:
        raise NumericalError(f"Non-finite gradient at flat indices {bad[:10].tolist()}")

    t = state.step + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * (grads * grads)
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_values = values - state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    new_state = AdamState(t, m, v, state.lr, state.beta1, state.beta2, state.epsilon)
    return new_values, new_state


def adam_step(params: StudentParams, grads: GradientVector, state: AdamState) -> Tuple[StudentParams, AdamState]:
    """Adam step on structured parameters; returns new params and new state"""
    new_values, new_state = adam_update(params.flatten(), grads.flatten(), state)
    return params.with_values(new_values), new_state
