"""
Distillation Loss

Composite objective used to train the student against frozen teacher
distributions: lambda1 * (KL + JS) + lambda2 * CE, averaged over the batch,
plus the single-term ablation modes CE, KL and JS.

All logarithms are natural. Every log argument is floored at EPSILON so
teacher distributions containing exact zeros keep the loss finite.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.special import xlogy

from .errors import ArgumentError, ConfigError, NumericalError

logger = logging.getLogger(__name__)

EPSILON = 1e-12
PROB_TOLERANCE = 1e-9

# (teacher f, student q, label one-hot y)
LossTriple = Tuple[Optional[np.ndarray], np.ndarray, np.ndarray]


class LossMode(str, Enum):
    CE = "CE"
    KL = "KL"
    JS = "JS"
    COMBINED = "COMBINED"

    @property
    def needs_teacher(self) -> bool:
        return self is not LossMode.CE


@dataclass(frozen=True)
class LossSpec:
    """Loss mode and the CE weight lambda2; lambda1 = 1 - lambda2"""

    mode: LossMode = LossMode.COMBINED
    lambda2: float = 0.1

    def __post_init__(self):
        try:
            mode = self.mode if isinstance(self.mode, LossMode) else LossMode(str(self.mode).upper())
            object.__setattr__(self, "mode", mode)
        except ValueError:
            choices = ", ".join(m.value for m in LossMode)
            raise ConfigError(f"Unknown loss mode '{self.mode}' (choose from {choices})")
        if not 0.0 <= float(self.lambda2) <= 1.0:
            raise ConfigError(f"lambda2 must lie in [0, 1], got {self.lambda2}")
        object.__setattr__(self, "lambda2", float(self.lambda2))

    @property
    def lambda1(self) -> float:
        return 1.0 - self.lambda2


def check_prob_dist(values, name: str = "distribution", tolerance: float = PROB_TOLERANCE) -> np.ndarray:
    """Validate a probability vector and return it as a float array"""
    p = np.asarray(values, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ArgumentError(f"{name} must be a non-empty vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ArgumentError(f"{name} has negative or non-finite entries: {p}")
    if abs(p.sum() - 1.0) > tolerance:
        raise ArgumentError(f"{name} sums to {p.sum():.12f}, not 1")
    return p


def one_hot(label: int, n_classes: int) -> np.ndarray:
    if not 0 <= label < n_classes:
        raise ArgumentError(f"Label {label} outside [0, {n_classes})")
    y = np.zeros(n_classes)
    y[label] = 1.0
    return y


def _pair(f, q) -> Tuple[np.ndarray, np.ndarray]:
    f = np.asarray(f, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if f.shape != q.shape:
        raise ArgumentError(f"Distribution lengths differ: {f.shape} vs {q.shape}")
    return f, q


def kl_divergence(f, q) -> float:
    """KL(f || q) = sum f_i log(f_i / q_i)"""
    f, q = _pair(f, q)
    return float(np.sum(xlogy(f, f) - xlogy(f, np.maximum(q, EPSILON))))


def js_divergence(f, q) -> float:
    """Jensen-Shannon divergence, symmetric and bounded by ln 2"""
    f, q = _pair(f, q)
    m = np.maximum(0.5 * (f + q), EPSILON)
    kl_f = np.sum(xlogy(f, f) - xlogy(f, m))
    kl_q = np.sum(xlogy(q, q) - xlogy(q, m))
    return float(0.5 * (kl_f + kl_q))


def cross_entropy(y, q) -> float:
    """-sum y_i log q_i for a one-hot label vector y"""
    y, q = _pair(y, q)
    hot = np.flatnonzero(y)
    if hot.size != 1 or y[hot[0]] != 1.0:
        raise ArgumentError(f"Label vector must be one-hot, got {y}")
    return float(-math.log(max(q[hot[0]], EPSILON)))


def example_loss(f: Optional[np.ndarray], q: np.ndarray, y: np.ndarray, spec: LossSpec) -> float:
    """Loss contribution of one example before batch averaging"""
    if spec.mode is LossMode.CE:
        return cross_entropy(y, q)
    if f is None:
        raise ArgumentError(f"{spec.mode.value} loss needs a teacher distribution")
    if spec.mode is LossMode.KL:
        return kl_divergence(f, q)
    if spec.mode is LossMode.JS:
        return js_divergence(f, q)
    return spec.lambda1 * (kl_divergence(f, q) + js_divergence(f, q)) + spec.lambda2 * cross_entropy(y, q)


def example_loss_grad(f: Optional[np.ndarray], q: np.ndarray, y: np.ndarray, spec: LossSpec) -> np.ndarray:
    """d example_loss / d q, valid wherever q > EPSILON (always true after softmax)"""
    q = np.asarray(q, dtype=np.float64)
    safe_q = np.maximum(q, EPSILON)

    def ce_grad():
        return np.where(np.asarray(y) > 0, -1.0 / safe_q, 0.0)

    def kl_grad():
        return np.where(q > EPSILON, -np.asarray(f) / safe_q, 0.0)

    def js_grad():
        m = np.maximum(0.5 * (np.asarray(f) + q), EPSILON)
        return 0.5 * np.log(safe_q / m)

    if spec.mode is LossMode.CE:
        return ce_grad()
    if f is None:
        raise ArgumentError(f"{spec.mode.value} loss needs a teacher distribution")
    if spec.mode is LossMode.KL:
        return kl_grad()
    if spec.mode is LossMode.JS:
        return js_grad()
    return spec.lambda1 * (kl_grad() + js_grad()) + spec.lambda2 * ce_grad()


def combined_loss(batch: Sequence[LossTriple], spec: LossSpec) -> float:
    """Batch-mean loss; COMBINED weights KL+JS by lambda1 and CE by lambda2"""
    batch = list(batch)
    if not batch:
        raise ArgumentError("Loss of an empty batch is undefined")
    sizes = {np.asarray(q).shape for _, q, _ in batch}
    if len(sizes) != 1:
        raise ArgumentError(f"All examples in a batch must share the class count, got {sorted(sizes)}")
    total = 0.0
    for f, q, y in batch:
        if f is not None:
            check_prob_dist(f, "teacher distribution")
        check_prob_dist(q, "student distribution")
        total += example_loss(f, q, y, spec)
    value = total / len(batch)
    if not math.isfinite(value):
        raise NumericalError(f"Non-finite {spec.mode.value} loss: {value}")
    return value


def loss_terms(batch: Iterable[LossTriple]) -> dict:
    """Mean of each individual term, for logging"""
    kl = js = ce = 0.0
    count = 0
    for f, q, y in batch:
        count += 1
        ce += cross_entropy(y, q)
        if f is not None:
            kl += kl_divergence(f, q)
            js += js_divergence(f, q)
    if count == 0:
        raise ArgumentError("Loss terms of an empty batch are undefined")
    return {"kl": kl / count, "js": js / count, "ce": ce / count}
