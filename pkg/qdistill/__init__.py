"""
qdistill: knowledge distillation from teacher class distributions into a
simulated variational quantum classifier.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ArgumentError,
    ConfigError,
    DataError,
    FormatError,
    InputError,
    NumericalError,
    QDistillError,
)
from .loss import LossMode, LossSpec  # noqa: E402
from .model import ModelConfig, StudentParams, param_count  # noqa: E402
from .train import TrainConfig, ablation_run, evaluate, infer, train_run  # noqa: E402
