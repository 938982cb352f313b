"""
Run Configuration

Profiles live in one JSON file, {"profiles": {<name>: {<key>: value}}},
each profile a flat key-value map. A run resolves every key with the
precedence command-line flag > profile > built-in default, and prints the
resolved listing so the run can be repeated from its log.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

from .errors import ConfigError
from .loss import LossSpec
from .metrics import DEFAULT_TEACHER_PARAMS
from .model import ModelConfig
from .train import TrainConfig

logger = logging.getLogger(__name__)

DEFAULT_PROFILE = "desk"

DEFAULTS: Dict[str, Any] = {
    "seed": 0,
    "qubits": 11,
    "depth": 2,
    "embed_dim": 32,
    "classes": 2,
    "readout": None,
    "loss_mode": "COMBINED",
    "lambda2": 0.1,
    "lr": 0.06,
    "epochs": 10,
    "batch_size": 8,
    "repeats": 5,
    "workers": 1,
    "embedding_path": None,
    "teacher_accuracy": 0.95,
    "smoothing": 0.1,
    "overlap": 0.0,
    "teacher_params": DEFAULT_TEACHER_PARAMS,
}

# keys allowed in a profile that do not affect the run
_INFORMATIONAL = {"description"}


def load_config(config_path, profile: str = DEFAULT_PROFILE) -> Dict[str, Any]:
    """Load one profile from a JSON config file"""
    config_path = Path(config_path)
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            config = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Configuration file not found: {config_path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in configuration file {config_path}: {e.msg} (line {e.lineno})")

    profiles = config.get("profiles") if isinstance(config, dict) else None
    if not isinstance(profiles, dict):
        raise ConfigError(f"{config_path} has no 'profiles' object")
    if profile not in profiles:
        raise ConfigError(f"Profile '{profile}' not found in {config_path} (available: {', '.join(sorted(profiles))})")

    values = profiles[profile]
    if not isinstance(values, dict):
        raise ConfigError(f"Profile '{profile}' must be an object of key/value pairs")
    unknown = sorted(set(values) - set(DEFAULTS) - _INFORMATIONAL)
    if unknown:
        raise ConfigError(f"Unknown key(s) in profile '{profile}': {', '.join(unknown)}")
    nested = sorted(k for k, v in values.items() if isinstance(v, dict))
    if nested:
        raise ConfigError(f"Profile keys must be flat values, got objects for: {', '.join(nested)}")
    return {k: v for k, v in values.items() if k not in _INFORMATIONAL}


def resolve_config(file_values: Optional[Dict[str, Any]] = None,
                   flag_values: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Defaults, overlaid by the profile, overlaid by flags that were actually given"""
    resolved = dict(DEFAULTS)
    for source in (file_values or {}, flag_values or {}):
        for key, value in source.items():
            if key not in DEFAULTS:
                raise ConfigError(f"Unknown configuration key '{key}'")
            if value is not None:
                resolved[key] = value
    return resolved


def _typed(resolved: Dict[str, Any], key: str, kind):
    value = resolved[key]
    if value is None:
        return None
    if kind is int and isinstance(value, float) and value.is_integer():
        value = int(value)
    if isinstance(value, bool) or (kind is int and not isinstance(value, int)):
        raise ConfigError(f"'{key}' must be an integer, got {value!r}")
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"'{key}' must be {kind.__name__}, got {value!r}")


def build_train_config(resolved: Dict[str, Any]) -> TrainConfig:
    readout = resolved.get("readout")
    if isinstance(readout, str):
        try:
            readout = [int(part) for part in readout.split(",") if part.strip()]
        except ValueError:
            raise ConfigError(f"'readout' must be comma-separated qubit indices, got {resolved['readout']!r}")
    model = ModelConfig(
        n_qubits=_typed(resolved, "qubits", int),
        embed_dim=_typed(resolved, "embed_dim", int),
        depth=_typed(resolved, "depth", int),
        n_classes=_typed(resolved, "classes", int),
        readout=tuple(readout) if readout is not None else None,
    )
    loss = LossSpec(str(resolved["loss_mode"]), _typed(resolved, "lambda2", float))
    return TrainConfig(
        model=model,
        loss=loss,
        epochs=_typed(resolved, "epochs", int),
        batch_size=_typed(resolved, "batch_size", int),
        lr=_typed(resolved, "lr", float),
        seed=_typed(resolved, "seed", int),
        repeats=_typed(resolved, "repeats", int),
        workers=_typed(resolved, "workers", int),
        embedding_path=resolved.get("embedding_path"),
        teacher_params=_typed(resolved, "teacher_params", float),
    )


def format_resolved(resolved: Dict[str, Any]) -> str:
    return "\n".join(f"{key} = {json.dumps(resolved[key])}" for key in sorted(resolved))
