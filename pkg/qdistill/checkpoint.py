"""
Checkpoint File Format

A checkpoint is a single file: one UTF-8 JSON header line, a newline, then
the little-endian float64 payload holding the flat parameters followed by
the two Adam moment vectors. The header carries the format tag, version,
full run config, training vocabulary, RNG state, timing and a sha256 of the
payload, so a file can be checked before any value is trusted.
"""

import hashlib
import json
import logging
import os
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, QDistillError
from .model import StudentParams, param_count
from .optim import AdamState
from .train import Checkpoint, TrainConfig

logger = logging.getLogger(__name__)

MAGIC = "qdistill-checkpoint"
VERSION = 1
_DTYPE = np.dtype("<f8")


def checkpoint_digest(checkpoint: Checkpoint) -> str:
    """sha256 of the parameter payload"""
    return checkpoint.digest()


def _payload(checkpoint: Checkpoint) -> bytes:
    values = np.concatenate([
        checkpoint.params.flatten(),
        checkpoint.adam.first_moment,
        checkpoint.adam.second_moment,
    ])
    return values.astype(_DTYPE).tobytes()


def save_checkpoint(checkpoint: Checkpoint, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = _payload(checkpoint)
    size = checkpoint.params.size()
    header = {
        "format": MAGIC,
        "version": VERSION,
        "config": checkpoint.config.to_dict(),
        "vocabulary": list(checkpoint.vocabulary),
        "epoch": checkpoint.epoch,
        "rng_state": checkpoint.rng_state,
        "distillation_seconds": checkpoint.distillation_seconds,
        "adam": checkpoint.adam.hyperparameters(),
        "layout": {"params": size, "first_moment": size, "second_moment": size},
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    temp_path = path.with_suffix(path.suffix + ".tmp")
    with open(temp_path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8"))
        f.write(b"\n")
        f.write(payload)
        f.flush()
        os.fsync(f.fileno())
    os.replace(temp_path, path)
    logger.info(f"  ✓ Checkpoint saved: {path} (epoch {checkpoint.epoch}, {size} parameters)")
    return path


def _read_header(raw: bytes, path: Path) -> tuple:
    newline = raw.find(b"\n")
    if newline < 0:
        raise FormatError(f"{path}: no checkpoint header line")
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: checkpoint header is not valid JSON ({e})")
    if not isinstance(header, dict) or header.get("format") != MAGIC:
        raise FormatError(f"{path}: not a qdistill checkpoint")
    if header.get("version") != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {header.get('version')!r}")
    return header, raw[newline + 1:]


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise FormatError(f"Checkpoint not found: {path}")
    header, payload = _read_header(raw, path)

    try:
        config = TrainConfig.from_dict(header["config"])
        layout = header["layout"]
        size = int(layout["params"])
        adam_header = header["adam"]
    except (KeyError, TypeError, ValueError, ConfigError) as e:
        raise FormatError(f"{path}: malformed checkpoint header ({e})")

    expected = param_count(config.model)
    if size != expected or layout.get("first_moment") != size or layout.get("second_moment") != size:
        raise FormatError(f"{path}: layout {layout} does not match {expected} parameters of the config")
    if len(payload) != 3 * size * _DTYPE.itemsize:
        raise FormatError(f"{path}: payload holds {len(payload)} bytes, expected {3 * size * _DTYPE.itemsize}")
    if hashlib.sha256(payload).hexdigest() != header.get("payload_sha256"):
        raise FormatError(f"{path}: payload checksum mismatch")

    values = np.frombuffer(payload, dtype=_DTYPE).astype(np.float64)
    try:
        params = StudentParams.from_flat(config.model, values[:size])
        adam = AdamState(
            step=int(adam_header["step"]),
            first_moment=values[size:2 * size].copy(),
            second_moment=values[2 * size:].copy(),
            lr=adam_header["lr"],
            beta1=adam_header["beta1"],
            beta2=adam_header["beta2"],
            epsilon=adam_header["epsilon"],
        )
        checkpoint = Checkpoint(
            config=config,
            params=params,
            adam=adam,
            epoch=int(header["epoch"]),
            rng_state=header["rng_state"],
            distillation_seconds=float(header["distillation_seconds"]),
            vocabulary=list(header["vocabulary"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{path}: malformed checkpoint header ({e})")
    except QDistillError as e:
        raise FormatError(f"{path}: {e}")
    logger.info(f"  ✓ Loaded checkpoint {path} (epoch {checkpoint.epoch}, digest {checkpoint.digest()[:12]})")
    return checkpoint
