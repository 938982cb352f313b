"""
Run Output

Logging setup for command-line runs, the deterministic metrics file, the
separate timing file, text tables for ablation and sweep results, and an
optional training-curve plot.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

# Optional imports for tables and graphs
try:
    import matplotlib.pyplot as plt
    import pandas as pd
    GRAPHING_AVAILABLE = True
except ImportError:
    GRAPHING_AVAILABLE = False

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"

# wall-clock derived values never go into a metrics file
TIMING_KEYS = frozenset({"acc_per_tkd", "distillation_seconds", "inference_seconds", "epoch_seconds",
                         "cumulative_seconds"})


def setup_logging(log_file=None, verbose: bool = False):
    """Console logging, plus a UTF-8 file log when a path is given"""
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file is not None:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


def _as_dict(report) -> Dict[str, Any]:
    if hasattr(report, "metrics_dict"):
        return report.metrics_dict()
    if hasattr(report, "to_dict"):
        return report.to_dict()
    return dict(report)


def strip_timing(value):
    if isinstance(value, dict):
        return {k: strip_timing(v) for k, v in value.items() if k not in TIMING_KEYS}
    if isinstance(value, (list, tuple)):
        return [strip_timing(v) for v in value]
    return value


def _write_json(data, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_path = path.with_suffix(path.suffix + ".tmp")
    with open(temp_path, "w", encoding="utf-8") as f:
        f.write(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False))
        f.write("\n")
    os.replace(temp_path, path)
    return path


def write_metrics(report, path) -> Path:
    """Sorted-key JSON with every timing field removed; identical runs give identical bytes"""
    path = _write_json(strip_timing(_as_dict(report)), path)
    logger.info(f"  ✓ Metrics written: {path}")
    return path


def write_timing(report, path) -> Path:
    timing = report.timing_dict() if hasattr(report, "timing_dict") else dict(report)
    path = _write_json(timing, path)
    logger.info(f"  ✓ Timing written: {path}")
    return path


def _format_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def render_table(rows: Sequence[Dict[str, Any]], columns: Optional[Sequence[str]] = None) -> str:
    if not rows:
        return "(no rows)"
    columns = list(columns or [k for k in rows[0] if not isinstance(rows[0][k], (list, dict))])
    if GRAPHING_AVAILABLE:
        frame = pd.DataFrame([{c: row.get(c) for c in columns} for row in rows], columns=columns)
        return frame.to_string(index=False, float_format=lambda v: f"{v:.4f}")
    cells = [[_format_cell(row.get(c)) for c in columns] for row in rows]
    widths = [max(len(c), *(len(r[i]) for r in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines.extend("  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in cells)
    return "\n".join(lines)


def plot_training_curve(report, output_file) -> bool:
    """Train loss and validation accuracy per epoch"""
    if not GRAPHING_AVAILABLE:
        logger.warning("  ⚠ Graphing libraries not available (install pandas and matplotlib)")
        return False
    try:
        epochs = [record.epoch for record in report.epochs]
        fig, axes = plt.subplots(1, 2, figsize=(12, 4.5))
        fig.suptitle(f"Distillation run (seed {report.config.seed}, {report.config.loss.mode.value})")

        axes[0].plot(epochs, [r.train_loss for r in report.epochs], marker="o", color="blue")
        axes[0].axhline(y=report.initial_loss, color="r", linestyle="--", label=f"Initial: {report.initial_loss:.3f}")
        axes[0].set_xlabel("Epoch")
        axes[0].set_ylabel("Train loss")
        axes[0].legend()
        axes[0].grid(True)

        axes[1].plot(epochs, [r.validation.accuracy for r in report.epochs], marker="o", color="green")
        axes[1].axvline(x=report.best_epoch, color="r", linestyle="--", label=f"Best epoch: {report.best_epoch}")
        axes[1].set_xlabel("Epoch")
        axes[1].set_ylabel("Validation accuracy")
        axes[1].set_ylim(0, 1.05)
        axes[1].legend()
        axes[1].grid(True)

        plt.tight_layout()
        Path(output_file).parent.mkdir(parents=True, exist_ok=True)
        plt.savefig(output_file, dpi=150, bbox_inches="tight")
        plt.close(fig)
        logger.info(f"  ✓ Training curve saved: {output_file}")
        return True
    except Exception as e:
        logger.error(f"  ✗ Error generating training curve: {e}")
        return False
