"""Figure rendering: one NMSE-versus-SNR line per sweep group.

Aggregation always recomputes from the per-trial rows (mean in the linear
domain, then dB) rather than trusting any precomputed aggregate, so the trial
CSV stays the single source of truth.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .dataset import METRIC_COLUMNS, SweepDataset, TrialRow, load_dataset

FIGURE_KINDS = ("snr_paths", "antennas", "morph")

_MARKERS = ["o", "s", "^", "d", "v", "*", "x"]


def _group_label(kind: str, row: TrialRow) -> str:
    if kind == "snr_paths":
        return f"L={row.L}"
    if kind == "antennas":
        return f"rx {row.rx_nx}x{row.rx_nz}"
    if kind == "morph":
        return f"y_max={row.y_max:g}"
    raise ValueError(f"unknown figure kind {kind!r}; expected one of {FIGURE_KINDS}")


def _to_db(value: float) -> float:
    return -math.inf if value <= 0.0 else 10.0 * math.log10(value)


def aggregate_series(dataset: SweepDataset, kind: str, metric: str = "nmse_A"):
    """Mean NMSE (dB) per group and SNR: {label: (snr array, nmse_db array)}."""
    if metric not in METRIC_COLUMNS:
        raise ValueError(f"metric must be one of {METRIC_COLUMNS}, got {metric!r}")
    buckets: dict[str, dict[float, list[float]]] = {}
    for row in dataset.rows:
        label = _group_label(kind, row)
        buckets.setdefault(label, {}).setdefault(row.snr_db, []).append(
            getattr(row, metric)
        )
    series = {}
    for label in sorted(buckets):
        snrs = sorted(buckets[label])
        means = [_to_db(sum(buckets[label][s]) / len(buckets[label][s]))
                 for s in snrs]
        series[label] = (snrs, means)
    return series


def render(dataset_path: str | Path, figure_kind: str, out_path: str | Path,
           metric: str = "nmse_A"):
    """Render one figure kind from a harness CSV and write the image file.

    Returns the plotted series for inspection. No file is written when the
    CSV violates the schema or carries no rows.
    """
    dataset = load_dataset(dataset_path)
    series = aggregate_series(dataset, figure_kind, metric)

    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    for i, (label, (snrs, values)) in enumerate(series.items()):
        ax.plot(snrs, values, marker=_MARKERS[i % len(_MARKERS)], label=label)
    ax.set_xlabel("SNR [dB]")
    ax.set_ylabel(f"mean {metric} [dB]")
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return series
