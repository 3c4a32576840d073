"""Parsing and validation of the sweep CSV emitted by the estimation harness.

The per-trial schema is the contract between the simulation harness and this
package; the header must match it exactly, column order included.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

HARNESS_COLUMNS = [
    "sweep_id", "trial", "snr_db", "L", "rx_nx", "rx_nz", "tx_nx", "tx_nz",
    "I", "J", "y_max", "nmse_A", "nmse_B", "nmse_channel", "iterations",
    "converged", "wall_ms",
]

METRIC_COLUMNS = ("nmse_A", "nmse_B", "nmse_channel")


class SchemaError(ValueError):
    """The CSV header or a row does not conform to the harness schema."""


class EmptyDatasetError(ValueError):
    """The CSV carries no trial rows."""


@dataclass(frozen=True)
class TrialRow:
    sweep_id: str
    trial: int
    snr_db: float
    L: int
    rx_nx: int
    rx_nz: int
    tx_nx: int
    tx_nz: int
    I: int
    J: int
    y_max: float
    nmse_A: float
    nmse_B: float
    nmse_channel: float
    iterations: int
    converged: bool
    wall_ms: float


@dataclass(frozen=True)
class SweepDataset:
    """All trial rows of one sweep CSV."""

    rows: list[TrialRow]

    def snr_values(self) -> list[float]:
        return sorted({r.snr_db for r in self.rows})


_INT_FIELDS = {"trial", "L", "rx_nx", "rx_nz", "tx_nx", "tx_nz", "I", "J",
               "iterations"}
_FLOAT_FIELDS = {"snr_db", "y_max", "nmse_A", "nmse_B", "nmse_channel", "wall_ms"}


def _parse_row(values: list[str], lineno: int) -> TrialRow:
    if len(values) != len(HARNESS_COLUMNS):
        raise SchemaError(f"row {lineno}: expected {len(HARNESS_COLUMNS)} fields, "
                          f"got {len(values)}")
    fields = {}
    for name, raw in zip(HARNESS_COLUMNS, values):
        try:
            if name in _INT_FIELDS:
                fields[name] = int(raw)
            elif name in _FLOAT_FIELDS:
                fields[name] = float(raw)
            elif name == "converged":
                if raw not in ("true", "false"):
                    raise ValueError(f"bad boolean {raw!r}")
                fields[name] = raw == "true"
            else:
                fields[name] = raw
        except ValueError as exc:
            raise SchemaError(f"row {lineno}, column {name}: {exc}") from exc
    return TrialRow(**fields)


def load_dataset(path: str | Path) -> SweepDataset:
    """Read and validate one harness CSV.

    Raises SchemaError if the header deviates from the harness schema in any
    way (missing, extra, renamed, or reordered columns) or a row fails to
    parse, and EmptyDatasetError if there are no trial rows.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDatasetError(f"{path} has no content") from None
        if header != HARNESS_COLUMNS:
            raise SchemaError(
                f"{path} header does not match the harness schema: {header}"
            )
        rows = [_parse_row(values, lineno)
                for lineno, values in enumerate(reader, start=2)]
    if not rows:
        raise EmptyDatasetError(f"{path} has no trial rows")
    return SweepDataset(rows=rows)
