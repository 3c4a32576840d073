"""Renders NMSE-vs-SNR figures from channel-estimation sweep CSVs."""

from .dataset import (
    HARNESS_COLUMNS,
    EmptyDatasetError,
    SchemaError,
    SweepDataset,
    load_dataset,
)
from .render import FIGURE_KINDS, aggregate_series, render

__version__ = "0.1.0"
