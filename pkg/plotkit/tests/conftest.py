import csv

from plotkit.dataset import HARNESS_COLUMNS

ROW_DEFAULTS = {
    "sweep_id": "L3_rx4x4_tx4x4_y1_snr10",
    "trial": 0,
    "snr_db": 10.0,
    "L": 3,
    "rx_nx": 4,
    "rx_nz": 4,
    "tx_nx": 4,
    "tx_nz": 4,
    "I": 10,
    "J": 10,
    "y_max": 1.0,
    "nmse_A": 0.01,
    "nmse_B": 0.02,
    "nmse_channel": 0.005,
    "iterations": 50,
    "converged": "true",
    "wall_ms": "12.000",
}


def write_sweep_csv(path, rows, header=None):
    """Write a harness-schema CSV; each row is a dict of overrides."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HARNESS_COLUMNS if header is None else header)
        for overrides in rows:
            row = {**ROW_DEFAULTS, **overrides}
            writer.writerow([row[name] for name in HARNESS_COLUMNS])
    return path
