"""Seeded Monte-Carlo experiment runner with CSV output.

Every trial owns an rng substream derived from (experiment seed, sweep-point
index, trial index), so results do not depend on execution order or on the
number of workers. The per-trial CSV stores linear NMSE values; the companion
aggregate CSV stores per-sweep-point means and medians in dB.
"""

from __future__ import annotations

import csv
import dataclasses
import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import sample_paths, steering_matrix
from .estimator import AlsOptions, nmse, reconstruct_channel, run_two_phase_als
from .geometry import FimConfig, Orientation
from .training import TrainingConfig, build_training_frame

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "sweep_id", "trial", "snr_db", "L", "rx_nx", "rx_nz", "tx_nx", "tx_nz",
    "I", "J", "y_max", "nmse_A", "nmse_B", "nmse_channel", "iterations",
    "converged", "wall_ms",
]

AGG_COLUMNS = [
    "sweep_id", "snr_db", "L", "rx_nx", "rx_nz", "tx_nx", "tx_nz", "I", "J",
    "y_max", "trials", "mean_nmse_A_db", "median_nmse_A_db", "mean_nmse_B_db",
    "median_nmse_B_db", "mean_nmse_channel_db", "median_nmse_channel_db",
]


class ConfigError(ValueError):
    """Invalid experiment configuration (file, key, or value)."""


def _default_tx_orientation() -> Orientation:
    return Orientation(theta=math.pi / 4, phi=math.pi / 3, rho=math.pi / 6)


def _default_rx_orientation() -> Orientation:
    return Orientation(theta=math.pi / 3, phi=math.pi / 6, rho=-math.pi / 4)


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one Monte-Carlo experiment."""

    tx_nx: int = 4
    tx_nz: int = 4
    rx_nx: int = 4
    rx_nz: int = 4
    dx: float = 0.5
    dz: float = 0.5
    num_paths: int = 3
    rx_slots: int = 10
    tx_slots: int = 10
    snr_db_list: tuple[float, ...] = (10.0,)
    y_max_list: tuple[float, ...] = (1.0,)
    trials: int = 200
    seed: int = 1
    workers: int = 1
    als: AlsOptions = field(default_factory=AlsOptions)
    tx_orientation: Orientation = field(default_factory=_default_tx_orientation)
    rx_orientation: Orientation = field(default_factory=_default_rx_orientation)
    output_path: str = "nmse_trials.csv"

    def validate(self) -> None:
        if min(self.tx_nx, self.tx_nz, self.rx_nx, self.rx_nz) < 1:
            raise ConfigError("array dimensions must be positive")
        if self.dx <= 0 or self.dz <= 0:
            raise ConfigError("element spacings must be positive")
        if self.num_paths < 1:
            raise ConfigError("need at least one path")
        if self.rx_slots < 1 or self.tx_slots < 1:
            raise ConfigError("slot counts must be positive")
        if not self.snr_db_list or not self.y_max_list:
            raise ConfigError("sweep lists must be non-empty")
        if any(math.isnan(s) for s in self.snr_db_list):
            raise ConfigError("snr values must not be NaN")
        if any(y < 0 for y in self.y_max_list):
            raise ConfigError("morph ranges must be non-negative")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


@dataclass(frozen=True)
class SweepPoint:
    """One parameter combination of a sweep. ``index`` orders the output;
    rng substreams are keyed on the parameters themselves so a point's trials
    are identical no matter where it appears in a sweep."""

    index: int
    snr_db: float
    num_paths: int
    rx_nx: int
    rx_nz: int
    tx_nx: int
    tx_nz: int
    y_max: float

    @property
    def sweep_id(self) -> str:
        return (
            f"L{self.num_paths}_rx{self.rx_nx}x{self.rx_nz}"
            f"_tx{self.tx_nx}x{self.tx_nz}_y{self.y_max:g}_snr{self.snr_db:g}"
        )

    def entropy(self) -> list[int]:
        """Stable integer key of the sweep parameters for rng substreams."""
        float_bits = np.array([self.snr_db, self.y_max], dtype=np.float64).view(np.uint64)
        return [self.num_paths, self.rx_nx, self.rx_nz, self.tx_nx, self.tx_nz,
                *(int(b) for b in float_bits)]


# Field names mirror the CSV schema exactly (single-letter columns included).
@dataclass(frozen=True)
class TrialRecord:
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
class AggregateRecord:
    sweep_id: str
    snr_db: float
    L: int
    rx_nx: int
    rx_nz: int
    tx_nx: int
    tx_nz: int
    I: int
    J: int
    y_max: float
    trials: int
    mean_nmse_A_db: float
    median_nmse_A_db: float
    mean_nmse_B_db: float
    median_nmse_B_db: float
    mean_nmse_channel_db: float
    median_nmse_channel_db: float


@dataclass(frozen=True)
class _TrialTask:
    point: SweepPoint
    trial: int
    seed: int
    dx: float
    dz: float
    rx_slots: int
    tx_slots: int
    tx_orientation: Orientation
    rx_orientation: Orientation
    als: AlsOptions


def run_trial(task: _TrialTask) -> TrialRecord:
    """Execute one seeded trial: draw paths, build a frame, estimate, score."""
    start = time.perf_counter()
    p = task.point
    seq = np.random.SeedSequence(entropy=[task.seed, *p.entropy(), task.trial])
    data_seq, als_seq = seq.spawn(2)
    rng = np.random.default_rng(data_seq)
    als_opts = dataclasses.replace(task.als, seed=int(als_seq.generate_state(1)[0]))

    tx_cfg = FimConfig(nx=p.tx_nx, nz=p.tx_nz, dx=task.dx, dz=task.dz,
                       orientation=task.tx_orientation, y_max=p.y_max)
    rx_cfg = FimConfig(nx=p.rx_nx, nz=p.rx_nz, dx=task.dx, dz=task.dz,
                       orientation=task.rx_orientation, y_max=p.y_max)
    paths = sample_paths(p.num_paths, rng)
    frame = build_training_frame(
        TrainingConfig(tx=tx_cfg, rx=rx_cfg, num_rx_slots=task.rx_slots,
                       num_tx_slots=task.tx_slots, snr_db=p.snr_db),
        paths, rng,
    )
    result = run_two_phase_als(frame, p.num_paths, als_opts)

    a_true = steering_matrix(rx_cfg, rx_cfg.basis(), paths.rx_azimuth, paths.rx_elevation)
    b_true = steering_matrix(tx_cfg, tx_cfg.basis(), paths.tx_azimuth, paths.tx_elevation)
    h_true = (a_true * paths.gains[None, :]) @ b_true.T
    h_hat = reconstruct_channel(result.a_hat, result.b_hat, result.alpha_hat)

    wall_ms = (time.perf_counter() - start) * 1000.0
    return TrialRecord(
        sweep_id=p.sweep_id,
        trial=task.trial,
        snr_db=p.snr_db,
        L=p.num_paths,
        rx_nx=p.rx_nx, rx_nz=p.rx_nz, tx_nx=p.tx_nx, tx_nz=p.tx_nz,
        I=task.rx_slots, J=task.tx_slots,
        y_max=p.y_max,
        nmse_A=nmse(result.a_hat, a_true, align=True),
        nmse_B=nmse(result.b_hat, b_true, align=True),
        nmse_channel=nmse(h_hat, h_true),
        iterations=result.iterations,
        converged=result.converged,
        wall_ms=wall_ms,
    )


def _safe_run_trial(task: _TrialTask):
    try:
        return run_trial(task)
    except Exception as exc:  # recorded, not fatal
        return (task.point.sweep_id, task.trial, repr(exc))


def run_points(cfg: ExperimentConfig, points: list[SweepPoint]) -> list[TrialRecord]:
    """Run all trials of the given sweep points, in deterministic order."""
    cfg.validate()
    tasks = [
        _TrialTask(point=point, trial=trial, seed=cfg.seed, dx=cfg.dx, dz=cfg.dz,
                   rx_slots=cfg.rx_slots, tx_slots=cfg.tx_slots,
                   tx_orientation=cfg.tx_orientation,
                   rx_orientation=cfg.rx_orientation, als=cfg.als)
        for point in points
        for trial in range(cfg.trials)
    ]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_safe_run_trial, tasks, chunksize=4))
    else:
        outcomes = [_safe_run_trial(t) for t in tasks]

    records = []
    for outcome in outcomes:
        if isinstance(outcome, TrialRecord):
            records.append(outcome)
        else:
            sweep_id, trial, message = outcome
            log.warning("trial %d of %s failed: %s", trial, sweep_id, message)
    return records


def run_experiment(cfg: ExperimentConfig) -> list[TrialRecord]:
    """Sweep the configured SNR and morph-range lists at fixed path count and
    array dimensions."""
    points = [
        SweepPoint(index=idx, snr_db=snr, num_paths=cfg.num_paths,
                   rx_nx=cfg.rx_nx, rx_nz=cfg.rx_nz, tx_nx=cfg.tx_nx,
                   tx_nz=cfg.tx_nz, y_max=y)
        for idx, (snr, y) in enumerate(itertools.product(cfg.snr_db_list, cfg.y_max_list))
    ]
    return run_points(cfg, points)


DEFAULT_TREND_SNRS = (0.0, 5.0, 10.0, 15.0, 20.0)
DEFAULT_PATH_COUNTS = (2, 3, 4)
DEFAULT_RX_ARRAYS = ((4, 4), (6, 6))
DEFAULT_MORPH_RANGES = (0.1, 0.25, 0.5, 1.0)


def snr_vs_paths(cfg: ExperimentConfig,
                 path_counts: tuple[int, ...] = DEFAULT_PATH_COUNTS) -> list[TrialRecord]:
    """NMSE versus SNR, one curve per path count."""
    snrs = cfg.snr_db_list if len(cfg.snr_db_list) > 1 else DEFAULT_TREND_SNRS
    points = [
        SweepPoint(index=idx, snr_db=snr, num_paths=paths, rx_nx=cfg.rx_nx,
                   rx_nz=cfg.rx_nz, tx_nx=cfg.tx_nx, tx_nz=cfg.tx_nz,
                   y_max=cfg.y_max_list[0])
        for idx, (paths, snr) in enumerate(itertools.product(path_counts, snrs))
    ]
    return run_points(cfg, points)


def array_size(cfg: ExperimentConfig,
               rx_arrays: tuple[tuple[int, int], ...] = DEFAULT_RX_ARRAYS) -> list[TrialRecord]:
    """NMSE versus SNR, one curve per receive-array geometry."""
    points = [
        SweepPoint(index=idx, snr_db=snr, num_paths=cfg.num_paths, rx_nx=nx,
                   rx_nz=nz, tx_nx=cfg.tx_nx, tx_nz=cfg.tx_nz,
                   y_max=cfg.y_max_list[0])
        for idx, ((nx, nz), snr) in enumerate(itertools.product(rx_arrays, cfg.snr_db_list))
    ]
    return run_points(cfg, points)


def morph_range(cfg: ExperimentConfig,
                ranges: tuple[float, ...] | None = None) -> list[TrialRecord]:
    """NMSE versus SNR, one curve per maximum deformation range."""
    if ranges is None:
        ranges = tuple(cfg.y_max_list) if len(cfg.y_max_list) > 1 else DEFAULT_MORPH_RANGES
    points = [
        SweepPoint(index=idx, snr_db=snr, num_paths=cfg.num_paths,
                   rx_nx=cfg.rx_nx, rx_nz=cfg.rx_nz, tx_nx=cfg.tx_nx,
                   tx_nz=cfg.tx_nz, y_max=y)
        for idx, (y, snr) in enumerate(itertools.product(ranges, cfg.snr_db_list))
    ]
    return run_points(cfg, points)


def _to_db(value: float) -> float:
    if value <= 0.0:
        return -math.inf
    return 10.0 * math.log10(value)


def aggregate_records(records: list[TrialRecord]) -> list[AggregateRecord]:
    """Per-sweep-point mean and median NMSE in dB, in first-seen order."""
    groups: dict[str, list[TrialRecord]] = {}
    for r in records:
        groups.setdefault(r.sweep_id, []).append(r)
    out = []
    for sweep_id, rows in groups.items():
        first = rows[0]
        a = np.array([r.nmse_A for r in rows])
        b = np.array([r.nmse_B for r in rows])
        h = np.array([r.nmse_channel for r in rows])
        out.append(AggregateRecord(
            sweep_id=sweep_id, snr_db=first.snr_db, L=first.L,
            rx_nx=first.rx_nx, rx_nz=first.rx_nz, tx_nx=first.tx_nx,
            tx_nz=first.tx_nz, I=first.I, J=first.J, y_max=first.y_max,
            trials=len(rows),
            mean_nmse_A_db=_to_db(float(a.mean())),
            median_nmse_A_db=_to_db(float(np.median(a))),
            mean_nmse_B_db=_to_db(float(b.mean())),
            median_nmse_B_db=_to_db(float(np.median(b))),
            mean_nmse_channel_db=_to_db(float(h.mean())),
            median_nmse_channel_db=_to_db(float(np.median(h))),
        ))
    return out


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records_csv(path: str | Path, records: list[TrialRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            row = [getattr(r, name) for name in CSV_COLUMNS]
            row[-1] = f"{r.wall_ms:.3f}"
            writer.writerow([v if isinstance(v, str) else _format_value(v) for v in row])


def write_aggregates_csv(path: str | Path, aggregates: list[AggregateRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(AGG_COLUMNS)
        for r in aggregates:
            writer.writerow([_format_value(getattr(r, name)) for name in AGG_COLUMNS])


def aggregates_path(records_path: str | Path) -> Path:
    p = Path(records_path)
    return p.with_name(p.stem + "_agg" + (p.suffix or ".csv"))


_INT_KEYS = {
    "tx_nx", "tx_nz", "rx_nx", "rx_nz", "rx_slots", "tx_slots",
    "trials", "seed", "workers",
}
_FLOAT_KEYS = {"dx", "dz"}
_LIST_KEYS = {"snr_db_list", "y_max_list"}
_ORIENTATION_KEYS = {"tx_orientation", "rx_orientation"}
_ALS_KEYS = {"als_tolerance": "tolerance", "als_max_iterations": "max_outer_iterations",
             "als_restarts": "restarts"}


def _parse_float(text: str) -> float:
    return float(text)  # accepts "inf" for noiseless runs


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse a flat ``key = value`` config file.

    Lists are comma separated, orientations are three comma-separated angles
    (theta, phi, rho in radians). Unknown keys are rejected.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc

    values: dict = {}
    als_values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        try:
            if key in _INT_KEYS:
                values[key] = int(value)
            elif key in _FLOAT_KEYS:
                values[key] = _parse_float(value)
            elif key in _LIST_KEYS:
                values[key] = tuple(_parse_float(v) for v in value.split(","))
            elif key in _ORIENTATION_KEYS:
                parts = [_parse_float(v) for v in value.split(",")]
                if len(parts) != 3:
                    raise ValueError("orientation needs three angles")
                values[key] = Orientation(theta=parts[0], phi=parts[1], rho=parts[2])
            elif key in _ALS_KEYS:
                field_name = _ALS_KEYS[key]
                als_values[field_name] = (
                    int(value) if field_name != "tolerance" else _parse_float(value)
                )
            elif key == "paths":
                values["num_paths"] = int(value)
            elif key == "output_path":
                values["output_path"] = value
            else:
                raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for '{key}': {exc}") from exc

    try:
        if als_values:
            values["als"] = AlsOptions(**als_values)
        cfg = ExperimentConfig(**values)
        cfg.validate()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg
