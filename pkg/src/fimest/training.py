"""Split single-time-scale training: pilots, slot observations, tensorization.

The protocol spends ``num_rx_slots`` pilot slots morphing only the receiver,
then ``num_tx_slots`` slots morphing only the transmitter, plus one slot with
both surfaces static that anchors the path-gain fit. Every slot transmits the
same diagonal unit-modulus pilot matrix; matched filtering by its conjugate
recovers the channel plus filtered noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import PathSet, channel_matrix
from .geometry import FimConfig, MorphPattern, sample_morph_pattern


@dataclass(frozen=True)
class PilotMatrix:
    """Diagonal pilot matrix stored as its diagonal; entries have unit modulus."""

    diag: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "diag", np.asarray(self.diag, dtype=complex))
        if self.diag.ndim != 1:
            raise ValueError("pilot diagonal must be 1-D")
        if not np.allclose(np.abs(self.diag), 1.0, atol=1e-12):
            raise ValueError("pilot entries must have unit modulus")

    def apply(self, h: np.ndarray) -> np.ndarray:
        """Noiseless received matrix H @ S (column scaling)."""
        return h * self.diag[None, :]

    def matched_filter(self, y: np.ndarray) -> np.ndarray:
        """Y @ S^H; exact inverse of :meth:`apply` for unit-modulus pilots."""
        return y * self.diag.conj()[None, :]


def generate_pilots(m: int, rng: np.random.Generator) -> PilotMatrix:
    """Diagonal pilots with i.i.d. uniform random phases."""
    if m < 1:
        raise ValueError("need at least one transmit element")
    return PilotMatrix(diag=np.exp(2j * np.pi * rng.uniform(0.0, 1.0, m)))


def noise_variance_from_snr(noiseless_rx: np.ndarray, snr_db: float) -> float:
    """Per-entry noise variance so that mean received sample power over noise
    power equals the requested SNR. ``snr_db = inf`` gives exactly zero."""
    if np.isposinf(snr_db):
        return 0.0
    mean_power = float(np.mean(np.abs(noiseless_rx) ** 2))
    return mean_power * 10.0 ** (-snr_db / 10.0)


def _complex_noise(shape, variance: float, rng: np.random.Generator) -> np.ndarray:
    if variance == 0.0:
        return np.zeros(shape, dtype=complex)
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def tensorize_phase1(x: np.ndarray, nx: int, nz: int) -> np.ndarray:
    """Reshape an N x M observation into (N_x, N_z, M), x index fastest over
    the receive dimension. Pure reindexing; exactly invertible."""
    n, m = x.shape
    if nx * nz != n:
        raise ValueError(f"receive dimension {n} is not {nx} x {nz}")
    return x.reshape(nx, nz, m, order="F")


def tensorize_phase2(x: np.ndarray, mx: int, mz: int) -> np.ndarray:
    """Reshape an N x M observation into (N, M_x, M_z), x index fastest over
    the transmit dimension."""
    n, m = x.shape
    if mx * mz != m:
        raise ValueError(f"transmit dimension {m} is not {mx} x {mz}")
    return x.reshape(n, mx, mz, order="F")


def _observe(tx_cfg: FimConfig, rx_cfg: FimConfig, tx_pattern: MorphPattern,
             rx_pattern: MorphPattern, paths: PathSet, pilots: PilotMatrix,
             noise_variance: float, rng: np.random.Generator) -> np.ndarray:
    """One pilot slot: channel, pilots, noise, matched filter."""
    h = channel_matrix(tx_cfg, rx_cfg, tx_pattern, rx_pattern, paths)
    y = pilots.apply(h) + _complex_noise(h.shape, noise_variance, rng)
    return pilots.matched_filter(y)


def phase1_slot(rx_pattern: MorphPattern, static_tx_pattern: MorphPattern,
                paths: PathSet, tx_cfg: FimConfig, rx_cfg: FimConfig,
                pilots: PilotMatrix, noise_variance: float,
                rng: np.random.Generator) -> np.ndarray:
    """Receiver-morphing slot observation as an (N_x, N_z, M) tensor."""
    x = _observe(tx_cfg, rx_cfg, static_tx_pattern, rx_pattern, paths,
                 pilots, noise_variance, rng)
    return tensorize_phase1(x, rx_cfg.nx, rx_cfg.nz)


def phase2_slot(static_rx_pattern: MorphPattern, tx_pattern: MorphPattern,
                paths: PathSet, tx_cfg: FimConfig, rx_cfg: FimConfig,
                pilots: PilotMatrix, noise_variance: float,
                rng: np.random.Generator) -> np.ndarray:
    """Transmitter-morphing slot observation as an (N, M_x, M_z) tensor."""
    x = _observe(tx_cfg, rx_cfg, tx_pattern, static_rx_pattern, paths,
                 pilots, noise_variance, rng)
    return tensorize_phase2(x, tx_cfg.nx, tx_cfg.nz)


@dataclass(frozen=True)
class TrainingConfig:
    """Protocol parameters for one training frame."""

    tx: FimConfig
    rx: FimConfig
    num_rx_slots: int
    num_tx_slots: int
    snr_db: float

    def __post_init__(self):
        if self.num_rx_slots < 1 or self.num_tx_slots < 1:
            raise ValueError("both phases need at least one slot")


@dataclass(frozen=True)
class TrainingFrame:
    """All matched-filtered observations of one training run.

    ``phase1`` holds ``num_rx_slots`` tensors of dims (N_x, N_z, M), ``phase2``
    ``num_tx_slots`` tensors of dims (N, M_x, M_z). ``static_observation`` is
    the extra both-ends-static N x M slot used to anchor the path-gain fit.
    """

    phase1: list[np.ndarray]
    phase2: list[np.ndarray]
    rx_patterns: list[MorphPattern]
    tx_patterns: list[MorphPattern]
    static_rx: MorphPattern
    static_tx: MorphPattern
    snr_db: float
    noise_variance: float
    static_observation: np.ndarray

    @property
    def num_rx_slots(self) -> int:
        return len(self.phase1)

    @property
    def num_tx_slots(self) -> int:
        return len(self.phase2)

    @property
    def phase1_dims(self) -> tuple[int, int, int]:
        return self.phase1[0].shape

    @property
    def phase2_dims(self) -> tuple[int, int, int]:
        return self.phase2[0].shape


def build_training_frame(config: TrainingConfig, paths: PathSet,
                         rng: np.random.Generator) -> TrainingFrame:
    """Simulate one full training frame.

    Draws one pilot matrix reused across slots, random morph patterns for the
    moving end of each slot (the static end stays at zero morph), and noise at
    the variance implied by ``snr_db`` relative to the static configuration's
    received power. Deterministic given the generator state.
    """
    tx_cfg, rx_cfg = config.tx, config.rx
    pilots = generate_pilots(tx_cfg.num_elements, rng)
    static_tx = MorphPattern.zero(tx_cfg.nx, tx_cfg.nz)
    static_rx = MorphPattern.zero(rx_cfg.nx, rx_cfg.nz)

    h_static = channel_matrix(tx_cfg, rx_cfg, static_tx, static_rx, paths)
    noise_variance = noise_variance_from_snr(pilots.apply(h_static), config.snr_db)

    rx_patterns = [sample_morph_pattern(rx_cfg, rng) for _ in range(config.num_rx_slots)]
    tx_patterns = [sample_morph_pattern(tx_cfg, rng) for _ in range(config.num_tx_slots)]

    phase1 = [
        phase1_slot(p, static_tx, paths, tx_cfg, rx_cfg, pilots, noise_variance, rng)
        for p in rx_patterns
    ]
    phase2 = [
        phase2_slot(static_rx, p, paths, tx_cfg, rx_cfg, pilots, noise_variance, rng)
        for p in tx_patterns
    ]
    static_observation = _observe(
        tx_cfg, rx_cfg, static_tx, static_rx, paths, pilots, noise_variance, rng
    )
    return TrainingFrame(
        phase1=phase1,
        phase2=phase2,
        rx_patterns=rx_patterns,
        tx_patterns=tx_patterns,
        static_rx=static_rx,
        static_tx=static_tx,
        snr_db=config.snr_db,
        noise_variance=noise_variance,
        static_observation=static_observation,
    )
