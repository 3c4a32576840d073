"""Steering vectors, their x/z factorization, and the multipath MIMO channel.

Steering phases follow the far-field planar-wave model: element ``n`` at
in-plane offsets (x_n, z_n) with normal displacement y_n responds to a unit
propagation direction ``d`` with phase ``2*pi*(x_n <i,d> + z_n <j,d> + y_n <k,d>)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import Basis, FimConfig, MorphPattern, direction_vector

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PathSet:
    """Departure/arrival angles and complex gains of the propagation paths.

    All angle arrays share length L. Angles are radians, gains dimensionless.
    """

    tx_azimuth: np.ndarray
    tx_elevation: np.ndarray
    rx_azimuth: np.ndarray
    rx_elevation: np.ndarray
    gains: np.ndarray

    def __post_init__(self):
        for name in ("tx_azimuth", "tx_elevation", "rx_azimuth", "rx_elevation"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        object.__setattr__(self, "gains", np.atleast_1d(np.asarray(self.gains, dtype=complex)))
        shapes = {
            self.tx_azimuth.shape, self.tx_elevation.shape,
            self.rx_azimuth.shape, self.rx_elevation.shape, self.gains.shape,
        }
        if len(shapes) != 1 or self.tx_azimuth.ndim != 1:
            raise ValueError("path angle and gain arrays must be 1-D with equal length")
        if self.count < 1:
            raise ValueError("at least one path required")
        angles = np.stack([self.tx_azimuth, self.tx_elevation, self.rx_azimuth, self.rx_elevation])
        if not np.all(np.isfinite(angles)):
            raise ValueError("path angles must be finite")
        quads = angles.T
        for a in range(self.count):
            for b in range(a + 1, self.count):
                if np.allclose(quads[a], quads[b], atol=1e-12):
                    warnings.warn(
                        f"paths {a} and {b} have identical directions; "
                        "the estimation problem is ill-posed",
                        stacklevel=2,
                    )

    @property
    def count(self) -> int:
        return self.gains.size

    def tx_directions(self) -> np.ndarray:
        """Unit departure directions, shape (L, 3)."""
        return direction_vector(self.tx_azimuth, self.tx_elevation)

    def rx_directions(self) -> np.ndarray:
        """Unit arrival directions, shape (L, 3)."""
        return direction_vector(self.rx_azimuth, self.rx_elevation)


def sample_paths(count: int, rng: np.random.Generator) -> PathSet:
    """Draw a random path set: azimuth and elevation angles uniform on [0, pi]
    at both ends, gains i.i.d. standard complex Gaussian."""
    angles = rng.uniform(0.0, np.pi, size=(4, count))
    gains = (rng.standard_normal(count) + 1j * rng.standard_normal(count)) / np.sqrt(2.0)
    return PathSet(
        tx_azimuth=angles[0], tx_elevation=angles[1],
        rx_azimuth=angles[2], rx_elevation=angles[3],
        gains=gains,
    )


def steering_unmorphed(cfg: FimConfig, basis: Basis, direction: np.ndarray) -> np.ndarray:
    """Steering vector of the flat (unmorphed) array toward ``direction``.

    Entry n is exp(j*2*pi*(x_n <i,d> + z_n <j,d>)); the reference element at
    the grid origin contributes the leading 1.
    """
    xs, zs = cfg.grid_offsets()
    phase = TWO_PI * (xs * (basis.i_vec @ direction) + zs * (basis.j_vec @ direction))
    return np.exp(1j * phase)


def morph_response(cfg: FimConfig, basis: Basis, pattern: MorphPattern,
                   direction: np.ndarray) -> np.ndarray:
    """Multiplicative phase response induced by the normal displacements:
    entry n is exp(j*2*pi*y_n <k,d>) with y_n = u[n_x] + v[n_z]."""
    y = pattern.flat_displacements()
    return np.exp(1j * TWO_PI * y * (basis.k_vec @ direction))


def morphed_steering(cfg: FimConfig, basis: Basis, pattern: MorphPattern,
                     direction: np.ndarray) -> np.ndarray:
    """Steering vector of the morphed array: flat steering times morph response."""
    return steering_unmorphed(cfg, basis, direction) * morph_response(cfg, basis, pattern, direction)


def steering_factors_xz(cfg: FimConfig, basis: Basis, pattern: MorphPattern,
                        direction: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split the morphed steering vector along the two aperture axes.

    Returns (g, h) with g[ix] = exp(j*2*pi*(dx*ix <i,d> + u[ix] <k,d>)) and
    h[iz] = exp(j*2*pi*(dz*iz <j,d> + v[iz] <k,d>)), so that kron(h, g) with
    the x index fastest reproduces ``morphed_steering``. Separability of the
    pattern (y_n = u + v) is what makes this split exact.
    """
    if pattern.u.shape != (cfg.nx,) or pattern.v.shape != (cfg.nz,):
        raise ValueError("pattern does not match the grid")
    kd = basis.k_vec @ direction
    xs = cfg.dx * np.arange(cfg.nx)
    zs = cfg.dz * np.arange(cfg.nz)
    g = np.exp(1j * TWO_PI * (xs * (basis.i_vec @ direction) + pattern.u * kd))
    h = np.exp(1j * TWO_PI * (zs * (basis.j_vec @ direction) + pattern.v * kd))
    return g, h


def steering_matrix(cfg: FimConfig, basis: Basis, azimuth: np.ndarray,
                    elevation: np.ndarray) -> np.ndarray:
    """Unmorphed steering matrix: one column per path, rows over elements."""
    dirs = direction_vector(azimuth, elevation)
    cols = [steering_unmorphed(cfg, basis, d) for d in np.atleast_2d(dirs)]
    return np.stack(cols, axis=1)


def morphed_steering_matrix(cfg: FimConfig, basis: Basis, pattern: MorphPattern,
                            azimuth: np.ndarray, elevation: np.ndarray) -> np.ndarray:
    """Morphed steering matrix: one column per path."""
    dirs = direction_vector(azimuth, elevation)
    cols = [morphed_steering(cfg, basis, pattern, d) for d in np.atleast_2d(dirs)]
    return np.stack(cols, axis=1)


def channel_matrix(tx_cfg: FimConfig, rx_cfg: FimConfig, tx_pattern: MorphPattern,
                   rx_pattern: MorphPattern, paths: PathSet) -> np.ndarray:
    """N x M multipath channel for one pair of morph configurations.

    Sum over paths of gain-weighted outer products of the morphed receive and
    transmit steering vectors.
    """
    rx_steer = morphed_steering_matrix(
        rx_cfg, rx_cfg.basis(), rx_pattern, paths.rx_azimuth, paths.rx_elevation
    )
    tx_steer = morphed_steering_matrix(
        tx_cfg, tx_cfg.basis(), tx_pattern, paths.tx_azimuth, paths.tx_elevation
    )
    return (rx_steer * paths.gains[None, :]) @ tx_steer.T
