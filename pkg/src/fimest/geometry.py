"""Oriented-aperture geometry: local frames, element layout, and morphing patterns.

All lengths are expressed in carrier wavelengths, so a phase of ``2*pi*length``
radians corresponds to one wavelength of path difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Orientation:
    """Surface orientation: elevation and azimuth of the normal, plus spin about it.

    Angles are in radians. ``theta`` must lie in [0, pi]; ``phi`` and ``rho``
    are reduced modulo 2*pi on construction.
    """

    theta: float
    phi: float
    rho: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)
        object.__setattr__(self, "rho", float(self.rho) % TWO_PI)


@dataclass(frozen=True)
class Basis:
    """Right-handed orthonormal frame: ``i_vec``/``j_vec`` span the aperture plane,
    ``k_vec`` is the surface normal along which elements morph."""

    i_vec: np.ndarray
    j_vec: np.ndarray
    k_vec: np.ndarray


def basis_from_orientation(o: Orientation) -> Basis:
    """Evaluate the local frame of a surface with the given orientation.

    The normal ``k`` points toward (theta, phi) in global spherical coordinates
    and the in-plane axes are spun about it by ``rho``.
    """
    st, ct = math.sin(o.theta), math.cos(o.theta)
    sp, cp = math.sin(o.phi), math.cos(o.phi)
    sr, cr = math.sin(o.rho), math.cos(o.rho)
    i_vec = np.array([ct * cp * cr - sp * sr, ct * sp * cr + cp * sr, -st * cr])
    j_vec = np.array([-ct * cp * sr - sp * cr, -ct * sp * sr + cp * cr, st * sr])
    k_vec = np.array([st * cp, st * sp, ct])
    return Basis(i_vec=i_vec, j_vec=j_vec, k_vec=k_vec)


def direction_vector(azimuth, elevation) -> np.ndarray:
    """Unit propagation direction for the given azimuth/elevation (radians).

    Accepts scalars or broadcastable arrays; the unit vectors are stacked
    along the last axis.
    """
    az = np.asarray(azimuth, dtype=float)
    el = np.asarray(elevation, dtype=float)
    return np.stack(
        [np.sin(el) * np.cos(az), np.sin(el) * np.sin(az), np.cos(el)], axis=-1
    )


@dataclass(frozen=True)
class FimConfig:
    """Geometry of one morphing planar array.

    ``nx``/``nz`` count elements along the in-plane axes, ``dx``/``dz`` are the
    spacings (wavelengths), and ``y_max`` bounds the per-element normal
    displacement. Element ``n`` (0-based) sits at grid cell
    ``(n % nx, n // nx)``, i.e. the x index runs fastest.
    """

    nx: int
    nz: int
    dx: float
    dz: float
    orientation: Orientation
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    y_max: float = 0.0

    def __post_init__(self):
        if self.nx < 1 or self.nz < 1:
            raise ValueError("element counts must be positive")
        if self.dx <= 0 or self.dz <= 0:
            raise ValueError("element spacings must be positive")
        if self.y_max < 0:
            raise ValueError("y_max must be non-negative")
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        if self.origin.shape != (3,):
            raise ValueError("origin must be a 3-vector")

    @property
    def num_elements(self) -> int:
        return self.nx * self.nz

    def basis(self) -> Basis:
        return basis_from_orientation(self.orientation)

    def grid_offsets(self) -> tuple[np.ndarray, np.ndarray]:
        """In-plane offsets (x_n, z_n) of every element, x index fastest."""
        n = np.arange(self.num_elements)
        return self.dx * (n % self.nx), self.dz * (n // self.nx)


@dataclass(frozen=True)
class MorphPattern:
    """Separable normal-displacement pattern: element (ix, iz) moves by
    ``u[ix] + v[iz]`` along the surface normal."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        if self.u.ndim != 1 or self.v.ndim != 1:
            raise ValueError("morph profiles must be 1-D")

    @classmethod
    def zero(cls, nx: int, nz: int) -> "MorphPattern":
        return cls(u=np.zeros(nx), v=np.zeros(nz))

    def flat_displacements(self) -> np.ndarray:
        """Per-element displacements of length nx*nz, x index fastest."""
        return (self.v[:, None] + self.u[None, :]).ravel()


def validate_pattern(cfg: FimConfig, pattern: MorphPattern) -> None:
    """Raise ValueError if the pattern does not fit the grid or exceeds the
    deformation bound |u[ix] + v[iz]| <= y_max anywhere."""
    if pattern.u.shape != (cfg.nx,) or pattern.v.shape != (cfg.nz,):
        raise ValueError(
            f"pattern shape ({pattern.u.size}, {pattern.v.size}) does not match "
            f"grid ({cfg.nx}, {cfg.nz})"
        )
    slack = 1e-12
    hi = pattern.u.max() + pattern.v.max()
    lo = pattern.u.min() + pattern.v.min()
    if hi > cfg.y_max + slack or lo < -cfg.y_max - slack:
        raise ValueError(
            f"displacement range [{lo:.4g}, {hi:.4g}] exceeds bound {cfg.y_max:.4g}"
        )


def element_positions(cfg: FimConfig) -> np.ndarray:
    """Unmorphed element positions, shape (nx*nz, 3), x index fastest."""
    basis = cfg.basis()
    xs, zs = cfg.grid_offsets()
    return cfg.origin + xs[:, None] * basis.i_vec + zs[:, None] * basis.j_vec


def morphed_positions(cfg: FimConfig, pattern: MorphPattern) -> np.ndarray:
    """Element positions displaced along the normal by the morph pattern."""
    validate_pattern(cfg, pattern)
    y = pattern.flat_displacements()
    return element_positions(cfg) + y[:, None] * cfg.basis().k_vec


def sample_morph_pattern(cfg: FimConfig, rng: np.random.Generator) -> MorphPattern:
    """Draw a random separable pattern.

    Each profile entry is uniform on [-y_max/2, +y_max/2], so every combined
    displacement stays within [-y_max, +y_max].
    """
    half = cfg.y_max / 2.0
    return MorphPattern(
        u=rng.uniform(-half, half, cfg.nx),
        v=rng.uniform(-half, half, cfg.nz),
    )
