import numpy as np
import pytest

from fimest.channel import steering_factors_xz, steering_matrix
from fimest.geometry import FimConfig, Orientation, direction_vector

TX_ORIENTATION = Orientation(theta=np.pi / 4, phi=np.pi / 3, rho=np.pi / 6)
RX_ORIENTATION = Orientation(theta=np.pi / 3, phi=np.pi / 6, rho=-np.pi / 4)


@pytest.fixture
def tx_cfg():
    return FimConfig(nx=4, nz=4, dx=0.5, dz=0.5, orientation=TX_ORIENTATION, y_max=1.0)


@pytest.fixture
def rx_cfg():
    return FimConfig(nx=4, nz=4, dx=0.5, dz=0.5, orientation=RX_ORIENTATION, y_max=1.0)


def slot_factor_matrices(cfg, pattern, azimuth, elevation):
    """Per-axis factor matrices of one morphing slot: columns over paths."""
    basis = cfg.basis()
    dirs = direction_vector(azimuth, elevation)
    gs, hs = [], []
    for d in np.atleast_2d(dirs):
        g, h = steering_factors_xz(cfg, basis, pattern, d)
        gs.append(g)
        hs.append(h)
    return np.stack(gs, axis=1), np.stack(hs, axis=1)


def true_steering(cfg, azimuth, elevation):
    return steering_matrix(cfg, cfg.basis(), azimuth, elevation)
