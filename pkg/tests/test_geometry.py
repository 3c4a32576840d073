import numpy as np
import pytest

from fimest.geometry import (
    FimConfig,
    MorphPattern,
    Orientation,
    basis_from_orientation,
    direction_vector,
    element_positions,
    morphed_positions,
    sample_morph_pattern,
    validate_pattern,
)


class TestOrientation:
    def test_angles_reduced_modulo_two_pi(self):
        o = Orientation(theta=0.5, phi=2 * np.pi + 0.25, rho=-np.pi / 4)
        assert o.phi == pytest.approx(0.25)
        assert o.rho == pytest.approx(7 * np.pi / 4)

    def test_theta_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            Orientation(theta=-0.1, phi=0.0, rho=0.0)
        with pytest.raises(ValueError):
            Orientation(theta=np.pi + 0.1, phi=0.0, rho=0.0)


class TestBasis:
    def test_normal_closed_form(self):
        # frozen from direct evaluation of the spherical components
        basis = basis_from_orientation(Orientation(np.pi / 4, np.pi / 3, 1.234))
        np.testing.assert_allclose(
            basis.k_vec,
            [0.3535533905932738, 0.6123724356957945, 0.7071067811865476],
            atol=1e-12,
        )

    def test_pole_orientation(self):
        basis = basis_from_orientation(Orientation(0.0, 0.0, 0.0))
        np.testing.assert_allclose(basis.i_vec, [1.0, 0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(basis.j_vec, [0.0, 1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(basis.k_vec, [0.0, 0.0, 1.0], atol=1e-12)

    def test_orthonormal_for_random_orientations(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            o = Orientation(
                theta=rng.uniform(0, np.pi),
                phi=rng.uniform(0, 2 * np.pi),
                rho=rng.uniform(0, 2 * np.pi),
            )
            b = basis_from_orientation(o)
            frame = np.stack([b.i_vec, b.j_vec, b.k_vec])
            np.testing.assert_allclose(frame @ frame.T, np.eye(3), atol=1e-12)

    def test_right_handed(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            b = basis_from_orientation(
                Orientation(rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi),
                            rng.uniform(0, 2 * np.pi))
            )
            np.testing.assert_allclose(np.cross(b.i_vec, b.j_vec), b.k_vec, atol=1e-12)


class TestElementPositions:
    def test_single_element_at_origin(self):
        cfg = FimConfig(nx=1, nz=1, dx=0.5, dz=0.5,
                        orientation=Orientation(0.3, 0.7, 0.1),
                        origin=np.array([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(element_positions(cfg), [[1.0, 2.0, 3.0]])

    def test_two_elements_along_first_axis(self):
        cfg = FimConfig(nx=2, nz=1, dx=0.5, dz=0.5, orientation=Orientation(0, 0, 0))
        pos = element_positions(cfg)
        np.testing.assert_allclose(pos[0], [0.0, 0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(pos[1], [0.5, 0.0, 0.0], atol=1e-12)

    def test_index_runs_x_fastest(self):
        cfg = FimConfig(nx=3, nz=2, dx=0.4, dz=0.7, orientation=Orientation(0, 0, 0))
        xs, zs = cfg.grid_offsets()
        n = np.arange(6)
        np.testing.assert_allclose(xs, 0.4 * (n % 3))
        np.testing.assert_allclose(zs, 0.7 * (n // 3))

    def test_positions_confined_to_aperture_plane(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            cfg = FimConfig(
                nx=int(rng.integers(1, 5)), nz=int(rng.integers(1, 5)),
                dx=rng.uniform(0.2, 1.0), dz=rng.uniform(0.2, 1.0),
                orientation=Orientation(rng.uniform(0, np.pi),
                                        rng.uniform(0, 2 * np.pi),
                                        rng.uniform(0, 2 * np.pi)),
            )
            basis = cfg.basis()
            offsets = element_positions(cfg) - cfg.origin
            np.testing.assert_allclose(offsets @ basis.k_vec, 0.0, atol=1e-12)


class TestMorphedPositions:
    def test_zero_morph_is_identity(self, rx_cfg):
        pattern = MorphPattern.zero(rx_cfg.nx, rx_cfg.nz)
        np.testing.assert_array_equal(
            morphed_positions(rx_cfg, pattern), element_positions(rx_cfg)
        )

    def test_displacement_parallel_to_normal(self, rx_cfg):
        rng = np.random.default_rng(11)
        pattern = sample_morph_pattern(rx_cfg, rng)
        delta = morphed_positions(rx_cfg, pattern) - element_positions(rx_cfg)
        k = rx_cfg.basis().k_vec
        signed = delta @ k
        np.testing.assert_allclose(delta, signed[:, None] * k, atol=1e-12)
        np.testing.assert_allclose(signed, pattern.flat_displacements(), atol=1e-12)

    def test_bound_violation_rejected(self):
        cfg = FimConfig(nx=2, nz=2, dx=0.5, dz=0.5,
                        orientation=Orientation(0, 0, 0), y_max=1.0)
        pattern = MorphPattern(u=[0.8, 0.0], v=[0.8, 0.0])  # 1.6 > 1.0
        with pytest.raises(ValueError):
            morphed_positions(cfg, pattern)

    def test_wrong_profile_length_rejected(self, rx_cfg):
        with pytest.raises(ValueError):
            validate_pattern(rx_cfg, MorphPattern(u=np.zeros(3), v=np.zeros(4)))


class TestSampleMorphPattern:
    def test_zero_range_gives_zero_pattern(self, rx_cfg):
        cfg = FimConfig(nx=4, nz=4, dx=0.5, dz=0.5,
                        orientation=rx_cfg.orientation, y_max=0.0)
        p = sample_morph_pattern(cfg, np.random.default_rng(0))
        assert not p.u.any() and not p.v.any()

    def test_bound_and_mean_statistics(self):
        # ~1e5 displacement samples across many patterns
        cfg = FimConfig(nx=16, nz=16, dx=0.5, dz=0.5,
                        orientation=Orientation(0, 0, 0), y_max=1.0)
        rng = np.random.default_rng(123)
        disp = np.concatenate(
            [sample_morph_pattern(cfg, rng).flat_displacements() for _ in range(400)]
        )
        assert disp.size >= 100_000
        assert np.abs(disp).max() <= 1.0
        # grand mean sigma: per-pattern mean variance (1/12)/16 * 2 over 400 patterns
        sigma = np.sqrt(2 * (1.0 / 12.0) / 16 / 400)
        assert abs(disp.mean()) <= 3 * sigma

    def test_never_violates_bound(self, rx_cfg):
        rng = np.random.default_rng(99)
        for _ in range(200):
            validate_pattern(rx_cfg, sample_morph_pattern(rx_cfg, rng))

    def test_deterministic_under_seed(self, rx_cfg):
        p1 = sample_morph_pattern(rx_cfg, np.random.default_rng(5))
        p2 = sample_morph_pattern(rx_cfg, np.random.default_rng(5))
        np.testing.assert_array_equal(p1.u, p2.u)
        np.testing.assert_array_equal(p1.v, p2.v)


class TestDirectionVector:
    @pytest.mark.parametrize(
        "azimuth,elevation,expected",
        [
            (0.0, 0.0, [0.0, 0.0, 1.0]),
            (np.pi / 2, np.pi / 2, [0.0, 1.0, 0.0]),
            (0.0, np.pi / 2, [1.0, 0.0, 0.0]),
        ],
    )
    def test_cardinal_directions(self, azimuth, elevation, expected):
        np.testing.assert_allclose(direction_vector(azimuth, elevation), expected,
                                   atol=1e-12)

    def test_unit_norm(self):
        rng = np.random.default_rng(8)
        d = direction_vector(rng.uniform(0, 2 * np.pi, 500), rng.uniform(0, np.pi, 500))
        np.testing.assert_allclose(np.linalg.norm(d, axis=-1), 1.0, atol=1e-12)


class TestFimConfig:
    def test_invalid_dimensions_rejected(self):
        with pytest.raises(ValueError):
            FimConfig(nx=0, nz=1, dx=0.5, dz=0.5, orientation=Orientation(0, 0, 0))
        with pytest.raises(ValueError):
            FimConfig(nx=1, nz=1, dx=-0.5, dz=0.5, orientation=Orientation(0, 0, 0))
        with pytest.raises(ValueError):
            FimConfig(nx=1, nz=1, dx=0.5, dz=0.5, orientation=Orientation(0, 0, 0),
                      y_max=-1.0)

    def test_element_count(self, rx_cfg):
        assert rx_cfg.num_elements == 16
