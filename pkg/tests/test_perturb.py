import numpy as np
import pytest

from particul_ood.errors import DatasetError, MagnitudeError
from particul_ood.perturb import (
    DEFAULT_GRIDS,
    KINDS,
    MagnitudeGrid,
    Perturbation,
    apply,
    default_grid,
    gamma,
    gamma_sweep,
    perturb_dataset,
)


def checker_image(seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, 1.0, size=(16, 16, 3))


class TestIdentity:
    @pytest.mark.parametrize("kind,lam", [("gaussian_blur", 0.0), ("brightness", 1.0),
                                          ("gaussian_noise", 0.0), ("rotation", 0.0)])
    def test_identity_is_bitwise(self, kind, lam):
        x = checker_image()
        out = apply(Perturbation(kind, lam, seed=3), x)
        assert np.array_equal(out, x)
        assert out is not x


class TestBlur:
    def test_preserves_constant_image(self):
        x = np.full((12, 12, 3), 0.63)
        out = apply(Perturbation("gaussian_blur", 2.0), x)
        assert np.abs(out - x).max() < 1e-12

    def test_smooths_variance(self):
        x = checker_image(1)
        out = apply(Perturbation("gaussian_blur", 2.0), x)
        assert out.var() < x.var()

    def test_stays_in_range(self):
        out = apply(Perturbation("gaussian_blur", 8.0), checker_image(2))
        assert out.min() >= 0.0 and out.max() <= 1.0


class TestBrightness:
    def test_halves_constant(self):
        x = np.full((8, 8, 3), 0.8)
        out = apply(Perturbation("brightness", 0.5), x)
        assert np.allclose(out, 0.4, atol=1e-15)

    def test_magnitude_above_one_rejected(self):
        with pytest.raises(MagnitudeError):
            Perturbation("brightness", 1.5)


class TestNoise:
    def test_seeded_reproducible(self):
        x = checker_image(3)
        a = apply(Perturbation("gaussian_noise", 0.2, seed=9), x)
        b = apply(Perturbation("gaussian_noise", 0.2, seed=9), x)
        assert np.array_equal(a, b)

    def test_different_seeds_differ(self):
        x = checker_image(3)
        a = apply(Perturbation("gaussian_noise", 0.2, seed=1), x)
        b = apply(Perturbation("gaussian_noise", 0.2, seed=2), x)
        assert not np.array_equal(a, b)

    def test_clamped(self):
        out = apply(Perturbation("gaussian_noise", 0.4, seed=0), checker_image(4))
        assert out.min() >= 0.0 and out.max() <= 1.0


class TestRotation:
    def test_half_turn_of_point_symmetric_image(self):
        x = checker_image(5)
        sym = (x + x[::-1, ::-1]) / 2.0  # point-symmetric about the center
        out = apply(Perturbation("rotation", 180.0), sym)
        assert np.abs(out - sym).max() <= 1e-6

    def test_out_of_frame_filled_midgray(self):
        x = np.ones((16, 16, 3))
        out = apply(Perturbation("rotation", 45.0), x)
        assert out[0, 0, 0] == pytest.approx(0.5, abs=1e-9)

    def test_range_limit(self):
        with pytest.raises(MagnitudeError):
            Perturbation("rotation", 270.0)


class TestGrids:
    def test_defaults_valid(self):
        for kind in KINDS:
            grid = default_grid(kind)
            assert len(grid) == len(DEFAULT_GRIDS[kind])

    def test_identity_must_come_first(self):
        with pytest.raises(MagnitudeError):
            MagnitudeGrid("gaussian_blur", (0.5, 1.0, 2.0))

    def test_too_short(self):
        with pytest.raises(MagnitudeError):
            MagnitudeGrid("gaussian_blur", (0.0, 1.0))

    def test_monotone(self):
        with pytest.raises(MagnitudeError):
            MagnitudeGrid("gaussian_blur", (0.0, 2.0, 1.0))
        with pytest.raises(MagnitudeError):
            MagnitudeGrid("brightness", (1.0, 0.4, 0.6))

    def test_range_checked(self):
        with pytest.raises(MagnitudeError):
            MagnitudeGrid("gaussian_blur", (0.0, 4.0, 9.0))


class TestPerturbDataset:
    def test_identity_bitwise(self):
        images = [checker_image(i) for i in range(4)]
        out = perturb_dataset("gaussian_noise", 0.0, images, seed=0)
        assert len(out) == 4
        for a, b in zip(out, images):
            assert np.array_equal(a, b)

    def test_deterministic(self):
        images = [checker_image(i) for i in range(3)]
        a = perturb_dataset("gaussian_noise", 0.1, images, seed=5)
        b = perturb_dataset("gaussian_noise", 0.1, images, seed=5)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_per_image_seeds_differ(self):
        images = [checker_image(0), checker_image(0)]
        out = perturb_dataset("gaussian_noise", 0.1, images, seed=5)
        assert not np.array_equal(out[0], out[1])


class TestGamma:
    def test_constant_measure(self):
        images = [checker_image(i) for i in range(3)]
        for lam in (0.0, 0.1, 0.3):
            val = gamma(lambda x: 0.7, images, "gaussian_noise", lam)
            assert val == pytest.approx(0.7, abs=1e-15)

    def test_singleton_dataset(self):
        x = checker_image(7)
        p = Perturbation("brightness", 0.6)
        val = gamma(lambda im: float(im.mean()), [x], "brightness", 0.6)
        assert val == float(apply(p, x).mean())

    def test_empty_dataset(self):
        with pytest.raises(DatasetError):
            gamma(lambda x: 1.0, [], "brightness", 0.6)

    def test_within_min_max(self):
        images = [checker_image(i) for i in range(5)]
        confs = [float(x.mean()) for x in perturb_dataset("brightness", 0.4, images)]
        val = gamma(lambda im: float(im.mean()), images, "brightness", 0.4)
        assert min(confs) <= val <= max(confs)


class TestGammaSweep:
    def test_constant_measure_constant_vector(self):
        images = [checker_image(i) for i in range(2)]
        grid = default_grid("gaussian_noise")
        out = gamma_sweep(lambda x: 0.5, images, "gaussian_noise", grid)
        assert np.array_equal(out, np.full(len(grid), 0.5))

    def test_length_matches_grid(self):
        images = [checker_image(0)]
        grid = default_grid("rotation")
        out = gamma_sweep(lambda x: float(x.mean()), images, "rotation", grid)
        assert out.shape == (len(grid),)

    def test_brightness_mean_tracks_factor(self):
        images = [checker_image(i) for i in range(3)]
        grid = default_grid("brightness")
        out = gamma_sweep(lambda x: float(x.mean()), images, "brightness", grid)
        assert all(a > b for a, b in zip(out, out[1:]))
