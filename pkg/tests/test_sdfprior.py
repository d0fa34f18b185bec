import numpy as np
import pytest

from depthpose.errors import ValidationError
from depthpose.geometry import DepthImage
from depthpose.sdfprior import depth_error, prior_density, silhouette_sdf
from helpers import brute_force_sdf


def image_from_mask(mask, depth_value=2.5):
    depth = np.where(mask, depth_value, -1.0)
    return DepthImage(depth)


class TestSilhouetteSdf:
    def test_1x3_hand_case(self):
        img = image_from_mask(np.array([[False, True, False]]))
        np.testing.assert_array_equal(silhouette_sdf(img).values, [[1.0, -1.0, 1.0]])

    def test_3x3_all_object(self):
        img = image_from_mask(np.ones((3, 3), dtype=bool))
        expected = -np.array([[1.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 1.0]])
        np.testing.assert_array_equal(silhouette_sdf(img).values, expected)

    def test_matches_brute_force_bit_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            mask = rng.random((16, 16)) < rng.uniform(0.15, 0.85)
            if not mask.any():
                mask[7, 7] = True
            got = silhouette_sdf(image_from_mask(mask)).values
            np.testing.assert_array_equal(got, brute_force_sdf(mask))

    def test_sign_partition(self):
        rng = np.random.default_rng(1)
        mask = rng.random((12, 12)) < 0.4
        mask[5, 5] = True
        values = silhouette_sdf(image_from_mask(mask)).values
        assert np.array_equal(values < 0, mask)

    def test_empty_silhouette_error(self):
        with pytest.raises(ValidationError, match="empty silhouette"):
            silhouette_sdf(image_from_mask(np.zeros((4, 4), dtype=bool)))


class TestDepthError:
    def test_identical_images_zero(self):
        rng = np.random.default_rng(2)
        mask = rng.random((8, 8)) < 0.5
        mask[0, 0] = True
        img = image_from_mask(mask)
        assert depth_error(img, img) == 0.0

    def test_1x3_hand_case_from_oracle(self):
        a = image_from_mask(np.array([[False, True, False]]))
        b = image_from_mask(np.array([[True, False, False]]))
        # oracle fields: [1, -1, 1] vs [-1, 1, 2] -> ||diff|| = 3, /sqrt(3)
        diff = brute_force_sdf(a.mask) - brute_force_sdf(b.mask)
        expected = np.linalg.norm(diff) / np.sqrt(3)
        got = depth_error(a, b)
        assert got == pytest.approx(expected, abs=1e-12)
        assert got == pytest.approx(np.sqrt(3.0), abs=1e-12)

    def test_matches_brute_force_double_loop(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            ma = rng.random((9, 7)) < 0.45
            mb = rng.random((9, 7)) < 0.45
            ma[4, 3] = True
            mb[2, 2] = True
            expected = np.linalg.norm(
                brute_force_sdf(ma) - brute_force_sdf(mb)
            ) / np.sqrt(9 * 7)
            got = depth_error(image_from_mask(ma), image_from_mask(mb))
            assert got == pytest.approx(expected, abs=1e-9)

    def test_symmetric_nonnegative(self):
        rng = np.random.default_rng(4)
        ma = rng.random((8, 8)) < 0.5
        mb = rng.random((8, 8)) < 0.5
        ma[1, 1] = mb[6, 6] = True
        a, b = image_from_mask(ma), image_from_mask(mb)
        assert depth_error(a, b) == depth_error(b, a) >= 0.0

    def test_depends_only_on_silhouette(self):
        rng = np.random.default_rng(5)
        mask = rng.random((8, 8)) < 0.5
        mask[3, 3] = True
        other = rng.random((8, 8)) < 0.5
        other[5, 2] = True
        ref = image_from_mask(other)
        shallow = image_from_mask(mask, depth_value=2.0)
        deep = DepthImage(np.where(mask, 2.0 + rng.random((8, 8)), -1.0))
        assert depth_error(ref, shallow) == depth_error(ref, deep)

    def test_dimension_mismatch(self):
        a = image_from_mask(np.ones((4, 4), dtype=bool))
        b = image_from_mask(np.ones((4, 5), dtype=bool))
        with pytest.raises(ValidationError, match="dimension mismatch"):
            depth_error(a, b)

    def test_empty_silhouette(self):
        a = image_from_mask(np.ones((4, 4), dtype=bool))
        b = image_from_mask(np.zeros((4, 4), dtype=bool))
        with pytest.raises(ValidationError, match="empty silhouette"):
            depth_error(a, b)


class TestPriorDensity:
    def test_zero_error(self):
        assert prior_density(0.0) == pytest.approx(1e6)

    def test_unit_error(self):
        assert prior_density(1.0) == pytest.approx(1.0 / (1.0 + 1e-6))

    def test_strictly_decreasing(self):
        grid = np.linspace(0.0, 20.0, 200)
        values = [prior_density(e) for e in grid]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert max(values) <= 1e6

    def test_negative_rejected(self):
        with pytest.raises(ValidationError):
            prior_density(-0.1)

    def test_custom_epsilon(self):
        assert prior_density(0.0, epsilon=0.5) == pytest.approx(2.0)
