import numpy as np
import pytest

from depthpose.errors import ValidationError
from depthpose.shapespace import (
    VoxelGrid,
    binarize,
    learn_class_subspace,
    merge_subspaces,
    project,
    reconstruct,
)


def random_subspaces(rng, d=27, k=4, count=3):
    spaces = []
    for cat in range(count):
        shapes = rng.random((k + 3, d))
        spaces.append(learn_class_subspace(list(shapes), k, category_id=cat))
    return spaces


class TestLearnClassSubspace:
    def test_two_point_pca_axis(self):
        sub = learn_class_subspace([np.array([0.0, 0.0]), np.array([2.0, 2.0])], 1)
        np.testing.assert_allclose(sub.mean, [1.0, 1.0])
        np.testing.assert_allclose(sub.basis[:, 0], [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-12)

    def test_identical_shapes_zero_variance(self):
        shape = np.arange(5.0)
        sub = learn_class_subspace([shape] * 4, 2)
        np.testing.assert_allclose(sub.basis.T @ sub.basis, np.eye(2), atol=1e-9)
        # mean alone reconstructs every training shape
        recon = sub.mean + sub.basis @ (sub.basis.T @ (shape - sub.mean))
        np.testing.assert_allclose(recon, shape, atol=1e-12)

    def test_reconstruction_error_matches_discarded_spectrum(self):
        rng = np.random.default_rng(7)
        shapes = [rng.random(27) for _ in range(10)]
        k = 5
        sub = learn_class_subspace(shapes, k)
        x = np.stack(shapes)
        centered = x - x.mean(axis=0)
        total = 0.0
        for row in centered:
            err = row - sub.basis @ (sub.basis.T @ row)
            total += float(err @ err)
        svals = np.linalg.svd(centered, compute_uv=False)
        expected = float((svals[k:] ** 2).sum())
        np.testing.assert_allclose(total, expected, rtol=1e-9)

    def test_variance_fraction_mode(self):
        rng = np.random.default_rng(3)
        base = rng.random((2, 8))
        # data living almost entirely in 2 directions
        shapes = [
            base.T @ rng.standard_normal(2) + 1e-9 * rng.standard_normal(8)
            for _ in range(12)
        ]
        sub = learn_class_subspace(shapes, 0.99)
        assert sub.basis.shape[1] <= 3

    def test_errors(self):
        with pytest.raises(ValidationError, match="insufficient shapes"):
            learn_class_subspace([np.zeros(3)], 1)
        with pytest.raises(ValidationError, match="dimension mismatch"):
            learn_class_subspace([np.zeros(3), np.zeros(4)], 1)
        with pytest.raises(ValidationError):
            learn_class_subspace([np.zeros(3), np.ones(3)], 5)

    def test_deterministic_with_sign_convention(self):
        rng = np.random.default_rng(11)
        shapes = [rng.random(20) for _ in range(8)]
        a = learn_class_subspace(shapes, 4)
        b = learn_class_subspace(shapes, 4)
        np.testing.assert_array_equal(a.basis, b.basis)
        for j in range(a.basis.shape[1]):
            col = a.basis[:, j]
            first = col[np.abs(col) > 1e-12][0]
            assert first > 0


class TestMergeSubspaces:
    def test_single_category_span(self):
        rng = np.random.default_rng(0)
        (sub,) = random_subspaces(rng, count=1)
        model = merge_subspaces([sub])
        assert model.retained_dim <= sub.basis.shape[1] + 1
        proj = model.basis @ model.basis.T
        for col in sub.basis.T:
            np.testing.assert_allclose(proj @ col, col, atol=1e-6)
        np.testing.assert_allclose(proj @ sub.mean, sub.mean, atol=1e-6 * np.linalg.norm(sub.mean))

    def test_duplicates_collapse(self):
        rng = np.random.default_rng(1)
        (sub,) = random_subspaces(rng, count=1)
        once = merge_subspaces([sub])
        twice = merge_subspaces([sub, sub])
        assert twice.retained_dim == once.retained_dim

    def test_span_membership_three_categories(self):
        rng = np.random.default_rng(2)
        spaces = random_subspaces(rng, count=3)
        model = merge_subspaces(spaces)
        proj = model.basis @ model.basis.T
        for sub in spaces:
            for col in sub.basis.T:
                assert np.linalg.norm(proj @ col - col) <= 1e-6

    def test_orthonormal_after_merge(self):
        rng = np.random.default_rng(5)
        for trial in range(10):
            spaces = random_subspaces(rng, d=15, k=3, count=2)
            model = merge_subspaces(spaces)
            gram = model.basis.T @ model.basis
            np.testing.assert_allclose(gram, np.eye(model.retained_dim), atol=1e-6)

    def test_empty_error(self):
        with pytest.raises(ValidationError):
            merge_subspaces([])


class TestProjectReconstruct:
    @pytest.fixture()
    def model(self):
        rng = np.random.default_rng(4)
        return merge_subspaces(random_subspaces(rng))

    def test_zero_vector(self, model):
        np.testing.assert_array_equal(project(np.zeros(27), model), np.zeros(model.retained_dim))
        np.testing.assert_array_equal(
            reconstruct(np.zeros(model.retained_dim), model), np.zeros(27)
        )

    def test_basis_column_gives_unit_vector(self, model):
        j = 2
        coeffs = project(model.basis[:, j], model)
        expected = np.zeros(model.retained_dim)
        expected[j] = 1.0
        np.testing.assert_allclose(coeffs, expected, atol=1e-9)

    def test_in_span_roundtrip(self, model):
        rng = np.random.default_rng(9)
        o = model.basis @ rng.standard_normal(model.retained_dim)
        back = reconstruct(project(o, model), model)
        assert np.linalg.norm(back - o) <= 1e-6 * np.linalg.norm(o)

    def test_project_after_reconstruct_is_identity(self, model):
        rng = np.random.default_rng(10)
        c = rng.standard_normal(model.retained_dim)
        np.testing.assert_allclose(project(reconstruct(c, model), model), c, atol=1e-6)

    def test_reconstruct_project_matches_dense_oracle(self, model):
        rng = np.random.default_rng(12)
        o = rng.random(27)
        dense = model.basis @ model.basis.T  # explicit d x d matrix product
        np.testing.assert_allclose(
            reconstruct(project(o, model), model), dense @ o, atol=1e-9
        )

    def test_length_mismatch_errors(self, model):
        with pytest.raises(ValidationError):
            project(np.zeros(5), model)
        with pytest.raises(ValidationError):
            reconstruct(np.zeros(model.retained_dim + 1), model)


class TestBinarize:
    def test_all_occupied(self):
        grid = binarize(np.full(8, 0.9), 0.5, (2, 2, 2))
        assert grid.occupancy.all()

    def test_all_empty(self):
        grid = binarize(np.full(8, 0.1), 0.5, (2, 2, 2))
        assert not grid.occupancy.any()

    def test_matches_scalar_loop(self):
        rng = np.random.default_rng(13)
        values = rng.random(27)
        grid = binarize(values, 0.5, (3, 3, 3))
        flat = grid.occupancy.reshape(-1)
        for i, v in enumerate(values):
            assert flat[i] == (1 if v >= 0.5 else 0)

    def test_threshold_bounds(self):
        with pytest.raises(ValidationError):
            binarize(np.zeros(8), 1.5, (2, 2, 2))


class TestInvariants:
    def test_reconstruction_error_non_increasing_in_dim(self):
        rng = np.random.default_rng(20)
        shapes = [rng.random(30) for _ in range(12)]
        x = np.stack(shapes)
        mean = x.mean(axis=0)
        errors = []
        for k in (1, 3, 5, 8, 11):
            sub = learn_class_subspace(shapes, k)
            centered = x - mean
            recon = centered @ sub.basis @ sub.basis.T
            errors.append(float(np.linalg.norm(recon - centered)))
        assert all(a >= b - 1e-9 for a, b in zip(errors, errors[1:]))

    def test_voxel_grid_validation(self):
        with pytest.raises(ValidationError):
            VoxelGrid(dims=(2, 2, 2), occupancy=np.full(8, 2, dtype=np.uint8))
        with pytest.raises(ValidationError):
            VoxelGrid(dims=(2, 2, 0), occupancy=np.zeros(0, dtype=np.uint8))

    def test_linear_index_convention(self):
        occ = np.zeros(2 * 3 * 4, dtype=np.uint8)
        ix, iy, iz = 1, 2, 3
        occ[(ix * 3 + iy) * 4 + iz] = 1
        grid = VoxelGrid(dims=(2, 3, 4), occupancy=occ)
        assert grid.occupancy[ix, iy, iz] == 1
        assert grid.occupancy.sum() == 1
