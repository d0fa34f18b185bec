"""Linear shape subspaces over voxelized objects.

Each object category gets a low-dimensional PCA basis learned from
flattened voxel grids; the per-category bases and means are then merged
into a single orthonormal basis via SVD.  Objects are projected into the
merged space with a plain transpose product and mapped back with the
basis itself (no mean subtraction at projection time: the merged basis
spans the category means).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

SIGN_CONVENTION = "first-nonzero-positive"
MERGE_RANK_TOL = 1e-8


@dataclass(frozen=True)
class VoxelGrid:
    """Binary occupancy grid; linear index (ix*n + iy)*o + iz."""

    dims: tuple[int, int, int]
    occupancy: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or any(d <= 0 for d in dims):
            raise ValidationError("grid dims must be three positive integers")
        occ = np.asarray(self.occupancy, dtype=np.uint8).reshape(dims)
        if not np.isin(occ, (0, 1)).all():
            raise ValidationError("occupancy values must be 0 or 1")
        occ.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "occupancy", occ)

    @property
    def size(self) -> int:
        m, n, o = self.dims
        return m * n * o

    def to_vector(self) -> np.ndarray:
        """Flatten to a float shape vector in linear-index order."""
        return self.occupancy.reshape(-1).astype(float)


@dataclass(frozen=True)
class ClassSubspace:
    """Per-category basis (column-orthonormal) and mean shape."""

    basis: np.ndarray = field(repr=False)
    mean: np.ndarray = field(repr=False)
    category_id: int = 0

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=float)
        mean = np.asarray(self.mean, dtype=float)
        if basis.ndim != 2 or mean.ndim != 1 or basis.shape[0] != mean.shape[0]:
            raise ValidationError("basis/mean dimensions disagree")
        gram = basis.T @ basis
        if not np.allclose(gram, np.eye(basis.shape[1]), atol=1e-6):
            raise ValidationError("basis columns must be orthonormal")
        basis.setflags(write=False)
        mean.setflags(write=False)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "mean", mean)


@dataclass(frozen=True)
class SubspaceModel:
    """Merged orthonormal basis spanning every category basis and mean."""

    basis: np.ndarray = field(repr=False)
    category_means: tuple = field(repr=False)
    category_ids: tuple
    dims: tuple[int, int, int] | None = None

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=float)
        basis.setflags(write=False)
        means = tuple(np.asarray(m, dtype=float) for m in self.category_means)
        for m in means:
            m.setflags(write=False)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "category_means", means)
        if self.dims is not None:
            object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def d(self) -> int:
        return self.basis.shape[0]

    @property
    def retained_dim(self) -> int:
        return self.basis.shape[1]


def _fix_column_signs(basis: np.ndarray) -> np.ndarray:
    """Make the first nonzero entry of each column positive (reproducibility)."""
    basis = basis.copy()
    for j in range(basis.shape[1]):
        col = basis[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0.0:
            basis[:, j] = -col
    return basis


def learn_class_subspace(shapes, retained, category_id: int = 0) -> ClassSubspace:
    """PCA of a list of flattened voxel shapes.

    ``retained`` is either an integer target dimension or a variance
    fraction in (0, 1).  The basis holds the top principal directions of
    the mean-centered shapes, sign-fixed for determinism.
    """
    if len(shapes) < 2:
        raise ValidationError("insufficient shapes")
    data = [np.asarray(s, dtype=float).reshape(-1) for s in shapes]
    d = data[0].shape[0]
    if any(s.shape[0] != d for s in data):
        raise ValidationError("dimension mismatch")
    x = np.stack(data)
    mean = x.mean(axis=0)
    centered = x - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)

    max_rank = min(len(shapes) - 1, d)
    if isinstance(retained, float) and 0.0 < retained < 1.0:
        energy = svals**2
        total = float(energy.sum())
        if total <= 0.0:
            k = 1
        else:
            cum = np.cumsum(energy) / total
            k = int(np.searchsorted(cum, retained - 1e-12) + 1)
        k = min(k, max_rank)
    else:
        k = int(retained)
        if k < 1 or k > max_rank:
            raise ValidationError(
                f"retained dimension {k} outside [1, {max_rank}]"
            )
    basis = _fix_column_signs(vt[:k].T)
    return ClassSubspace(basis=basis, mean=mean, category_id=category_id)


def merge_subspaces(subspaces, dims=None) -> SubspaceModel:
    """Merge per-category subspaces into one orthonormal basis.

    Concatenates all bases and mean vectors, then keeps the left singular
    vectors whose singular value exceeds MERGE_RANK_TOL relative to the
    largest (numerically duplicated directions are dropped).
    """
    subspaces = list(subspaces)
    if not subspaces:
        raise ValidationError("no subspaces to merge")
    d = subspaces[0].basis.shape[0]
    if any(s.basis.shape[0] != d for s in subspaces):
        raise ValidationError("dimension mismatch")
    stacked = np.column_stack(
        [s.basis for s in subspaces] + [s.mean.reshape(-1, 1) for s in subspaces]
    )
    u, svals, _ = np.linalg.svd(stacked, full_matrices=False)
    keep = svals >= MERGE_RANK_TOL * svals[0] if svals[0] > 0 else svals > 0
    basis = _fix_column_signs(u[:, keep])
    return SubspaceModel(
        basis=basis,
        category_means=tuple(s.mean for s in subspaces),
        category_ids=tuple(s.category_id for s in subspaces),
        dims=dims,
    )


def project(shape_vector, model: SubspaceModel) -> np.ndarray:
    """Coefficients of a shape vector in the merged basis (W^T o)."""
    o = np.asarray(shape_vector, dtype=float).reshape(-1)
    if o.shape[0] != model.d:
        raise ValidationError("dimension mismatch")
    return model.basis.T @ o


def reconstruct(coefficients, model: SubspaceModel) -> np.ndarray:
    """Shape vector reconstructed from subspace coefficients (W c)."""
    c = np.asarray(coefficients, dtype=float).reshape(-1)
    if c.shape[0] != model.retained_dim:
        raise ValidationError("dimension mismatch")
    return model.basis @ c


def binarize(shape_vector, threshold: float, dims) -> VoxelGrid:
    """Threshold a real-valued shape vector back into a voxel grid."""
    if not 0.0 < threshold < 1.0:
        raise ValidationError("threshold must lie in (0, 1)")
    v = np.asarray(shape_vector, dtype=float).reshape(-1)
    dims = tuple(int(x) for x in dims)
    if v.shape[0] != dims[0] * dims[1] * dims[2]:
        raise ValidationError("dimension mismatch")
    return VoxelGrid(dims=dims, occupancy=(v >= threshold).astype(np.uint8))
