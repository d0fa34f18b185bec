"""Silhouette signed distance fields and the pose-consistency prior.

The silhouette of a segmented depth image is the set of unmasked pixels.
Its SDF is negative inside and positive outside, with pixels beyond the
image border counting as background so interior distances stay finite.
Distances are exact Euclidean distances between pixel centers, in pixel
units.  The agreement score between two images is the resolution-
normalized Frobenius norm of the SDF difference, and the prior density
over poses is the quartic inverse of that score.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import distance_transform_edt

from .errors import ValidationError
from .geometry import DepthImage

DEFAULT_PRIOR_EPSILON = 1e-6


@dataclass(frozen=True)
class SignedDistanceField:
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValidationError("SDF must be 2-D")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def _mask_sdf(mask: np.ndarray) -> np.ndarray:
    if not mask.any():
        raise ValidationError("empty silhouette")
    outside = distance_transform_edt(~mask)
    padded = np.pad(mask, 1, constant_values=False)
    inside = distance_transform_edt(padded)[1:-1, 1:-1]
    return np.where(mask, -inside, outside)


def silhouette_sdf(image: DepthImage) -> SignedDistanceField:
    """Exact signed Euclidean distance field of the image silhouette."""
    return SignedDistanceField(_mask_sdf(image.mask))


def depth_error(observed: DepthImage, predicted: DepthImage) -> float:
    """Silhouette disagreement: normalized Frobenius distance of the SDFs."""
    if (observed.height, observed.width) != (predicted.height, predicted.width):
        raise ValidationError("dimension mismatch")
    a = _mask_sdf(observed.mask)
    b = _mask_sdf(predicted.mask)
    pixels = observed.height * observed.width
    return float(np.linalg.norm(a - b) / np.sqrt(pixels))


def prior_density(e: float, epsilon: float = DEFAULT_PRIOR_EPSILON) -> float:
    """Pose-consistency prior 1 / (e^4 + epsilon); decreasing in e."""
    if e < 0.0:
        raise ValidationError("error score must be non-negative")
    return 1.0 / (e**4 + epsilon)
