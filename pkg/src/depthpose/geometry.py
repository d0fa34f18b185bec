"""3DOF rotation algebra, pose sampling, and a software depth camera.

Rotations are represented as axis-angle rotation vectors (3-vectors whose
direction is the axis and magnitude the angle in radians).  The canonical
form keeps the magnitude <= pi; the antipodal pair at exactly pi is
resolved by making the first nonzero component positive.

The renderer casts one ray per pixel through a voxel grid scaled to the
unit cube and centered on the optical axis at a fixed distance.  Depth is
recorded along the optical axis (z-depth), background pixels carry the
sentinel -1.0.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

# Roll spread for training views: 99% of mass inside +/-25 degrees,
# 2.576 being the two-sided 99% normal quantile.
ROLL_SIGMA_RAD = math.radians(25.0 / 2.576)

_PI_BOUNDARY_TOL = 1e-12


def canonicalize_rotvec(r) -> np.ndarray:
    """Reduce a rotation vector to its canonical representative (norm <= pi)."""
    r = np.asarray(r, dtype=float)
    if r.shape != (3,):
        raise ValidationError("rotation vector must have 3 components")
    if not np.all(np.isfinite(r)):
        raise ValidationError("rotation vector must be finite")
    theta = float(np.linalg.norm(r))
    if theta == 0.0:
        return np.zeros(3)
    t = math.fmod(theta, 2.0 * math.pi)
    if t < 0.0:
        t += 2.0 * math.pi
    out = r * (t / theta)
    if t > math.pi:
        out = out * ((t - 2.0 * math.pi) / t)
    if abs(np.linalg.norm(out) - math.pi) < _PI_BOUNDARY_TOL:
        for c in out:
            if c != 0.0:
                if c < 0.0:
                    out = -out
                break
    return out


def _skew(r: np.ndarray) -> np.ndarray:
    return np.array(
        [
            [0.0, -r[2], r[1]],
            [r[2], 0.0, -r[0]],
            [-r[1], r[0], 0.0],
        ]
    )


def rotvec_to_matrix(r) -> np.ndarray:
    """Rodrigues map from an axis-angle vector to a rotation matrix."""
    r = np.asarray(r, dtype=float)
    if r.shape != (3,):
        raise ValidationError("rotation vector must have 3 components")
    if not np.all(np.isfinite(r)):
        raise ValidationError("rotation vector must be finite")
    theta2 = float(r @ r)
    theta = math.sqrt(theta2)
    if theta < 1e-8:
        # series for sin(t)/t and (1-cos(t))/t^2 to avoid cancellation
        a = 1.0 - theta2 / 6.0
        b = 0.5 - theta2 / 24.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / theta2
    k = _skew(r)
    return np.eye(3) + a * k + b * (k @ k)


def matrix_to_rotvec(mat) -> np.ndarray:
    """Inverse Rodrigues map; returns the canonical rotation vector."""
    mat = np.asarray(mat, dtype=float)
    if mat.shape != (3, 3):
        raise ValidationError("rotation matrix must be 3x3")
    cos_theta = (np.trace(mat) - 1.0) / 2.0
    cos_theta = min(1.0, max(-1.0, cos_theta))
    theta = math.acos(cos_theta)
    vee = np.array(
        [mat[2, 1] - mat[1, 2], mat[0, 2] - mat[2, 0], mat[1, 0] - mat[0, 1]]
    )
    if theta < 1e-7:
        return canonicalize_rotvec(vee / 2.0)
    if theta > math.pi - 1e-5:
        # near pi the vee vector vanishes; recover the axis from the
        # symmetric part: (R + R^T)/2 = I + (1 - cos) (aa^T - I)
        sym = (mat + mat.T) / 2.0
        outer = (sym - cos_theta * np.eye(3)) / (1.0 - cos_theta)
        i = int(np.argmax(np.diag(outer)))
        axis = outer[:, i] / math.sqrt(max(outer[i, i], 1e-30))
        axis = axis / np.linalg.norm(axis)
        # choose the sign consistent with the skew part when it is usable
        if float(vee @ axis) < 0.0:
            axis = -axis
        return canonicalize_rotvec(axis * theta)
    axis = vee / (2.0 * math.sin(theta))
    return canonicalize_rotvec(axis * theta)


def compose_rotvec(a, b) -> np.ndarray:
    """Rotation vector of R(a) @ R(b), canonicalized."""
    return matrix_to_rotvec(rotvec_to_matrix(a) @ rotvec_to_matrix(b))


def angular_error(a, b) -> float:
    """Geodesic distance between two rotations, in degrees (range [0, 180]).

    Equivalent to arccos((trace(Ra^T Rb) - 1) / 2) but evaluated through
    atan2 of the skew/symmetric parts, which stays well conditioned at
    both ends of the range.
    """
    rel = rotvec_to_matrix(a).T @ rotvec_to_matrix(b)
    cos_ang = (np.trace(rel) - 1.0) / 2.0
    sin_ang = 0.5 * math.sqrt(
        (rel[2, 1] - rel[1, 2]) ** 2
        + (rel[0, 2] - rel[2, 0]) ** 2
        + (rel[1, 0] - rel[0, 1]) ** 2
    )
    return math.degrees(math.atan2(sin_ang, cos_ang))


# ---------------------------------------------------------------------------
# view-angle parameterization (azimuth about vertical y, elevation about x,
# roll about the optical axis z); used for view sampling and pose binning


def view_angles_to_matrix(azimuth: float, elevation: float, roll: float) -> np.ndarray:
    ca, sa = math.cos(azimuth), math.sin(azimuth)
    ce, se = math.cos(elevation), math.sin(elevation)
    cr, sr = math.cos(roll), math.sin(roll)
    ry = np.array([[ca, 0.0, sa], [0.0, 1.0, 0.0], [-sa, 0.0, ca]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, ce, -se], [0.0, se, ce]])
    rz = np.array([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]])
    return rz @ rx @ ry


def matrix_to_view_angles(mat) -> tuple[float, float, float]:
    """Recover (azimuth, elevation, roll) from a rotation matrix.

    At the elevation poles (+/-90 degrees) the split between azimuth and
    roll is degenerate; roll is folded to zero there.
    """
    mat = np.asarray(mat, dtype=float)
    se = min(1.0, max(-1.0, float(mat[2, 1])))
    elevation = math.asin(se)
    if abs(se) > 1.0 - 1e-12:
        return math.atan2(mat[0, 2], mat[0, 0]), elevation, 0.0
    azimuth = math.atan2(-mat[2, 0], mat[2, 2])
    roll = math.atan2(-mat[0, 1], mat[1, 1])
    return azimuth, elevation, roll


def rotvec_to_view_angles(r) -> tuple[float, float, float]:
    return matrix_to_view_angles(rotvec_to_matrix(r))


def sample_view_angles(rng: np.random.Generator) -> tuple[float, float, float]:
    """Draw one training view: free azimuth/elevation, near-zero roll."""
    azimuth = rng.uniform(-math.pi, math.pi)
    elevation = rng.uniform(-math.pi / 2.0, math.pi / 2.0)
    roll = rng.normal(0.0, ROLL_SIGMA_RAD)
    return azimuth, elevation, roll


def sample_uniform_rotvecs(count: int, rng: np.random.Generator) -> np.ndarray:
    """Rotation vectors uniform over the rotation group (quaternion method)."""
    q = rng.standard_normal((count, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    q[q[:, 0] < 0.0] *= -1.0
    vec_norm = np.linalg.norm(q[:, 1:], axis=1)
    angle = 2.0 * np.arctan2(vec_norm, q[:, 0])
    out = np.zeros((count, 3))
    ok = vec_norm > 1e-12
    out[ok] = q[ok, 1:] / vec_norm[ok, None] * angle[ok, None]
    return out


def sample_pose(mode: str, rng: np.random.Generator) -> np.ndarray:
    """Draw a single pose; mode is "training_view" or "uniform"."""
    if mode == "uniform":
        return canonicalize_rotvec(sample_uniform_rotvecs(1, rng)[0])
    if mode == "training_view":
        az, el, roll = sample_view_angles(rng)
        return matrix_to_rotvec(view_angles_to_matrix(az, el, roll))
    raise ValidationError(f"unknown pose sampling mode: {mode!r}")


# ---------------------------------------------------------------------------
# depth camera

DEPTH_SENTINEL = -1.0


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float = 64.0
    fy: float = 64.0
    cx: float = 31.5
    cy: float = 31.5
    width: int = 64
    height: int = 64
    object_distance: float = 2.5

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValidationError("focal lengths must be positive")
        if self.width < 8 or self.height < 8:
            raise ValidationError("image must be at least 8x8")
        if self.object_distance <= math.sqrt(3.0) / 2.0:
            raise ValidationError("object_distance must exceed the object radius")

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
            "object_distance": self.object_distance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(**d)


@dataclass(frozen=True)
class DepthImage:
    """Segmented depth image; background pixels hold exactly -1.0."""

    depth: np.ndarray = field(repr=False)

    def __post_init__(self):
        depth = np.asarray(self.depth, dtype=float)
        if depth.ndim != 2:
            raise ValidationError("depth image must be 2-D")
        valid = depth != DEPTH_SENTINEL
        if np.any(depth[valid] <= 0.0) or not np.all(np.isfinite(depth)):
            raise ValidationError("non-sentinel depths must be positive and finite")
        depth.setflags(write=False)
        object.__setattr__(self, "depth", depth)

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def mask(self) -> np.ndarray:
        """Boolean array, True on object (unmasked) pixels."""
        return self.depth != DEPTH_SENTINEL


@functools.lru_cache(maxsize=8)
def _pixel_rays(cam: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Unit ray directions (H*W, 3) in camera frame plus their z components."""
    u = np.arange(cam.width, dtype=float)
    v = np.arange(cam.height, dtype=float)
    uu, vv = np.meshgrid(u, v)
    raw = np.stack(
        [(uu - cam.cx) / cam.fx, (vv - cam.cy) / cam.fy, np.ones_like(uu)], axis=-1
    ).reshape(-1, 3)
    inv_norm = 1.0 / np.linalg.norm(raw, axis=1)
    dirs = raw * inv_norm[:, None]
    dirs.setflags(write=False)
    dz = dirs[:, 2].copy()
    dz.setflags(write=False)
    return dirs, dz


def _cast_rays(occ, dims, origins, dirs, dz):
    """First-hit z-depth for each ray through the unit-cube voxel grid.

    origins/dirs are in the object frame where the grid spans
    [-0.5, 0.5]^3.  Rays that hit nothing get the sentinel.  Traversal is
    a vectorized 3-D DDA clipped to the bounding box of occupied voxels;
    exact boundary ties advance all tied axes at once so corner crossings
    are handled symmetrically.
    """
    m, n, o = dims
    dims_f = np.array([m, n, o], dtype=float)
    count = dirs.shape[0]
    depth = np.full(count, DEPTH_SENTINEL)

    if not occ.any():
        return depth
    occupied = [np.flatnonzero(occ.any(axis=tuple(a for a in (0, 1, 2) if a != ax))) for ax in (0, 1, 2)]
    lo_idx = np.array([occupied[a][0] for a in range(3)], dtype=np.int64)
    hi_idx = np.array([occupied[a][-1] for a in range(3)], dtype=np.int64)
    lo_w = lo_idx / dims_f - 0.5
    hi_w = (hi_idx + 1) / dims_f - 0.5
    occ_flat = np.ascontiguousarray(occ.reshape(-1))

    with np.errstate(divide="ignore", invalid="ignore"):
        t_a = (lo_w - origins) / dirs
        t_b = (hi_w - origins) / dirs
    t_near = np.minimum(t_a, t_b)
    t_far = np.maximum(t_a, t_b)
    parallel = dirs == 0.0
    inside = (origins >= lo_w) & (origins <= hi_w)
    t_near[parallel] = -np.inf
    t_far[parallel] = np.inf
    t_near[parallel & ~inside] = np.inf
    t0 = np.maximum(t_near.max(axis=1), 0.0)
    t1 = t_far.min(axis=1)

    live = np.flatnonzero(t0 < t1)
    if live.size == 0:
        return depth

    org = origins[live]
    drc = dirs[live]
    t_enter = t0[live]
    entry = org + t_enter[:, None] * drc
    idx = np.floor((entry + 0.5) * dims_f).astype(np.int64)
    np.clip(idx, lo_idx, hi_idx, out=idx)
    step = np.sign(drc).astype(np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        boundary = (idx + (step > 0)) / dims_f - 0.5
        t_cross = (boundary - org) / drc
        t_delta = (1.0 / dims_f) / np.abs(drc)
    t_cross[step == 0] = np.inf
    t_delta[step == 0] = np.inf

    while live.size:
        flat = (idx[:, 0] * n + idx[:, 1]) * o + idx[:, 2]
        hit = occ_flat[flat] != 0
        if hit.any():
            ids = live[hit]
            depth[ids] = t_enter[hit] * dz[ids]
            keep = ~hit
            live = live[keep]
            idx = idx[keep]
            step = step[keep]
            t_cross = t_cross[keep]
            t_delta = t_delta[keep]
            t_enter = t_enter[keep]
            if live.size == 0:
                break
        t_next = t_cross.min(axis=1)
        advance = t_cross == t_next[:, None]
        idx += np.where(advance, step, 0)
        t_enter = t_next
        t_cross += np.where(advance, t_delta, 0.0)
        oob = ((idx < lo_idx) | (idx > hi_idx)).any(axis=1)
        if oob.any():
            keep = ~oob
            live = live[keep]
            idx = idx[keep]
            step = step[keep]
            t_cross = t_cross[keep]
            t_delta = t_delta[keep]
            t_enter = t_enter[keep]
    return depth


def _as_matrix(pose) -> np.ndarray:
    pose = np.asarray(pose, dtype=float)
    if pose.shape == (3,):
        return rotvec_to_matrix(pose)
    if pose.shape == (3, 3):
        return pose
    raise ValidationError("pose must be a rotation vector or a 3x3 matrix")


def render_depth_batch(grid, poses, cam: CameraIntrinsics) -> np.ndarray:
    """Render one depth map per pose; returns (P, H, W) with -1.0 background.

    Each pose is a rotation vector or 3x3 matrix; the voxel grid is
    evaluated by inverse-mapping rays into the unrotated grid.
    """
    mats = [_as_matrix(p) for p in poses]
    dirs_cam, dz_cam = _pixel_rays(cam)
    pix = dirs_cam.shape[0]
    center = np.array([0.0, 0.0, cam.object_distance])
    origins = np.empty((len(mats), pix, 3))
    dirs = np.empty((len(mats), pix, 3))
    for i, rot in enumerate(mats):
        origins[i] = -(rot.T @ center)
        dirs[i] = dirs_cam @ rot  # rows are R^T @ d
    dz = np.tile(dz_cam, len(mats))
    depth = _cast_rays(
        grid.occupancy, grid.dims, origins.reshape(-1, 3), dirs.reshape(-1, 3), dz
    )
    return depth.reshape(len(mats), cam.height, cam.width)


def render_depth(grid, pose, cam: CameraIntrinsics) -> DepthImage:
    """Render a posed voxel grid into a segmented depth image."""
    return DepthImage(render_depth_batch(grid, [pose], cam)[0])
