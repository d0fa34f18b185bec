"""Procedural voxel shape families and synthetic dataset generation.

Four families of axis-aligned box unions stand in for real object
categories, each with per-object sampled dimensions:

  boxcar          car-like: body slab + cabin offset toward the front.
  winged          plane-like: fuselage, wing slab, vertical tail fin.
  slab            couch-like: seat block, low backrest, armrests; the
                  low back makes front/back views easy to confuse.
  symmetric-twin  two towers on a base, exactly invariant under a 180
                  degree rotation about the vertical axis except for
                  pockets recessed into one tower.  A recessed pocket
                  never changes the outline from any view (every ray
                  entering it hits a pocket wall), so the silhouette is
                  flip-invariant while the depth pattern is not.

Axes follow the camera convention: x is horizontal, y is vertical
(increasing downward), z points away from the camera at identity pose.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .fileio import (
    read_depth_image,
    read_manifest,
    save_subspace,
    write_depth_image,
    write_manifest,
    write_voxel_grid,
)
from .geometry import CameraIntrinsics, render_depth_batch, sample_pose
from .mdn import NetworkConfig, TrainingSet, normalize_depth_input
from .shapespace import (
    SubspaceModel,
    VoxelGrid,
    learn_class_subspace,
    merge_subspaces,
    project,
)

FAMILIES = ("boxcar", "winged", "slab", "symmetric-twin")
VALID_GRID_SIDES = (8, 16, 32, 64)


@dataclass(frozen=True)
class SyntheticFamilyConfig:
    family: str
    count: int
    views_per_object: int = 30
    grid_side: int = 16
    param_ranges: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown family {self.family!r}")
        if self.count < 1 or self.views_per_object < 1:
            raise ValidationError("count and views_per_object must be >= 1")
        if self.grid_side not in VALID_GRID_SIDES:
            raise ValidationError(f"grid_side must be one of {VALID_GRID_SIDES}")

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "count": self.count,
            "views_per_object": self.views_per_object,
            "grid_side": self.grid_side,
            "param_ranges": dict(self.param_ranges),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticFamilyConfig":
        return cls(**d)


def _span(rng, lo_frac, hi_frac, side, minimum=1):
    """Integer extent sampled from a fractional range of the grid side."""
    return max(minimum, int(round(rng.uniform(lo_frac, hi_frac) * side)))


def _box(occ, x0, x1, y0, y1, z0, z1, value=1):
    s = occ.shape[0]
    occ[
        max(0, x0) : min(s, x1),
        max(0, y0) : min(s, y1),
        max(0, z0) : min(s, z1),
    ] = value


def _make_boxcar(s, rng, ranges):
    occ = np.zeros((s, s, s), dtype=np.uint8)
    lx = _span(rng, *ranges.get("body_length", (0.62, 0.92)), s, 6)
    hy = _span(rng, *ranges.get("body_height", (0.18, 0.26)), s, 2)
    wz = _span(rng, *ranges.get("body_width", (0.30, 0.48)), s, 3)
    ch = _span(rng, *ranges.get("cabin_height", (0.12, 0.20)), s, 1)
    wh = _span(rng, *ranges.get("wheel_height", (0.08, 0.14)), s, 1)
    cl = max(2, int(round(rng.uniform(0.35, 0.55) * lx)))
    coff = max(1, int(round(rng.uniform(0.08, 0.20) * lx)))

    x0 = (s - lx) // 2
    z0 = (s - wz) // 2
    total = hy + ch + wh
    y_top = max(0, (s - total) // 2)
    y_body = y_top + ch
    y_wheel = y_body + hy
    _box(occ, x0, x0 + lx, y_body, y_wheel, z0, z0 + wz)
    # cabin sits on the body, shifted toward the front (-x) end
    cz0 = z0 + (1 if wz > 2 else 0)
    cz1 = z0 + wz - (1 if wz > 2 else 0)
    _box(occ, x0 + coff, x0 + coff + cl, y_top, y_body, cz0, cz1)
    # wheel blocks under the four corners give the outline fine structure
    ww = max(1, lx // 5)
    for wx in (x0 + 1, x0 + lx - 1 - ww):
        for wz0 in (z0, z0 + wz - max(1, wz // 3)):
            _box(occ, wx, wx + ww, y_wheel, y_wheel + wh, wz0, wz0 + max(1, wz // 3))
    # small tail block on one side breaks the left/right mirror symmetry
    _box(occ, x0 + lx - 2, x0 + lx, y_body - 1, y_body, z0 + wz - 1, z0 + wz)
    return occ


def _make_winged(s, rng, ranges):
    occ = np.zeros((s, s, s), dtype=np.uint8)
    lx = _span(rng, *ranges.get("fuselage_length", (0.70, 0.95)), s, 5)
    body = _span(rng, *ranges.get("fuselage_side", (0.12, 0.20)), s, 2)
    wing_span = _span(rng, *ranges.get("wing_span", (0.75, 0.95)), s, 4)
    wing_chord = _span(rng, *ranges.get("wing_chord", (0.18, 0.30)), s, 2)
    fin_height = _span(rng, *ranges.get("fin_height", (0.12, 0.20)), s, 2)
    fin_length = _span(rng, *ranges.get("fin_length", (0.10, 0.16)), s, 1)

    x0 = (s - lx) // 2
    mid = s // 2
    y0 = mid - body // 2
    z0 = mid - body // 2
    _box(occ, x0, x0 + lx, y0, y0 + body, z0, z0 + body)
    # wings: thin horizontal slab forward of center
    wx0 = x0 + max(1, int(0.30 * lx))
    wz0 = (s - wing_span) // 2
    _box(occ, wx0, wx0 + wing_chord, y0 + body // 2, y0 + body // 2 + 1, wz0, wz0 + wing_span)
    # vertical tail fin at the rear, rising above the fuselage
    fx0 = x0 + lx - fin_length
    _box(occ, fx0, x0 + lx, y0 - fin_height, y0, mid - 1, mid + 1)
    # small horizontal tailplane
    tp = _span(rng, *ranges.get("tailplane_span", (0.30, 0.45)), s, 2)
    _box(occ, fx0, x0 + lx, y0 + body // 2, y0 + body // 2 + 1, (s - tp) // 2, (s - tp) // 2 + tp)
    return occ


def _make_slab(s, rng, ranges):
    occ = np.zeros((s, s, s), dtype=np.uint8)
    lx = _span(rng, *ranges.get("seat_width", (0.60, 0.90)), s, 4)
    dz = _span(rng, *ranges.get("seat_depth", (0.35, 0.50)), s, 3)
    hy = _span(rng, *ranges.get("seat_height", (0.20, 0.30)), s, 2)
    back_h = _span(rng, *ranges.get("back_height", (0.10, 0.22)), s, 1)
    back_t = _span(rng, *ranges.get("back_thickness", (0.10, 0.16)), s, 1)
    arm_h = _span(rng, *ranges.get("arm_height", (0.05, 0.10)), s, 1)
    arm_t = _span(rng, *ranges.get("arm_thickness", (0.08, 0.12)), s, 1)

    x0 = (s - lx) // 2
    z0 = (s - dz) // 2
    y_seat = s // 2
    _box(occ, x0, x0 + lx, y_seat, y_seat + hy, z0, z0 + dz)
    # low backrest along the far (+z) edge
    _box(occ, x0, x0 + lx, y_seat - back_h, y_seat, z0 + dz - back_t, z0 + dz)
    # armrests at both ends
    _box(occ, x0, x0 + arm_t, y_seat - arm_h, y_seat, z0, z0 + dz)
    _box(occ, x0 + lx - arm_t, x0 + lx, y_seat - arm_h, y_seat, z0, z0 + dz)
    return occ


def _make_symmetric_twin(s, rng, ranges):
    occ = np.zeros((s, s, s), dtype=np.uint8)
    base_x = _span(rng, *ranges.get("base_span", (0.72, 0.92)), s, 5)
    base_z = _span(rng, *ranges.get("base_depth", (0.34, 0.52)), s, 3)
    base_t = _span(rng, *ranges.get("base_thickness", (0.16, 0.24)), s, 3)
    tw = _span(rng, *ranges.get("tower_width", (0.24, 0.34)), s, 3)
    td = _span(rng, *ranges.get("tower_depth", (0.30, 0.45)), s, 4)
    th = _span(rng, *ranges.get("tower_height", (0.45, 0.60)), s, 5)
    off = _span(rng, *ranges.get("tower_offset", (0.18, 0.26)), s, 1)

    y_base = s // 2 + th // 2
    bx0 = (s - base_x) // 2
    bz0 = (s - base_z) // 2
    _box(occ, bx0, bx0 + base_x, y_base, y_base + base_t, bz0, bz0 + base_z)
    # one tower on the +x side of the base
    tx0 = min(s - tw, s // 2 + off - tw // 2)
    ty0 = y_base - th
    tz0 = (s - td) // 2
    _box(occ, tx0, tx0 + tw, ty0, y_base, tz0, tz0 + td)
    # symmetrize: union with the copy rotated 180 degrees about vertical
    occ = occ | occ[::-1, :, ::-1]

    # carve walled pockets that all open toward -z (the object's front).
    # A walled pocket never changes the outline from any view (every ray
    # entering it hits a pocket wall), so silhouettes stay exactly
    # flip-invariant.  Because every opening faces the same horizontal
    # direction, the pockets are visible from front views and hidden
    # after a vertical flip: whether recessed pixels appear at all is a
    # single global cue that resolves the twin ambiguity, rather than a
    # spatial left/right relation.
    d_pocket = min(td - 1, max(2, td // 2))
    if tw >= 3 and th >= 3:
        # the flipped tower can sit one voxel off in z when s - td is odd,
        # so each pocket is carved from its own tower's front face
        for x_lo, z_lo in ((tx0, tz0), (s - tw - tx0, s - td - tz0)):
            occ[
                x_lo + 1 : x_lo + tw - 1,
                ty0 + 1 : y_base - 1,
                z_lo : z_lo + d_pocket,
            ] = 0
    if base_t >= 3 and base_x >= 6:
        # wide letterbox recess along the base front face
        occ[
            bx0 + 1 : bx0 + base_x - 1,
            y_base + 1 : y_base + base_t - 1,
            bz0 : bz0 + min(base_z - 1, 2),
        ] = 0
    return occ


_BUILDERS = {
    "boxcar": _make_boxcar,
    "winged": _make_winged,
    "slab": _make_slab,
    "symmetric-twin": _make_symmetric_twin,
}


def make_object(family: str, grid_side: int, rng: np.random.Generator, param_ranges=None) -> VoxelGrid:
    """Sample one voxel object from a family."""
    if family not in _BUILDERS:
        raise ValidationError(f"unknown family {family!r}")
    occ = _BUILDERS[family](grid_side, rng, param_ranges or {})
    return VoxelGrid(dims=(grid_side, grid_side, grid_side), occupancy=occ)


# ---------------------------------------------------------------------------
# dataset generation


def gen_dataset(
    configs,
    out_dir,
    seed: int = 0,
    camera: CameraIntrinsics | None = None,
    retained: int | float = 20,
    subspace_model: SubspaceModel | None = None,
) -> dict:
    """Generate voxel objects, rendered views, subspace, and manifest.

    ``configs`` is one SyntheticFamilyConfig or a list (one per
    category; category ids follow list order).  When ``subspace_model``
    is given (e.g. for a test split), objects are projected onto it
    instead of learning a fresh one.  Returns the config echo dict.
    """
    if isinstance(configs, SyntheticFamilyConfig):
        configs = [configs]
    if not configs:
        raise ValidationError("at least one family config required")
    side = configs[0].grid_side
    if any(c.grid_side != side for c in configs):
        raise ValidationError("all families must share grid_side")
    camera = camera or CameraIntrinsics()

    out = Path(out_dir)
    (out / "voxels").mkdir(parents=True, exist_ok=True)
    (out / "depths").mkdir(parents=True, exist_ok=True)

    all_grids: list[list[VoxelGrid]] = []
    for cat, cfg in enumerate(configs):
        rng = np.random.default_rng([int(seed), int(cfg.seed), cat, 0])
        all_grids.append(
            [make_object(cfg.family, side, rng, cfg.param_ranges) for _ in range(cfg.count)]
        )

    if subspace_model is None:
        class_spaces = []
        for cat, (cfg, grids) in enumerate(zip(configs, all_grids)):
            vectors = [g.to_vector() for g in grids]
            cap = min(len(vectors) - 1, vectors[0].shape[0])
            r = retained if isinstance(retained, float) else min(int(retained), cap)
            class_spaces.append(learn_class_subspace(vectors, r, category_id=cat))
        subspace_model = merge_subspaces(class_spaces, dims=(side, side, side))
    save_subspace(subspace_model, out / "subspace.json")

    records = []
    for cat, (cfg, grids) in enumerate(zip(configs, all_grids)):
        view_rng = np.random.default_rng([int(seed), int(cfg.seed), cat, 1])
        for idx, grid in enumerate(grids):
            stem = f"{cfg.family}_{idx:04d}"
            voxel_path = f"voxels/{stem}.vxg"
            write_voxel_grid(grid, out / voxel_path)
            coeffs = project(grid.to_vector(), subspace_model)
            poses = [
                sample_pose("training_view", view_rng)
                for _ in range(cfg.views_per_object)
            ]
            depths = render_depth_batch(grid, poses, camera)
            for v, (pose, depth) in enumerate(zip(poses, depths)):
                depth_path = f"depths/{stem}_v{v:03d}.dpm"
                write_depth_image(depth, out / depth_path)
                records.append(
                    {
                        "depth_path": depth_path,
                        "pose": [float(x) for x in pose],
                        "shape_coeffs": [float(x) for x in coeffs],
                        "category": cat,
                        "object_index": idx,
                        "voxel_path": voxel_path,
                    }
                )
    write_manifest(records, out / "manifest.jsonl")

    echo = {
        "seed": int(seed),
        "retained": retained,
        "camera": camera.to_dict(),
        "families": [c.to_dict() for c in configs],
        "subspace": "subspace.json",
        "manifest": "manifest.jsonl",
    }
    (out / "config.json").write_text(
        json.dumps(echo, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return echo


def load_dataset_config(data_dir) -> dict:
    return json.loads((Path(data_dir) / "config.json").read_text(encoding="utf-8"))


def load_records(data_dir) -> list[dict]:
    return read_manifest(Path(data_dir) / "manifest.jsonl")


def load_training_set(data_dir, net_cfg: NetworkConfig) -> TrainingSet:
    """Read a generated dataset into preprocessed training arrays."""
    data_dir = Path(data_dir)
    records = load_records(data_dir)
    if not records:
        raise ValidationError("dataset manifest is empty")
    inputs = np.stack(
        [
            normalize_depth_input(read_depth_image(data_dir / r["depth_path"]), net_cfg)
            for r in records
        ]
    )
    poses = np.array([r["pose"] for r in records], dtype=float)
    coeffs = np.array([r["shape_coeffs"] for r in records], dtype=float)
    categories = np.array([r["category"] for r in records], dtype=int)
    return TrainingSet(inputs=inputs, poses=poses, coeffs=coeffs, categories=categories)
