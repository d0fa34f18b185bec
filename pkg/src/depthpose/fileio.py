"""Binary and JSON persistence for voxel grids, depth images, subspace
models, network weights, and dataset manifests.

Formats:
  VXG1  4 magic bytes, three uint32-LE dims (m, n, o), then m*n*o
        occupancy bytes in {0, 1}, linear index (ix*n + iy)*o + iz.
  DPM1  4 magic bytes, uint32-LE width and height, then height*width
        float32-LE values row-major; background sentinel -1.0.
  WTS1  4 magic bytes then float32-LE payload; used as the blob behind
        the JSON manifests of subspace models and network weights.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .geometry import DepthImage
from .mdn import NetworkConfig, NetworkWeights
from .shapespace import SIGN_CONVENTION, SubspaceModel, VoxelGrid

VXG_MAGIC = b"VXG1"
DPM_MAGIC = b"DPM1"
WTS_MAGIC = b"WTS1"


def write_voxel_grid(grid: VoxelGrid, path) -> None:
    m, n, o = grid.dims
    payload = grid.occupancy.reshape(-1).astype(np.uint8).tobytes()
    with open(path, "wb") as fh:
        fh.write(VXG_MAGIC)
        fh.write(struct.pack("<III", m, n, o))
        fh.write(payload)


def read_voxel_grid(path) -> VoxelGrid:
    raw = Path(path).read_bytes()
    if raw[:4] != VXG_MAGIC:
        raise ValidationError(f"{path}: not a VXG1 file")
    m, n, o = struct.unpack("<III", raw[4:16])
    body = np.frombuffer(raw[16:], dtype=np.uint8)
    if body.size != m * n * o:
        raise ValidationError(f"{path}: truncated voxel payload")
    return VoxelGrid(dims=(m, n, o), occupancy=body.copy())


def write_depth_image(image_or_values, path) -> None:
    """Write a DepthImage, or any 2-D float grid (used for SDF output)."""
    values = (
        image_or_values.depth
        if isinstance(image_or_values, DepthImage)
        else np.asarray(image_or_values, dtype=float)
    )
    h, w = values.shape
    with open(path, "wb") as fh:
        fh.write(DPM_MAGIC)
        fh.write(struct.pack("<II", w, h))
        fh.write(values.astype("<f4").tobytes())


def read_float_grid(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != DPM_MAGIC:
        raise ValidationError(f"{path}: not a DPM1 file")
    w, h = struct.unpack("<II", raw[4:12])
    body = np.frombuffer(raw[12:], dtype="<f4")
    if body.size != w * h:
        raise ValidationError(f"{path}: truncated float payload")
    return body.reshape(h, w).astype(float)


def read_depth_image(path) -> DepthImage:
    return DepthImage(read_float_grid(path))


def _write_blob(path, arrays) -> None:
    with open(path, "wb") as fh:
        fh.write(WTS_MAGIC)
        for arr in arrays:
            fh.write(np.asarray(arr).astype("<f4").tobytes())


def _read_blob(path, count: int) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != WTS_MAGIC:
        raise ValidationError(f"{path}: not a WTS1 blob")
    values = np.frombuffer(raw[4:], dtype="<f4")
    if values.size != count:
        raise ValidationError(f"{path}: expected {count} floats, found {values.size}")
    return values.astype(float)


def save_subspace(model: SubspaceModel, path) -> None:
    """Persist a subspace model as JSON manifest + WTS1 blob beside it."""
    if model.dims is None:
        raise ValidationError("subspace model needs voxel dims for persistence")
    path = Path(path)
    blob_path = path.with_suffix(".wts")
    manifest = {
        "d": model.d,
        "k": model.retained_dim,
        "dims": list(model.dims),
        "category_ids": list(model.category_ids),
        "sign_convention": SIGN_CONVENTION,
        "blob": blob_path.name,
    }
    # column-major basis followed by the concatenated category means
    _write_blob(blob_path, [model.basis.flatten(order="F")] + list(model.category_means))
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def load_subspace(path) -> SubspaceModel:
    path = Path(path)
    manifest = json.loads(path.read_text(encoding="utf-8"))
    d, k = manifest["d"], manifest["k"]
    n_cat = len(manifest["category_ids"])
    values = _read_blob(path.parent / manifest["blob"], d * k + n_cat * d)
    basis = values[: d * k].reshape(d, k, order="F")
    means = tuple(
        values[d * k + i * d : d * k + (i + 1) * d] for i in range(n_cat)
    )
    return SubspaceModel(
        basis=basis,
        category_means=means,
        category_ids=tuple(manifest["category_ids"]),
        dims=tuple(manifest["dims"]),
    )


def save_network(
    weights: NetworkWeights,
    cfg: NetworkConfig,
    path,
    seed: int | None = None,
    epochs: int | None = None,
    loss_trace=None,
) -> None:
    """Persist network weights as JSON manifest + WTS1 blob beside it."""
    path = Path(path)
    blob_path = path.with_suffix(".wts")
    params = weights.parameters()
    manifest = {
        "config": cfg.to_dict(),
        "tensor_shapes": [list(p.shape) for p in params],
        "seed": seed,
        "epochs": epochs,
        "loss_trace": list(loss_trace) if loss_trace is not None else None,
        "blob": blob_path.name,
    }
    _write_blob(blob_path, [p.reshape(-1) for p in params])
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def load_network(path) -> tuple[NetworkWeights, NetworkConfig, dict]:
    path = Path(path)
    manifest = json.loads(path.read_text(encoding="utf-8"))
    cfg = NetworkConfig.from_dict(manifest["config"])
    shapes = [tuple(s) for s in manifest["tensor_shapes"]]
    total = sum(int(np.prod(s)) for s in shapes)
    values = _read_blob(path.parent / manifest["blob"], total)
    params = []
    offset = 0
    for shape in shapes:
        size = int(np.prod(shape))
        params.append(values[offset : offset + size].reshape(shape))
        offset += size
    weights = NetworkWeights.from_parameters(params, len(cfg.hidden_sizes))
    return weights, cfg, manifest


def write_manifest(records, path) -> None:
    """JSON-lines dataset manifest, one record per view."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_manifest(path):
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
