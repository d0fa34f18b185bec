"""Evaluation harness: run estimation methods over a generated dataset
and aggregate the benchmark metrics."""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .estimator import (
    baseline_random_oracle_curve,
    baseline_random_sdf_curve,
    estimate_map_curve,
    estimate_mle_curve,
)
from .fileio import read_depth_image
from .geometry import CameraIntrinsics, angular_error, canonicalize_rotvec
from .mdn import NetworkConfig, NetworkWeights, forward
from .metrics import compute_metrics
from .shapespace import SubspaceModel
from .synth import load_dataset_config, load_records

METHODS = ("point", "mle", "map", "random-oracle", "random-sdf")


def _item_rng(seed: int, item: int, method: str) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(item), METHODS.index(method)])


def evaluate(
    weights: NetworkWeights,
    cfg: NetworkConfig,
    subspace: SubspaceModel,
    data_dir,
    methods,
    n_values,
    seed: int,
    point_weights: NetworkWeights | None = None,
    point_cfg: NetworkConfig | None = None,
    camera: CameraIntrinsics | None = None,
):
    """Run every requested method at every sample budget over a dataset.

    Sampled methods evaluate one candidate stream per item and report
    the any-time result at every budget (the result at budget b uses
    exactly the first b candidates).  Returns (rows, details): one
    aggregated metrics row per (method, n) cell plus the per-item
    records behind them.
    """
    methods = list(methods)
    for m in methods:
        if m not in METHODS:
            raise ValidationError(f"unknown method {m!r}")
    if "point" in methods:
        if point_weights is None:
            if cfg.mode != "point":
                raise ValidationError(
                    "method 'point' needs a point-mode model (see point_weights)"
                )
            point_weights, point_cfg = weights, cfg
        elif point_cfg is None:
            raise ValidationError("point_weights requires point_cfg")
        if point_cfg.mode != "point":
            raise ValidationError("point model must have mode='point'")

    data_dir = Path(data_dir)
    records = load_records(data_dir)
    if not records:
        raise ValidationError("dataset is empty")
    if camera is None:
        camera = CameraIntrinsics.from_dict(load_dataset_config(data_dir)["camera"])

    images = [read_depth_image(data_dir / r["depth_path"]) for r in records]
    truths = [np.asarray(r["pose"], dtype=float) for r in records]
    categories = [int(r["category"]) for r in records]

    # network predictions are shared by mle/map/random-sdf at every n
    mdn_preds = None
    if any(m in methods for m in ("mle", "map", "random-sdf")):
        if cfg.mode != "mdn":
            raise ValidationError("mle/map/random-sdf need an mdn-mode model")
        mdn_preds = [forward(weights, img, cfg) for img in images]
    point_preds = None
    point_time = 0.0
    if "point" in methods:
        start = time.perf_counter()
        point_preds = [forward(point_weights, img, point_cfg) for img in images]
        point_time = (time.perf_counter() - start) / len(images)

    budgets = sorted(int(n) for n in n_values)
    rows = []
    details = []
    for method in methods:
        per_budget_poses = {n: [] for n in budgets}
        per_budget_elapsed = {n: [] for n in budgets}
        for i, (img, truth) in enumerate(zip(images, truths)):
            rng = _item_rng(seed, i, method)
            if method == "point":
                pose = canonicalize_rotvec(point_preds[i].pose)
                curve = [(n, pose, point_time) for n in budgets]
            elif method == "mle":
                res = estimate_mle_curve(mdn_preds[i].pose, budgets, rng)
                curve = [(n, r.pose, r.elapsed) for n, r in zip(budgets, res)]
            elif method == "map":
                res = estimate_map_curve(
                    mdn_preds[i].pose,
                    mdn_preds[i].shape_coeffs,
                    img,
                    camera,
                    subspace,
                    budgets,
                    rng,
                )
                curve = [(n, r.pose, r.elapsed) for n, r in zip(budgets, res)]
            elif method == "random-oracle":
                res = baseline_random_oracle_curve(truth, budgets, rng)
                curve = [(n, r.pose, r.elapsed) for n, r in zip(budgets, res)]
            else:  # random-sdf
                res = baseline_random_sdf_curve(
                    mdn_preds[i].shape_coeffs, img, camera, subspace, budgets, rng
                )
                curve = [(n, r.pose, r.elapsed) for n, r in zip(budgets, res)]
            for n, pose, dt in curve:
                per_budget_poses[n].append(pose)
                per_budget_elapsed[n].append(dt)
                details.append(
                    {
                        "method": method,
                        "n": n,
                        "item": i,
                        "category": categories[i],
                        "error_deg": angular_error(pose, truth),
                        "elapsed": dt,
                    }
                )
        for n in budgets:
            row = compute_metrics(
                per_budget_poses[n],
                truths,
                runtime_s=float(np.mean(per_budget_elapsed[n])),
            )
            row["method"] = method
            row["n"] = int(n)
            rows.append(row)
    return rows, details
