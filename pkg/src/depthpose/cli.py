"""Command-line interface.

Subcommands: gen-data, train, estimate, eval, render, sdf.  Exit codes:
0 success, 2 validation error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bench import METHODS, evaluate
from .errors import NumericError, ValidationError
from .estimator import (
    baseline_random_oracle,
    baseline_random_sdf,
    estimate_map,
    estimate_mle,
)
from .fileio import (
    load_network,
    load_subspace,
    read_depth_image,
    read_voxel_grid,
    save_network,
    write_depth_image,
)
from .geometry import CameraIntrinsics, render_depth
from .mdn import NetworkConfig, forward, train
from .metrics import CSV_HEADER, format_csv_row, write_gnuplot_script
from .sdfprior import silhouette_sdf
from .synth import SyntheticFamilyConfig, gen_dataset, load_training_set


def _parse_pose(text: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValidationError("pose must be 'rx,ry,rz' in radians")
    try:
        return np.array([float(p) for p in parts])
    except ValueError as exc:
        raise ValidationError(f"bad pose value: {exc}") from exc


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p]
    except ValueError as exc:
        raise ValidationError(f"bad integer list: {exc}") from exc


def _cmd_gen_data(args) -> int:
    doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    families = [SyntheticFamilyConfig.from_dict(f) for f in doc["families"]]
    camera = CameraIntrinsics.from_dict(doc["camera"]) if "camera" in doc else None
    subspace_model = None
    if doc.get("subspace_from"):
        subspace_model = load_subspace(doc["subspace_from"])
    gen_dataset(
        families,
        args.out,
        seed=args.seed,
        camera=camera,
        retained=doc.get("retained", 20),
        subspace_model=subspace_model,
    )
    print(f"dataset written to {args.out}")
    return 0


def _cmd_train(args) -> int:
    data_dir = Path(args.data)
    records_cfg = json.loads((data_dir / "config.json").read_text(encoding="utf-8"))
    subspace = load_subspace(data_dir / records_cfg["subspace"])
    cfg = NetworkConfig(
        mode=args.mode,
        shape_dim=subspace.retained_dim,
        n_categories=len(subspace.category_ids),
        hidden_sizes=tuple(_parse_int_list(args.hidden)),
        input_side=args.input_side,
        object_distance=records_cfg["camera"]["object_distance"],
    )
    data = load_training_set(data_dir, cfg)
    weights, trace = train(
        data,
        cfg,
        seed=args.seed,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
    )
    save_network(
        weights, cfg, args.out, seed=args.seed, epochs=args.epochs, loss_trace=trace
    )
    print(f"model written to {args.out} (final epoch loss {trace[-1]:.4f})")
    return 0


def _cmd_estimate(args) -> int:
    subspace = load_subspace(args.subspace)
    image = read_depth_image(args.depth)
    rng = np.random.default_rng(args.seed)
    camera = CameraIntrinsics(object_distance=args.object_distance)

    if args.method == "random-oracle":
        if args.true_pose is None:
            raise ValidationError("random-oracle needs --true-pose")
        result = baseline_random_oracle(_parse_pose(args.true_pose), args.n, rng)
    else:
        weights, cfg, _ = load_network(args.model)
        pred = forward(weights, image, cfg)
        if args.method == "mle":
            if cfg.mode != "mdn":
                raise ValidationError("mle needs an mdn-mode model")
            result = estimate_mle(pred.pose, args.n, rng)
        elif args.method == "map":
            if cfg.mode != "mdn":
                raise ValidationError("map needs an mdn-mode model")
            result = estimate_map(
                pred.pose,
                pred.shape_coeffs,
                image,
                camera,
                subspace,
                args.n,
                rng,
                time_budget=args.time_budget,
            )
        elif args.method == "random-sdf":
            result = baseline_random_sdf(
                pred.shape_coeffs, image, camera, subspace, args.n, rng
            )
        else:
            raise ValidationError(f"unknown method {args.method!r}")
    print(
        json.dumps(
            {
                "method": args.method,
                "pose": [float(x) for x in result.pose],
                "score": result.score,
                "n_evaluated": result.n_evaluated,
                "elapsed_s": result.elapsed,
                "fallback_mle": result.fallback_mle,
            }
        )
    )
    return 0


def _cmd_eval(args) -> int:
    weights, cfg, _ = load_network(args.model)
    point_weights = point_cfg = None
    if args.point_model:
        point_weights, point_cfg, _ = load_network(args.point_model)
    subspace = load_subspace(args.subspace)
    methods = [m for m in args.methods.split(",") if m]
    rows, _ = evaluate(
        weights,
        cfg,
        subspace,
        args.data,
        methods,
        _parse_int_list(args.n),
        seed=args.seed,
        point_weights=point_weights,
        point_cfg=point_cfg,
    )
    out = Path(args.out)
    lines = [CSV_HEADER]
    for row in rows:
        lines.append(format_csv_row(row["method"], row["n"], row))
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_gnuplot_script(out.name, methods, out.with_suffix(".gp"))
    print(f"results written to {out}")
    return 0


def _cmd_render(args) -> int:
    grid = read_voxel_grid(args.voxel)
    camera = CameraIntrinsics(object_distance=args.object_distance)
    image = render_depth(grid, _parse_pose(args.pose), camera)
    write_depth_image(image, args.out)
    print(f"depth image written to {args.out}")
    return 0


def _cmd_sdf(args) -> int:
    image = read_depth_image(args.depth)
    field = silhouette_sdf(image)
    write_depth_image(field.values, args.out)
    print(f"SDF written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depthpose",
        description="Category-level 3DOF pose posteriors from segmented depth images",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="train a network on a generated dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("mdn", "point"), default="mdn")
    p.add_argument("--epochs", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", default="256,256")
    p.add_argument("--input-side", type=int, default=32)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--learning-rate", type=float, default=0.001)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("estimate", help="estimate pose for one depth image")
    p.add_argument("--model")
    p.add_argument("--subspace", required=True)
    p.add_argument("--depth", required=True)
    p.add_argument("--method", required=True, choices=[m for m in METHODS if m != "point"])
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--time-budget", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--true-pose", default=None)
    p.add_argument("--object-distance", type=float, default=2.5)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("eval", help="evaluate methods over a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--point-model", default=None)
    p.add_argument("--subspace", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--methods", default="mle,map")
    p.add_argument("--n", default="5,25,100")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("render", help="render a voxel grid to a depth image")
    p.add_argument("--voxel", required=True)
    p.add_argument("--pose", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--object-distance", type=float, default=2.5)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("sdf", help="signed distance field of a depth image")
    p.add_argument("--depth", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sdf)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
