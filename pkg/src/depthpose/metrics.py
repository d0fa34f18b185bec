"""Benchmark metrics: mean angular error, gross-error rate, and binned
azimuth/elevation accuracy at several discretizations."""

from __future__ import annotations

import math

import numpy as np

from .errors import ValidationError
from .geometry import angular_error, rotvec_to_view_angles

GROSS_ERROR_DEG = 15.0
AZIMUTH_BINS = (4, 8, 12, 24)
ELEVATION_BINS = (4, 6, 12)

CSV_HEADER = (
    "method,n_samples,mean_err_deg,ci95_deg,gross_rate,runtime_s,"
    "azb4,azb8,azb12,azb24,elb4,elb6,elb12"
)


def _bin_index(value: float, low: float, high: float, bins: int) -> int:
    idx = int((value - low) / (high - low) * bins)
    return min(max(idx, 0), bins - 1)


def compute_metrics(predictions, ground_truth, runtime_s: float = 0.0) -> dict:
    """One metrics row from aligned lists of predicted/true pose vectors."""
    predictions = list(predictions)
    ground_truth = list(ground_truth)
    if not predictions or len(predictions) != len(ground_truth):
        raise ValidationError("prediction and truth lists must align and be non-empty")

    errors = np.array(
        [angular_error(p, t) for p, t in zip(predictions, ground_truth)]
    )
    n = errors.size
    mean_err = float(errors.mean())
    ci95 = float(1.96 * errors.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    gross = float((errors > GROSS_ERROR_DEG).mean())

    row = {
        "mean_err_deg": mean_err,
        "ci95_deg": ci95,
        "gross_rate": gross,
        "runtime_s": float(runtime_s),
        "errors": errors,
    }

    pred_angles = [rotvec_to_view_angles(p) for p in predictions]
    true_angles = [rotvec_to_view_angles(t) for t in ground_truth]
    for bins in AZIMUTH_BINS:
        hits = sum(
            _bin_index(pa[0], -math.pi, math.pi, bins)
            == _bin_index(ta[0], -math.pi, math.pi, bins)
            for pa, ta in zip(pred_angles, true_angles)
        )
        row[f"azb{bins}"] = hits / n
    for bins in ELEVATION_BINS:
        hits = sum(
            _bin_index(pa[1], -math.pi / 2, math.pi / 2, bins)
            == _bin_index(ta[1], -math.pi / 2, math.pi / 2, bins)
            for pa, ta in zip(pred_angles, true_angles)
        )
        row[f"elb{bins}"] = hits / n
    return row


def format_csv_row(method: str, n_samples: int, row: dict) -> str:
    cells = [method, str(int(n_samples))]
    for key in (
        "mean_err_deg",
        "ci95_deg",
        "gross_rate",
        "runtime_s",
        "azb4",
        "azb8",
        "azb12",
        "azb24",
        "elb4",
        "elb6",
        "elb12",
    ):
        cells.append(f"{row[key]:.6f}")
    return ",".join(cells)


GNUPLOT_TEMPLATE = """# mean angular error vs. sample budget, one curve per method
set datafile separator ","
set key autotitle columnheader
set xlabel "samples"
set ylabel "mean angular error (deg)"
plot for [m in "{methods}"] "{csv}" \\
    using 2:($1 eq m ? $3 : 1/0) with linespoints title m
"""


def write_gnuplot_script(csv_name: str, methods, path) -> None:
    text = GNUPLOT_TEMPLATE.format(methods=" ".join(methods), csv=csv_name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
