"""Sampling-based pose estimation: MLE, MAP with the silhouette prior,
and the two random-sampling baselines.

All estimators draw a fixed budget of candidate poses, score each one,
and return the first-occurring argmax, so results are deterministic for
a seeded generator.  MAP additionally renders the reconstructed shape at
every candidate pose and re-weights the mixture density by the
silhouette-agreement prior; candidates whose render is empty score zero
so a degenerate shape estimate cannot abort estimation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .geometry import (
    CameraIntrinsics,
    DepthImage,
    angular_error,
    render_depth_batch,
    sample_uniform_rotvecs,
)
from .mdn import GmmParams, gmm_pdf_many, gmm_sample
from .sdfprior import DEFAULT_PRIOR_EPSILON, _mask_sdf, prior_density
from .shapespace import SubspaceModel, binarize, reconstruct

RECONSTRUCTION_THRESHOLD = 0.5


@dataclass(frozen=True)
class EstimateResult:
    pose: np.ndarray
    score: float
    n_evaluated: int
    elapsed: float
    fallback_mle: bool = False

    def __post_init__(self):
        if self.n_evaluated < 1:
            raise ValidationError("at least one candidate must be evaluated")
        if not np.isfinite(self.score):
            raise ValidationError("score must be finite")


def estimate_mle(params: GmmParams, n: int, rng: np.random.Generator) -> EstimateResult:
    """Highest-density pose among n mixture samples."""
    if n < 1:
        raise ValidationError("sample budget must be at least 1")
    start = time.perf_counter()
    candidates = gmm_sample(params, rng, count=n)
    density = gmm_pdf_many(candidates, params)
    best = int(np.argmax(density))
    return EstimateResult(
        pose=candidates[best],
        score=float(density[best]),
        n_evaluated=n,
        elapsed=time.perf_counter() - start,
    )


def _candidate_prior_scores(
    grid,
    candidates: np.ndarray,
    observed_sdf: np.ndarray,
    cam: CameraIntrinsics,
    prior_epsilon: float,
) -> np.ndarray:
    """Silhouette prior of each candidate pose; 0 where the render is empty."""
    renders = render_depth_batch(grid, candidates, cam)
    masks = renders != -1.0
    pixels = masks.shape[1] * masks.shape[2]
    priors = np.zeros(len(candidates))
    for i, mask in enumerate(masks):
        if not mask.any():
            continue
        err = float(np.linalg.norm(observed_sdf - _mask_sdf(mask)) / np.sqrt(pixels))
        priors[i] = prior_density(err, prior_epsilon)
    return priors


def estimate_map(
    params: GmmParams,
    shape_coeffs,
    observed: DepthImage,
    cam: CameraIntrinsics,
    model: SubspaceModel,
    n: int | None,
    rng: np.random.Generator,
    prior_epsilon: float = DEFAULT_PRIOR_EPSILON,
    time_budget: float | None = None,
    constant_prior_hook: bool = False,
) -> EstimateResult:
    """Approximate MAP pose: argmax of prior times mixture density.

    Reconstructs the shape from its subspace coefficients, renders it at
    each candidate pose, and scores prior(silhouette error) * density.
    With ``time_budget`` set, candidates are evaluated in chunks until
    the budget is exhausted and the best so far is returned (n, when
    given, still caps the total).  The ``constant_prior_hook`` test hook
    forces the silhouette error to 0 for every candidate, which reduces
    the argmax to the MLE argmax.
    """
    if n is None and time_budget is None:
        raise ValidationError("either a sample budget or a time budget is required")
    if n is not None and n < 1:
        raise ValidationError("sample budget must be at least 1")
    start = time.perf_counter()

    if not observed.mask.any():
        raise ValidationError("empty silhouette")
    observed_sdf = _mask_sdf(observed.mask)
    grid = binarize(reconstruct(shape_coeffs, model), RECONSTRUCTION_THRESHOLD, model.dims)
    const_prior = prior_density(0.0, prior_epsilon)

    best_pose = None
    best_score = -np.inf
    best_density_pose = None
    best_density = -np.inf
    evaluated = 0
    chunk = 1 if time_budget is not None else (n or 1)
    while True:
        remaining = np.inf if n is None else n - evaluated
        if remaining <= 0:
            break
        if time_budget is not None and evaluated > 0:
            if time.perf_counter() - start >= time_budget:
                break
        take = int(min(chunk, remaining))
        candidates = gmm_sample(params, rng, count=take)
        density = gmm_pdf_many(candidates, params)
        if constant_prior_hook:
            priors = np.full(take, const_prior)
        else:
            priors = _candidate_prior_scores(
                grid, candidates, observed_sdf, cam, prior_epsilon
            )
        scores = priors * density
        for i in range(take):
            if scores[i] > best_score:
                best_score = float(scores[i])
                best_pose = candidates[i]
            if density[i] > best_density:
                best_density = float(density[i])
                best_density_pose = candidates[i]
        evaluated += take

    if best_score > 0.0:
        return EstimateResult(
            pose=best_pose,
            score=best_score,
            n_evaluated=evaluated,
            elapsed=time.perf_counter() - start,
        )
    # every candidate rendered empty: fall back to the MLE choice
    return EstimateResult(
        pose=best_density_pose,
        score=best_density,
        n_evaluated=evaluated,
        elapsed=time.perf_counter() - start,
        fallback_mle=True,
    )


def _validate_budgets(budgets) -> list[int]:
    budgets = [int(b) for b in budgets]
    if not budgets or any(b < 1 for b in budgets) or sorted(budgets) != budgets:
        raise ValidationError("budgets must be ascending positive sample counts")
    return budgets


def estimate_mle_curve(
    params: GmmParams, budgets, rng: np.random.Generator
) -> list[EstimateResult]:
    """Any-time MLE: one candidate stream, argmax over each budget prefix.

    Returns one result per budget; the result at budget b is exactly
    estimate_mle run on the first b candidates of the stream.
    """
    budgets = _validate_budgets(budgets)
    start = time.perf_counter()
    candidates = gmm_sample(params, rng, count=budgets[-1])
    results = []
    best_score = -np.inf
    best_pose = None
    done = 0
    for b in budgets:
        density = gmm_pdf_many(candidates[done:b], params)
        for i, d in enumerate(density):
            if d > best_score:
                best_score = float(d)
                best_pose = candidates[done + i]
        done = b
        results.append(
            EstimateResult(
                pose=best_pose,
                score=best_score,
                n_evaluated=b,
                elapsed=time.perf_counter() - start,
            )
        )
    return results


def estimate_map_curve(
    params: GmmParams,
    shape_coeffs,
    observed: DepthImage,
    cam: CameraIntrinsics,
    model: SubspaceModel,
    budgets,
    rng: np.random.Generator,
    prior_epsilon: float = DEFAULT_PRIOR_EPSILON,
) -> list[EstimateResult]:
    """Any-time MAP over one candidate stream, scored in budget chunks."""
    budgets = _validate_budgets(budgets)
    start = time.perf_counter()
    if not observed.mask.any():
        raise ValidationError("empty silhouette")
    observed_sdf = _mask_sdf(observed.mask)
    grid = binarize(reconstruct(shape_coeffs, model), RECONSTRUCTION_THRESHOLD, model.dims)
    candidates = gmm_sample(params, rng, count=budgets[-1])
    density = gmm_pdf_many(candidates, params)

    results = []
    best_score = 0.0
    best_pose = None
    best_density = -np.inf
    best_density_pose = None
    done = 0
    for b in budgets:
        priors = _candidate_prior_scores(
            grid, candidates[done:b], observed_sdf, cam, prior_epsilon
        )
        for i in range(b - done):
            score = priors[i] * density[done + i]
            if score > best_score:
                best_score = float(score)
                best_pose = candidates[done + i]
            if density[done + i] > best_density:
                best_density = float(density[done + i])
                best_density_pose = candidates[done + i]
        done = b
        if best_pose is not None:
            results.append(
                EstimateResult(
                    pose=best_pose,
                    score=best_score,
                    n_evaluated=b,
                    elapsed=time.perf_counter() - start,
                )
            )
        else:
            results.append(
                EstimateResult(
                    pose=best_density_pose,
                    score=best_density,
                    n_evaluated=b,
                    elapsed=time.perf_counter() - start,
                    fallback_mle=True,
                )
            )
    return results


def baseline_random_oracle_curve(
    true_pose, budgets, rng: np.random.Generator
) -> list[EstimateResult]:
    """Any-time oracle baseline over one uniform-rotation stream."""
    budgets = _validate_budgets(budgets)
    start = time.perf_counter()
    candidates = sample_uniform_rotvecs(budgets[-1], rng)
    results = []
    best_err = np.inf
    best_pose = None
    done = 0
    for b in budgets:
        for i in range(done, b):
            err = angular_error(candidates[i], true_pose)
            if err < best_err:
                best_err = err
                best_pose = candidates[i]
        done = b
        results.append(
            EstimateResult(
                pose=best_pose,
                score=-float(best_err),
                n_evaluated=b,
                elapsed=time.perf_counter() - start,
            )
        )
    return results


def baseline_random_sdf_curve(
    shape_coeffs,
    observed: DepthImage,
    cam: CameraIntrinsics,
    model: SubspaceModel,
    budgets,
    rng: np.random.Generator,
) -> list[EstimateResult]:
    """Any-time silhouette-only baseline over one uniform-rotation stream."""
    budgets = _validate_budgets(budgets)
    start = time.perf_counter()
    if not observed.mask.any():
        raise ValidationError("empty silhouette")
    observed_sdf = _mask_sdf(observed.mask)
    grid = binarize(reconstruct(shape_coeffs, model), RECONSTRUCTION_THRESHOLD, model.dims)
    candidates = sample_uniform_rotvecs(budgets[-1], rng)
    penalty = 4.0 * (cam.height + cam.width)
    pixels = cam.height * cam.width

    results = []
    best_err = np.inf
    best_pose = None
    all_empty = True
    done = 0
    for b in budgets:
        renders = render_depth_batch(grid, candidates[done:b], cam)
        for i, render in enumerate(renders):
            mask = render != -1.0
            if mask.any():
                err = float(np.linalg.norm(observed_sdf - _mask_sdf(mask)) / np.sqrt(pixels))
                all_empty = False
            else:
                err = penalty
            if err < best_err:
                best_err = err
                best_pose = candidates[done + i]
        done = b
        results.append(
            EstimateResult(
                pose=best_pose,
                score=-float(best_err),
                n_evaluated=b,
                elapsed=time.perf_counter() - start,
                fallback_mle=all_empty,
            )
        )
    return results


def baseline_random_oracle(
    true_pose, n: int, rng: np.random.Generator
) -> EstimateResult:
    """Uniform rotations, oracle-selected: closest to the true pose wins.

    The score is the negative angular error in degrees (larger is better).
    """
    if n < 1:
        raise ValidationError("sample budget must be at least 1")
    start = time.perf_counter()
    candidates = sample_uniform_rotvecs(n, rng)
    errors = np.array([angular_error(c, true_pose) for c in candidates])
    best = int(np.argmin(errors))
    return EstimateResult(
        pose=candidates[best],
        score=-float(errors[best]),
        n_evaluated=n,
        elapsed=time.perf_counter() - start,
    )


def baseline_random_sdf(
    shape_coeffs,
    observed: DepthImage,
    cam: CameraIntrinsics,
    model: SubspaceModel,
    n: int,
    rng: np.random.Generator,
) -> EstimateResult:
    """Uniform rotations scored by silhouette error alone (minimum wins).

    The score is the negative silhouette error.  Candidates that render
    empty get a finite penalty error larger than any attainable one, so
    they only win when every candidate is empty.
    """
    if n < 1:
        raise ValidationError("sample budget must be at least 1")
    start = time.perf_counter()
    if not observed.mask.any():
        raise ValidationError("empty silhouette")
    observed_sdf = _mask_sdf(observed.mask)
    grid = binarize(reconstruct(shape_coeffs, model), RECONSTRUCTION_THRESHOLD, model.dims)

    candidates = sample_uniform_rotvecs(n, rng)
    renders = render_depth_batch(grid, candidates, cam)
    masks = renders != -1.0
    pixels = masks.shape[1] * masks.shape[2]
    penalty = 4.0 * (masks.shape[1] + masks.shape[2])
    fallback = True
    errors = np.empty(n)
    for i, mask in enumerate(masks):
        if mask.any():
            errors[i] = np.linalg.norm(observed_sdf - _mask_sdf(mask)) / np.sqrt(pixels)
            fallback = False
        else:
            errors[i] = penalty
    best = int(np.argmin(errors))
    return EstimateResult(
        pose=candidates[best],
        score=-float(errors[best]),
        n_evaluated=n,
        elapsed=time.perf_counter() - start,
        fallback_mle=fallback,
    )
