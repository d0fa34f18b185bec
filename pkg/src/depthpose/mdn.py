"""Mixture-density network over 3DOF pose with shape and category heads.

A small fully connected trunk with rectifier activations maps a
normalized, downsampled depth image to three heads: a 5-component
diagonal Gaussian mixture over pose (or a plain 3-vector in point mode),
linear shape-subspace coefficients, and softmax category probabilities.
Training minimizes the weighted sum of the negative log mixture
likelihood (squared error in point mode), squared Euclidean error on the
coefficients, and categorical cross-entropy, using Adam with analytic
backpropagation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ValidationError
from .geometry import DepthImage

LN_2PI = math.log(2.0 * math.pi)
POSE_DIM = 3


@dataclass(frozen=True)
class GmmParams:
    """Diagonal Gaussian mixture over 3D pose space."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        mu = np.asarray(self.means, dtype=float)
        var = np.asarray(self.variances, dtype=float)
        c = w.shape[0]
        if w.shape != (c,) or mu.shape != (c, POSE_DIM) or var.shape != (c, POSE_DIM):
            raise ValidationError("mixture parameter shapes disagree")
        if abs(float(w.sum()) - 1.0) > 1e-9 or np.any(w <= 0.0):
            raise ValidationError("mixing weights must be positive and sum to 1")
        if np.any(var <= 0.0):
            raise ValidationError("variances must be positive")
        for a in (w, mu, var):
            a.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class NetworkConfig:
    input_side: int = 32
    hidden_sizes: tuple[int, ...] = (256, 256)
    n_components: int = 5
    shape_dim: int = 20
    n_categories: int = 3
    lambda_pose: float = 1.0
    lambda_shape: float = 1.0
    lambda_category: float = 1.0
    mode: str = "mdn"
    elu_alpha: float = 1.0
    var_epsilon: float = 1e-6
    object_distance: float = 2.5

    def __post_init__(self):
        if self.mode not in ("mdn", "point"):
            raise ValidationError("mode must be 'mdn' or 'point'")
        sizes = (self.input_side, self.n_components, self.shape_dim, self.n_categories)
        if any(s < 1 for s in sizes) or any(h < 1 for h in self.hidden_sizes):
            raise ValidationError("all sizes must be positive")
        if min(self.lambda_pose, self.lambda_shape, self.lambda_category) < 0:
            raise ValidationError("loss weights must be non-negative")
        if self.elu_alpha <= 0 or self.var_epsilon <= 0:
            raise ValidationError("elu_alpha and var_epsilon must be positive")
        object.__setattr__(self, "hidden_sizes", tuple(self.hidden_sizes))

    @property
    def n_inputs(self) -> int:
        return self.input_side**2

    @property
    def pose_out_dim(self) -> int:
        # per component: 1 mixing logit + 3 means + 3 variance pre-activations
        if self.mode == "mdn":
            return self.n_components * (2 * POSE_DIM + 1)
        return POSE_DIM

    def to_dict(self) -> dict:
        return {
            "input_side": self.input_side,
            "hidden_sizes": list(self.hidden_sizes),
            "n_components": self.n_components,
            "shape_dim": self.shape_dim,
            "n_categories": self.n_categories,
            "lambda_pose": self.lambda_pose,
            "lambda_shape": self.lambda_shape,
            "lambda_category": self.lambda_category,
            "mode": self.mode,
            "elu_alpha": self.elu_alpha,
            "var_epsilon": self.var_epsilon,
            "object_distance": self.object_distance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        d = dict(d)
        d["hidden_sizes"] = tuple(d["hidden_sizes"])
        return cls(**d)


@dataclass(frozen=True)
class NetworkWeights:
    """Trunk layers plus the three output heads, each a (W, b) pair."""

    trunk: tuple
    pose: tuple
    shape: tuple
    category: tuple

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in self.trunk:
            out += [w, b]
        for w, b in (self.pose, self.shape, self.category):
            out += [w, b]
        return out

    @classmethod
    def from_parameters(cls, params, n_hidden_layers: int) -> "NetworkWeights":
        params = list(params)
        trunk = tuple(
            (params[2 * i], params[2 * i + 1]) for i in range(n_hidden_layers)
        )
        rest = params[2 * n_hidden_layers :]
        return cls(
            trunk=trunk,
            pose=(rest[0], rest[1]),
            shape=(rest[2], rest[3]),
            category=(rest[4], rest[5]),
        )


@dataclass(frozen=True)
class PredictionOutput:
    pose: object  # GmmParams in mdn mode, length-3 pose vector in point mode
    shape_coeffs: np.ndarray
    category_probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.category_probs, dtype=float)
        if abs(float(probs.sum()) - 1.0) > 1e-9:
            raise ValidationError("category probabilities must sum to 1")
        object.__setattr__(self, "category_probs", probs)


def init_weights(cfg: NetworkConfig, seed: int) -> NetworkWeights:
    """He-style initialization, deterministic in the seed."""
    rng = np.random.default_rng([int(seed), 0])
    sizes = [cfg.n_inputs, *cfg.hidden_sizes]
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        params.append(rng.normal(0.0, math.sqrt(2.0 / fan_in), (fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    feat = sizes[-1]
    for out_dim in (cfg.pose_out_dim, cfg.shape_dim, cfg.n_categories):
        params.append(rng.normal(0.0, math.sqrt(1.0 / feat), (feat, out_dim)))
        params.append(np.zeros(out_dim))
    return NetworkWeights.from_parameters(params, len(cfg.hidden_sizes))


# ---------------------------------------------------------------------------
# head math


def elu_variance(z, alpha: float, epsilon: float):
    """Strictly positive variance activation, continuous at z = 0."""
    z = np.asarray(z, dtype=float)
    return np.where(z > 0.0, z + alpha + epsilon, alpha * np.exp(np.minimum(z, 0.0)) + epsilon)


def _softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def _log_softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = z - z.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def head_transform(raw, cfg: NetworkConfig) -> GmmParams:
    """Map pose-head pre-activations to valid mixture parameters."""
    raw = np.asarray(raw, dtype=float).reshape(-1)
    c = cfg.n_components
    if raw.shape[0] != c * (2 * POSE_DIM + 1):
        raise ValidationError("pose head has the wrong size")
    weights = _softmax(raw[:c])
    means = raw[c : c + c * POSE_DIM].reshape(c, POSE_DIM)
    variances = elu_variance(
        raw[c + c * POSE_DIM :].reshape(c, POSE_DIM), cfg.elu_alpha, cfg.var_epsilon
    )
    return GmmParams(weights=weights, means=means, variances=variances)


def gmm_logpdf(y, params: GmmParams) -> float:
    """Log density of the mixture at y, log-sum-exp stabilized."""
    y = np.asarray(y, dtype=float).reshape(POSE_DIM)
    diff = y[None, :] - params.means
    comp = -0.5 * (
        POSE_DIM * LN_2PI
        + np.log(params.variances).sum(axis=1)
        + (diff**2 / params.variances).sum(axis=1)
    )
    joint = np.log(params.weights) + comp
    top = joint.max()
    return float(top + math.log(np.exp(joint - top).sum()))


def gmm_pdf(y, params: GmmParams) -> float:
    """Mixture density at y (direct evaluation of the mixture formula)."""
    y = np.asarray(y, dtype=float).reshape(POSE_DIM)
    diff = y[None, :] - params.means
    comp = (
        (2.0 * math.pi) ** (-POSE_DIM / 2.0)
        / np.sqrt(params.variances.prod(axis=1))
        * np.exp(-0.5 * (diff**2 / params.variances).sum(axis=1))
    )
    return float((params.weights * comp).sum())


def gmm_pdf_many(ys: np.ndarray, params: GmmParams) -> np.ndarray:
    """Vectorized gmm_pdf over rows of ys (n, 3)."""
    ys = np.asarray(ys, dtype=float).reshape(-1, POSE_DIM)
    diff = ys[:, None, :] - params.means[None, :, :]
    comp = (
        (2.0 * math.pi) ** (-POSE_DIM / 2.0)
        / np.sqrt(params.variances.prod(axis=1))[None, :]
        * np.exp(-0.5 * (diff**2 / params.variances[None, :, :]).sum(axis=2))
    )
    return comp @ params.weights


def gmm_sample(params: GmmParams, rng: np.random.Generator, count: int = 1) -> np.ndarray:
    """Ancestral samples from the mixture: component by weight, then Gaussian."""
    comp = rng.choice(params.n_components, size=count, p=params.weights)
    noise = rng.standard_normal((count, POSE_DIM))
    return params.means[comp] + np.sqrt(params.variances[comp]) * noise


def pose_loss(y, params: GmmParams) -> float:
    """Negative log mixture likelihood of the true pose."""
    return -gmm_logpdf(y, params)


def total_loss(pred: PredictionOutput, target, cfg: NetworkConfig) -> float:
    """Weighted sum of pose, shape, and category losses for one sample.

    ``target`` is (pose 3-vector, shape coefficients, category index).
    """
    y, coeffs, category = target
    y = np.asarray(y, dtype=float).reshape(POSE_DIM)
    coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
    if cfg.mode == "mdn":
        pose_term = pose_loss(y, pred.pose)
    else:
        diff = np.asarray(pred.pose, dtype=float).reshape(POSE_DIM) - y
        pose_term = float(diff @ diff)
    shape_diff = pred.shape_coeffs - coeffs
    shape_term = float(shape_diff @ shape_diff)
    cat_term = -math.log(max(float(pred.category_probs[int(category)]), 1e-300))
    return (
        cfg.lambda_pose * pose_term
        + cfg.lambda_shape * shape_term
        + cfg.lambda_category * cat_term
    )


# ---------------------------------------------------------------------------
# input preprocessing


def normalize_depth_input(image: DepthImage, cfg: NetworkConfig) -> np.ndarray:
    """Flattened network input: masked pixels 0, valid depths mapped to [0, 1].

    Valid depths are affinely centered on the object distance, then the
    image is reduced to input_side^2 by block averaging when the sizes
    divide evenly (nearest-neighbor sampling otherwise).
    """
    depth = image.depth
    norm = np.where(
        image.mask,
        np.clip((depth - cfg.object_distance + 1.0) / 2.0, 0.0, 1.0),
        0.0,
    )
    side = cfg.input_side
    h, w = norm.shape
    if (h, w) == (side, side):
        small = norm
    elif h % side == 0 and w % side == 0:
        small = norm.reshape(side, h // side, side, w // side).mean(axis=(1, 3))
    else:
        rows = np.minimum(((np.arange(side) + 0.5) * h / side).astype(int), h - 1)
        cols = np.minimum(((np.arange(side) + 0.5) * w / side).astype(int), w - 1)
        small = norm[np.ix_(rows, cols)]
    return small.reshape(-1)


# ---------------------------------------------------------------------------
# forward / backward


def _forward_trunk(weights: NetworkWeights, x: np.ndarray):
    """Trunk activations; returns (feature matrix, per-layer cache)."""
    h = x
    cache = []
    for w, b in weights.trunk:
        pre = h @ w + b
        post = np.maximum(pre, 0.0)
        cache.append((h, pre))
        h = post
    return h, cache


def _forward_heads(weights: NetworkWeights, feat: np.ndarray):
    pose_raw = feat @ weights.pose[0] + weights.pose[1]
    shape_out = feat @ weights.shape[0] + weights.shape[1]
    cat_logits = feat @ weights.category[0] + weights.category[1]
    return pose_raw, shape_out, cat_logits


def forward(weights: NetworkWeights, image: DepthImage, cfg: NetworkConfig) -> PredictionOutput:
    """Deterministic single-image prediction."""
    x = normalize_depth_input(image, cfg)[None, :]
    feat, _ = _forward_trunk(weights, x)
    pose_raw, shape_out, cat_logits = _forward_heads(weights, feat)
    if not (
        np.all(np.isfinite(pose_raw))
        and np.all(np.isfinite(shape_out))
        and np.all(np.isfinite(cat_logits))
    ):
        raise NumericError("numeric failure")
    if cfg.mode == "mdn":
        pose = head_transform(pose_raw[0], cfg)
    else:
        pose = pose_raw[0].copy()
    return PredictionOutput(
        pose=pose,
        shape_coeffs=shape_out[0].copy(),
        category_probs=_softmax(cat_logits[0]),
    )


def _pose_terms_mdn(pose_raw, y, cfg):
    """Per-sample mixture loss and gradient w.r.t. pose pre-activations."""
    b = pose_raw.shape[0]
    c = cfg.n_components
    zpi = pose_raw[:, :c]
    zmu = pose_raw[:, c : c + c * POSE_DIM].reshape(b, c, POSE_DIM)
    zs = pose_raw[:, c + c * POSE_DIM :].reshape(b, c, POSE_DIM)

    log_pi = _log_softmax(zpi)
    var = elu_variance(zs, cfg.elu_alpha, cfg.var_epsilon)
    diff = y[:, None, :] - zmu
    comp_ll = -0.5 * (
        POSE_DIM * LN_2PI + np.log(var).sum(axis=2) + (diff**2 / var).sum(axis=2)
    )
    joint = log_pi + comp_ll
    top = joint.max(axis=1)
    lse = top + np.log(np.exp(joint - top[:, None]).sum(axis=1))
    loss = -lse

    resp = np.exp(joint - lse[:, None])
    d_zpi = _softmax(zpi) - resp
    d_mu = -resp[:, :, None] * diff / var
    d_var = resp[:, :, None] * 0.5 * (1.0 / var - diff**2 / var**2)
    dvar_dz = np.where(zs > 0.0, 1.0, cfg.elu_alpha * np.exp(np.minimum(zs, 0.0)))
    d_zs = d_var * dvar_dz
    d_raw = np.concatenate(
        [d_zpi, d_mu.reshape(b, c * POSE_DIM), d_zs.reshape(b, c * POSE_DIM)], axis=1
    )
    return loss, d_raw


def _batch_forward_loss(weights, inputs, poses, coeffs, categories, cfg):
    """Mean loss over the batch plus gradients w.r.t. head pre-activations."""
    b = inputs.shape[0]
    feat, cache = _forward_trunk(weights, inputs)
    pose_raw, shape_out, cat_logits = _forward_heads(weights, feat)
    if not (np.all(np.isfinite(pose_raw)) and np.all(np.isfinite(cat_logits))):
        raise NumericError("numeric failure")

    if cfg.mode == "mdn":
        pose_losses, d_pose = _pose_terms_mdn(pose_raw, poses, cfg)
    else:
        delta = pose_raw - poses
        pose_losses = (delta**2).sum(axis=1)
        d_pose = 2.0 * delta

    shape_delta = shape_out - coeffs
    shape_losses = (shape_delta**2).sum(axis=1)
    d_shape = 2.0 * shape_delta

    log_probs = _log_softmax(cat_logits)
    rows = np.arange(b)
    cat_losses = -log_probs[rows, categories]
    d_cat = _softmax(cat_logits)
    d_cat[rows, categories] -= 1.0

    losses = (
        cfg.lambda_pose * pose_losses
        + cfg.lambda_shape * shape_losses
        + cfg.lambda_category * cat_losses
    )
    scale = 1.0 / b
    d_pose *= cfg.lambda_pose * scale
    d_shape *= cfg.lambda_shape * scale
    d_cat *= cfg.lambda_category * scale
    return float(losses.mean()), feat, cache, (d_pose, d_shape, d_cat)


def batch_loss(weights: NetworkWeights, batch, cfg: NetworkConfig) -> float:
    """Mean total loss of a batch (inputs, poses, coeffs, categories)."""
    inputs, poses, coeffs, categories = _as_batch(batch)
    loss, _, _, _ = _batch_forward_loss(weights, inputs, poses, coeffs, categories, cfg)
    return loss


def loss_gradient(weights: NetworkWeights, batch, cfg: NetworkConfig) -> NetworkWeights:
    """Analytic gradient of the mean batch loss, in weight layout."""
    inputs, poses, coeffs, categories = _as_batch(batch)
    _, feat, cache, (d_pose, d_shape, d_cat) = _batch_forward_loss(
        weights, inputs, poses, coeffs, categories, cfg
    )
    grads = []
    d_feat = (
        d_pose @ weights.pose[0].T
        + d_shape @ weights.shape[0].T
        + d_cat @ weights.category[0].T
    )
    for (w, _b), (inp, pre) in zip(reversed(weights.trunk), reversed(cache)):
        d_pre = d_feat * (pre > 0.0)
        grads.append(d_pre.sum(axis=0))  # bias
        grads.append(inp.T @ d_pre)  # weight
        d_feat = d_pre @ w.T
    grads.reverse()
    head_grads = []
    for d_out in (d_pose, d_shape, d_cat):
        head_grads.append(feat.T @ d_out)
        head_grads.append(d_out.sum(axis=0))
    return NetworkWeights.from_parameters(grads + head_grads, len(weights.trunk))


def _as_batch(batch):
    inputs, poses, coeffs, categories = batch
    inputs = np.asarray(inputs, dtype=float)
    poses = np.asarray(poses, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float)
    categories = np.asarray(categories, dtype=int)
    if inputs.ndim != 2 or inputs.shape[0] == 0:
        raise ValidationError("batch must be a non-empty 2-D array of inputs")
    return inputs, poses, coeffs, categories


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainingSet:
    """Preprocessed training arrays, aligned by row."""

    inputs: np.ndarray
    poses: np.ndarray
    coeffs: np.ndarray
    categories: np.ndarray

    def __len__(self) -> int:
        return self.inputs.shape[0]


def train(
    data: TrainingSet,
    cfg: NetworkConfig,
    seed: int,
    epochs: int = 25,
    batch_size: int = 64,
    learning_rate: float = 0.001,
    beta1: float = 0.9,
    beta2: float = 0.999,
    adam_epsilon: float = 1e-8,
) -> tuple[NetworkWeights, list[float]]:
    """Adam training; returns final weights and the per-epoch loss trace.

    Shape-coefficient targets are standardized per dimension and scaled
    to unit total variance during optimization so the three
    unit-weighted loss terms have comparable scale; the affine transform
    is folded back into the linear shape head afterwards, so predictions
    stay in raw coefficient units.
    """
    n = len(data)
    if n == 0:
        raise ValidationError("empty dataset")
    coeff_mean = data.coeffs.mean(axis=0)
    coeff_std = data.coeffs.std(axis=0)
    coeff_std = np.where(coeff_std < 1e-8, 1.0, coeff_std)
    coeff_std = coeff_std * math.sqrt(data.coeffs.shape[1])
    coeffs_white = (data.coeffs - coeff_mean) / coeff_std

    params = [p.copy() for p in init_weights(cfg, seed).parameters()]
    n_hidden = len(cfg.hidden_sizes)
    moment1 = [np.zeros_like(p) for p in params]
    moment2 = [np.zeros_like(p) for p in params]
    shuffle_rng = np.random.default_rng([int(seed), 1])
    step = 0
    trace = []
    for _epoch in range(epochs):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            sel = order[start : start + batch_size]
            weights = NetworkWeights.from_parameters(params, n_hidden)
            batch = (data.inputs[sel], data.poses[sel], coeffs_white[sel], data.categories[sel])
            loss = batch_loss(weights, batch, cfg)
            grads = loss_gradient(weights, batch, cfg).parameters()
            step += 1
            corr1 = 1.0 - beta1**step
            corr2 = 1.0 - beta2**step
            for p, g, m1, m2 in zip(params, grads, moment1, moment2):
                m1 *= beta1
                m1 += (1.0 - beta1) * g
                m2 *= beta2
                m2 += (1.0 - beta2) * g**2
                p -= learning_rate * (m1 / corr1) / (np.sqrt(m2 / corr2) + adam_epsilon)
            epoch_loss += loss * sel.size
        trace.append(epoch_loss / n)

    # fold the target standardization into the shape head
    shape_w = params[2 * n_hidden + 2]
    shape_b = params[2 * n_hidden + 3]
    params[2 * n_hidden + 2] = shape_w * coeff_std[None, :]
    params[2 * n_hidden + 3] = shape_b * coeff_std + coeff_mean
    return NetworkWeights.from_parameters(params, n_hidden), trace
