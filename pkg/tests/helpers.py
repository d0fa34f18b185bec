"""Independent oracles used by the tests.

Every oracle here is deliberately implemented along a different path
than the library (brute force, quaternions, scalar loops, matrix logs)
so agreement is meaningful.
"""

import math

import numpy as np


def brute_force_sdf(mask: np.ndarray) -> np.ndarray:
    """O(n^4) signed distance field: negative inside, positive outside,
    pixels beyond the border count as background."""
    h, w = mask.shape
    obj = np.argwhere(mask)
    bg = np.argwhere(~mask)
    out = np.zeros((h, w))
    for r in range(h):
        for c in range(w):
            if mask[r, c]:
                best = float(min(r + 1, c + 1, h - r, w - c)) ** 2
                for rr, cc in bg:
                    d = (rr - r) ** 2 + (cc - c) ** 2
                    if d < best:
                        best = d
                out[r, c] = -np.sqrt(best)
            else:
                best = np.inf
                for rr, cc in obj:
                    d = (rr - r) ** 2 + (cc - c) ** 2
                    if d < best:
                        best = d
                out[r, c] = np.sqrt(best)
    return out


def quaternion_rotation_matrix(rotvec) -> np.ndarray:
    """Axis-angle to matrix via unit quaternions (independent of Rodrigues)."""
    rotvec = np.asarray(rotvec, dtype=float)
    theta = np.linalg.norm(rotvec)
    if theta == 0.0:
        return np.eye(3)
    axis = rotvec / theta
    w = math.cos(theta / 2.0)
    x, y, z = axis * math.sin(theta / 2.0)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_log_angle_deg(ra: np.ndarray, rb: np.ndarray) -> float:
    """Geodesic angle via the matrix logarithm (scipy path)."""
    from scipy.linalg import logm

    log = np.real(logm(ra.T @ rb))
    vee = np.array([log[2, 1], log[0, 2], log[1, 0]])
    return math.degrees(np.linalg.norm(vee))


def ray_box_entry_t(origin, direction, lo, hi):
    """Slab-method ray/AABB intersection; returns entry t or None."""
    t0, t1 = -np.inf, np.inf
    for i in range(3):
        if direction[i] == 0.0:
            if not lo[i] <= origin[i] <= hi[i]:
                return None
        else:
            a = (lo[i] - origin[i]) / direction[i]
            b = (hi[i] - origin[i]) / direction[i]
            t0 = max(t0, min(a, b))
            t1 = min(t1, max(a, b))
    if t0 >= t1 or t1 < 0.0:
        return None
    return max(t0, 0.0)


def loop_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Scalar triple-loop matrix product (forward-pass oracle)."""
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for t in range(k):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc
    return out


def finite_difference_gradients(weights, batch, cfg, h: float = 1e-4):
    """Central finite differences of the mean batch loss, per parameter."""
    from depthpose.mdn import NetworkWeights, batch_loss

    params = [p.copy() for p in weights.parameters()]
    n_hidden = len(weights.trunk)
    grads = []
    for pi in range(len(params)):
        flat = params[pi].reshape(-1)
        g = np.zeros_like(flat)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            lp = batch_loss(NetworkWeights.from_parameters(params, n_hidden), batch, cfg)
            flat[j] = orig - h
            lm = batch_loss(NetworkWeights.from_parameters(params, n_hidden), batch, cfg)
            flat[j] = orig
            g[j] = (lp - lm) / (2.0 * h)
        grads.append(g.reshape(params[pi].shape))
    return grads


def kink_free_weights(cfg, seed, inputs, margin: float = 1e-3):
    """Random weights whose rectifier pre-activations all sit at least
    ``margin`` from the kink on the given batch, so central differences
    probe the loss only where it is differentiable."""
    from depthpose.mdn import NetworkWeights, _forward_trunk, init_weights

    for attempt in range(50):
        rng = np.random.default_rng([seed, 77, attempt])
        params = [
            p + rng.normal(0.0, 0.05, p.shape)
            for p in init_weights(cfg, seed).parameters()
        ]
        weights = NetworkWeights.from_parameters(params, len(cfg.hidden_sizes))
        _, cache = _forward_trunk(weights, inputs)
        if min(float(np.abs(pre).min()) for _, pre in cache) > margin:
            return weights
    raise AssertionError("could not place pre-activations away from kinks")


def mixture_moments(params):
    """Analytic per-dimension mean, variance, and 4th central moment."""
    w = params.weights[:, None]
    mean = (w * params.means).sum(axis=0)
    delta = params.means - mean
    var = (w * (params.variances + delta**2)).sum(axis=0)
    m4 = (
        w
        * (3 * params.variances**2 + 6 * params.variances * delta**2 + delta**4)
    ).sum(axis=0)
    return mean, var, m4
