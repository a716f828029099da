"""Pure numpy implementations of the compiled kernels.

Used when the extension is not built, and as the reference the compiled
versions are checked against.
"""

import numpy as np


def gaussian_splat(xs, ys, height, width, sigma):
    """Sum of unnormalized isotropic Gaussians evaluated at pixel centres."""
    xs = np.asarray(xs, dtype=np.float64).ravel()
    ys = np.asarray(ys, dtype=np.float64).ravel()
    if xs.shape != ys.shape:
        raise ValueError("xs and ys differ in length")
    if xs.size == 0:
        return np.zeros((height, width), dtype=np.float64)
    inv = 1.0 / (2.0 * sigma * sigma)
    dx = np.arange(width) + 0.5 - xs[:, None]
    dy = np.arange(height) + 0.5 - ys[:, None]
    gx = np.exp(-dx * dx * inv)
    gy = np.exp(-dy * dy * inv)
    return gy.T @ gx


def auc_rank(pos, neg):
    """Mann-Whitney ROC area, ties counted as one half."""
    pos = np.asarray(pos, dtype=np.float64).ravel()
    neg = np.sort(np.asarray(neg, dtype=np.float64).ravel())
    if pos.size == 0 or neg.size == 0:
        raise ValueError("need at least one positive and one negative")
    lo = np.searchsorted(neg, pos, side="left")
    hi = np.searchsorted(neg, pos, side="right")
    twice = int(np.sum(2 * lo + (hi - lo)))
    return twice / (2.0 * pos.size * neg.size)


def angular_velocity(t, ux, uy, uz):
    """Point-to-point angular speed (deg/s) between consecutive unit gaze vectors."""
    t = np.asarray(t, dtype=np.float64)
    u = np.stack([np.asarray(a, dtype=np.float64) for a in (ux, uy, uz)], axis=1)
    v = np.zeros(t.size, dtype=np.float64)
    if t.size < 2:
        return v
    prev, cur = u[:-1], u[1:]
    cross = np.cross(prev, cur)
    dot = np.sum(prev * cur, axis=1)
    ang = np.arctan2(np.sqrt(np.sum(cross * cross, axis=1)), dot) * (180.0 / np.pi)
    v[1:] = ang / np.diff(t)
    v[0] = v[1]
    return v


def fixation_runs(velocity, threshold, min_samples):
    """Inclusive (start, end) index pairs of maximal below-threshold runs."""
    below = np.asarray(velocity, dtype=np.float64) < threshold
    edges = np.diff(np.concatenate([[0], below.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    keep = (ends - starts + 1) >= min_samples
    return np.stack([starts[keep], ends[keep]], axis=1).astype(np.int64).reshape(-1, 2)


def channel_histograms(img, bins):
    img = np.asarray(img, dtype=np.uint8)
    idx = (img.astype(np.int64) * bins) >> 8
    return np.stack(
        [np.bincount(idx[..., ch].ravel(), minlength=bins) for ch in range(img.shape[-1])]
    ).astype(np.int64)
