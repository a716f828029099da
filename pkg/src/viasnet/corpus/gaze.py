"""Velocity-threshold fixation detection and ground-truth saliency maps."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import ConfigurationError, ContractError
from .types import FixationRecord, SaliencyMap

IVT_THRESHOLD = 30.0  # deg/s


@dataclass(frozen=True)
class ScreenGeometry:
    """Viewing setup used to turn pixel displacements into visual angle."""

    distance_cm: float = 60.0
    width_cm: float = 53.1
    height_cm: float = 29.9
    width_px: int = 1920
    height_px: int = 1080

    def to_unit_vectors(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        cx = (x - self.width_px / 2.0) * (self.width_cm / self.width_px)
        cy = (y - self.height_px / 2.0) * (self.height_cm / self.height_px)
        cz = np.full_like(cx, self.distance_cm)
        norm = np.sqrt(cx * cx + cy * cy + cz * cz)
        return cx / norm, cy / norm, cz / norm

    def pixels_per_degree(self):
        """Screen pixels spanned by one degree of visual angle at the screen centre."""
        return self.distance_cm * math.tan(math.radians(1.0)) * self.width_px / self.width_cm


@dataclass(frozen=True)
class Fixation:
    viewer_id: str
    eye: str
    t_start: float
    t_end: float
    x: float  # screen pixels
    y: float
    n_samples: int


def _group_samples(samples):
    groups = defaultdict(list)
    for s in samples:
        groups[(s.viewer_id, s.eye)].append(s)
    out = {}
    for key in sorted(groups):
        rows = groups[key]
        t = np.array([s.t for s in rows], dtype=np.float64)
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ContractError(f"gaze samples for {key} are not strictly increasing in time")
        out[key] = (t, np.array([s.x for s in rows]), np.array([s.y for s in rows]))
    return out


def detect_fixations(samples, geometry, threshold=IVT_THRESHOLD, min_samples=1):
    """Merge runs of sub-threshold angular velocity into fixations.

    Samples whose point-to-point velocity reaches ``threshold`` deg/s are
    saccade samples and are dropped. Each fixation is placed at the centroid
    of its samples.
    """
    if geometry is None:
        raise ConfigurationError("IVT classification needs screen geometry")
    fixations = []
    for (viewer, eye), (t, x, y) in _group_samples(samples).items():
        vel = kernels.angular_velocity(t, *geometry.to_unit_vectors(x, y))
        for a, b in kernels.fixation_runs(vel, float(threshold), int(min_samples)):
            fixations.append(Fixation(viewer, eye, float(t[a]), float(t[b]),
                                      float(x[a:b + 1].mean()), float(y[a:b + 1].mean()), int(b - a + 1)))
    return fixations


def classify_fixations_ivt(samples, geometry, meta, threshold=IVT_THRESHOLD, min_samples=1):
    """IVT fixations expanded to one record per overlapped video frame.

    Coordinates are mapped from screen pixels to source-video pixels.
    Fixations whose centroid falls off the video are dropped.
    """
    if geometry is None:
        raise ConfigurationError("IVT classification needs screen geometry")
    sx = meta.width / geometry.width_px
    sy = meta.height / geometry.height_px
    records = []
    for fx in detect_fixations(samples, geometry, threshold, min_samples):
        x, y = fx.x * sx, fx.y * sy
        if not (0.0 <= x < meta.width and 0.0 <= y < meta.height):
            continue
        first = max(0, int(math.floor(fx.t_start * meta.fps)))
        last = min(meta.n_frames - 1, int(math.floor(fx.t_end * meta.fps)))
        for f in range(first, last + 1):
            records.append(FixationRecord(meta.video_id, f, fx.viewer_id, fx.eye, x, y))
    records.sort(key=lambda r: (r.frame_idx, r.viewer_id, r.eye))
    return records


def default_sigma_px(geometry, meta=None):
    """One degree of visual angle in source-video pixels."""
    px = geometry.pixels_per_degree()
    if meta is not None:
        px *= meta.width / geometry.width_px
    return px


def _coords(fixations):
    if isinstance(fixations, np.ndarray):
        pts = fixations.reshape(-1, 2).astype(np.float64)
        return pts[:, 0], pts[:, 1]
    xs = [f.x if hasattr(f, "x") else f[0] for f in fixations]
    ys = [f.y if hasattr(f, "y") else f[1] for f in fixations]
    return np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64)


def build_gt_map(fixations, dims, sigma):
    """Sum of isotropic Gaussians (std ``sigma`` px) centred on each fixation.

    ``fixations`` are (x, y) pairs or records already in the (H, W) grid;
    pixel ``(r, c)`` is sampled at its centre ``(c + 0.5, r + 0.5)``. A frame
    without fixations gets a uniform map.
    """
    h, w = dims
    xs, ys = _coords(fixations)
    if xs.size == 0:
        return SaliencyMap(np.ones((h, w), dtype=np.float64), "raw")
    return SaliencyMap(kernels.gaussian_splat(xs, ys, h, w, float(sigma)), "raw")


def normalize_to_prob(smap):
    """Min-max normalize a raw map, then divide by its sum."""
    if isinstance(smap, SaliencyMap):
        smap.require("raw")
        values = smap.values
    else:
        values = np.asarray(smap)
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    if not hi > lo:
        return SaliencyMap(np.full(values.shape, 1.0 / values.size), "probability")
    mm = (values - lo) / (hi - lo)
    return SaliencyMap(mm / mm.sum(), "probability")


def rescale_points(records, meta, dims):
    """Source-pixel fixation coordinates mapped onto an (H, W) grid."""
    h, w = dims
    xs, ys = _coords(records)
    return np.stack([xs * (w / meta.width), ys * (h / meta.height)], axis=1)


def scale_sigma(sigma_src, meta, dims):
    h, w = dims
    return sigma_src * math.sqrt((h / meta.height) * (w / meta.width))


def fixations_by_frame(records, n_frames):
    per = [[] for _ in range(n_frames)]
    for r in records:
        if 0 <= r.frame_idx < n_frames:
            per[r.frame_idx].append(r)
    return per


def video_gt_maps(records, meta, dims, sigma_src):
    """Probability-state ground truth for every frame, float32 (n_frames, H, W)."""
    sigma = scale_sigma(sigma_src, meta, dims)
    out = np.empty((meta.n_frames,) + tuple(dims), dtype=np.float32)
    for f, recs in enumerate(fixations_by_frame(records, meta.n_frames)):
        pts = rescale_points(recs, meta, dims) if recs else np.zeros((0, 2))
        out[f] = normalize_to_prob(build_gt_map(pts, dims, sigma)).values
    return out


def fixation_pixels(records, meta, dims):
    """Integer (row, col) grid cells of fixations, clipped to the grid."""
    h, w = dims
    if not len(records):
        return np.zeros((0, 2), dtype=np.int64)
    pts = rescale_points(records, meta, dims)
    cols = np.clip(np.floor(pts[:, 0]).astype(np.int64), 0, w - 1)
    rows = np.clip(np.floor(pts[:, 1]).astype(np.int64), 0, h - 1)
    return np.stack([rows, cols], axis=1)
