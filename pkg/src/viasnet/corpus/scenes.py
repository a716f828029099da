"""Histogram-difference shot boundary detection."""

import cv2
import numpy as np

from .. import kernels
from ..errors import IngestError, InvalidInputError


def _to_uint8_rgb(frame, index):
    frame = np.asarray(frame)
    if frame.ndim == 3 and frame.shape[0] == 3 and frame.shape[-1] != 3:
        frame = np.transpose(frame, (1, 2, 0))
    if frame.ndim != 3 or frame.shape[-1] != 3:
        raise IngestError(f"expected an RGB frame, got shape {frame.shape}", index)
    if frame.dtype == np.uint8:
        return np.ascontiguousarray(frame)
    frame = np.asarray(frame, dtype=np.float32)
    if not np.all(np.isfinite(frame)):
        raise IngestError("non-finite pixel values", index)
    return np.ascontiguousarray(np.clip(np.round(frame * 255.0), 0, 255).astype(np.uint8))


def hsv_histograms(frame, bins=32, index=None):
    """Per-channel HSV histograms, each normalized to sum to one. Shape (3, bins)."""
    hsv = cv2.cvtColor(_to_uint8_rgb(frame, index), cv2.COLOR_RGB2HSV_FULL)
    counts = kernels.channel_histograms(hsv, bins)
    return counts / counts.sum(axis=1, keepdims=True)


def frame_distances(frames, bins=32):
    """Distance in [0, 1] between each pair of consecutive frames.

    Half the L1 distance between normalized histograms, averaged over the
    H, S and V channels. Entry ``i`` compares frame ``i`` with ``i + 1``.
    """
    prev = None
    out = []
    for i, frame in enumerate(frames):
        hist = hsv_histograms(frame, bins, i)
        if prev is not None:
            out.append(0.5 * np.abs(hist - prev).sum(axis=1).mean())
        prev = hist
    if prev is None:
        raise InvalidInputError("detect_scenes needs at least one frame")
    return np.asarray(out, dtype=np.float64)


def detect_scenes(frames, threshold=0.3, bins=32, min_scene_len=6):
    """Split a frame sequence into scenes.

    Returns inclusive ``(start_frame, end_frame)`` ranges that partition the
    sequence. A cut is placed before frame ``i + 1`` when the histogram
    distance to frame ``i`` exceeds ``threshold`` and the current scene is at
    least ``min_scene_len`` frames long.
    """
    dists = frame_distances(frames, bins)
    n = len(dists) + 1
    cuts = []
    last = 0
    for i, d in enumerate(dists):
        cut = i + 1
        if d > threshold and cut - last >= min_scene_len:
            cuts.append(cut)
            last = cut
    bounds = [0] + cuts + [n]
    return [(bounds[k], bounds[k + 1] - 1) for k in range(len(bounds) - 1)]
