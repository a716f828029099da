"""Frame and audio normalization."""

import cv2
import numpy as np

from ..errors import AlignmentError, IngestError
from ..profiles import FRAME_MEAN, FRAME_STD, profile_dims


def preprocess_frames(frames, profile="desk", mean=FRAME_MEAN, std=FRAME_STD):
    """Resize RGB frames to the profile resolution and normalize per channel.

    ``frames`` yields (H, W, 3) arrays, uint8 or float in [0, 1]; (3, H, W)
    frames are also accepted. Returns float32 of shape (T, 3, H, W).
    """
    out_h, out_w = profile_dims(profile)
    mean = np.asarray(mean, dtype=np.float32)[:, None, None]
    std = np.asarray(std, dtype=np.float32)[:, None, None]
    out = []
    for i, frame in enumerate(frames):
        try:
            arr = np.asarray(frame)
        except Exception as exc:
            raise IngestError(f"undecodable frame ({exc})", i) from exc
        if arr.ndim == 3 and arr.shape[0] == 3 and arr.shape[-1] != 3:
            arr = np.transpose(arr, (1, 2, 0))
        if arr.ndim != 3 or arr.shape[-1] != 3 or arr.size == 0:
            raise IngestError(f"expected an RGB frame, got shape {arr.shape}", i)
        if arr.dtype == np.uint8:
            arr = arr.astype(np.float32) / 255.0
        else:
            arr = arr.astype(np.float32)
            if not np.all(np.isfinite(arr)):
                raise IngestError("non-finite pixel values", i)
        if arr.shape[:2] != (out_h, out_w):
            arr = cv2.resize(arr, (out_w, out_h), interpolation=cv2.INTER_AREA)
        out.append((np.transpose(arr, (2, 0, 1)) - mean) / std)
    if not out:
        return np.zeros((0, 3, out_h, out_w), dtype=np.float32)
    return np.stack(out).astype(np.float32)


def scene_sample_range(start_frame, end_frame, fps, rate):
    """Half-open sample interval covering frames ``start_frame..end_frame``."""
    return int(round(start_frame / fps * rate)), int(round((end_frame + 1) / fps * rate))


def align_audio(raw_audio, raw_rate, meta, scene_range, target_rate=None):
    """Cut the scene's audio, resample it to ``target_rate`` and peak-normalize.

    The output has ``round(n_scene_frames / fps * target_rate)`` samples and
    max |value| of 1, or is all zeros for a silent scene.
    """
    raw_audio = np.asarray(raw_audio, dtype=np.float64).ravel()
    target_rate = target_rate or meta.audio_rate
    start, end = scene_range
    needed = int(round(meta.n_frames / meta.fps * raw_rate))
    if raw_audio.size < needed - 1:
        raise AlignmentError(
            f"{meta.video_id}: audio has {raw_audio.size} samples, video needs {needed}"
        )
    n_out = int(round((end - start + 1) / meta.fps * target_rate))
    t0 = start / meta.fps
    t_out = t0 + np.arange(n_out) / target_rate
    t_in = np.arange(raw_audio.size) / raw_rate
    if raw_rate == target_rate:
        a, _ = scene_sample_range(start, end, meta.fps, raw_rate)
        seg = raw_audio[a:a + n_out]
        if seg.size < n_out:
            seg = np.pad(seg, (0, n_out - seg.size))
    else:
        seg = np.interp(t_out, t_in, raw_audio, left=0.0, right=0.0)
    peak = np.max(np.abs(seg)) if seg.size else 0.0
    if peak == 0.0:
        return np.zeros(n_out, dtype=np.float32)
    return (seg / peak).astype(np.float32)
