"""Assemble preprocessed per-scene clips from stored corpus files."""

import json

import numpy as np

from .io import read_container, read_wav, resolve
from .preprocess import align_audio, preprocess_frames
from .types import SceneClip


def build_scene_clips(frames, audio, audio_rate, meta, scenes, profile, captions=None):
    """``frames`` are RGB in [0, 1] with shape (n_frames, 3, h, w)."""
    clips = []
    for k, (a, b) in enumerate(scenes):
        x = preprocess_frames(np.transpose(frames[a:b + 1], (0, 2, 3, 1)), profile)
        s = align_audio(audio, audio_rate, meta, (a, b), meta.audio_rate)
        cap = captions.get(k) if captions else None
        clips.append(SceneClip(k, a, b, x, s, cap, meta.fps))
    return clips


def load_scenes(path):
    with open(path, encoding="utf-8") as fh:
        return [(int(s["start_frame"]), int(s["end_frame"])) for s in json.load(fh)]


def load_video_clips(manifest, video_id, with_captions=True):
    entry = manifest.video(video_id)
    frames, _ = read_container(resolve(manifest, video_id, "frames"))
    audio, rate = read_wav(resolve(manifest, video_id, "audio"))
    scenes = load_scenes(resolve(manifest, video_id, "scenes"))
    captions = None
    if with_captions and "captions" in entry.files:
        from ..captions import load_captions
        captions = {c.scene_id: c.text for c in load_captions(resolve(manifest, video_id, "captions"))}
    return build_scene_clips(frames, audio, rate, entry.meta, scenes, manifest.profile, captions)
