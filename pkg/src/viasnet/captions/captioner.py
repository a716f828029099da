"""Chained per-scene captioning."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from ..errors import ContractError, ProviderError
from .client import CaptionRequest

PROMPT_TEMPLATE = (
    "This video is a scene from a TV commercial. Here is the caption of the previous scene: "
    "{previous_caption}. Provide a caption describing the actions, objects, and scene in the current video."
)
FIRST_SCENE = "(none)"
MERGE_TEMPLATE = (
    "The following captions describe the first, the middle and the last frames of one scene of a TV "
    "commercial. Merge them into a single caption for the whole scene.\n1. {first}\n2. {middle}\n3. {last}"
)
MIN_CLIP_SECONDS = 1.0


@dataclass(frozen=True)
class Caption:
    video_id: str
    scene_id: int
    text: str
    provider: str
    prev_caption_used: str

    def __post_init__(self):
        if not self.text.strip():
            raise ContractError(f"empty caption for {self.video_id}/{self.scene_id}")


def build_prompt(previous_caption):
    return PROMPT_TEMPLATE.format(previous_caption=previous_caption or FIRST_SCENE)


def _ask(client, request, cache):
    if cache is not None:
        hit = cache.get(request)
        if hit is not None:
            return hit
    text = client.generate(request).strip()
    if not text:
        raise ProviderError(f"empty caption for {request.video_id}/{request.scene_id}")
    if cache is not None:
        cache.put(request, text)
    return text


def caption_scene(scene, prev_caption, client, video_id="", cache=None):
    """Caption a scene of at least one second from the whole clip."""
    if scene.duration < MIN_CLIP_SECONDS:
        raise ContractError(f"scene {scene.scene_id} is {scene.duration:.3f}s; use caption_short_scene")
    prev = prev_caption or FIRST_SCENE
    req = CaptionRequest("clip", build_prompt(prev), video_id, scene.scene_id, frames=scene.frames)
    return Caption(video_id, scene.scene_id, _ask(client, req, cache), client.provider, prev)


def short_scene_frames(n_frames):
    return [0, n_frames // 2, n_frames - 1]


def caption_short_scene(scene, prev_caption, client, video_id="", cache=None):
    """Caption a sub-second scene from its first, middle and last frames, then merge."""
    if scene.duration >= MIN_CLIP_SECONDS:
        raise ContractError(f"scene {scene.scene_id} is {scene.duration:.3f}s; use caption_scene")
    prev = prev_caption or FIRST_SCENE
    prompt = build_prompt(prev)
    parts = []
    for idx in short_scene_frames(scene.n_frames):
        req = CaptionRequest("frame", prompt, video_id, scene.scene_id,
                             frames=scene.frames[idx:idx + 1], frame_index=idx)
        parts.append(_ask(client, req, cache))
    merge = CaptionRequest("merge", MERGE_TEMPLATE.format(first=parts[0], middle=parts[1], last=parts[2]),
                           video_id, scene.scene_id, parts=parts)
    return Caption(video_id, scene.scene_id, _ask(client, merge, cache), client.provider, prev)


def caption_any(scene, prev_caption, client, video_id="", cache=None):
    fn = caption_scene if scene.duration >= MIN_CLIP_SECONDS else caption_short_scene
    return fn(scene, prev_caption, client, video_id, cache)


def caption_video(video_id, scenes, client, cache=None):
    """Caption scenes in order, feeding each caption into the next prompt."""
    out, prev = [], None
    for scene in scenes:
        cap = caption_any(scene, prev, client, video_id, cache)
        out.append(cap)
        prev = cap.text
    return out


def save_captions(path, captions):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([asdict(c) for c in captions], fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_captions(path):
    with open(path, encoding="utf-8") as fh:
        return [Caption(**d) for d in json.load(fh)]
