"""Caption providers: a deterministic stub and an HTTP multimodal-LMM client."""

from __future__ import annotations

import base64
import colorsys
import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Optional

import cv2
import numpy as np

from ..errors import CaptionServiceError, ProviderError
from ..profiles import FRAME_MEAN, FRAME_STD

log = logging.getLogger(__name__)

ENV_ENDPOINT = "VIASNET_LMM_ENDPOINT"
ENV_API_KEY = "VIASNET_LMM_API_KEY"
ENV_MODEL = "VIASNET_LMM_MODEL"


@dataclass
class CaptionRequest:
    kind: str  # "clip", "frame" or "merge"
    prompt: str
    video_id: str
    scene_id: int
    frames: Optional[np.ndarray] = None  # normalized (T, 3, H, W)
    parts: list = field(default_factory=list)
    frame_index: Optional[int] = None


def denormalize(frames):
    mean = np.asarray(FRAME_MEAN, dtype=np.float32)[:, None, None]
    std = np.asarray(FRAME_STD, dtype=np.float32)[:, None, None]
    return np.clip(np.asarray(frames, dtype=np.float32) * std + mean, 0.0, 1.0)


_HUES = [(0.04, "red"), (0.10, "orange"), (0.18, "yellow"), (0.45, "green"), (0.54, "cyan"),
         (0.70, "blue"), (0.80, "purple"), (0.93, "magenta"), (1.01, "red")]


def color_word(rgb):
    h, s, v = colorsys.rgb_to_hsv(*[float(c) for c in rgb])
    if v < 0.12:
        return "black"
    if s < 0.2:
        return "white" if v > 0.8 else "gray"
    name = next(n for lim, n in _HUES if h < lim)
    return f"dark {name}" if v < 0.45 else name


def _position_word(x, y, w, h):
    col = "left" if x < w / 3 else "right" if x > 2 * w / 3 else ""
    row = "top" if y < h / 3 else "bottom" if y > 2 * h / 3 else ""
    return " ".join(p for p in (row, col) if p) or "center"


def _salient(img):
    """Mask of pixels far from the frame's median colour, and its components."""
    med = np.median(img.reshape(3, -1), axis=1)
    dist = np.sqrt(((img - med[:, None, None]) ** 2).sum(axis=0))
    mask = (dist > 0.25).astype(np.uint8)
    n, labels, stats, centroids = cv2.connectedComponentsWithStats(mask, connectivity=8)
    return med, mask, n - 1, stats[1:], centroids[1:]


def describe_frames(frames):
    """Template caption from simple frame statistics of normalized (T, 3, H, W) frames."""
    rgb = denormalize(frames)
    first, last = rgb[0], rgb[-1]
    _, h, w = first.shape
    med, mask, n, stats, cents = _salient(first)
    bg = color_word(med)
    if n == 0:
        return f"A plain {bg} background."
    big = int(np.argmax(stats[:, cv2.CC_STAT_AREA]))
    cx, cy = cents[big]
    color = color_word(first[:, mask.astype(bool)].mean(axis=1))
    count = {1: "A", 2: "Two"}.get(n, "Many")
    noun = "shape" if n == 1 else "shapes"
    motion = "stays still"
    if rgb.shape[0] > 1:
        _, _, n2, stats2, cents2 = _salient(last)
        if n2:
            lx, ly = cents2[int(np.argmax(stats2[:, cv2.CC_STAT_AREA]))]
            dx, dy = lx - cx, ly - cy
            if max(abs(dx) / w, abs(dy) / h) > 0.03:
                if abs(dx) / w >= abs(dy) / h:
                    motion = "moves right" if dx > 0 else "moves left"
                else:
                    motion = "moves down" if dy > 0 else "moves up"
    verb = motion if n == 1 else motion.replace("moves", "move").replace("stays", "stay")
    return f"{count} {color} {noun} {verb} in the {_position_word(cx, cy, w, h)} of a {bg} background."


class StubClient:
    """Offline provider. Captions are a pure function of the request's frames."""

    provider = "stub"

    def __init__(self):
        self.calls = 0

    def generate(self, request):
        self.calls += 1
        if request.kind == "merge":
            return " ".join(p.strip() for p in request.parts)
        if request.frames is None or len(request.frames) == 0:
            raise ProviderError("stub captioner needs frames")
        return describe_frames(request.frames)


def _png_b64(frame):
    rgb = (np.transpose(denormalize(frame[None])[0], (1, 2, 0)) * 255).round().astype(np.uint8)
    ok, buf = cv2.imencode(".png", cv2.cvtColor(rgb, cv2.COLOR_RGB2BGR))
    if not ok:
        raise ProviderError("could not encode frame")
    return base64.b64encode(buf.tobytes()).decode("ascii")


class HttpCaptionClient:
    """JSON-over-HTTP client: POST {model, prompt, media} -> {text}.

    Endpoint, key and model come from the environment unless given.
    """

    provider = "lmm"

    def __init__(self, endpoint=None, api_key=None, model=None, timeout=30.0, retries=3,
                 backoff=1.0, max_frames=8, transport=None, sleep=time.sleep):
        import httpx

        self.endpoint = endpoint or os.environ.get(ENV_ENDPOINT)
        if not self.endpoint:
            raise CaptionServiceError(f"no LMM endpoint configured (set {ENV_ENDPOINT})")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY)
        self.model = model or os.environ.get(ENV_MODEL, "qwen3-vl-plus")
        self.retries = retries
        self.backoff = backoff
        self.max_frames = max_frames
        self.sleep = sleep
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        self._http = httpx.Client(timeout=timeout, transport=transport, headers=headers)
        self.calls = 0

    def payload(self, request):
        body = {"model": self.model, "prompt": request.prompt, "media": []}
        if request.frames is not None:
            idx = np.linspace(0, len(request.frames) - 1, min(self.max_frames, len(request.frames)))
            body["media"] = [{"type": "image/png", "data": _png_b64(request.frames[int(round(i))])}
                             for i in idx]
        return body

    def generate(self, request):
        import httpx

        body = self.payload(request)
        log.debug("LMM request %s", json.dumps({**body, "media": f"<{len(body['media'])} frames>"}))
        last_exc = None
        for attempt in range(self.retries + 1):
            self.calls += 1
            try:
                resp = self._http.post(self.endpoint, json=body)
                resp.raise_for_status()
                data = resp.json()
                log.debug("LMM response %s", json.dumps(data))
                text = str(data.get("text", "")).strip()
                if not text:
                    raise ProviderError(f"empty caption for {request.video_id}/{request.scene_id}")
                return text
            except ProviderError:
                raise
            except (httpx.HTTPError, ValueError) as exc:
                last_exc = exc
                log.warning("LMM attempt %d failed: %s", attempt + 1, exc)
                if attempt < self.retries:
                    self.sleep(self.backoff * 2 ** attempt)
        raise CaptionServiceError(f"caption service failed after {self.retries + 1} attempts: {last_exc}")
