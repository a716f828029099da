from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ContractError

MAP_STATES = ("raw", "minmax", "probability")


@dataclass(frozen=True)
class VideoAdMeta:
    video_id: str
    fps: float
    width: int
    height: int
    n_frames: int
    duration: float
    audio_rate: int

    def __post_init__(self):
        if self.fps <= 0:
            raise ContractError(f"{self.video_id}: fps must be positive")
        if self.n_frames < 1 or self.width < 1 or self.height < 1:
            raise ContractError(f"{self.video_id}: frame count and size must be >= 1")
        if abs(self.duration - self.n_frames / self.fps) > 1.0 / self.fps:
            raise ContractError(f"{self.video_id}: duration disagrees with n_frames/fps")

    def to_dict(self):
        return {
            "video_id": self.video_id,
            "fps": self.fps,
            "width": self.width,
            "height": self.height,
            "n_frames": self.n_frames,
            "duration": self.duration,
            "audio_rate": self.audio_rate,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            video_id=str(d["video_id"]),
            fps=float(d["fps"]),
            width=int(d["width"]),
            height=int(d["height"]),
            n_frames=int(d["n_frames"]),
            duration=float(d["duration"]),
            audio_rate=int(d["audio_rate"]),
        )


@dataclass
class SceneClip:
    scene_id: int
    start_frame: int
    end_frame: int
    frames: np.ndarray  # (T, 3, H, W), normalized
    audio: np.ndarray  # (S,), in [-1, 1]
    caption: Optional[str] = None
    fps: float = 24.0

    def __post_init__(self):
        if self.start_frame > self.end_frame:
            raise ContractError("scene start after end")
        if self.frames.shape[0] != self.n_frames:
            raise ContractError(
                f"scene {self.scene_id}: {self.frames.shape[0]} frames for range "
                f"[{self.start_frame}, {self.end_frame}]"
            )

    @property
    def n_frames(self):
        return self.end_frame - self.start_frame + 1

    @property
    def duration(self):
        return self.n_frames / self.fps


@dataclass(frozen=True)
class GazeSample:
    t: float
    x: float
    y: float
    viewer_id: str
    eye: str


@dataclass(frozen=True)
class FixationRecord:
    video_id: str
    frame_idx: int
    viewer_id: str
    eye: str
    x: float
    y: float


@dataclass
class SaliencyMap:
    values: np.ndarray
    state: str = "raw"

    def __post_init__(self):
        if self.state not in MAP_STATES:
            raise ContractError(f"unknown map state {self.state!r}")
        if self.values.ndim != 2:
            raise ContractError(f"saliency map must be 2-D, got shape {self.values.shape}")

    def require(self, state):
        if self.state != state:
            raise ContractError(f"expected a {state} map, got {self.state}")
        return self


@dataclass
class VideoEntry:
    meta: VideoAdMeta
    files: dict = field(default_factory=dict)


@dataclass
class CorpusManifest:
    videos: list
    split: dict = field(default_factory=lambda: {"train": [], "test": []})
    seed: int = 0
    profile: str = "desk"
    root: Optional[str] = None  # directory the relative file paths resolve against

    def video(self, video_id):
        for v in self.videos:
            if v.meta.video_id == video_id:
                return v
        raise KeyError(video_id)

    @property
    def video_ids(self):
        return [v.meta.video_id for v in self.videos]
