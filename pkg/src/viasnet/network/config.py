from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace

from ..errors import ContractError
from ..profiles import profile_dims


@dataclass(frozen=True)
class AblationMask:
    audio_attention: bool = True
    caption_attention: bool = True
    readout: bool = True
    blur: bool = True
    centerbias: bool = True

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


# Table-layout order; the first entry is the full model.
ABLATIONS = {
    "Full": AblationMask(),
    "-Audio Attention": AblationMask(audio_attention=False),
    "-Caption Attention": AblationMask(caption_attention=False),
    "-Both Attention": AblationMask(audio_attention=False, caption_attention=False),
    "-Readout": AblationMask(readout=False),
    "-Blurring": AblationMask(blur=False),
}


@dataclass(frozen=True)
class ModelConfig:
    profile: str = "desk"
    height: int = 56
    width: int = 96
    fps: float = 24.0
    audio_rate: int = 8000
    vision_channels: tuple = (16, 32, 64)
    vision_kinds: tuple = ("2d", "2d", "sep")
    temporal_strides: tuple = (1, 1, 2)
    audio_channels: tuple = (8, 16, 16, 32, 32, 32, 32)
    audio_strides: tuple = (4, 2, 2, 2, 2, 2, 2)
    audio_fpn_dim: int = 32
    audio_tokens: int = 64
    text_dim: int = 64
    text_layers: int = 2
    text_heads: int = 4
    max_tokens: int = 64
    fusion_dim: int = 64
    fusion_heads: int = 4
    attention_grid: tuple = (7, 12)
    readout_channels: int = 32
    readout_mid: int = 8
    centerbias_sigma: float = 14.0
    blur_sigma: float = 3.0
    blur_radius: int = 8
    t_max: int = 32
    chunk_overlap: int = 8

    def __post_init__(self):
        n = len(self.vision_channels)
        if not (len(self.vision_kinds) == len(self.temporal_strides) == n):
            raise ContractError("vision stage plan lengths differ")
        if len(self.audio_channels) != 7 or len(self.audio_strides) != 7:
            raise ContractError("the audio encoder has exactly 7 bottom-up layers")
        if self.height % 2 ** n or self.width % 2 ** n:
            raise ContractError(f"frame size {self.height}x{self.width} not divisible by 2^{n}")
        for f in fields(self):
            v = getattr(self, f.name)
            vals = v if isinstance(v, tuple) else (v,)
            if any(isinstance(x, (int, float)) and not isinstance(x, bool) and x <= 0 for x in vals):
                raise ContractError(f"{f.name} must be positive, got {v}")
        if self.chunk_overlap >= self.t_max:
            raise ContractError("chunk_overlap must be smaller than t_max")

    @property
    def n_stages(self):
        return len(self.vision_channels)

    @property
    def temporal_factor(self):
        out = 1
        for s in self.temporal_strides:
            out *= s
        return out

    @property
    def min_audio_samples(self):
        out = 1
        for s in self.audio_strides:
            out *= s
        return out

    @classmethod
    def for_profile(cls, profile, **overrides):
        h, w = profile_dims(profile)
        if profile == "paper":
            base = cls(
                profile="paper", height=h, width=w, audio_rate=16000,
                vision_channels=(64, 192, 480, 832), vision_kinds=("2d", "2d", "sep", "sep"),
                temporal_strides=(1, 1, 2, 2), audio_channels=(16, 32, 64, 128, 256, 256, 256),
                audio_fpn_dim=256, text_dim=768, text_layers=12, text_heads=12, fusion_dim=128,
                fusion_heads=4, attention_grid=(14, 24), readout_channels=256, readout_mid=64,
                centerbias_sigma=0.25 * min(h, w), blur_sigma=3.0, blur_radius=12, t_max=96,
            )
        else:
            base = cls(profile=profile, height=h, width=w, centerbias_sigma=0.25 * min(h, w))
        return replace(base, **overrides)

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})
