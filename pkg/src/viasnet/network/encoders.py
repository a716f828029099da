"""Vision (S3D-style) and audio (1-D CNN with feature pyramid) encoders."""

import warnings

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ContractError


class SpatialConv(nn.Module):
    """2-D convolution applied frame by frame, spatial stride 2."""

    def __init__(self, cin, cout, k=3):
        super().__init__()
        self.conv = nn.Conv3d(cin, cout, (1, k, k), stride=(1, 2, 2), padding=(0, k // 2, k // 2))

    def forward(self, x):
        return F.relu(self.conv(x))


class SeparableConv3d(nn.Module):
    """k x k spatial convolution followed by a k-tap temporal convolution."""

    def __init__(self, cin, cout, k=3, temporal_stride=1):
        super().__init__()
        self.spatial = nn.Conv3d(cin, cout, (1, k, k), stride=(1, 2, 2), padding=(0, k // 2, k // 2))
        self.temporal = nn.Conv3d(cout, cout, (k, 1, 1), stride=(temporal_stride, 1, 1), padding=(k // 2, 0, 0))

    def forward(self, x):
        return F.relu(self.temporal(F.relu(self.spatial(x))))


class VisionEncoder(nn.Module):
    """Lower stages 2-D only, upper stages spatio-temporally separable.

    Input (B, T, 3, H, W); returns the per-stage maps as (B, C_i, T_i, H_i, W_i),
    finest first, coarsest last.
    """

    def __init__(self, config):
        super().__init__()
        self.config = config
        stages, cin = [], 3
        for cout, kind, ts in zip(config.vision_channels, config.vision_kinds, config.temporal_strides):
            if kind == "2d":
                if ts != 1:
                    raise ContractError("2-D stages cannot stride in time")
                stages.append(SpatialConv(cin, cout))
            elif kind == "sep":
                stages.append(SeparableConv3d(cin, cout, temporal_stride=ts))
            else:
                raise ContractError(f"unknown stage kind {kind!r}")
            cin = cout
        self.stages = nn.ModuleList(stages)

    def forward(self, frames):
        cfg = self.config
        if frames.dim() != 5 or tuple(frames.shape[2:]) != (3, cfg.height, cfg.width):
            raise ContractError(
                f"expected frames (B, T, 3, {cfg.height}, {cfg.width}), got {tuple(frames.shape)}"
            )
        x = frames.permute(0, 2, 1, 3, 4)
        pyramid = []
        for stage in self.stages:
            x = stage(x)
            pyramid.append(x)
        return pyramid


class AudioEncoder(nn.Module):
    """Seven strided 1-D conv layers plus a top-down pathway with 1x1 lateral merges.

    Input (B, S) raw waveform; returns the merged pyramid (B, fpn_dim, L_i),
    finest first.
    """

    def __init__(self, config):
        super().__init__()
        self.config = config
        layers, cin = [], 1
        for i, (cout, s) in enumerate(zip(config.audio_channels, config.audio_strides)):
            k = 2 * s + 1
            layers.append(nn.Conv1d(cin, cout, k, stride=s, padding=s))
            cin = cout
        self.bottom_up = nn.ModuleList(layers)
        self.lateral = nn.ModuleList(nn.Conv1d(c, config.audio_fpn_dim, 1) for c in config.audio_channels)

    def forward(self, audio):
        if audio.dim() != 2:
            raise ContractError(f"expected audio (B, S), got {tuple(audio.shape)}")
        need = self.config.min_audio_samples
        if audio.shape[1] < need:
            warnings.warn(f"audio of {audio.shape[1]} samples zero-padded to {need}", stacklevel=2)
            extra = need - audio.shape[1]
            audio = F.pad(audio, (extra // 2, extra - extra // 2))
        x = audio[:, None, :]
        feats = []
        for conv in self.bottom_up:
            x = F.relu(conv(x))
            feats.append(x)
        merged = [None] * len(feats)
        top = self.lateral[-1](feats[-1])
        merged[-1] = top
        for i in range(len(feats) - 2, -1, -1):
            up = F.interpolate(top, size=feats[i].shape[-1], mode="linear", align_corners=False)
            top = self.lateral[i](feats[i]) + up
            merged[i] = top
        return merged
