"""The full network: encoders -> unified attention -> decoder -> readout -> output stage."""

from __future__ import annotations

import io
import json

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ContractError
from .config import AblationMask, ModelConfig
from .decoder import Decoder
from .encoders import AudioEncoder, VisionEncoder
from .fusion import ModalityContext, UnifiedAttention
from .head import CenterBiasBlur, Readout


class ViASNet(nn.Module):
    def __init__(self, config=None, mask=None):
        super().__init__()
        from ..captions.text import TextEncoder  # captions.text itself imports network.attention

        self.config = config = config or ModelConfig()
        self.mask = mask = mask or AblationMask()
        self.vision = VisionEncoder(config)
        self.audio = AudioEncoder(config) if mask.audio_attention else None
        self.text = (TextEncoder(config.text_dim, config.text_layers, config.text_heads, config.max_tokens)
                     if mask.caption_attention else None)
        self.context = ModalityContext(config, mask)
        self.decoder = Decoder(config)
        sites = [config.vision_channels[-1]] + self.decoder.out_channels
        self.attention = UnifiedAttention(config, sites)
        self.readout = Readout(config.readout_channels, config.readout_mid, mask.readout)
        self.output = CenterBiasBlur(config.height, config.width, config.centerbias_sigma, config.blur_sigma,
                                     config.blur_radius, mask.centerbias, mask.blur)

    def encode_context(self, audio, captions):
        pyramid = self.audio(audio) if self.audio is not None else None
        tokens = padding = None
        if self.text is not None:
            if captions is None:
                raise ContractError("caption attention enabled but no captions given")
            tokens, _, padding = self.text.encode_texts([c or "" for c in captions])
        return self.context(pyramid, tokens, padding)

    def features(self, frames, audio=None, captions=None):
        """Decoder output (B, T, C_r, H, W) for a clip whose length fits the stride plan."""
        skips = self.vision(frames)
        context, padding = self.encode_context(audio, captions)
        fused = self.attention(skips[-1], 0, context, padding)
        b, t = frames.shape[:2]
        out = self.decoder(fused, skips, (t, self.config.height, self.config.width), self.attention, context, padding)
        return out.permute(0, 2, 1, 3, 4)

    def logits(self, frames, audio=None, captions=None):
        feats = self.features(frames, audio, captions)
        b, t = feats.shape[:2]
        return self.readout(feats.reshape(b * t, *feats.shape[2:])).reshape(b, t, 1, *feats.shape[-2:])

    def _forward_clip(self, frames, audio, captions):
        b, t = frames.shape[:2]
        f = self.config.temporal_factor
        pad = (-t) % f
        if pad:
            frames = torch.cat([frames, frames[:, -1:].expand(b, pad, *frames.shape[2:])], dim=1)
            if audio is not None:
                extra = round(audio.shape[1] * pad / t)
                audio = F.pad(audio, (0, extra))
        logits = self.logits(frames, audio, captions)
        n = logits.shape[0] * logits.shape[1]
        probs = self.output(logits.reshape(n, 1, *logits.shape[-2:])).reshape(b, -1, *logits.shape[-2:])
        return probs[:, :t]

    def forward(self, frames, audio=None, captions=None):
        """Per-frame probability maps (B, T, H, W).

        Clips longer than ``t_max`` are processed in overlapping chunks and
        averaged where chunks overlap.
        """
        cfg = self.config
        if frames.dim() != 5:
            raise ContractError(f"expected frames (B, T, 3, H, W), got {tuple(frames.shape)}")
        t = frames.shape[1]
        if t <= cfg.t_max:
            return self._forward_clip(frames, audio, captions)
        step = cfg.t_max - cfg.chunk_overlap
        starts = list(range(0, t - cfg.t_max + 1, step))
        if starts[-1] + cfg.t_max < t:
            starts.append(t - cfg.t_max)
        total = frames.new_zeros(frames.shape[0], t, cfg.height, cfg.width)
        count = frames.new_zeros(1, t, 1, 1)
        for s in starts:
            e = s + cfg.t_max
            a = None
            if audio is not None:
                a0, a1 = round(audio.shape[1] * s / t), round(audio.shape[1] * e / t)
                a = audio[:, a0:a1]
            total[:, s:e] += self._forward_clip(frames[:, s:e], a, captions)
            count[:, s:e] += 1
        return total / count


def build_model(config=None, mask=None, seed=0, dtype=torch.float32):
    torch.manual_seed(seed)
    return ViASNet(config, mask).to(dtype)


def param_count(config=None, mask=None):
    model = ViASNet(config, mask)
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def save_checkpoint(path, model, step=0):
    """Single archive: named tensors, model config, ablation mask, step counter."""
    state = {k: v.detach().cpu().clone() for k, v in model.state_dict().items()}
    payload = {
        "state_dict": state,
        "model_config": model.config.to_json(),
        "ablation_mask": model.mask.to_json(),
        "step": int(step),
        "dtype": str(next(model.parameters()).dtype),
    }
    buf = io.BytesIO()
    torch.save(payload, buf)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path):
    """Returns ``(model, step)``."""
    payload = torch.load(path, map_location="cpu", weights_only=True)
    config = ModelConfig.from_json(payload["model_config"])
    mask = AblationMask.from_json(payload["ablation_mask"])
    model = ViASNet(config, mask)
    dtype = getattr(torch, payload.get("dtype", "torch.float32").split(".")[-1])
    model.to(dtype)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload["step"]
