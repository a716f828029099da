"""Unified attention over concatenated visual, audio and caption tokens."""

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ContractError
from .attention import TransformerBlock


class ModalityContext(nn.Module):
    """Projects audio and caption features into the fusion space.

    Only the branches enabled by the mask are built, so an ablated modality
    contributes no parameters.
    """

    def __init__(self, config, mask):
        super().__init__()
        d = config.fusion_dim
        self.max_audio_tokens = config.audio_tokens
        self.audio_proj = self.audio_pos = self.audio_type = None
        self.text_proj = self.text_type = None
        if mask.audio_attention:
            self.audio_proj = nn.Linear(config.audio_fpn_dim, d)
            self.audio_pos = nn.Parameter(torch.randn(config.audio_tokens, d) * 0.02)
            self.audio_type = nn.Parameter(torch.randn(d) * 0.02)
        if mask.caption_attention:
            self.text_proj = nn.Linear(config.text_dim, d)
            self.text_type = nn.Parameter(torch.randn(d) * 0.02)

    def forward(self, audio_pyramid=None, text_tokens=None, text_padding=None):
        """Returns ``(context (B, N, D) or None, padding mask (B, N) or None)``."""
        parts, masks = [], []
        if self.audio_proj is not None:
            if audio_pyramid is None:
                raise ContractError("audio attention enabled but no audio features given")
            a = audio_pyramid[0]
            n = min(self.max_audio_tokens, a.shape[-1])
            a = F.adaptive_avg_pool1d(a, n).transpose(1, 2)
            parts.append(self.audio_proj(a) + self.audio_pos[:n] + self.audio_type)
            masks.append(torch.zeros(a.shape[:2], dtype=torch.bool, device=a.device))
        if self.text_proj is not None:
            if text_tokens is None:
                raise ContractError("caption attention enabled but no caption features given")
            parts.append(self.text_proj(text_tokens) + self.text_type)
            masks.append(text_padding)
        if not parts:
            return None, None
        return torch.cat(parts, dim=1), torch.cat(masks, dim=1)


class UnifiedAttention(nn.Module):
    """One transformer block shared by every fusion site.

    Visual tokens and context tokens are attended jointly, which covers the
    visual-visual, visual-audio, audio-caption, ... pairs in a single pass.
    Each site has its own in/out projections between its channel width and
    the fusion width; the update is added residually.
    """

    def __init__(self, config, site_channels):
        super().__init__()
        d = config.fusion_dim
        self.grid = tuple(config.attention_grid)
        self.block = TransformerBlock(d, config.fusion_heads)
        self.visual_type = nn.Parameter(torch.randn(d) * 0.02)
        self.site_in = nn.ModuleList(nn.Linear(c, d) for c in site_channels)
        self.site_out = nn.ModuleList(nn.Linear(d, c) for c in site_channels)

    def joint(self, tokens, context=None, context_padding=None, return_weights=False):
        """Attend over ``[tokens, context]``; returns the updated visual slice."""
        n = tokens.shape[1]
        if context is None:
            seq, mask = tokens, None
        else:
            seq = torch.cat([tokens, context], dim=1)
            pad = torch.zeros(tokens.shape[:2], dtype=torch.bool, device=tokens.device)
            mask = torch.cat([pad, context_padding], dim=1)
        out, weights = self.block(seq, mask, return_weights=True)
        return (out[:, :n], weights) if return_weights else out[:, :n]

    def forward(self, x, site, context=None, context_padding=None):
        """``x`` is (B, C, T, H, W). Attention runs on a grid pooled to at most ``attention_grid``."""
        b, c, t, h, w = x.shape
        gh, gw = min(h, self.grid[0]), min(w, self.grid[1])
        pooled = F.adaptive_avg_pool3d(x, (t, gh, gw)) if (gh, gw) != (h, w) else x
        tokens = pooled.flatten(2).transpose(1, 2)
        if tokens.shape[-1] != self.site_in[site].in_features:
            raise ContractError(f"site {site} expects {self.site_in[site].in_features} channels, got {c}")
        z = self.site_in[site](tokens) + self.visual_type
        y = self.joint(z, context, context_padding)
        delta = self.site_out[site](y).transpose(1, 2).reshape(b, c, t, gh, gw)
        if (gh, gw) != (h, w):
            delta = F.interpolate(delta, size=(t, h, w), mode="trilinear", align_corners=False)
        return x + delta
