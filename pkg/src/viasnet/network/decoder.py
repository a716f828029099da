import torch.nn.functional as F
from torch import nn

from ..errors import ContractError


class TemporalUpsample(nn.Module):
    """Parameter-free trilinear resize to a target (T, H, W)."""

    def forward(self, x, size):
        if tuple(x.shape[-3:]) == tuple(size):
            return x
        return F.interpolate(x, size=size, mode="trilinear", align_corners=False)


class Decoder(nn.Module):
    """Transposed-convolution upsampling path with additive skips.

    Stage ``k`` doubles the spatial size, resizes time to match its skip, adds
    the encoder map of that resolution (the last stage, at input resolution,
    has none), then applies one unified-attention pass.
    """

    def __init__(self, config, attention_site_offset=1):
        super().__init__()
        chans = list(config.vision_channels)
        n = len(chans)
        self.n_stages = n
        outs = [chans[n - 2 - k] for k in range(n - 1)] + [config.readout_channels]
        ins = [chans[-1]] + outs[:-1]
        self.out_channels = outs
        self.up = nn.ModuleList(
            nn.ConvTranspose3d(ci, co, (1, 4, 4), stride=(1, 2, 2), padding=(0, 1, 1)) for ci, co in zip(ins, outs)
        )
        self.temporal = TemporalUpsample()
        self.site_offset = attention_site_offset

    def forward(self, fused, skips, out_size, attention=None, context=None, context_padding=None):
        """``skips`` is the vision pyramid (finest first); ``out_size`` is the input (T, H, W)."""
        if len(skips) != self.n_stages:
            raise ContractError(f"decoder has {self.n_stages} stages but got {len(skips)} skip maps")
        x = fused
        for k, up in enumerate(self.up):
            x = F.relu(up(x))
            skip = skips[self.n_stages - 2 - k] if k < self.n_stages - 1 else None
            target = tuple(skip.shape[-3:]) if skip is not None else tuple(out_size)
            x = self.temporal(x, target)
            if skip is not None:
                x = x + skip
            if attention is not None:
                x = attention(x, self.site_offset + k, context, context_padding)
        return x
