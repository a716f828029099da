"""Readout bottleneck and the centre-bias / blur / softmax output stage."""

import math

import torch
import torch.nn.functional as F
from torch import nn


def inverse_softplus(y):
    return y + math.log(-math.expm1(-y))


class Readout(nn.Module):
    """1x1 reduce, 3x3, 1x1 transposed restore, residual add, then 1x1 to one channel.

    With ``use_bottleneck=False`` only the final projection exists.
    """

    def __init__(self, channels, mid, use_bottleneck=True):
        super().__init__()
        self.reduce = self.spatial = self.restore = None
        if use_bottleneck:
            self.reduce = nn.Conv2d(channels, mid, 1)
            self.spatial = nn.Conv2d(mid, mid, 3, padding=1)
            self.restore = nn.ConvTranspose2d(mid, channels, 1)
        self.project = nn.Conv2d(channels, 1, 1)

    def trace(self, x):
        """Feature maps after each layer, for inspecting the channel plan."""
        out = []
        if self.reduce is not None:
            h = F.relu(self.reduce(x))
            out.append(h)
            h = F.relu(self.spatial(h))
            out.append(h)
            h = self.restore(h)
            out.append(h)
            x = F.relu(x + h)
        out.append(self.project(x))
        return out

    def forward(self, x):
        return self.trace(x)[-1]


def bottleneck_params(channels, mid):
    return (channels * mid + mid) + (9 * mid * mid + mid) + (mid * channels + channels)


class CenterBiasBlur(nn.Module):
    """Adds a trainable central Gaussian, blurs with a trainable Gaussian, softmaxes per frame."""

    def __init__(self, height, width, centerbias_sigma, blur_sigma, blur_radius, use_centerbias=True, use_blur=True):
        super().__init__()
        self.height, self.width, self.radius = height, width, blur_radius
        self.amplitude = self.center_sigma_raw = self.blur_sigma_raw = None
        if use_centerbias:
            self.amplitude = nn.Parameter(torch.tensor(1.0))
            self.center_sigma_raw = nn.Parameter(torch.tensor(inverse_softplus(centerbias_sigma)))
        if use_blur:
            self.blur_sigma_raw = nn.Parameter(torch.tensor(inverse_softplus(blur_sigma)))

    @property
    def center_sigma(self):
        return F.softplus(self.center_sigma_raw)

    @property
    def blur_sigma(self):
        return F.softplus(self.blur_sigma_raw)

    def centerbias(self, dtype, device):
        ys = torch.arange(self.height, dtype=dtype, device=device) + 0.5 - self.height / 2.0
        xs = torch.arange(self.width, dtype=dtype, device=device) + 0.5 - self.width / 2.0
        r2 = ys[:, None] ** 2 + xs[None, :] ** 2
        return self.amplitude * torch.exp(-r2 / (2 * self.center_sigma ** 2))

    def blur(self, x):
        """Separable Gaussian blur of (N, 1, H, W) with a normalized, truncated kernel."""
        k = torch.arange(-self.radius, self.radius + 1, dtype=x.dtype, device=x.device)
        g = torch.exp(-(k ** 2) / (2 * self.blur_sigma ** 2))
        g = g / g.sum()
        r = self.radius
        x = F.conv2d(F.pad(x, (r, r, 0, 0), mode="replicate"), g.view(1, 1, 1, -1))
        return F.conv2d(F.pad(x, (0, 0, r, r), mode="replicate"), g.view(1, 1, -1, 1))

    def forward(self, logits):
        """(N, 1, H, W) logits -> (N, H, W) per-frame probability maps."""
        x = logits
        if self.amplitude is not None:
            x = x + self.centerbias(x.dtype, x.device)
        if self.blur_sigma_raw is not None:
            x = self.blur(x)
        n = x.shape[0]
        return F.softmax(x.reshape(n, -1), dim=-1).reshape(n, self.height, self.width)
