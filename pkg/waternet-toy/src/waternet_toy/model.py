"""Encoder/decoder segmentation network for waterway probability maps.

The U is asymmetric: five 2x downsampling encoders but only four
decoders, so the output sits at half the input resolution. Channel
widths double per encoder from ``base_width`` (16 by default, so the
deepest tensor is 512 channels at 1/32 resolution). All normalization
is instance normalization; inputs must be divisible by 32.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn


class InstanceNorm(nn.Module):
    """Affine instance normalization over the spatial axes.

    Unlike the built-in module it stays defined on 1x1 feature maps
    (zero variance normalizes to the bias), which 32x32 inputs reach at
    the deepest encoder.
    """

    def __init__(self, channels: int, eps: float = 1e-5):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))
        self.eps = eps

    def forward(self, x):
        mean = x.mean(dim=(2, 3), keepdim=True)
        var = x.var(dim=(2, 3), keepdim=True, unbiased=False)
        y = (x - mean) / torch.sqrt(var + self.eps)
        return y * self.weight.view(1, -1, 1, 1) + self.bias.view(1, -1, 1, 1)


def instance_norm(channels: int) -> nn.Module:
    return InstanceNorm(channels)

# Multiplication-block kernel sizes by depth in the U (shallow levels use
# wider kernels; the final block is always 3x3).
_KERNELS_BY_LEVEL = {0: (7, 5, 3), 1: (5, 3, 3)}
_DEFAULT_KERNELS = (3, 3, 3)


@dataclass(frozen=True)
class ModelSpec:
    input_channels: int = 10
    base_width: int = 16
    encoder_count: int = 5
    decoder_count: int = 4

    def __post_init__(self):
        if self.input_channels < 1 or self.base_width < 1:
            raise ValueError("input_channels and base_width must be positive")
        if self.decoder_count != self.encoder_count - 1:
            raise ValueError("the U is asymmetric: decoder_count must be encoder_count - 1")

    @property
    def downsample_factor(self) -> int:
        return 2**self.encoder_count


def _kernels(level: int) -> tuple[int, int, int]:
    return _KERNELS_BY_LEVEL.get(level, _DEFAULT_KERNELS)


class GatedStem(nn.Module):
    """Per-pixel channel mixing with a learned sigmoid gate."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.value = nn.Conv2d(in_channels, out_channels, 1)
        self.gate = nn.Conv2d(in_channels, out_channels, 1)

    def forward(self, x):
        return self.value(x) * torch.sigmoid(self.gate(x))


class ConvBlock(nn.Module):
    """conv(n) -> LeakyReLU -> conv(n), zero padded to keep the size."""

    def __init__(self, in_channels: int, out_channels: int, kernel: int):
        super().__init__()
        pad = kernel // 2
        self.net = nn.Sequential(
            nn.Conv2d(in_channels, out_channels, kernel, padding=pad),
            nn.LeakyReLU(inplace=True),
            nn.Conv2d(out_channels, out_channels, kernel, padding=pad),
        )

    def forward(self, x):
        return self.net(x)


class ResidualLayer(nn.Module):
    def __init__(self, channels: int, kernel: int = 3):
        super().__init__()
        pad = kernel // 2
        self.conv1 = nn.Conv2d(channels, channels, kernel, padding=pad)
        self.conv2 = nn.Conv2d(channels, channels, kernel, padding=pad)
        self.act = nn.LeakyReLU(inplace=True)
        self.norm = instance_norm(channels)

    def forward(self, x):
        return self.norm(x + self.conv2(self.act(self.conv1(x))))


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.net = nn.Sequential(*(ResidualLayer(channels) for _ in range(3)))

    def forward(self, x):
        return self.net(x)


class MultiplicationBlock(nn.Module):
    """Three stacked conv blocks gating the unchanged input (GLU-like,
    but the input is multiplied in without its own transformation)."""

    def __init__(self, channels: int, kernels: tuple[int, int, int]):
        super().__init__()
        self.net = nn.Sequential(
            ConvBlock(channels, channels, kernels[0]),
            ConvBlock(channels, channels, kernels[1]),
            ConvBlock(channels, channels, kernels[2]),
        )

    def forward(self, x):
        return self.net(x) * x


class Encoder(nn.Module):
    """Halve the grid, double the channels."""

    def __init__(self, channels: int, level: int):
        super().__init__()
        self.down = nn.Conv2d(channels, channels, 2, stride=2)
        self.norm_in = instance_norm(channels)
        self.mult = MultiplicationBlock(channels, _kernels(level))
        self.residual = ResidualBlock(channels)
        self.norm_mult = instance_norm(channels)
        self.norm_res = instance_norm(channels)
        self.out = nn.Conv2d(3 * channels, 2 * channels, 1)

    def forward(self, x):
        base = self.norm_in(self.down(x))
        merged = torch.cat(
            [base, self.norm_mult(self.mult(base)), self.norm_res(self.residual(base))], dim=1
        )
        return self.out(merged)


class Decoder(nn.Module):
    """Double the grid, merge the skip, halve the channels."""

    def __init__(self, channels: int, level: int):
        # ``channels`` is Ch in the shape contract: input is 2Ch, skip Ch.
        super().__init__()
        self.up = nn.ConvTranspose2d(2 * channels, channels, 2, stride=2)
        self.norm_up = instance_norm(channels)
        self.mult = MultiplicationBlock(2 * channels, _kernels(level))
        self.residual = ResidualBlock(2 * channels)
        self.norm_mult = instance_norm(2 * channels)
        self.norm_res = instance_norm(2 * channels)
        self.merge = nn.Conv2d(4 * channels, 2 * channels, 1)
        self.norm_merge = instance_norm(2 * channels)
        self.refine = ConvBlock(2 * channels, channels, 3)
        self.norm_out = instance_norm(channels)

    def forward(self, x, skip):
        base = torch.cat([self.norm_up(self.up(x)), skip], dim=1)
        merged = torch.cat(
            [self.norm_mult(self.mult(base)), self.norm_res(self.residual(base))], dim=1
        )
        merged = self.norm_merge(self.merge(merged))
        return self.norm_out(self.refine(merged))


class WaterNetToy(nn.Module):
    """Full network: gated stem, five encoders, four decoders, 1x1 head.

    ``forward`` returns probabilities of shape (N, 1, R/2, C/2).
    """

    def __init__(self, spec: ModelSpec = ModelSpec()):
        super().__init__()
        self.spec = spec
        w = spec.base_width
        self.stem = GatedStem(spec.input_channels, w)
        self.encoders = nn.ModuleList(
            Encoder(w * 2**i, level=i) for i in range(spec.encoder_count)
        )
        self.decoders = nn.ModuleList(
            Decoder(w * 2 ** (spec.encoder_count - 1 - i), level=spec.encoder_count - 1 - i)
            for i in range(spec.decoder_count)
        )
        self.head = nn.Conv2d(2 * w, 1, 1)

    def _check_size(self, x):
        factor = self.spec.downsample_factor
        if x.dim() != 4 or x.shape[1] != self.spec.input_channels:
            raise ValueError(
                f"expected (N, {self.spec.input_channels}, R, C) input, got {tuple(x.shape)}"
            )
        if x.shape[2] % factor or x.shape[3] % factor:
            raise ValueError(
                f"input rows/cols must be divisible by {factor}, got {tuple(x.shape[2:])}"
            )

    def forward(self, x, return_intermediates: bool = False):
        self._check_size(x)
        outputs = [self.stem(x)]
        for encoder in self.encoders:
            outputs.append(encoder(outputs[-1]))
        current = outputs[-1]
        for i, decoder in enumerate(self.decoders):
            skip = outputs[self.spec.encoder_count - 1 - i]
            current = decoder(current, skip)
            outputs.append(current)
        logits = self.head(current)
        outputs.append(logits)
        probabilities = torch.sigmoid(logits)
        if return_intermediates:
            return probabilities, outputs
        return probabilities


def build_model(spec: ModelSpec = ModelSpec()) -> WaterNetToy:
    return WaterNetToy(spec)


def expected_shapes(spec: ModelSpec, rows: int, cols: int) -> list[tuple[int, int, int]]:
    """Per-layer output shapes: stem, encoders, decoders, head."""
    w = spec.base_width
    shapes = [(w, rows, cols)]
    for i in range(1, spec.encoder_count + 1):
        shapes.append((w * 2**i, rows // 2**i, cols // 2**i))
    for i in range(1, spec.decoder_count + 1):
        level = spec.encoder_count - i
        shapes.append((w * 2**level, rows // 2**level, cols // 2**level))
    shapes.append((1, rows // 2, cols // 2))
    return shapes
