"""Book cover generator: residual encoder-decoder from layout feature map to
RGB image in [-1, 1].

Contracting path: 7x7/64 stride 1, then 3x3 stride-2 convs at 128, 256, 512,
1024 channels (128 -> 64 -> 32 -> 16 -> 8 spatial).  Ten residual blocks at
1024 channels.  Expanding path: transposed 3x3 stride-2 convs at 512, 256,
128, 64, then a 7x7 conv to 3 channels with tanh.  Instance normalization
throughout except the output layer; reflection padding on the 7x7 layers.
"""

from __future__ import annotations

import torch
from torch import nn


class ResidualBlock(nn.Module):
    """conv-norm-relu-conv-norm plus identity skip; channel count constant."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.norm1 = nn.InstanceNorm2d(channels)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)
        self.norm2 = nn.InstanceNorm2d(channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.norm1(self.conv1(x))
        h = self.norm2(self.conv2(torch.relu(h)))
        return x + h


class CoverGenerator(nn.Module):
    def __init__(self, in_channels: int, base_channels: int = 64, num_res_blocks: int = 10):
        super().__init__()
        self.in_channels = in_channels
        c = base_channels
        self.stem = nn.Sequential(
            nn.ReflectionPad2d(3),
            nn.Conv2d(in_channels, c, 7),
            nn.InstanceNorm2d(c),
            nn.ReLU(),
        )
        downs = []
        for _ in range(4):
            downs.append(
                nn.Sequential(
                    nn.Conv2d(c, c * 2, 3, stride=2, padding=1),
                    nn.InstanceNorm2d(c * 2),
                    nn.ReLU(),
                )
            )
            c *= 2
        self.downs = nn.ModuleList(downs)
        self.blocks = nn.ModuleList([ResidualBlock(c) for _ in range(num_res_blocks)])
        ups = []
        for _ in range(4):
            ups.append(
                nn.Sequential(
                    nn.ConvTranspose2d(c, c // 2, 3, stride=2, padding=1, output_padding=1),
                    nn.InstanceNorm2d(c // 2),
                    nn.ReLU(),
                )
            )
            c //= 2
        self.ups = nn.ModuleList(ups)
        self.head = nn.Sequential(nn.ReflectionPad2d(3), nn.Conv2d(c, 3, 7), nn.Tanh())

    def encoder_trace(self, feature_map: torch.Tensor) -> list[torch.Tensor]:
        """Activations after the stem and each stride-2 stage, for shape checks."""
        x = self.stem(feature_map)
        trace = [x]
        for down in self.downs:
            x = down(x)
            trace.append(x)
        return trace

    def forward(self, feature_map: torch.Tensor) -> torch.Tensor:
        if feature_map.shape[-3] != self.in_channels:
            raise ValueError(
                f"expected {self.in_channels} input channels, got {feature_map.shape[-3]}"
            )
        squeeze = feature_map.dim() == 3
        x = feature_map.unsqueeze(0) if squeeze else feature_map
        x = self.stem(x)
        for down in self.downs:
            x = down(x)
        for block in self.blocks:
            x = block(x)
        for up in self.ups:
            x = up(x)
        x = self.head(x)
        return x.squeeze(0) if squeeze else x
