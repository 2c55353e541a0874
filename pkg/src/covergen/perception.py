"""Frozen VGG-style feature extractor backing the perceptual content loss.

The content loss compares activations at the first four pooling stages.  Two
weight sources are supported: "random" (seeded, reproducible; adequate for
the desk-scale property checks) and "torchvision", which copies the
pretrained VGG-16 convolution weights and normalizes inputs to ImageNet
statistics.  The network is never trained and is excluded from optimizer
state.
"""

from __future__ import annotations

import torch
from torch import nn

from .utils import init_network_


class PerceptionUnavailableError(RuntimeError):
    """Raised at startup when the configured feature extractor cannot be built."""


# VGG-16 plan up to the fourth pooling stage ("M" = max pool).
_PLAN = (64, 64, "M", 128, 128, "M", 256, 256, 256, "M", 512, 512, 512, "M")

_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)


class PerceptionNetwork(nn.Module):
    def __init__(self, weights: str = "random", seed: int = 0):
        super().__init__()
        if weights not in ("random", "torchvision"):
            raise PerceptionUnavailableError(f"unknown perception weights source {weights!r}")
        self.weights_source = weights
        layers: list[nn.Module] = []
        self._pool_indices: list[int] = []
        in_ch = 3
        for item in _PLAN:
            if item == "M":
                layers.append(nn.MaxPool2d(2, 2))
                self._pool_indices.append(len(layers) - 1)
            else:
                layers.append(nn.Conv2d(in_ch, item, 3, padding=1))
                layers.append(nn.ReLU())
                in_ch = item
        self.features = nn.Sequential(*layers)
        if weights == "random":
            gen = torch.Generator().manual_seed(seed)
            init_network_(self.features, gen)
        else:
            self._load_torchvision()
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def _load_torchvision(self) -> None:
        try:
            from torchvision.models import VGG16_Weights, vgg16

            pretrained = vgg16(weights=VGG16_Weights.IMAGENET1K_V1).features
        except Exception as exc:
            raise PerceptionUnavailableError(
                f"pretrained VGG-16 feature extractor unavailable: {exc}"
            ) from exc
        ours = [m for m in self.features if isinstance(m, nn.Conv2d)]
        theirs = [m for m in pretrained if isinstance(m, nn.Conv2d)][: len(ours)]
        with torch.no_grad():
            for dst, src in zip(ours, theirs):
                dst.weight.copy_(src.weight)
                dst.bias.copy_(src.bias)

    def train(self, mode: bool = True):
        return super().train(False)  # permanently frozen

    def forward(self, images: torch.Tensor) -> list[torch.Tensor]:
        """Images in [-1, 1]; returns the four pooled feature maps."""
        x = images
        if self.weights_source == "torchvision":
            mean = x.new_tensor(_IMAGENET_MEAN).view(1, 3, 1, 1)
            std = x.new_tensor(_IMAGENET_STD).view(1, 3, 1, 1)
            x = ((x + 1) * 0.5 - mean) / std
        outputs = []
        for i, layer in enumerate(self.features):
            x = layer(x)
            if i in self._pool_indices:
                outputs.append(x)
        return outputs
