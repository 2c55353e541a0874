"""The four adversarial discriminators.

Mask: conditional least-squares patch discriminator over 32x32 masks, with
the object category injected as a spatially broadcast embedding.

Layout: judges (layout map, image) pairs; two identical conv streams, the
second fed an average-pooled (half resolution) copy, patch scores averaged.

Book: unconditional patch discriminator over full covers (sigmoid built in).

Object: 64x64 crop discriminator whose head emits one logit per category;
the score for a crop is the logit indexed by its category id.

Mask and layout discriminators expose their intermediate activations for
the feature-matching losses.  The prediction layer is excluded: its output
is a score, not a feature map, and matching it would couple the generator
to the unbounded score growth of a winning discriminator.
"""

from __future__ import annotations

import torch
from torch import nn


def _conv_block(in_ch: int, out_ch: int, kernel: int, stride: int, norm: str | None) -> nn.Sequential:
    layers: list[nn.Module] = [nn.Conv2d(in_ch, out_ch, kernel, stride=stride, padding=(kernel - 1) // 2)]
    if norm == "instance":
        layers.append(nn.InstanceNorm2d(out_ch))
    elif norm == "batch":
        layers.append(nn.BatchNorm2d(out_ch))
    layers.append(nn.LeakyReLU(0.2))
    return nn.Sequential(*layers)


class MaskDiscriminator(nn.Module):
    def __init__(self, num_categories: int, cond_dim: int = 128, mask_size: int = 32):
        super().__init__()
        self.mask_size = mask_size
        self.condition_table = nn.Embedding(num_categories, cond_dim)
        self.blocks = nn.ModuleList(
            [
                _conv_block(1 + cond_dim, 64, 3, 2, "instance"),
                _conv_block(64, 128, 3, 2, "instance"),
                _conv_block(128, 256, 3, 1, "instance"),
                _conv_block(256, 1, 3, 1, None),
            ]
        )
        self.pool = nn.AvgPool2d(3, stride=2)

    def forward(self, masks: torch.Tensor, category_ids: torch.Tensor, return_features: bool = False):
        if masks.dim() == 3:
            masks = masks.unsqueeze(1)
        cond = self.condition_table(category_ids)
        cond = cond.view(*cond.shape, 1, 1).expand(-1, -1, masks.shape[-2], masks.shape[-1])
        x = torch.cat([masks, cond], dim=1)
        features = []
        for block in self.blocks[:-1]:
            x = block(x)
            features.append(x)
        scores = self.pool(self.blocks[-1](x))
        if return_features:
            return scores, features
        return scores


class _PatchStream(nn.Module):
    """Five 4x4 stride-2 convs: 64, 128, 256, 512 (leaky ReLU, instance norm
    from the second layer on) and a final linear 1-filter conv."""

    def __init__(self, in_channels: int, base: int = 64):
        super().__init__()
        self.blocks = nn.ModuleList(
            [
                _conv_block(in_channels, base, 4, 2, None),
                _conv_block(base, base * 2, 4, 2, "instance"),
                _conv_block(base * 2, base * 4, 4, 2, "instance"),
                _conv_block(base * 4, base * 8, 4, 2, "instance"),
            ]
        )
        self.score_conv = nn.Conv2d(base * 8, 1, 4, stride=2, padding=1)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        features = []
        for block in self.blocks:
            x = block(x)
            features.append(x)
        score = self.score_conv(x)
        return score, features


class LayoutDiscriminator(nn.Module):
    def __init__(self, layout_channels: int, base: int = 64):
        super().__init__()
        in_channels = layout_channels + 3
        self.stream_full = _PatchStream(in_channels, base)
        self.stream_half = _PatchStream(in_channels, base)
        self.downsample = nn.AvgPool2d(3, stride=2, padding=1)

    def forward(
        self, layout_map: torch.Tensor, image: torch.Tensor, return_features: bool = False
    ):
        x = torch.cat([layout_map, image], dim=1)
        score_full, feats_full = self.stream_full(x)
        score_half, feats_half = self.stream_half(self.downsample(x))
        score = 0.5 * (score_full.mean(dim=(1, 2, 3)) + score_half.mean(dim=(1, 2, 3)))
        if return_features:
            return score, feats_full + feats_half
        return score


class BookCoverDiscriminator(nn.Module):
    """Outputs per-patch probabilities (sigmoid is part of the network)."""

    def __init__(self, base: int = 64):
        super().__init__()
        self.blocks = nn.Sequential(
            _conv_block(3, base, 4, 2, None),
            _conv_block(base, base * 2, 4, 2, "batch"),
            _conv_block(base * 2, base * 4, 4, 2, "batch"),
            _conv_block(base * 4, base * 8, 4, 2, "batch"),
            _conv_block(base * 8, base * 8, 4, 2, "batch"),
        )
        self.score_conv = nn.Conv2d(base * 8, 1, 4, stride=2, padding=1)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.score_conv(self.blocks(images)))


class ObjectDiscriminator(nn.Module):
    """Per-category scores: the final FC emits one logit per category and a
    crop is scored by the logit at its category id."""

    def __init__(self, num_categories: int, crop_size: int = 64, base: int = 64):
        super().__init__()
        self.crop_size = crop_size
        self.blocks = nn.Sequential(
            _conv_block(3, base, 4, 2, None),
            _conv_block(base, base * 2, 4, 2, "batch"),
            _conv_block(base * 2, base * 4, 4, 2, "batch"),
        )
        self.fc1 = nn.Linear(base * 4, 1024)
        self.fc2 = nn.Linear(1024, num_categories)

    def forward(self, crops: torch.Tensor) -> torch.Tensor:
        x = self.blocks(crops).mean(dim=(2, 3))
        return self.fc2(self.fc1(x))

    def score(self, crops: torch.Tensor, category_ids: torch.Tensor) -> torch.Tensor:
        logits = self.forward(crops)
        return logits.gather(1, category_ids.unsqueeze(1)).squeeze(1)
