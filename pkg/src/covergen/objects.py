"""Per-object synthesis: bounding boxes, soft masks, appearance vectors, and
composition of the layout feature map.

The layout feature map is a (D_app + 1, S, S) canvas: each object's 32x32 soft
mask is bilinearly shifted/scaled into its bounding box, the appearance
channels receive mask_value * a_o at covered pixels, and a final occupancy
channel accumulates raw mask values.  Contributions from overlapping objects
sum.  All placement arithmetic is differentiable so gradients reach masks,
appearance vectors and box coordinates.
"""

from __future__ import annotations

import logging

import torch
from torch import nn

log = logging.getLogger(__name__)

MIN_BOX_SEPARATION = 1e-6


def normalize_boxes(raw: torch.Tensor) -> torch.Tensor:
    """Clamp coordinates to [0, 1], order each (min, max) pair, and enforce a
    strictly positive extent on both axes.

    Accepts (..., 4) tensors laid out as (x0, y0, x1, y1).
    """
    boxes = raw.clamp(0.0, 1.0)
    x0 = torch.minimum(boxes[..., 0], boxes[..., 2])
    x1 = torch.maximum(boxes[..., 0], boxes[..., 2])
    y0 = torch.minimum(boxes[..., 1], boxes[..., 3])
    y1 = torch.maximum(boxes[..., 1], boxes[..., 3])
    # Degenerate pairs get an epsilon separation, pushed inward at the border.
    eps = MIN_BOX_SEPARATION
    x0 = torch.where(x1 - x0 < eps, (x0 - eps).clamp(0.0, 1.0 - eps), x0)
    x1 = torch.where(x1 - x0 < eps, x0 + eps, x1)
    y0 = torch.where(y1 - y0 < eps, (y0 - eps).clamp(0.0, 1.0 - eps), y0)
    y1 = torch.where(y1 - y0 < eps, y0 + eps, y1)
    return torch.stack([x0, y0, x1, y1], dim=-1)


class BoxRegressionNet(nn.Module):
    """128 -> 512 -> 4 perceptron; sigmoid + pair ordering yields valid boxes.

    The output bias starts at the logits of a centered box covering roughly
    half the canvas.  With a zero bias every untrained prediction sits at
    sigmoid(~0) = 0.5 on all four coordinates, the resulting boxes span less
    than one pixel, composition skips every object, and no gradient reaches
    the appearance or mask networks.  The prior keeps the layout live from
    the first step; the box regression loss pulls coordinates to their
    targets from there.
    """

    OUTPUT_BIAS = (-1.2, -1.2, 1.2, 1.2)

    def __init__(self, embedding_dim: int = 128, hidden_dim: int = 512):
        super().__init__()
        self.fc1 = nn.Linear(embedding_dim, hidden_dim)
        self.fc2 = nn.Linear(hidden_dim, 4)
        self.reset_output_bias()

    def reset_output_bias(self) -> None:
        with torch.no_grad():
            self.fc2.bias.copy_(torch.tensor(self.OUTPUT_BIAS, dtype=self.fc2.bias.dtype))

    def forward(self, m: torch.Tensor) -> torch.Tensor:
        raw = self.fc2(torch.relu(self.fc1(m)))
        return normalize_boxes(torch.sigmoid(raw))


class MaskGenerator(nn.Module):
    """Decodes [m_o | z_o] into a 32x32 soft mask in [0, 1].

    The 192-dim seed is projected to a 4x4 spatial grid, then three rounds of
    nearest-neighbor upsampling interleaved with five 3x3 conv layers (192
    filters, batch norm, ReLU) reach 32x32; a final 1-filter conv + sigmoid
    produces the mask.
    """

    def __init__(self, embedding_dim: int = 128, noise_dim: int = 64, channels: int = 192, mask_size: int = 32):
        super().__init__()
        if mask_size % 8 != 0:
            raise ValueError("mask_size must be a multiple of 8")
        self.noise_dim = noise_dim
        self.mask_size = mask_size
        self.base_size = mask_size // 8
        self.channels = channels
        self.seed_fc = nn.Linear(embedding_dim + noise_dim, channels * self.base_size**2)
        self.convs = nn.ModuleList(
            [nn.Conv2d(channels, channels, 3, padding=1) for _ in range(5)]
        )
        self.norms = nn.ModuleList([nn.BatchNorm2d(channels) for _ in range(5)])
        self.upsample = nn.Upsample(scale_factor=2, mode="nearest")
        # Upsample after these conv indices: 4 -> 8 -> 16 -> 32.
        self._upsample_after = {0, 1, 2}
        self.out_conv = nn.Conv2d(channels, 1, 3, padding=1)

    def forward(self, m: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
        x = self.seed_fc(torch.cat([m, z], dim=1))
        x = x.view(-1, self.channels, self.base_size, self.base_size)
        for i, (conv, norm) in enumerate(zip(self.convs, self.norms)):
            x = torch.relu(norm(conv(x)))
            if i in self._upsample_after:
                x = self.upsample(x)
        return torch.sigmoid(self.out_conv(x)).squeeze(1)


class AppearanceEncoder(nn.Module):
    """Encodes a 64x64x3 object crop (values in [-1, 1]) into an appearance
    vector: three stride-2 convs, global average pooling, then two FC layers."""

    def __init__(self, appearance_dim: int = 64, crop_size: int = 64):
        super().__init__()
        self.crop_size = crop_size
        self.appearance_dim = appearance_dim
        self.conv1 = nn.Conv2d(3, 64, 4, stride=2, padding=1)
        self.bn1 = nn.BatchNorm2d(64)
        self.conv2 = nn.Conv2d(64, 128, 4, stride=2, padding=1)
        self.bn2 = nn.BatchNorm2d(128)
        self.conv3 = nn.Conv2d(128, 256, 4, stride=2, padding=1)
        self.bn3 = nn.BatchNorm2d(256)
        self.fc1 = nn.Linear(256, 192)
        self.fc2 = nn.Linear(192, appearance_dim)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, crops: torch.Tensor) -> torch.Tensor:
        if crops.shape[-2:] != (self.crop_size, self.crop_size) or crops.shape[-3] != 3:
            raise ValueError(
                f"expected crops of shape (N, 3, {self.crop_size}, {self.crop_size}), got {tuple(crops.shape)}"
            )
        x = self.act(self.bn1(self.conv1(crops)))
        x = self.act(self.bn2(self.conv2(x)))
        x = self.act(self.bn3(self.conv3(x)))
        x = x.mean(dim=(2, 3))
        x = torch.relu(self.fc1(x))
        return torch.relu(self.fc2(x))


def _bilinear_gather(grid: torch.Tensor, fy: torch.Tensor, fx: torch.Tensor) -> torch.Tensor:
    """Edge-clamped bilinear sample of a (H, W) grid at fractional pixel
    coordinates fy (rows) x fx (cols), given as 1-D tensors; returns the
    (len(fy), len(fx)) outer-product sample."""
    h, w = grid.shape[-2], grid.shape[-1]
    x0 = torch.floor(fx)
    y0 = torch.floor(fy)
    wx = (fx - x0).unsqueeze(0)
    wy = (fy - y0).unsqueeze(1)
    ix0 = x0.long().clamp(0, w - 1)
    ix1 = (x0.long() + 1).clamp(0, w - 1)
    iy0 = y0.long().clamp(0, h - 1)
    iy1 = (y0.long() + 1).clamp(0, h - 1)
    top = (1 - wx) * grid[..., iy0, :][..., :, ix0] + wx * grid[..., iy0, :][..., :, ix1]
    bot = (1 - wx) * grid[..., iy1, :][..., :, ix0] + wx * grid[..., iy1, :][..., :, ix1]
    return (1 - wy) * top + wy * bot


def place_mask(mask: torch.Tensor, box: torch.Tensor, canvas: int) -> torch.Tensor:
    """Resample a (M, M) soft mask into its box on a (canvas, canvas) zero
    grid.  Pixels whose centers fall outside the box are exactly zero;
    translating the box by an integer number of pixels translates the
    contribution exactly."""
    m = mask.shape[-1]
    x0, y0, x1, y1 = box[0], box[1], box[2], box[3]
    centers = (torch.arange(canvas, dtype=mask.dtype) + 0.5) / canvas
    inside_x = (centers >= x0) & (centers < x1)
    inside_y = (centers >= y0) & (centers < y1)
    fx = (centers - x0) / (x1 - x0) * m - 0.5
    fy = (centers - y0) / (y1 - y0) * m - 0.5
    sampled = _bilinear_gather(mask, fy, fx)
    return sampled * (inside_y.unsqueeze(1) & inside_x.unsqueeze(0)).to(mask.dtype)


def compose_feature_map(
    boxes: torch.Tensor,
    masks: torch.Tensor,
    appearances: torch.Tensor,
    canvas: int = 128,
) -> torch.Tensor:
    """Build the (D_app + 1, canvas, canvas) layout feature map.

    boxes: (N, 4) normalized (x0, y0, x1, y1); masks: (N, M, M) in [0, 1];
    appearances: (N, D_app).  Boxes spanning less than one pixel on either
    axis are skipped with a warning.
    """
    n = boxes.shape[0]
    if not (masks.shape[0] == appearances.shape[0] == n):
        raise ValueError(
            f"mismatched object counts: {n} boxes, {masks.shape[0]} masks, {appearances.shape[0]} appearances"
        )
    d_app = appearances.shape[1]
    feature_map = masks.new_zeros((d_app + 1, canvas, canvas))
    for i in range(n):
        box = boxes[i]
        w_pix = float(box[2].detach() - box[0].detach()) * canvas
        h_pix = float(box[3].detach() - box[1].detach()) * canvas
        if w_pix < 1.0 or h_pix < 1.0:
            log.warning("skipping object %d: box %s spans less than one pixel", i, box.detach().tolist())
            continue
        placed = place_mask(masks[i], box, canvas).unsqueeze(0)
        contribution = torch.cat([placed * appearances[i].view(d_app, 1, 1), placed], dim=0)
        feature_map = feature_map + contribution
    return feature_map


def crop_bbox(image: torch.Tensor, box: torch.Tensor, size: int = 64) -> torch.Tensor:
    """Differentiable (C, size, size) crop of a (C, H, W) image at a
    normalized box, bilinear with edge clamping."""
    h, w = image.shape[-2], image.shape[-1]
    x0, y0, x1, y1 = box[0], box[1], box[2], box[3]
    sx = (torch.arange(size, dtype=image.dtype) + 0.5) / size
    fx = (x0 + sx * (x1 - x0)) * w - 0.5
    fy = (y0 + sx * (y1 - y0)) * h - 0.5
    return _bilinear_gather(image, fy, fx)
