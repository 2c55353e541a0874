"""Location codes and layout composition, visualized.

Each object's coarse placement is a 35-dim two-hot vector: one bit among 25
for the grid cell, one among 10 for the size level.  Composition scatters
per-object soft masks, scaled by each object's appearance vector, onto a
shared canvas; the extra last channel counts mask coverage.
"""

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from covergen import compose_feature_map, decode_location, encode_location

OUT = Path(__file__).parent / "out"


def disk_mask(side: int) -> torch.Tensor:
    yy, xx = torch.meshgrid(
        torch.linspace(-1, 1, side), torch.linspace(-1, 1, side), indexing="ij"
    )
    return (xx**2 + yy**2 <= 1).float()


def main() -> None:
    code = encode_location(grid_cell=7, size_level=6)
    print("code length:", code.shape[0], "active bits:", np.flatnonzero(code).tolist())
    print("decoded back:", decode_location(code))

    boxes = torch.tensor(
        [
            [0.10, 0.10, 0.55, 0.55],
            [0.40, 0.45, 0.95, 0.90],
            [0.25, 0.05, 0.75, 0.30],
        ]
    )
    masks = torch.stack([disk_mask(32), torch.ones(32, 32), disk_mask(32)])
    appearance = torch.eye(3)  # one indicator channel per object
    f_map = compose_feature_map(boxes, masks, appearance, canvas=128)
    print("feature map shape:", tuple(f_map.shape))

    OUT.mkdir(exist_ok=True)
    rgb = (f_map[:3].clamp(0, 1).numpy().transpose(1, 2, 0) * 255).astype(np.uint8)
    Image.fromarray(rgb).save(OUT / "composition.png")
    coverage = f_map[3].numpy()
    print("coverage channel max (overlapping objects):", float(coverage.max()))
    print("wrote", OUT / "composition.png")


if __name__ == "__main__":
    main()
