"""Title replacement with the fallback styler, step by step.

Builds a small fake cover with placeholder title text, then runs the
erase-and-rerender pipeline: estimate ink and background colors, remove the
old strokes, match the closest bundled font, draw the requested text, and
paste the patch back into the cover.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from covergen import FallbackStyler, TitleRegion, paste_title, render_placeholder
from covergen.titles import composite_over, default_font_set

OUT = Path(__file__).parent / "out"


def main() -> None:
    cover = np.full((128, 128, 3), (72, 96, 140), dtype=np.uint8)
    cover[84:, :] = (210, 200, 180)

    box = (12, 16, 116, 44)
    w, h = box[2] - box[0], box[3] - box[1]
    placeholder = render_placeholder("PLACEHOLDER", "DejaVuSans-Bold",
                                     color=(235, 225, 90), box_size=(w, h))
    cover[box[1]:box[3], box[0]:box[2]] = composite_over(
        cover[box[1]:box[3], box[0]:box[2]], placeholder
    )
    OUT.mkdir(exist_ok=True)
    Image.fromarray(cover).save(OUT / "title_before.png")

    region = TitleRegion(box=box, crop=cover[box[1]:box[3], box[0]:box[2]].copy(),
                         desired_text="Meridian")
    styler = FallbackStyler(default_font_set())
    result = styler.transfer(region)
    print("restyled patch:", result.text_image.shape,
          "erased background:", result.background.shape)
    Image.fromarray(result.background).save(OUT / "title_erased.png")

    replaced = paste_title(cover, result, box)
    Image.fromarray(replaced).save(OUT / "title_after.png")
    print("wrote title_before.png, title_erased.png, title_after.png under", OUT)


if __name__ == "__main__":
    main()
