"""Title rendering and replacement.

Training covers carry a placeholder title ("Lorem Ipsum") rendered in a
random font and color.  At inference the placeholder region is re-styled with
the user's text: either through an external style-transfer adapter (two
images in, two images out) or through a built-in fallback that estimates the
text/background colors, erases the placeholder, matches the closest bundled
font and re-renders.

Images in this module are uint8 numpy arrays, (H, W, 3) RGB or (H, W, 4)
RGBA.
"""

from __future__ import annotations

import importlib
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFont

log = logging.getLogger(__name__)

PLACEHOLDER_TEXT = "Lorem Ipsum"
FIT_MARGIN = 0.05

_FONT_DIRS = (
    Path("/usr/share/fonts/truetype/dejavu"),
    Path("/usr/share/fonts/truetype"),
)

_font_cache: dict[str, Path] | None = None


def available_fonts() -> dict[str, Path]:
    """Name -> path for every usable TrueType font found on the system,
    including the set bundled with matplotlib."""
    global _font_cache
    if _font_cache is not None:
        return _font_cache
    found: dict[str, Path] = {}
    dirs = list(_FONT_DIRS)
    try:
        import matplotlib

        dirs.append(Path(matplotlib.get_data_path()) / "fonts" / "ttf")
    except ImportError:
        pass
    for d in dirs:
        if not d.is_dir():
            continue
        for path in sorted(d.rglob("*.ttf")):
            found.setdefault(path.stem, path)
    _font_cache = found
    return found


def default_font_set(count: int = 5) -> list[str]:
    """A small, visually distinct subset used for training and font matching."""
    preferred = [
        "DejaVuSans",
        "DejaVuSans-Bold",
        "DejaVuSerif",
        "DejaVuSerif-Bold",
        "DejaVuSansMono",
        "DejaVuSansMono-Bold",
        "DejaVuSans-Oblique",
    ]
    fonts = available_fonts()
    picked = [name for name in preferred if name in fonts]
    for name in fonts:
        if len(picked) >= count:
            break
        if name not in picked:
            picked.append(name)
    return picked[:count] if len(picked) >= count else picked


def _load_font(font_id: str, size: int):
    path = available_fonts().get(font_id)
    if path is None:
        log.warning("font %r not found, using built-in bitmap font", font_id)
        return ImageFont.load_default()
    try:
        return ImageFont.truetype(str(path), size)
    except OSError:
        log.warning("font %r failed to load, using built-in bitmap font", font_id)
        return ImageFont.load_default()


def _ink_extent(font, text: str) -> tuple[int, int, int, int]:
    x0, y0, x1, y1 = font.getbbox(text)
    return x0, y0, x1 - x0, y1 - y0


def render_placeholder(
    text: str = PLACEHOLDER_TEXT,
    font_id: str = "DejaVuSans",
    color: tuple[int, int, int] = (255, 255, 255),
    box_size: tuple[int, int] = (96, 24),
) -> np.ndarray:
    """Render text fit to a (width, height) box with a 5% margin per side.

    Returns an RGBA patch of exactly box_size; the alpha channel is the
    anti-aliased ink coverage.  The largest font size whose ink fits the
    margin-reduced box is chosen by binary search; if nothing fits at size 1
    the rendering is squeezed into the box and a warning is logged.
    """
    w, h = int(box_size[0]), int(box_size[1])
    if w <= 0 or h <= 0:
        raise ValueError(f"box size must be positive, got {box_size}")
    if not text:
        raise ValueError("title text must be non-empty")
    usable_w = max(1, round(w * (1 - 2 * FIT_MARGIN)))
    usable_h = max(1, round(h * (1 - 2 * FIT_MARGIN)))

    def fits(size: int) -> bool:
        _, _, tw, th = _ink_extent(_load_font(font_id, size), text)
        return tw <= usable_w and th <= usable_h

    lo, hi = 1, 512
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if fits(mid):
            lo = mid
        else:
            hi = mid - 1
    size = lo

    font = _load_font(font_id, size)
    bx, by, tw, th = _ink_extent(font, text)
    if size == 1 and (tw > usable_w or th > usable_h):
        # Nothing fits: render at a legible size and squeeze into the box.
        log.warning("text %r cannot fit %dx%d box at any size; squeezing", text, w, h)
        font = _load_font(font_id, max(8, usable_h))
        bx, by, tw, th = _ink_extent(font, text)
        canvas = Image.new("RGBA", (tw, th), (0, 0, 0, 0))
        ImageDraw.Draw(canvas).text((-bx, -by), text, font=font, fill=(*color, 255))
        canvas = canvas.resize((usable_w, usable_h), Image.BILINEAR)
        patch = Image.new("RGBA", (w, h), (0, 0, 0, 0))
        patch.paste(canvas, ((w - usable_w) // 2, (h - usable_h) // 2))
        return np.asarray(patch)

    patch = Image.new("RGBA", (w, h), (0, 0, 0, 0))
    pos = ((w - tw) // 2 - bx, (h - th) // 2 - by)
    ImageDraw.Draw(patch).text(pos, text, font=font, fill=(*color, 255))
    return np.asarray(patch)


def composite_over(base_rgb: np.ndarray, patch_rgba: np.ndarray) -> np.ndarray:
    """Alpha-blend an RGBA patch over an RGB image of the same size."""
    alpha = patch_rgba[..., 3:4].astype(np.float32) / 255.0
    out = base_rgb.astype(np.float32) * (1 - alpha) + patch_rgba[..., :3].astype(np.float32) * alpha
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


# --------------------------------------------------------------------------
# Colorimetry helpers (sRGB -> CIELAB, CIE76 distance).
# --------------------------------------------------------------------------


def srgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    c = np.where(c > 0.04045, ((c + 0.055) / 1.055) ** 2.4, c / 12.92)
    m = np.array(
        [[0.4124564, 0.3575761, 0.1804375],
         [0.2126729, 0.7151522, 0.0721750],
         [0.0193339, 0.1191920, 0.9503041]]
    )
    xyz = c @ m.T
    white = np.array([0.95047, 1.0, 1.08883])
    t = xyz / white
    f = np.where(t > (6 / 29) ** 3, np.cbrt(t), t / (3 * (6 / 29) ** 2) + 4 / 29)
    l_star = 116 * f[..., 1] - 16
    a_star = 500 * (f[..., 0] - f[..., 1])
    b_star = 200 * (f[..., 1] - f[..., 2])
    return np.stack([l_star, a_star, b_star], axis=-1)


def delta_e(rgb_a, rgb_b) -> float:
    la, lb = srgb_to_lab(np.asarray(rgb_a)), srgb_to_lab(np.asarray(rgb_b))
    return float(np.linalg.norm(la - lb))


# --------------------------------------------------------------------------
# Style transfer: external adapter and built-in fallback.
# --------------------------------------------------------------------------


@dataclass
class TitleRegion:
    """A title crop awaiting replacement: pixel box on the cover, the crop
    itself, and the text the user wants."""

    box: tuple[int, int, int, int]  # x0, y0, x1, y1 in pixels
    crop: np.ndarray  # (H, W, 3) uint8
    desired_text: str

    def __post_init__(self):
        x0, y0, x1, y1 = self.box
        if x1 <= x0 or y1 <= y0:
            raise ValueError(f"degenerate title box {self.box}")
        if not self.desired_text:
            raise ValueError("desired_text must be non-empty")


@dataclass
class StyleTransferResult:
    text_image: np.ndarray  # (H, W, 3) uint8, restyled text on background
    background: np.ndarray  # (H, W, 3) uint8, placeholder erased


class ExternalStyleTransfer:
    """Adapter around a pretrained text style-transfer model.

    The contract is two images in (plain-font desired text, stylized crop),
    two images out (restyled text image, erased background), sizes preserved.
    Construct with a callable, or from a "module:function" spec.
    """

    def __init__(self, fn=None):
        self._fn = fn

    @classmethod
    def from_spec(cls, spec: str) -> "ExternalStyleTransfer":
        module, _, attr = spec.partition(":")
        try:
            fn = getattr(importlib.import_module(module), attr)
        except (ImportError, AttributeError):
            log.warning("external style-transfer %r not importable", spec)
            return cls(None)
        return cls(fn)

    @property
    def available(self) -> bool:
        return self._fn is not None

    def restyle(self, plain_text: np.ndarray, stylized_crop: np.ndarray):
        if self._fn is None:
            raise RuntimeError("external style-transfer backend is not configured")
        text_image, background = self._fn(plain_text, stylized_crop)
        return np.asarray(text_image), np.asarray(background)


def split_text_background(crop: np.ndarray, iterations: int = 12):
    """2-means over crop pixels; the cluster owning more border pixels is the
    background.  Returns (bg_color, text_color, text_mask) with float colors
    and a boolean (H, W) mask."""
    pixels = crop.reshape(-1, 3).astype(np.float64)
    luma = pixels @ np.array([0.299, 0.587, 0.114])
    centers = np.stack([pixels[luma.argmin()], pixels[luma.argmax()]])
    if np.allclose(centers[0], centers[1]):
        # Flat crop: no text present.
        bg = pixels.mean(axis=0)
        return bg, bg, np.zeros(crop.shape[:2], dtype=bool)
    assign = np.zeros(len(pixels), dtype=np.int64)
    for _ in range(iterations):
        d = ((pixels[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = d.argmin(axis=1)
        for k in (0, 1):
            if (assign == k).any():
                centers[k] = pixels[assign == k].mean(axis=0)
    labels = assign.reshape(crop.shape[:2])
    border = np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]])
    bg_label = int(np.bincount(border, minlength=2).argmax())
    text_mask = labels != bg_label
    return centers[bg_label], centers[1 - bg_label], text_mask


def _dilate(mask: np.ndarray, radius: int = 2) -> np.ndarray:
    out = mask.copy()
    for _ in range(radius):
        grown = out.copy()
        grown[1:] |= out[:-1]
        grown[:-1] |= out[1:]
        grown[:, 1:] |= out[:, :-1]
        grown[:, :-1] |= out[:, 1:]
        out = grown
    return out


def erase_text(crop: np.ndarray) -> np.ndarray:
    """Fill text pixels (dilated to catch anti-aliased edges) with the
    estimated background color."""
    bg_color, _, text_mask = split_text_background(crop)
    out = crop.astype(np.float64).copy()
    out[_dilate(text_mask)] = bg_color
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def match_font(crop: np.ndarray, text: str, color, font_ids: list[str] | None = None) -> str:
    """The bundled font whose rendered text is closest to the crop in L1."""
    font_ids = font_ids or default_font_set()
    if not font_ids:
        raise RuntimeError("no fonts available for matching")
    bg_color, _, _ = split_text_background(crop)
    h, w = crop.shape[:2]
    base = np.tile(np.clip(np.rint(bg_color), 0, 255).astype(np.uint8), (h, w, 1))
    color8 = tuple(int(round(c)) for c in np.clip(color, 0, 255))
    best_id, best_l1 = font_ids[0], float("inf")
    for fid in font_ids:
        candidate = composite_over(base, render_placeholder(text, fid, color8, (w, h)))
        l1 = float(np.abs(candidate.astype(np.float64) - crop.astype(np.float64)).mean())
        if l1 < best_l1:
            best_id, best_l1 = fid, l1
    return best_id


class FallbackStyler:
    """Style transfer without a pretrained model: estimate colors by 2-means,
    erase the placeholder, pick the closest training font, re-render."""

    def __init__(self, font_ids: list[str] | None = None):
        self.font_ids = font_ids or default_font_set()

    def transfer(self, region: TitleRegion) -> StyleTransferResult:
        crop = region.crop
        _, text_color, text_mask = split_text_background(crop)
        background = erase_text(crop)
        if not text_mask.any():
            # Nothing to match against; render in a default font.
            font_id = self.font_ids[0] if self.font_ids else "builtin"
        else:
            font_id = match_font(crop, PLACEHOLDER_TEXT, text_color, self.font_ids)
        color8 = tuple(int(round(c)) for c in np.clip(text_color, 0, 255))
        h, w = crop.shape[:2]
        patch = render_placeholder(region.desired_text, font_id, color8, (w, h))
        return StyleTransferResult(text_image=composite_over(background, patch), background=background)


def transfer_title_style(region: TitleRegion, backend="fallback") -> StyleTransferResult:
    """Dispatch to the requested backend; unavailable external backends
    degrade to the fallback with a logged notice."""
    if isinstance(backend, str):
        if backend == "fallback":
            backend_obj = None
        elif backend == "external":
            backend_obj = ExternalStyleTransfer()
        else:
            raise ValueError(f"unknown title backend {backend!r}")
    else:
        backend_obj = backend

    if backend_obj is not None:
        if getattr(backend_obj, "available", True):
            h, w = region.crop.shape[:2]
            plain = composite_over(
                np.full((h, w, 3), 255, dtype=np.uint8),
                render_placeholder(region.desired_text, "DejaVuSans", (0, 0, 0), (w, h)),
            )
            text_image, background = backend_obj.restyle(plain, region.crop)
            if text_image.shape != region.crop.shape:
                raise ValueError(
                    f"backend changed crop size: {text_image.shape} vs {region.crop.shape}"
                )
            return StyleTransferResult(text_image=text_image, background=background)
        log.warning("external style-transfer backend unavailable, using fallback")

    return FallbackStyler().transfer(region)


def paste_title(cover: np.ndarray, result: StyleTransferResult | np.ndarray, box) -> np.ndarray:
    """Write the restyled patch into the box; pixels outside stay untouched.

    The box is clipped against the canvas, so edge boxes paste partially
    instead of wrapping.
    """
    patch = result.text_image if isinstance(result, StyleTransferResult) else result
    x0, y0, x1, y1 = (int(v) for v in box)
    out = cover.copy()
    h, w = cover.shape[:2]
    cx0, cy0 = max(0, x0), max(0, y0)
    cx1, cy1 = min(w, x1), min(h, y1)
    if cx1 <= cx0 or cy1 <= cy0:
        return out
    out[cy0:cy1, cx0:cx1] = patch[cy0 - y0 : cy1 - y0, cx0 - x0 : cx1 - x0]
    return out
