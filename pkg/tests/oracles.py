"""Independent brute-force references used to pin down numeric behaviour.

These reimplement the layout-map composition and a few small numeric
helpers with plain per-pixel loops (numba-jitted for speed) so the
vectorised library code can be checked against a second opinion.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _place_one(mask, x0, y0, x1, y1, canvas):
    m = mask.shape[0]
    out = np.zeros((canvas, canvas), dtype=np.float64)
    for r in range(canvas):
        v = (r + 0.5) / canvas
        if not (y0 <= v < y1):
            continue
        fy = (v - y0) / (y1 - y0) * m - 0.5
        i0 = int(np.floor(fy))
        ty = fy - i0
        i1 = i0 + 1
        ci0 = min(max(i0, 0), m - 1)
        ci1 = min(max(i1, 0), m - 1)
        for c in range(canvas):
            u = (c + 0.5) / canvas
            if not (x0 <= u < x1):
                continue
            fx = (u - x0) / (x1 - x0) * m - 0.5
            j0 = int(np.floor(fx))
            tx = fx - j0
            j1 = j0 + 1
            cj0 = min(max(j0, 0), m - 1)
            cj1 = min(max(j1, 0), m - 1)
            out[r, c] = (
                mask[ci0, cj0] * (1 - ty) * (1 - tx)
                + mask[ci0, cj1] * (1 - ty) * tx
                + mask[ci1, cj0] * ty * (1 - tx)
                + mask[ci1, cj1] * ty * tx
            )
    return out


def compose_oracle(boxes, masks, appearances, canvas):
    """Per-pixel reference for compose_feature_map, float64 throughout."""
    boxes = np.asarray(boxes, dtype=np.float64)
    masks = np.asarray(masks, dtype=np.float64)
    appearances = np.asarray(appearances, dtype=np.float64)
    num, dim = appearances.shape
    layout = np.zeros((dim + 1, canvas, canvas), dtype=np.float64)
    for k in range(num):
        x0, y0, x1, y1 = boxes[k]
        if (x1 - x0) * canvas < 1.0 or (y1 - y0) * canvas < 1.0:
            continue
        placed = _place_one(masks[k], x0, y0, x1, y1, canvas)
        for d in range(dim):
            layout[d] += appearances[k, d] * placed
        layout[dim] += placed
    return layout


def normalize_boxes_oracle(raw, eps=np.float32(1e-6)):
    """Clamp to [0, 1], order each coordinate pair, force strict separation.

    Mirrors the sequential where-chain of the library implementation so the
    comparison can be tight.
    """
    raw = np.asarray(raw, dtype=np.float32)
    b = np.clip(raw, np.float32(0.0), np.float32(1.0))
    x0 = np.minimum(b[..., 0], b[..., 2])
    x1 = np.maximum(b[..., 0], b[..., 2])
    y0 = np.minimum(b[..., 1], b[..., 3])
    y1 = np.maximum(b[..., 1], b[..., 3])
    one = np.float32(1.0)
    x0 = np.where(x1 - x0 < eps, np.clip(x0 - eps, np.float32(0.0), one - eps), x0)
    x1 = np.where(x1 - x0 < eps, x0 + eps, x1)
    y0 = np.where(y1 - y0 < eps, np.clip(y0 - eps, np.float32(0.0), one - eps), y0)
    y1 = np.where(y1 - y0 < eps, y0 + eps, y1)
    return np.stack([x0, y0, x1, y1], axis=-1)


def two_hot_oracle(cell, size):
    """Location vector built directly from its definition: 25 cells then 10 sizes."""
    vec = np.zeros(35, dtype=np.float32)
    vec[cell] = 1.0
    vec[25 + (size - 1)] = 1.0
    return vec


def coverage_raster(poly, size, k=3):
    """Binary raster marking pixels the polygon intersects: a pixel is set
    when any of its k*k subsample points lies inside.  Implemented on
    matplotlib's point-in-polygon test, independent of the library's
    rasterizer."""
    from matplotlib.path import Path as MplPath

    path = MplPath(np.asarray(poly, dtype=np.float64))
    offsets = (np.arange(k) + 0.5) / k
    hit = np.zeros((size, size), dtype=bool)
    yy, xx = np.mgrid[0:size, 0:size]
    for oy in offsets:
        for ox in offsets:
            pts = np.stack([xx.ravel() + ox, yy.ravel() + oy], axis=1)
            hit |= path.contains_points(pts).reshape(size, size)
    return hit


def triangle_resize(arr, out_h, out_w):
    """Separable triangle-filter resample with support widened on
    minification; float64 throughout."""

    def one_axis(a, out_len, axis):
        a = np.moveaxis(a, axis, 0).astype(np.float64)
        in_len = a.shape[0]
        scale = in_len / out_len
        support = max(1.0, scale)
        out = np.zeros((out_len,) + a.shape[1:], dtype=np.float64)
        for o in range(out_len):
            center = (o + 0.5) * scale
            idx = np.arange(int(np.floor(center - support)), int(np.ceil(center + support)))
            w = 1.0 - np.abs((idx + 0.5 - center) / support)
            keep = w > 0
            idx, w = idx[keep].clip(0, in_len - 1), w[keep]
            out[o] = np.tensordot(w / w.sum(), a[idx], axes=(0, 0))
        return np.moveaxis(out, 0, axis)

    return one_axis(one_axis(arr, out_h, 0), out_w, 1)


def grid_mask_oracle(poly, bbox, image_size, grid=32):
    """Full reference for the segmentation-to-grid-mask conversion: coverage
    raster, crop to the box footprint, resample to the grid, threshold at
    half."""
    import math

    full = coverage_raster(poly, image_size).astype(np.float64)
    x, y, w, h = bbox
    x0, y0 = int(math.floor(x)), int(math.floor(y))
    x1, y1 = int(math.ceil(x + w)), int(math.ceil(y + h))
    region = full[max(0, y0) : y1, max(0, x0) : x1]
    return (triangle_resize(region, grid, grid) >= 0.5).astype(np.float32)


def location_oracle(box):
    """Grid cell from the box center, size level from the area decile."""
    import math

    x0, y0, x1, y1 = (float(v) for v in box)
    col = min(4, max(0, int(((x0 + x1) / 2) * 5)))
    row = min(4, max(0, int(((y0 + y1) / 2) * 5)))
    area = max(0.0, x1 - x0) * max(0.0, y1 - y0)
    return row * 5 + col, min(10, max(1, math.ceil(area * 10)))


def mean_pool_oracle(rows, index, num_segments):
    """Segment mean with an explicit loop; empty segments stay zero."""
    rows = np.asarray(rows, dtype=np.float64)
    out = np.zeros((num_segments, rows.shape[1]), dtype=np.float64)
    counts = np.zeros(num_segments, dtype=np.int64)
    for r, seg in zip(rows, index):
        out[seg] += r
        counts[seg] += 1
    for s in range(num_segments):
        if counts[s] > 0:
            out[s] /= counts[s]
    return out
