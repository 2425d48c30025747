"""Synthetic images shared across the test suite: flat-color character
shapes for the toy training set, framed grid pages with known panel
geometry for segmentation oracles, and line drawings for super-resolution.
"""

from __future__ import annotations

import numpy as np

from mangacolor.panels import PanelRect
from mangacolor.raster import Encoding, RasterImage

RED = (215, 35, 35)
BLUE = (35, 160, 235)


def flat_shape_image(rgb, size: int = 256, kind: str = "disc") -> RasterImage:
    """A single filled shape on white; the toy 'character' drawings."""
    img = np.full((size, size, 3), 255, np.uint8)
    yy, xx = np.mgrid[0:size, 0:size]
    if kind == "disc":
        mask = (yy - size / 2) ** 2 + (xx - size / 2) ** 2 <= (size * 0.3) ** 2
    elif kind == "square":
        m = int(size * 0.22)
        mask = (yy >= m) & (yy < size - m) & (xx >= m) & (xx < size - m)
    else:
        raise ValueError(kind)
    img[mask] = rgb
    return RasterImage(Encoding.RGB8, img)


def toy_dataset() -> list[tuple[RasterImage, int]]:
    """Two shapes x two colors; shape alone never determines the color."""
    return [
        (flat_shape_image(RED, kind="disc"), 0),
        (flat_shape_image(BLUE, kind="disc"), 1),
        (flat_shape_image(RED, kind="square"), 2),
        (flat_shape_image(BLUE, kind="square"), 3),
    ]


def _draw_frame(ink: np.ndarray, x: int, y: int, w: int, h: int, thickness: int) -> None:
    ink[y : y + thickness, x : x + w] = True
    ink[y + h - thickness : y + h, x : x + w] = True
    ink[y : y + h, x : x + thickness] = True
    ink[y : y + h, x + w - thickness : x + w] = True


def framed_page(
    row_columns: list[int],
    page_w: int = 600,
    page_h: int = 840,
    margin: int = 20,
    gutter: int = 12,
) -> tuple[RasterImage, list[PanelRect]]:
    """A page of framed panels: one row per entry, entry = panels in that row.

    Returns the binary page and the ground-truth frame rectangles in reading
    order (rows top to bottom, panels right to left). Frame thickness is kept
    above 2.5% of the page width so interior rows never look like gutters.
    """
    thickness = max(4, int(np.ceil(0.025 * page_w)) + 1)
    ink = np.zeros((page_h, page_w), bool)
    rows = len(row_columns)
    row_h = (page_h - 2 * margin - (rows - 1) * gutter) // rows
    rects = []
    for r, cols in enumerate(row_columns):
        y = margin + r * (row_h + gutter)
        col_w = (page_w - 2 * margin - (cols - 1) * gutter) // cols
        row_rects = []
        for c in range(cols):
            x = margin + c * (col_w + gutter)
            _draw_frame(ink, x, y, col_w, row_h, thickness)
            # some interior content so panels are not hollow
            cy, cx = y + row_h // 2, x + col_w // 2
            ink[cy - 2 : cy + 2, x + thickness + 4 : x + col_w - thickness - 4 : 3] = True
            row_rects.append(PanelRect(x, y, col_w, row_h))
        rects.extend(reversed(row_rects))  # right-to-left within the row
    mono = RasterImage(Encoding.Mono1, (~ink).astype(np.uint8))
    return mono, rects


def line_art(seed: int, size: int = 448) -> RasterImage:
    """Grayscale-ish line drawing on white, as RGB8."""
    rng = np.random.default_rng(seed)
    img = np.full((size, size), 255.0)
    for _ in range(14):
        x0, y0 = rng.integers(0, size, 2)
        angle = rng.random() * np.pi
        length = rng.integers(size // 4, size)
        for t in np.linspace(0, length, length * 2):
            x = int(x0 + t * np.cos(angle))
            y = int(y0 + t * np.sin(angle))
            if 0 <= x < size - 1 and 0 <= y < size - 1:
                img[y : y + 2, x : x + 2] = 0.0
    rgb = np.repeat(img[:, :, None], 3, axis=2).astype(np.uint8)
    return RasterImage(Encoding.RGB8, rgb)


def iou(a: PanelRect, b: PanelRect) -> float:
    ax1, ay1 = a.x + a.w, a.y + a.h
    bx1, by1 = b.x + b.w, b.y + b.h
    iw = max(0, min(ax1, bx1) - max(a.x, b.x))
    ih = max(0, min(ay1, by1) - max(a.y, b.y))
    inter = iw * ih
    union = a.w * a.h + b.w * b.h - inter
    return inter / union if union else 0.0
