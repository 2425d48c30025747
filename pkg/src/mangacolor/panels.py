"""Panel segmentation and page recomposition.

Segmentation is a recursive X-Y cut over the binarized page: white gutter
bands split a region into subregions until no band is found, and each leaf is
shrunk to its ink bounding box. Recomposition pastes colorized panels back at
their rectangles and overlays the original ink (contours, balloons, text) in
black.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .raster import Encoding, RasterImage, resize


@dataclass(frozen=True)
class PanelRect:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError("panel must be at least 1x1")
        if self.x < 0 or self.y < 0:
            raise ValueError("panel origin must be nonnegative")

    def scaled(self, factor: int) -> "PanelRect":
        return PanelRect(self.x * factor, self.y * factor, self.w * factor, self.h * factor)


@dataclass(frozen=True)
class PageLayout:
    page_w: int
    page_h: int
    panels: tuple[PanelRect, ...]

    def __post_init__(self):
        panels = tuple(self.panels)
        if not panels:
            raise ValueError("layout must contain at least one panel")
        for p in panels:
            if p.x + p.w > self.page_w or p.y + p.h > self.page_h:
                raise ValueError(f"panel {p} exceeds page bounds")
        object.__setattr__(self, "panels", panels)

    def scaled(self, factor: int) -> "PageLayout":
        return PageLayout(
            self.page_w * factor,
            self.page_h * factor,
            tuple(p.scaled(factor) for p in self.panels),
        )


@dataclass(frozen=True)
class SegmentationConfig:
    """Gutter-cut tuning knobs."""

    gutter_white_frac: float = 0.98
    min_band_px: int = 4
    min_region_frac: float = 0.05


def _band_runs(mask: np.ndarray, min_band: int) -> list[tuple[int, int]]:
    """Maximal True runs [start, end) of length >= min_band."""
    runs = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if i - start >= min_band:
                runs.append((start, i))
            start = None
    if start is not None and len(mask) - start >= min_band:
        runs.append((start, len(mask)))
    return runs


def _split_spans(length: int, bands: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Non-band spans left after removing gutter bands."""
    spans = []
    pos = 0
    for b0, b1 in bands:
        if b0 > pos:
            spans.append((pos, b0))
        pos = b1
    if pos < length:
        spans.append((pos, length))
    return spans


def segment_page(mono: RasterImage, config: SegmentationConfig = SegmentationConfig()) -> PageLayout:
    """Recursive X-Y gutter cut of a binarized page into panel rectangles.

    Horizontal cuts are tried first (top-to-bottom reading), then vertical cuts
    ordered right-to-left per manga convention. A leaf region becomes a panel
    at its ink bounding box; a page with no ink yields one whole-page panel.
    """
    mono.require(Encoding.Mono1)
    ink = mono.data[:, :, 0] == 0
    page_h, page_w = ink.shape
    min_w = config.min_region_frac * page_w
    min_h = config.min_region_frac * page_h
    panels: list[PanelRect] = []

    def visit(y0: int, y1: int, x0: int, x1: int) -> None:
        h, w = y1 - y0, x1 - x0
        region = ink[y0:y1, x0:x1]
        if w >= min_w and h >= min_h:
            white_rows = 1.0 - region.mean(axis=1)
            rows = _band_runs(white_rows >= config.gutter_white_frac, config.min_band_px)
            if rows:
                for s0, s1 in _split_spans(h, rows):
                    visit(y0 + s0, y0 + s1, x0, x1)
                return
            white_cols = 1.0 - region.mean(axis=0)
            cols = _band_runs(white_cols >= config.gutter_white_frac, config.min_band_px)
            if cols:
                for s0, s1 in reversed(_split_spans(w, cols)):
                    visit(y0, y1, x0 + s0, x0 + s1)
                return
        # Leaf: shrink to the ink bounding box; drop blank leaves.
        ys, xs = np.nonzero(region)
        if ys.size == 0:
            return
        panels.append(
            PanelRect(
                x0 + int(xs.min()),
                y0 + int(ys.min()),
                int(xs.max() - xs.min()) + 1,
                int(ys.max() - ys.min()) + 1,
            )
        )

    visit(0, page_h, 0, page_w)
    if not panels:
        panels = [PanelRect(0, 0, page_w, page_h)]
    return PageLayout(page_w, page_h, tuple(panels))


def crop_panels(page: RasterImage, layout: PageLayout) -> list[RasterImage]:
    """One crop per panel rectangle, in layout order."""
    if layout.page_w != page.width or layout.page_h != page.height:
        raise ValueError("layout does not match page dimensions")
    crops = []
    for p in layout.panels:
        crops.append(RasterImage(page.encoding, page.data[p.y : p.y + p.h, p.x : p.x + p.w].copy()))
    return crops


def snap_extremes(img: RasterImage, white_min: int = 230, black_max: int = 25) -> RasterImage:
    """Snap whitish pixels to pure white and blackish pixels to pure black."""
    img.require(Encoding.RGB8)
    data = img.data.copy()
    whitish = data.min(axis=2) >= white_min
    blackish = data.max(axis=2) <= black_max
    data[whitish] = 255
    data[blackish] = 0
    return RasterImage(Encoding.RGB8, data)


def restore_layout(
    original: RasterImage,
    layout: PageLayout,
    colorized: list[RasterImage],
) -> RasterImage:
    """Paste colorized panels onto a white canvas and overlay the original ink.

    ``original`` is the binarized page at canvas resolution; every pixel that
    is ink (0) there comes out pure black, which re-draws contours and text.
    """
    original.require(Encoding.Mono1)
    if len(colorized) != len(layout.panels):
        raise ValueError(
            f"{len(layout.panels)} panels but {len(colorized)} colorized images"
        )
    if (original.width, original.height) != (layout.page_w, layout.page_h):
        raise ValueError("ink mask does not match layout dimensions")
    canvas = np.full((layout.page_h, layout.page_w, 3), 255, dtype=np.uint8)
    for rect, img in zip(layout.panels, colorized):
        img.require(Encoding.RGB8)
        fitted = resize(img, rect.w, rect.h, "bilinear")
        canvas[rect.y : rect.y + rect.h, rect.x : rect.x + rect.w] = fitted.data
    canvas[original.data[:, :, 0] == 0] = 0
    return RasterImage(Encoding.RGB8, canvas)


def layout_to_json(layout: PageLayout) -> str:
    return json.dumps(
        {
            "page_w": layout.page_w,
            "page_h": layout.page_h,
            "panels": [{"x": p.x, "y": p.y, "w": p.w, "h": p.h} for p in layout.panels],
        }
    )


def layout_from_json(text: str) -> PageLayout:
    doc = json.loads(text)
    return PageLayout(
        doc["page_w"],
        doc["page_h"],
        tuple(PanelRect(p["x"], p["y"], p["w"], p["h"]) for p in doc["panels"]),
    )
