"""End-to-end page colorization: segment, colorize per panel, restore.

A panel is letterboxed onto a white 224x224 canvas (aspect preserved),
binarized, annotated with rescaled color dots, and pushed through the
network conditioned on its (possibly edited) color feature. Page assembly
runs at 2x resolution so the super-resolver's output is used directly, with
the binarized original page nearest-upscaled as the ink overlay mask.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .features import ColorFeature, adjust_dominant_bin, blend_histograms, feature_to_vector, load_feature
from .models import ColorizationModel, SRModel
from .nn import Tensor
from .panels import PageLayout, SegmentationConfig, crop_panels, restore_layout, segment_page, snap_extremes
from .raster import Encoding, RasterImage, binarize, lab_to_rgb, load_image, mono_to_rgb, resize, rgb_to_lab
from .train import DotAnnotation, rasterize_dots

PANEL_SIZE = 224


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class BlendOption:
    feature: ColorFeature
    ratio: float


@dataclass
class ColorizeRequest:
    """One panel plus its conditioning signal and optional revisions."""

    panel: RasterImage
    feature: ColorFeature
    dots: list[DotAnnotation] = field(default_factory=list)
    dominant_scale: float | None = None
    blend: BlendOption | None = None

    def effective_feature(self) -> ColorFeature:
        f = self.feature
        if self.dominant_scale is not None and self.dominant_scale != 1.0:
            f = adjust_dominant_bin(f, self.dominant_scale)
        if self.blend is not None:
            f = blend_histograms(f, self.blend.feature, self.blend.ratio)
        return f


@dataclass
class PageJob:
    """A full page run: default conditioning plus per-panel overrides."""

    page: RasterImage
    default_feature: ColorFeature
    overrides: dict[int, ColorizeRequest] = field(default_factory=dict)
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)


@dataclass
class PageResult:
    page: RasterImage
    layout: PageLayout
    panels: list[RasterImage]


@dataclass(frozen=True)
class _Letterbox:
    scale: float
    ox: int
    oy: int
    cw: int
    ch: int


def _letterbox_geometry(w: int, h: int, size: int) -> _Letterbox:
    scale = size / max(w, h)
    cw = max(1, round(w * scale))
    ch = max(1, round(h * scale))
    return _Letterbox(scale, (size - cw) // 2, (size - ch) // 2, cw, ch)


def _letterbox(panel: RasterImage, size: int) -> tuple[RasterImage, _Letterbox]:
    geo = _letterbox_geometry(panel.width, panel.height, size)
    fitted = resize(panel, geo.cw, geo.ch, "bilinear")
    canvas = np.full((size, size, 3), 255, np.uint8)
    canvas[geo.oy : geo.oy + geo.ch, geo.ox : geo.ox + geo.cw] = fitted.data
    return RasterImage(Encoding.RGB8, canvas), geo


def _map_dots(dots: list[DotAnnotation], panel_w: int, panel_h: int, geo: _Letterbox) -> list[DotAnnotation]:
    mapped = []
    for d in dots:
        if not (0 <= d.x < panel_w and 0 <= d.y < panel_h):
            raise PipelineError(f"dot ({d.x},{d.y}) outside panel {panel_w}x{panel_h}")
        x = geo.ox + int(np.floor((d.x + 0.5) * geo.scale - 0.5 + 0.5))
        y = geo.oy + int(np.floor((d.y + 0.5) * geo.scale - 0.5 + 0.5))
        x = min(max(x, geo.ox), geo.ox + geo.cw - 1)
        y = min(max(y, geo.oy), geo.oy + geo.ch - 1)
        mapped.append(DotAnnotation(x, y, d.a, d.b))
    return mapped


def _colorize_letterboxed(req: ColorizeRequest, model: ColorizationModel) -> tuple[RasterImage, _Letterbox]:
    """Colorize one panel at network resolution; returns the 224x224 result."""
    panel = req.panel
    if panel.encoding is Encoding.Mono1:
        panel = mono_to_rgb(panel)
    panel.require(Encoding.RGB8)
    boxed, geo = _letterbox(panel, PANEL_SIZE)
    mono = binarize(boxed)
    x = np.zeros((1, 3, PANEL_SIZE, PANEL_SIZE), np.float32)
    x[0, 0] = mono.data[:, :, 0]
    x[0, 1:] = rasterize_dots(_map_dots(req.dots, panel.width, panel.height, geo), (PANEL_SIZE, PANEL_SIZE))
    vec = feature_to_vector(req.effective_feature()).astype(np.float32)[None, :]
    lab, _ = model.forward(Tensor(x), Tensor(vec), train_mode=False)
    lab_img = RasterImage(Encoding.LabF32, np.ascontiguousarray(lab.data[0].transpose(1, 2, 0)))
    return lab_to_rgb(lab_img), geo


def _unletterbox(img: RasterImage, geo: _Letterbox, out_w: int, out_h: int, factor: int = 1) -> RasterImage:
    ox, oy, cw, ch = geo.ox * factor, geo.oy * factor, geo.cw * factor, geo.ch * factor
    content = RasterImage(img.encoding, img.data[oy : oy + ch, ox : ox + cw].copy())
    return resize(content, out_w, out_h, "bilinear")


def colorize_panel(req: ColorizeRequest, model: ColorizationModel) -> RasterImage:
    """Colorize one panel and return it at the panel's own size."""
    boxed, geo = _colorize_letterboxed(req, model)
    return _unletterbox(boxed, geo, req.panel.width, req.panel.height)


def colorize_page(job: PageJob, model: ColorizationModel, sr: SRModel) -> PageResult:
    """Run the full pipeline; the restored page is 2x the input page size."""
    page = job.page
    if page.encoding is Encoding.Mono1:
        page = mono_to_rgb(page)
    page.require(Encoding.RGB8)
    mono = binarize(page)
    layout = segment_page(mono, job.segmentation)
    crops = crop_panels(page, layout)

    out_panels = []
    for i, crop in enumerate(crops):
        try:
            req = job.overrides.get(i)
            if req is None:
                req = ColorizeRequest(panel=crop, feature=job.default_feature)
            else:
                req = ColorizeRequest(crop, req.feature, req.dots, req.dominant_scale, req.blend)
            boxed, geo = _colorize_letterboxed(req, model)
            snapped = snap_extremes(boxed)
            unit = snapped.data.astype(np.float32).transpose(2, 0, 1)[None] / 255.0
            sr_out = sr.super_resolve(Tensor(unit))
            rgb = np.clip(np.floor(sr_out.data[0].transpose(1, 2, 0) * 255.0 + 0.5), 0, 255).astype(np.uint8)
            big = RasterImage(Encoding.RGB8, rgb)
            rect = layout.panels[i]
            out_panels.append(_unletterbox(big, geo, rect.w * 2, rect.h * 2, factor=2))
        except Exception as exc:
            raise PipelineError(f"panel {i}: {exc}") from exc

    mono2x = resize(mono, mono.width * 2, mono.height * 2, "nearest")
    final = restore_layout(mono2x, layout.scaled(2), out_panels)
    return PageResult(final, layout, out_panels)


def load_job(path, default_feature: ColorFeature | None = None) -> tuple[PageJob, dict]:
    """Read a page-job JSON: page path, checkpoint paths, default feature,
    per-panel overrides. Returns the job plus {"model": path, "sr": path}
    (entries may be absent when the caller supplies checkpoints itself)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    page = load_image(doc["page"])
    checkpoints = {k: doc[k] for k in ("model", "sr") if k in doc}
    if "default_feature" in doc:
        default = load_feature(doc["default_feature"])
    elif default_feature is not None:
        default = default_feature
    else:
        raise ValueError("job file needs a default_feature")
    overrides = {}
    for entry in doc.get("overrides", []):
        idx = int(entry["panel"])
        feature = load_feature(entry["feature"]) if "feature" in entry else default
        dots = [DotAnnotation(int(d["x"]), int(d["y"]), float(d["a"]), float(d["b"])) for d in entry.get("dots", [])]
        blend = None
        if "blend" in entry:
            blend = BlendOption(load_feature(entry["blend"]["feature"]), float(entry["blend"]["ratio"]))
        overrides[idx] = ColorizeRequest(
            panel=page,  # replaced by the actual crop inside colorize_page
            feature=feature,
            dots=dots,
            dominant_scale=entry.get("dominant_scale"),
            blend=blend,
        )
    return PageJob(page=page, default_feature=default, overrides=overrides), checkpoints
