"""Color features: 216-bin RGB histograms, binary palettes, and their edits.

A feature is a vector over 6x6x6 quantized RGB colors. Histogram mode holds a
normalized frequency distribution; palette mode holds a binary indicator of
which quantized colors are present. Both condition the colorization network,
and the histogram edits here (dominant-bin scaling, blending) are the global
revision controls exposed to users.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .raster import Encoding, RasterImage

BIN_COUNT = 216
BINS_PER_CHANNEL = 6
DEFAULT_PALETTE_TAU = 0.005

HISTOGRAM = "histogram"
PALETTE = "palette"

_SUM_TOL = 1e-6


@dataclass(frozen=True)
class ColorFeature:
    """216 bins plus a mode tag; histogram bins sum to 1, palette bins are {0,1}."""

    mode: str
    bins: np.ndarray

    def __post_init__(self):
        bins = np.ascontiguousarray(self.bins, dtype=np.float64)
        if bins.shape != (BIN_COUNT,):
            raise ValueError(f"feature needs {BIN_COUNT} bins, got shape {bins.shape}")
        if self.mode == HISTOGRAM:
            if (bins < 0).any() or abs(bins.sum() - 1.0) > _SUM_TOL:
                raise ValueError("histogram bins must be nonnegative and sum to 1")
        elif self.mode == PALETTE:
            if not np.isin(bins, (0.0, 1.0)).all() or not bins.any():
                raise ValueError("palette bins must be 0/1 with at least one bit set")
        else:
            raise ValueError(f"unknown feature mode {self.mode!r}")
        object.__setattr__(self, "bins", bins)

    def require(self, mode: str) -> None:
        if self.mode != mode:
            raise ValueError(f"expected {mode} feature, got {self.mode}")


def quantize_channel(c: np.ndarray) -> np.ndarray:
    """Per-channel bin index: min(5, floor(c * 6 / 256))."""
    return np.minimum(BINS_PER_CHANNEL - 1, (c.astype(np.int64) * BINS_PER_CHANNEL) // 256)


def bin_index(r: int, g: int, b: int) -> int:
    """Flat bin index of one RGB color: i_r*36 + i_g*6 + i_b."""
    ir, ig, ib = (quantize_channel(np.asarray(c)) for c in (r, g, b))
    return int(ir * 36 + ig * 6 + ib)


def extract_histogram(img: RasterImage) -> ColorFeature:
    """Normalized 216-bin histogram of an RGB8 image."""
    img.require(Encoding.RGB8)
    idx = quantize_channel(img.data)
    flat = idx[..., 0] * 36 + idx[..., 1] * 6 + idx[..., 2]
    counts = np.bincount(flat.ravel(), minlength=BIN_COUNT)
    return ColorFeature(HISTOGRAM, counts / counts.sum())


def binarize_palette(h: ColorFeature, tau: float = DEFAULT_PALETTE_TAU) -> ColorFeature:
    """Palette bits where h_i >= tau; falls back to the argmax bin if all-zero."""
    h.require(HISTOGRAM)
    bits = (h.bins >= tau).astype(np.float64)
    if not bits.any():
        bits[int(np.argmax(h.bins))] = 1.0
    return ColorFeature(PALETTE, bits)


def adjust_dominant_bin(h: ColorFeature, scale: float) -> ColorFeature:
    """Scale the most frequent bin (lowest index on ties) and renormalize."""
    h.require(HISTOGRAM)
    if scale < 0:
        raise ValueError("scale must be >= 0")
    bins = h.bins.copy()
    bins[int(np.argmax(bins))] *= scale
    total = bins.sum()
    if total <= 0:
        raise ValueError("adjustment removed all histogram mass")
    return ColorFeature(HISTOGRAM, bins / total)


def blend_histograms(h1: ColorFeature, h2: ColorFeature, ratio: float) -> ColorFeature:
    """ratio*h1 + (1-ratio)*h2; ratio must lie in [0, 1]."""
    h1.require(HISTOGRAM)
    h2.require(HISTOGRAM)
    if not 0.0 <= ratio <= 1.0:
        raise ValueError("blend ratio must be in [0, 1]")
    return ColorFeature(HISTOGRAM, ratio * h1.bins + (1.0 - ratio) * h2.bins)


def feature_to_vector(f: ColorFeature) -> np.ndarray:
    """The raw 216-vector fed to the network's feature projection."""
    return f.bins.copy()


def feature_from_vector(vec: np.ndarray, mode: str) -> ColorFeature:
    """Rebuild a feature from its vector and mode tag (round-trips exactly)."""
    return ColorFeature(mode, np.asarray(vec, dtype=np.float64))


def feature_to_json(f: ColorFeature) -> str:
    return json.dumps({"mode": f.mode, "bins": f.bins.tolist()})


def feature_from_json(text: str) -> ColorFeature:
    doc = json.loads(text)
    if not isinstance(doc, dict) or "mode" not in doc or "bins" not in doc:
        raise ValueError('feature JSON must be {"mode": ..., "bins": [...]}')
    return ColorFeature(doc["mode"], np.asarray(doc["bins"], dtype=np.float64))


def load_feature(path) -> ColorFeature:
    with open(path, "r", encoding="utf-8") as fh:
        return feature_from_json(fh.read())


def save_feature(f: ColorFeature, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(feature_to_json(f))
