"""Raster images, color-space conversion, binarization, and resampling.

Images are carried through the system as :class:`RasterImage` values in one of
three encodings:

* ``RGB8``   -- interleaved uint8 RGB, samples in [0, 255]
* ``LabF32`` -- float32 CIE L*a*b (D65, sRGB companding), L in [0, 100],
  a/b in [-128, 127]
* ``Mono1``  -- single channel uint8 with samples in {0, 1}; 1 is paper
  (white), 0 is ink (black)

All operations are pure: they never mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from PIL import Image


class Encoding(str, Enum):
    RGB8 = "rgb8"
    LabF32 = "labf32"
    Mono1 = "mono1"


_CHANNELS = {Encoding.RGB8: 3, Encoding.LabF32: 3, Encoding.Mono1: 1}
_DTYPES = {Encoding.RGB8: np.uint8, Encoding.LabF32: np.float32, Encoding.Mono1: np.uint8}

# Rec.601 luma weights used for grayscale reduction before thresholding.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class EncodingMismatchError(ValueError):
    """Raised when an operation receives an image in the wrong encoding."""


@dataclass(frozen=True)
class RasterImage:
    """An immutable pixel raster; ``data`` has shape (height, width, channels)."""

    encoding: Encoding
    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3:
            raise ValueError(f"image data must be HxWxC, got shape {data.shape}")
        if data.shape[2] != _CHANNELS[self.encoding]:
            raise ValueError(
                f"{self.encoding.value} needs {_CHANNELS[self.encoding]} channels, "
                f"got {data.shape[2]}"
            )
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError("image must have at least one pixel")
        data = data.astype(_DTYPES[self.encoding], copy=False)
        if self.encoding is Encoding.Mono1 and not np.isin(data, (0, 1)).all():
            raise ValueError("Mono1 samples must be 0 or 1")
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def require(self, encoding: Encoding) -> None:
        if self.encoding is not encoding:
            raise EncodingMismatchError(
                f"expected {encoding.value} image, got {self.encoding.value}"
            )


def _srgb_to_linear(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb(c: np.ndarray) -> np.ndarray:
    c = np.maximum(c, 0.0)
    return np.where(c <= 0.0031308, c * 12.92, 1.055 * c ** (1.0 / 2.4) - 0.055)


# sRGB -> XYZ (D65). The reference white is the matrix row sums, so that
# (255,255,255) maps exactly to L=100, a=b=0.
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_WHITE = _RGB_TO_XYZ.sum(axis=1)

_LAB_DELTA = 6.0 / 29.0


def _lab_f(t: np.ndarray) -> np.ndarray:
    return np.where(t > _LAB_DELTA**3, np.cbrt(t), t / (3 * _LAB_DELTA**2) + 4.0 / 29.0)


def _lab_f_inv(t: np.ndarray) -> np.ndarray:
    return np.where(t > _LAB_DELTA, t**3, 3 * _LAB_DELTA**2 * (t - 4.0 / 29.0))


def rgb_to_lab(img: RasterImage) -> RasterImage:
    """Convert an RGB8 image to CIE L*a*b (D65 white, sRGB companding)."""
    img.require(Encoding.RGB8)
    rgb = img.data.astype(np.float64) / 255.0
    lin = _srgb_to_linear(rgb)
    xyz = lin @ _RGB_TO_XYZ.T
    f = _lab_f(xyz / _WHITE)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return RasterImage(Encoding.LabF32, lab.astype(np.float32))


def lab_to_rgb(img: RasterImage) -> RasterImage:
    """Invert :func:`rgb_to_lab`; out-of-gamut values are clamped per channel."""
    img.require(Encoding.LabF32)
    lab = img.data.astype(np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    xyz = np.stack([_lab_f_inv(fx), _lab_f_inv(fy), _lab_f_inv(fz)], axis=-1) * _WHITE
    lin = xyz @ _XYZ_TO_RGB.T
    srgb = _linear_to_srgb(np.clip(lin, 0.0, None))
    rgb = np.clip(np.floor(srgb * 255.0 + 0.5), 0, 255)
    return RasterImage(Encoding.RGB8, rgb.astype(np.uint8))


def luma_histogram(img: RasterImage) -> np.ndarray:
    """256-bin histogram of rounded Rec.601 luma for an RGB8 image."""
    img.require(Encoding.RGB8)
    return np.bincount(_luma(img.data).ravel(), minlength=256).astype(np.int64)


def _luma(rgb: np.ndarray) -> np.ndarray:
    w = np.array(LUMA_WEIGHTS)
    return np.floor(rgb.astype(np.float64) @ w + 0.5).astype(np.int64)


def otsu_threshold(hist: np.ndarray) -> int:
    """Threshold maximizing between-class variance; class 0 is values <= t.

    Ties are broken by the lowest t whose class 0 is nonempty, capped at 254
    so that a constant all-255 image still binarizes to white.
    """
    hist = np.asarray(hist, dtype=np.float64)
    if hist.shape != (256,):
        raise ValueError("histogram must have 256 bins")
    total = hist.sum()
    if total <= 0:
        raise ValueError("histogram is empty")
    values = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(hist)
    w1 = total - w0
    sum0 = np.cumsum(hist * values)
    mu0 = np.divide(sum0, w0, out=np.zeros(256), where=w0 > 0)
    mu1 = np.divide(sum0[-1] - sum0, w1, out=np.zeros(256), where=w1 > 0)
    sigma = w0 * w1 * (mu0 - mu1) ** 2
    if sigma.max() > 0:
        return int(np.argmax(sigma))
    # Degenerate histogram: all splits equivalent; lowest t keeping class 0 nonempty.
    return min(int(np.argmax(hist > 0)), 254)


def binarize(img: RasterImage) -> RasterImage:
    """Otsu-binarize an RGB8 image: 1 where luma exceeds the page threshold."""
    img.require(Encoding.RGB8)
    luma = _luma(img.data)
    t = otsu_threshold(np.bincount(luma.ravel(), minlength=256))
    return RasterImage(Encoding.Mono1, (luma > t).astype(np.uint8))


def mono_to_rgb(img: RasterImage) -> RasterImage:
    """Render a Mono1 image as black/white RGB8."""
    img.require(Encoding.Mono1)
    return RasterImage(Encoding.RGB8, np.repeat(img.data * np.uint8(255), 3, axis=2))


def _resample_weights(n_in: int, n_out: int, method: str) -> np.ndarray:
    """Dense (n_out, n_in) resampling matrix with clamped edge handling."""
    w = np.zeros((n_out, n_in))
    scale = n_in / n_out
    src = (np.arange(n_out) + 0.5) * scale - 0.5
    if method == "nearest":
        idx = np.clip(np.floor(src + 0.5).astype(int), 0, n_in - 1)
        w[np.arange(n_out), idx] = 1.0
    elif method == "bilinear":
        i0 = np.floor(src).astype(int)
        frac = src - i0
        for tap, weight in ((i0, 1.0 - frac), (i0 + 1, frac)):
            np.add.at(w, (np.arange(n_out), np.clip(tap, 0, n_in - 1)), weight)
    elif method == "bicubic":
        # Keys cubic convolution kernel, a = -0.5.
        i0 = np.floor(src).astype(int)
        frac = src - i0
        for k in range(-1, 3):
            d = np.abs(frac - k)
            weight = np.where(
                d <= 1,
                1.5 * d**3 - 2.5 * d**2 + 1,
                np.where(d < 2, -0.5 * d**3 + 2.5 * d**2 - 4 * d + 2, 0.0),
            )
            np.add.at(w, (np.arange(n_out), np.clip(i0 + k, 0, n_in - 1)), weight)
    else:
        raise ValueError(f"unknown resampling method {method!r}")
    return w


def resize(img: RasterImage, w: int, h: int, method: str = "bilinear") -> RasterImage:
    """Separable resampling to w x h; Mono1 is resampled as float and re-thresholded."""
    if w < 1 or h < 1:
        raise ValueError("target dimensions must be >= 1")
    if (w, h) == (img.width, img.height):
        return RasterImage(img.encoding, img.data.copy())
    wy = _resample_weights(img.height, h, method)
    wx = _resample_weights(img.width, w, method)
    data = img.data.astype(np.float64)
    out = np.einsum("oi,ijc->ojc", wy, data, optimize=True)
    out = np.einsum("oj,ijc->ioc", wx, out, optimize=True)
    if img.encoding is Encoding.RGB8:
        out = np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)
    elif img.encoding is Encoding.Mono1:
        out = (out >= 0.5).astype(np.uint8)
    else:
        out = out.astype(np.float32)
    return RasterImage(img.encoding, out)


def random_crop_flip(
    img: RasterImage,
    crop: int = 224,
    flip_prob: float = 0.5,
    seed: int | np.random.Generator = 0,
) -> RasterImage:
    """Uniform random crop to crop x crop plus a horizontal flip with flip_prob.

    Deterministic for a fixed seed; the draw order is (y offset, x offset, flip).
    """
    if img.width < crop or img.height < crop:
        raise ValueError(f"image {img.width}x{img.height} smaller than crop {crop}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    oy = int(rng.integers(0, img.height - crop + 1))
    ox = int(rng.integers(0, img.width - crop + 1))
    data = img.data[oy : oy + crop, ox : ox + crop]
    if rng.random() < flip_prob:
        data = data[:, ::-1]
    return RasterImage(img.encoding, data.copy())


def load_image(path) -> RasterImage:
    """Load a PNG/JPEG file as RGB8; alpha is composited onto white."""
    with Image.open(path) as im:
        if im.mode in ("RGBA", "LA", "PA"):
            rgba = im.convert("RGBA")
            bg = Image.new("RGBA", rgba.size, (255, 255, 255, 255))
            im = Image.alpha_composite(bg, rgba)
        rgb = im.convert("RGB")
        return RasterImage(Encoding.RGB8, np.asarray(rgb))


def save_image(img: RasterImage, path) -> None:
    """Write an RGB8 or Mono1 image to disk (format from the extension)."""
    if img.encoding is Encoding.RGB8:
        Image.fromarray(img.data, mode="RGB").save(path)
    elif img.encoding is Encoding.Mono1:
        Image.fromarray(img.data[:, :, 0] * np.uint8(255), mode="L").save(path)
    else:
        raise EncodingMismatchError("convert LabF32 to RGB8 before saving")
