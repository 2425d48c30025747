import math

import numpy as np
import pytest

from mangacolor.raster import (
    Encoding,
    EncodingMismatchError,
    RasterImage,
    binarize,
    lab_to_rgb,
    load_image,
    mono_to_rgb,
    otsu_threshold,
    random_crop_flip,
    resize,
    rgb_to_lab,
    save_image,
)


# ---------------------------------------------------------------------------
# Independent reference oracles (kept deliberately separate from the product
# implementations: scalar math, straightforward loops, double precision).

def ref_rgb_to_lab(r, g, b):
    def lin(c):
        c = c / 255.0
        return c / 12.92 if c <= 0.04045 else ((c + 0.055) / 1.055) ** 2.4

    rl, gl, bl = lin(r), lin(g), lin(b)
    x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl
    y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl
    z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl
    xn = 0.4124564 + 0.3575761 + 0.1804375
    zn = 0.0193339 + 0.1191920 + 0.9503041

    def f(t):
        return t ** (1 / 3) if t > (6 / 29) ** 3 else t / (3 * (6 / 29) ** 2) + 4 / 29

    fx, fy, fz = f(x / xn), f(y), f(z / zn)
    return 116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)


def ref_otsu(hist):
    """Exhaustive 256-way scan of between-class variance, lowest tie."""
    total = float(sum(hist))
    grand = sum(v * float(hist[v]) for v in range(256))
    best_t, best_sigma = None, -1.0
    w0 = 0.0
    sum0 = 0.0
    for t in range(256):
        w0 += float(hist[t])
        sum0 += t * float(hist[t])
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            sigma = 0.0
        else:
            mu0 = sum0 / w0
            mu1 = (grand - sum0) / w1
            sigma = w0 * w1 * (mu0 - mu1) ** 2
        if sigma > best_sigma:
            best_t, best_sigma = t, sigma
    if best_sigma > 0:
        return best_t
    return min(next(v for v in range(256) if hist[v] > 0), 254)


def ref_resample_1d(samples, n_out):
    """Double-precision bilinear resample of one row, clamped edges."""
    n_in = len(samples)
    out = []
    for o in range(n_out):
        src = (o + 0.5) * n_in / n_out - 0.5
        i0 = math.floor(src)
        frac = src - i0
        s0 = samples[min(max(i0, 0), n_in - 1)]
        s1 = samples[min(max(i0 + 1, 0), n_in - 1)]
        out.append((1 - frac) * s0 + frac * s1)
    return out


def rgb_image(arr):
    return RasterImage(Encoding.RGB8, np.asarray(arr, np.uint8))


# ---------------------------------------------------------------------------
# rgb_to_lab / lab_to_rgb


def test_white_maps_to_reference_white():
    lab = rgb_to_lab(rgb_image(np.full((1, 1, 3), 255)))
    assert np.allclose(lab.data[0, 0], [100.0, 0.0, 0.0], atol=0.01)


def test_black_maps_to_origin():
    lab = rgb_to_lab(rgb_image(np.zeros((1, 1, 3))))
    assert np.allclose(lab.data[0, 0], [0.0, 0.0, 0.0], atol=0.01)


def test_lab_matches_reference_converter():
    lab = rgb_to_lab(rgb_image([[[128, 64, 200]]]))
    expected = ref_rgb_to_lab(128, 64, 200)
    assert np.allclose(lab.data[0, 0], expected, atol=1e-3)


def test_lab_random_pixels_match_reference():
    rng = np.random.default_rng(5)
    pixels = rng.integers(0, 256, (40, 3))
    lab = rgb_to_lab(rgb_image(pixels.reshape(1, -1, 3)))
    for i, (r, g, b) in enumerate(pixels):
        assert np.allclose(lab.data[0, i], ref_rgb_to_lab(r, g, b), atol=1e-3)


def test_lab_to_rgb_white():
    rgb = lab_to_rgb(RasterImage(Encoding.LabF32, np.array([[[100.0, 0.0, 0.0]]], np.float32)))
    assert np.all(np.abs(rgb.data[0, 0].astype(int) - 255) <= 1)


def test_lab_round_trip_within_one():
    rng = np.random.default_rng(11)
    arr = rng.integers(0, 256, (48, 48, 3)).astype(np.uint8)
    back = lab_to_rgb(rgb_to_lab(rgb_image(arr)))
    assert np.abs(back.data.astype(int) - arr.astype(int)).max() <= 1


def test_lab_round_trip_rgb_grid():
    # coarse sweep of the full RGB cube including the 255 corner
    vals = np.arange(0, 256, 17)
    grid = np.stack(np.meshgrid(vals, vals, vals, indexing="ij"), axis=-1).reshape(1, -1, 3)
    img = rgb_image(grid)
    back = lab_to_rgb(rgb_to_lab(img))
    assert np.abs(back.data.astype(int) - img.data.astype(int)).max() <= 1


def test_lab_out_of_gamut_clamps_without_error():
    wild = RasterImage(Encoding.LabF32, np.array([[[50.0, 120.0, -120.0]]], np.float32))
    rgb = lab_to_rgb(wild)
    assert rgb.data.dtype == np.uint8


def test_encoding_mismatch_raises():
    mono = RasterImage(Encoding.Mono1, np.ones((2, 2, 1), np.uint8))
    with pytest.raises(EncodingMismatchError):
        rgb_to_lab(mono)


# ---------------------------------------------------------------------------
# otsu / binarize


def test_otsu_constant_image():
    hist = np.zeros(256)
    hist[7] = 10
    assert otsu_threshold(hist) == 7


def test_otsu_two_spikes_lowest_tie():
    hist = np.zeros(256)
    hist[0] = 50
    hist[200] = 50
    assert otsu_threshold(hist) == 0


def test_otsu_empty_histogram_raises():
    with pytest.raises(ValueError):
        otsu_threshold(np.zeros(256))


def test_otsu_matches_brute_force_scan():
    rng = np.random.default_rng(99)
    for _ in range(200):
        hist = rng.integers(0, 50, 256)
        assert otsu_threshold(hist) == ref_otsu(list(hist))


def test_binarize_white_and_black():
    assert binarize(rgb_image(np.full((3, 3, 3), 255))).data.min() == 1
    assert binarize(rgb_image(np.zeros((3, 3, 3)))).data.max() == 0


def test_binarize_half_split():
    arr = np.zeros((2, 2, 3), np.uint8)
    arr[0] = 200
    mono = binarize(rgb_image(arr))
    assert mono.data[0].min() == 1 and mono.data[1].max() == 0


def test_binarize_idempotent_on_rendered_mono():
    rng = np.random.default_rng(3)
    mono = RasterImage(Encoding.Mono1, (rng.random((16, 16, 1)) > 0.5).astype(np.uint8))
    again = binarize(mono_to_rgb(mono))
    assert np.array_equal(again.data, mono.data)


# ---------------------------------------------------------------------------
# resize


def test_resize_identity_bit_exact():
    rng = np.random.default_rng(1)
    img = rgb_image(rng.integers(0, 256, (10, 12, 3)))
    for method in ("nearest", "bilinear", "bicubic"):
        assert np.array_equal(resize(img, 12, 10, method).data, img.data)


def test_resize_nearest_block_expansion():
    checker = rgb_image(np.array([[[0] * 3, [255] * 3], [[255] * 3, [0] * 3]]))
    up = resize(checker, 4, 4, "nearest")
    expected = np.kron(checker.data[:, :, 0], np.ones((2, 2), np.uint8))
    assert np.array_equal(up.data[:, :, 0], expected)


def test_resize_bilinear_matches_double_reference():
    # float32 image: the product path must agree with a double-precision
    # reference within 1 float32 ulp per sample
    grad = np.linspace(0, 100, 256, dtype=np.float64)
    img_data = np.tile(grad[None, :, None], (256, 1, 3)).astype(np.float32)
    img = RasterImage(Encoding.LabF32, np.clip(img_data, 0, 100))
    out = resize(img, 224, 224, "bilinear")
    ref_row = ref_resample_1d(list(img.data[0, :, 0].astype(np.float64)), 224)
    for j in range(224):
        assert abs(float(out.data[5, j, 0]) - ref_row[j]) <= np.spacing(np.float32(ref_row[j]))


def test_resize_uint8_gradient_matches_reference_quantized():
    grad = np.arange(256, dtype=np.uint8)
    img = rgb_image(np.tile(grad[None, :, None], (8, 1, 3)))
    out = resize(img, 224, 8, "bilinear")
    ref = ref_resample_1d(list(grad.astype(np.float64)), 224)
    expected = np.clip(np.floor(np.array(ref) + 0.5), 0, 255).astype(np.uint8)
    assert np.array_equal(out.data[3, :, 0], expected)


def test_resize_constant_preserved_all_methods():
    img = rgb_image(np.full((9, 7, 3), 173))
    for method in ("nearest", "bilinear", "bicubic"):
        for w, h in ((5, 13), (21, 4), (7, 9)):
            out = resize(img, w, h, method)
            assert (out.data == 173).all(), method


def test_resize_mono_rethresholded():
    mono = RasterImage(Encoding.Mono1, np.eye(4, dtype=np.uint8)[:, :, None])
    out = resize(mono, 8, 8, "bilinear")
    assert set(np.unique(out.data)) <= {0, 1}


def test_resize_zero_target_raises():
    with pytest.raises(ValueError):
        resize(rgb_image(np.zeros((4, 4, 3))), 0, 4)


# ---------------------------------------------------------------------------
# random_crop_flip


def test_crop_at_exact_size_is_input_or_mirror():
    rng = np.random.default_rng(2)
    img = rgb_image(rng.integers(0, 256, (224, 224, 3)))
    out = random_crop_flip(img, 224, seed=123)
    assert np.array_equal(out.data, img.data) or np.array_equal(out.data, img.data[:, ::-1])


def test_crop_deterministic_for_seed():
    rng = np.random.default_rng(4)
    img = rgb_image(rng.integers(0, 256, (256, 256, 3)))
    a = random_crop_flip(img, 224, seed=77)
    b = random_crop_flip(img, 224, seed=77)
    assert np.array_equal(a.data, b.data)


def test_crop_smaller_than_crop_raises():
    with pytest.raises(ValueError):
        random_crop_flip(rgb_image(np.zeros((100, 100, 3))), 224, seed=0)


def test_flip_frequency_near_half():
    marker = np.zeros((9, 9, 3), np.uint8)
    marker[0, 0] = 255
    img = rgb_image(marker)
    flips = 0
    for seed in range(10_000):
        out = random_crop_flip(img, 9, seed=seed)
        flips += out.data[0, -1, 0] == 255
    assert 0.47 <= flips / 10_000 <= 0.53


# ---------------------------------------------------------------------------
# file io


def test_png_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    img = rgb_image(rng.integers(0, 256, (20, 30, 3)))
    path = tmp_path / "img.png"
    save_image(img, path)
    again = load_image(path)
    assert np.array_equal(again.data, img.data)


def test_alpha_composited_on_white(tmp_path):
    from PIL import Image

    rgba = np.zeros((4, 4, 4), np.uint8)  # fully transparent black
    Image.fromarray(rgba, "RGBA").save(tmp_path / "a.png")
    img = load_image(tmp_path / "a.png")
    assert (img.data == 255).all()
