import json

import numpy as np
import pytest

from mangacolor.cli import main
from mangacolor.features import binarize_palette, extract_histogram, load_feature, save_feature
from mangacolor.models import ColorizationModel
from mangacolor.panels import layout_from_json, segment_page
from mangacolor.pipeline import ColorizeRequest, colorize_panel
from mangacolor.raster import binarize, load_image, mono_to_rgb, save_image
from mangacolor.train import DotAnnotation
from synth import RED, flat_shape_image, framed_page


@pytest.fixture()
def red_png(tmp_path):
    path = tmp_path / "red.png"
    save_image(flat_shape_image(RED), path)
    return str(path)


def test_no_subcommand_usage_exit_1(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_flag_exit_1(capsys):
    assert main(["segment", "--bogus"]) == 1


def test_runtime_error_exit_2(tmp_path, capsys):
    assert main(["segment", str(tmp_path / "missing.png"), "-o", str(tmp_path / "out.json")]) == 2


def test_extract_feature_palette_matches_module(red_png, tmp_path):
    out = tmp_path / "f.json"
    assert main(["extract-feature", red_png, "--palette", "-o", str(out)]) == 0
    feature = load_feature(out)
    expected = binarize_palette(extract_histogram(load_image(red_png)))
    assert feature.mode == "palette"
    assert np.array_equal(feature.bins, expected.bins)
    assert feature.bins[180] == 1.0  # red corner bin


def test_extract_feature_histogram(red_png, tmp_path):
    out = tmp_path / "h.json"
    assert main(["extract-feature", red_png, "--histogram", "-o", str(out)]) == 0
    feature = load_feature(out)
    expected = extract_histogram(load_image(red_png))
    assert feature.mode == "histogram"
    assert np.array_equal(feature.bins, expected.bins)


def test_segment_matches_module(tmp_path):
    mono, truth = framed_page([2, 2], page_w=300, page_h=400)
    page_path = tmp_path / "grid4.png"
    save_image(mono_to_rgb(mono), page_path)
    out = tmp_path / "layout.json"
    assert main(["segment", str(page_path), "-o", str(out)]) == 0
    layout = layout_from_json(out.read_text())
    assert layout == segment_page(binarize(load_image(page_path)))
    assert len(layout.panels) == 4


def test_colorize_panel_matches_module(tmp_path, tiny_checkpoints):
    model_path, _ = tiny_checkpoints
    panel_img = mono_to_rgb(binarize(flat_shape_image(RED)))
    panel_path = tmp_path / "panel.png"
    save_image(panel_img, panel_path)
    feat = binarize_palette(extract_histogram(flat_shape_image(RED)))
    feat_path = tmp_path / "f.json"
    save_feature(feat, feat_path)
    out = tmp_path / "out.png"
    code = main(
        [
            "colorize-panel", str(panel_path), "--feature", str(feat_path),
            "--dot", "10,12,40,-20", "--model", model_path, "-o", str(out),
        ]
    )
    assert code == 0
    expected = colorize_panel(
        ColorizeRequest(panel=panel_img, feature=feat, dots=[DotAnnotation(10, 12, 40.0, -20.0)]),
        ColorizationModel.load(model_path),
    )
    assert np.array_equal(load_image(out).data, expected.data)


def test_colorize_page_runs(tmp_path, tiny_checkpoints):
    model_path, sr_path = tiny_checkpoints
    mono, _ = framed_page([1, 1], page_w=240, page_h=320)
    page_path = tmp_path / "page.png"
    save_image(mono_to_rgb(mono), page_path)
    feat_path = tmp_path / "f.json"
    save_feature(binarize_palette(extract_histogram(flat_shape_image(RED))), feat_path)
    job_path = tmp_path / "job.json"
    job_path.write_text(
        json.dumps(
            {
                "page": str(page_path),
                "model": model_path,
                "sr": sr_path,
                "default_feature": str(feat_path),
            }
        )
    )
    out = tmp_path / "color.png"
    code = main(["colorize-page", str(page_path), "--job", str(job_path), "-o", str(out)])
    assert code == 0
    img = load_image(out)
    assert (img.width, img.height) == (480, 640)


def test_superres_writes_448(tmp_path, tiny_checkpoints, red_png):
    _, sr_path = tiny_checkpoints
    out = tmp_path / "big.png"
    assert main(["superres", red_png, "--model", sr_path, "-o", str(out)]) == 0
    img = load_image(out)
    assert (img.width, img.height) == (448, 448)


def test_train_subcommand(tmp_path):
    paths = []
    for i, (img, label) in enumerate(
        [(flat_shape_image(RED), 0), (flat_shape_image(RED, kind="square"), 1)]
    ):
        p = tmp_path / f"img{i}.png"
        save_image(img, p)
        paths.append({"path": str(p), "label": label})
    config = {
        "iterations": 2,
        "batch_size": 2,
        "seed": 1,
        "label_count": 2,
        "channel_scale": 0.125,
        "adversarial_weight": 0.0,
        "dataset": paths,
    }
    cfg_path = tmp_path / "train.json"
    cfg_path.write_text(json.dumps(config))
    out_dir = tmp_path / "run"
    assert main(["train", "--config", str(cfg_path), "--out", str(out_dir)]) == 0
    assert (out_dir / "model_final.ckpt").exists()
    assert (out_dir / "loss_curve.csv").exists()
