import math

import numpy as np
import pytest

from mangacolor import nn
from mangacolor.models import Discriminator
from mangacolor.nn import AdamState, Tensor
from mangacolor.raster import Encoding, RasterImage, rgb_to_lab
from mangacolor.train import (
    LossReport,
    TrainConfig,
    TrainingDiverged,
    build_example,
    compute_losses,
    read_loss_curve,
    synthesize_dots,
    train_discriminator_step,
    train_loop,
    write_loss_curve,
)
from synth import RED, flat_shape_image, toy_dataset

TOY_CONFIG = TrainConfig(
    iterations=5,
    batch_size=2,
    seed=3,
    label_count=4,
    channel_scale=0.125,
    alpha=1e-3,
    feature_mode="palette",
)


def lab_target(seed=0, size=32):
    rng = np.random.default_rng(seed)
    rgb = RasterImage(Encoding.RGB8, rng.integers(1, 255, (size, size, 3)).astype(np.uint8))
    return rgb_to_lab(rgb)


# ---------------------------------------------------------------------------
# dot synthesis


def test_dots_zero_count_seed():
    target = lab_target()
    for seed in range(200):
        dots = synthesize_dots(target, seed)
        if not dots:
            return
    pytest.fail("no seed produced an empty dot list in 200 tries")


def test_dots_copy_target_chroma_exactly():
    target = lab_target(4)
    for seed in range(30):
        for d in synthesize_dots(target, seed):
            assert d.a == float(target.data[d.y, d.x, 1])
            assert d.b == float(target.data[d.y, d.x, 2])


def test_dots_positions_distinct_and_bounded():
    target = lab_target(7, size=8)
    for seed in range(100):
        dots = synthesize_dots(target, seed)
        assert len(dots) <= 15
        positions = {(d.x, d.y) for d in dots}
        assert len(positions) == len(dots)
        for d in dots:
            assert 0 <= d.x < 8 and 0 <= d.y < 8


def test_dot_count_uniform_quick():
    target = lab_target(2, size=16)
    counts = np.zeros(16)
    draws = 4000
    for seed in range(draws):
        counts[len(synthesize_dots(target, seed))] += 1
    freq = counts / draws
    assert np.abs(freq - 1 / 16).max() <= 0.02


# ---------------------------------------------------------------------------
# example building


def test_flat_color_example_structure():
    img = flat_shape_image(RED)
    cfg = TrainConfig(max_dots=0, feature_mode="histogram", label_count=4)
    ex = build_example(img, 1, seed=0, config=cfg)
    assert ex.input.shape == (3, 224, 224)
    assert set(np.unique(ex.input[0])) <= {0.0, 1.0}
    assert np.count_nonzero(ex.feature) == 2  # red fill + white background bins
    assert ex.target_lab.shape == (3, 224, 224)


def test_example_deterministic_per_seed():
    img = flat_shape_image(RED)
    cfg = TrainConfig(label_count=4)
    a = build_example(img, 0, seed=42, config=cfg)
    b = build_example(img, 0, seed=42, config=cfg)
    assert np.array_equal(a.input, b.input)
    assert np.array_equal(a.feature, b.feature)
    assert np.array_equal(a.target_lab, b.target_lab)
    assert a.dots == b.dots


def test_example_dot_channels_count():
    # fully red image: a,b are nonzero at every pixel, so every dot is visible
    img = RasterImage(Encoding.RGB8, np.tile(np.array(RED, np.uint8), (256, 256, 1)))
    cfg = TrainConfig(label_count=4)
    for seed in range(20):
        ex = build_example(img, 0, seed=seed, config=cfg)
        visible = np.count_nonzero((ex.input[1] != 0) | (ex.input[2] != 0))
        assert visible == len(ex.dots)
        assert visible <= 15


def test_example_input_channel_is_binarized_target():
    from mangacolor.raster import binarize, lab_to_rgb

    img = flat_shape_image(RED)
    cfg = TrainConfig(max_dots=0, label_count=4)
    ex = build_example(img, 0, seed=9, config=cfg)
    lab_img = RasterImage(Encoding.LabF32, np.ascontiguousarray(ex.target_lab.transpose(1, 2, 0)))
    rendered = binarize(lab_to_rgb(lab_img))
    assert np.array_equal(ex.input[0], rendered.data[:, :, 0].astype(np.float32))


# ---------------------------------------------------------------------------
# losses


def test_mse_zero_when_output_equals_target():
    target = np.random.default_rng(0).standard_normal((2, 3, 224, 224)).astype(np.float32)
    lab_out = Tensor(target.copy())
    logits = Tensor(np.zeros((2, 4), np.float32))
    _, report = compute_losses(lab_out, logits, None, target, np.array([0, 1]), TrainConfig(adversarial_weight=0, label_count=4))
    assert report.mse == 0.0


def test_uniform_logits_classification_ln4():
    target = np.zeros((2, 3, 224, 224), np.float32)
    _, report = compute_losses(
        Tensor(target), Tensor(np.zeros((2, 4), np.float32)), None, target, np.array([1, 3]),
        TrainConfig(adversarial_weight=0, label_count=4),
    )
    assert report.classification == pytest.approx(math.log(4), abs=1e-6)


def test_total_weights_arithmetic():
    assert LossReport(2.0, 0.5, 10.0, 2.0 + 0.5 + 0.003 * 10.0).total == pytest.approx(2.53)
    target = np.random.default_rng(1).standard_normal((1, 3, 224, 224)).astype(np.float32)
    disc = Discriminator(channel_scale=0.125, seed=0)
    _, report = compute_losses(
        Tensor(np.zeros_like(target), requires_grad=True), Tensor(np.zeros((1, 4), np.float32), requires_grad=True),
        disc, target, np.array([0]), TrainConfig(label_count=4),
    )
    assert report.total == report.mse + report.adversarial + 0.003 * report.classification
    assert report.adversarial != 0.0


def test_sigmoid_ce_perfect_and_chance():
    assert float(nn.sigmoid_cross_entropy(Tensor(np.full(4, 20.0, np.float32)), 1.0).data) < 1e-6
    assert float(nn.sigmoid_cross_entropy(Tensor(np.full(4, -20.0, np.float32)), 0.0).data) < 1e-6
    assert float(nn.sigmoid_cross_entropy(Tensor(np.zeros(4, np.float32)), 0.0).data) == pytest.approx(math.log(2), abs=1e-6)


def test_disc_step_zero_weights_ln2_loss():
    disc = Discriminator(channel_scale=0.125, seed=1)
    for name, t in disc.params.items():
        t.data[:] = 1.0 if name.endswith(".bn.var") else 0.0
    rng = np.random.default_rng(0)
    real = rng.standard_normal((2, 3, 224, 224)).astype(np.float32)
    fake = rng.standard_normal((2, 3, 224, 224)).astype(np.float32)
    loss = train_discriminator_step(disc, AdamState(), real, fake)
    assert loss == pytest.approx(math.log(2), abs=1e-5)


def test_disc_step_leaves_generator_untouched():
    from mangacolor.models import ColorizationModel

    gen = ColorizationModel(label_count=4, channel_scale=0.125, seed=2)
    disc = Discriminator(channel_scale=0.125, seed=3)
    before = gen.params.checksum()
    rng = np.random.default_rng(1)
    real = rng.standard_normal((2, 3, 224, 224)).astype(np.float32)
    fake = rng.standard_normal((2, 3, 224, 224)).astype(np.float32)
    train_discriminator_step(disc, AdamState(), real, fake)
    assert gen.params.checksum() == before


# ---------------------------------------------------------------------------
# the loop


def test_loop_deterministic_same_seed():
    res1 = train_loop(TOY_CONFIG, toy_dataset())
    res2 = train_loop(TOY_CONFIG, toy_dataset())
    assert [r.total for r in res1.reports] == [r.total for r in res2.reports]
    assert res1.disc_losses == res2.disc_losses
    assert res1.model.params.checksum() == res2.model.params.checksum()


def test_loop_loss_identity_every_step():
    res = train_loop(TOY_CONFIG, toy_dataset())
    for r in res.reports:
        assert r.total == r.mse + r.adversarial + TOY_CONFIG.classification_weight * r.classification
        assert r.adversarial != 0.0  # adversarial path active by default


def test_loop_adversarial_disabled_records_zero():
    cfg = TrainConfig(**{**TOY_CONFIG.__dict__, "adversarial_weight": 0.0, "iterations": 2})
    res = train_loop(cfg, toy_dataset())
    assert res.disc is None
    assert all(r.adversarial == 0.0 for r in res.reports)
    assert all(d == 0.0 for d in res.disc_losses)


def test_loop_writes_checkpoints_and_curve(tmp_path):
    cfg = TrainConfig(**{**TOY_CONFIG.__dict__, "iterations": 2, "out_dir": str(tmp_path), "checkpoint_every": 1})
    res = train_loop(cfg, toy_dataset())
    assert (tmp_path / "model_final.ckpt").exists()
    assert (tmp_path / "disc_final.ckpt").exists()
    rows = read_loss_curve(tmp_path / "loss_curve.csv")
    assert len(rows) == 2
    for row, rep in zip(rows, res.reports):
        assert row["total"] == rep.total
        assert row["total"] == row["mse"] + row["adversarial"] + 0.003 * row["classification"]


def test_loop_diverges_with_absurd_learning_rate():
    cfg = TrainConfig(**{**TOY_CONFIG.__dict__, "alpha": 1e22, "iterations": 10, "adversarial_weight": 0.0})
    with np.errstate(invalid="ignore", over="ignore"):
        with pytest.raises(TrainingDiverged) as err:
            train_loop(cfg, toy_dataset())
    assert err.value.iteration >= 1


def test_loop_rejects_bad_labels():
    with pytest.raises(ValueError):
        train_loop(TrainConfig(label_count=2), [(flat_shape_image(RED), 5)])
    with pytest.raises(ValueError):
        train_loop(TrainConfig(), [])


def test_pure_mse_training_window_means_non_increasing():
    # with adversarial and classification terms zeroed, 50-iteration window
    # means of the MSE never increase on the toy overfit set
    cfg = TrainConfig(
        iterations=200, batch_size=2, seed=13, label_count=4, channel_scale=0.125,
        alpha=1e-3, adversarial_weight=0.0, classification_weight=0.0,
        max_dots=0, feature_mode="palette",
    )
    res = train_loop(cfg, toy_dataset())
    mse = [r.mse for r in res.reports]
    windows = [float(np.mean(mse[i : i + 50])) for i in range(0, len(mse), 50)]
    for earlier, later in zip(windows, windows[1:]):
        assert later <= earlier


def test_loss_curve_round_trip(tmp_path):
    reports = [LossReport(1.5, 0.25, 3.0, 1.5 + 0.25 + 0.003 * 3.0)]
    path = tmp_path / "curve.csv"
    write_loss_curve(path, reports, [0.5])
    rows = read_loss_curve(path)
    assert rows[0]["mse"] == 1.5 and rows[0]["total"] == reports[0].total
