"""Training: example synthesis, the three-part loss, and GAN alternation.

Each example pairs a binarized drawing (plus synthesized one-pixel color
dots) with its color original in L*a*b. The objective is pixel MSE over Lab,
a non-saturating adversarial term, and a character-classification term,
combined at the 1 : 1 : 0.003 ratio. One iteration runs one discriminator
update followed by one generator update; everything is deterministic under a
fixed seed.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .features import (
    HISTOGRAM,
    PALETTE,
    ColorFeature,
    binarize_palette,
    extract_histogram,
    feature_to_vector,
)
from .models import ColorizationModel, Discriminator, scale_lab_to_unit
from .nn import AdamConfig, AdamState, Tensor, adam_step
from .raster import Encoding, RasterImage, binarize, random_crop_flip, resize, rgb_to_lab


class TrainingDiverged(RuntimeError):
    def __init__(self, iteration: int, message: str):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass(frozen=True)
class DotAnnotation:
    """A one-pixel chrominance hint at (x, y)."""

    x: int
    y: int
    a: float
    b: float


@dataclass
class TrainingExample:
    input: np.ndarray  # (3, crop, crop): binary drawing, dot a, dot b
    feature: np.ndarray  # (216,)
    target_lab: np.ndarray  # (3, crop, crop)
    label: int
    dots: list[DotAnnotation]


@dataclass(frozen=True)
class LossReport:
    """Loss components of one generator step.

    ``adversarial`` is the term as weighted into the objective (0.0 when the
    adversarial path is disabled); ``total`` is computed as
    mse + adversarial + classification_weight * classification, which is the
    identity the loss curve must satisfy at every step.
    """

    mse: float
    adversarial: float
    classification: float
    total: float


@dataclass
class TrainConfig:
    iterations: int = 550_000
    batch_size: int = 30
    seed: int = 0
    label_count: int = 428
    channel_scale: float = 1.0
    alpha: float = 0.0001
    beta1: float = 0.9
    beta2: float = 0.999
    adversarial_weight: float = 1.0
    classification_weight: float = 0.003
    max_dots: int = 15
    feature_mode: str = "alternate"  # alternate | histogram | palette
    resize_to: int = 256
    crop: int = 224
    checkpoint_every: int = 0  # 0 = final checkpoint only
    out_dir: str | None = None


@dataclass
class TrainResult:
    model: ColorizationModel
    disc: Discriminator | None
    reports: list[LossReport]
    disc_losses: list[float]
    checkpoints: list[str] = field(default_factory=list)


def synthesize_dots(
    target_lab: RasterImage, seed: int | np.random.Generator, max_dots: int = 15
) -> list[DotAnnotation]:
    """Uniformly 0..max_dots one-pixel dots at distinct positions.

    Each dot copies the (a, b) chrominance of the target at its position.
    """
    target_lab.require(Encoding.LabF32)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    count = int(rng.integers(0, max_dots + 1))
    if count == 0:
        return []
    w = target_lab.width
    flat = rng.choice(target_lab.width * target_lab.height, size=count, replace=False)
    dots = []
    for pos in flat:
        x, y = int(pos % w), int(pos // w)
        dots.append(
            DotAnnotation(x, y, float(target_lab.data[y, x, 1]), float(target_lab.data[y, x, 2]))
        )
    return dots


def rasterize_dots(dots: list[DotAnnotation], size: tuple[int, int]) -> np.ndarray:
    """(2, h, w) dot channels: a then b, zero away from dots."""
    h, w = size
    channels = np.zeros((2, h, w), np.float32)
    for d in dots:
        if not (0 <= d.x < w and 0 <= d.y < h):
            raise ValueError(f"dot ({d.x},{d.y}) outside {w}x{h} raster")
        channels[0, d.y, d.x] = d.a
        channels[1, d.y, d.x] = d.b
    return channels


def _pick_feature(img: RasterImage, mode: str, rng: np.random.Generator) -> ColorFeature:
    hist = extract_histogram(img)
    if mode == "alternate":
        mode = PALETTE if rng.random() < 0.5 else HISTOGRAM
    if mode == PALETTE:
        return binarize_palette(hist)
    if mode == HISTOGRAM:
        return hist
    raise ValueError(f"unknown feature_mode {mode!r}")


def build_example(
    color_img: RasterImage,
    label: int,
    seed: int | np.random.Generator,
    config: TrainConfig = TrainConfig(),
) -> TrainingExample:
    """One training example: augment, binarize, synthesize dots, extract feature.

    The color feature comes from the uncropped image so it reflects the whole
    reference, not the augmentation window.
    """
    color_img.require(Encoding.RGB8)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if (color_img.width, color_img.height) != (config.resize_to, config.resize_to):
        color_img = resize(color_img, config.resize_to, config.resize_to, "bilinear")
    crop = random_crop_flip(color_img, config.crop, 0.5, rng)
    target = rgb_to_lab(crop)
    mono = binarize(crop)
    dots = synthesize_dots(target, rng, config.max_dots) if config.max_dots > 0 else []
    x = np.zeros((3, config.crop, config.crop), np.float32)
    x[0] = mono.data[:, :, 0]
    x[1:] = rasterize_dots(dots, (config.crop, config.crop))
    feature = _pick_feature(color_img, config.feature_mode, rng)
    return TrainingExample(
        input=x,
        feature=feature_to_vector(feature).astype(np.float32),
        target_lab=np.ascontiguousarray(target.data.transpose(2, 0, 1)),
        label=label,
        dots=dots,
    )


def compute_losses(
    lab_out: Tensor,
    class_logits: Tensor,
    disc: Discriminator | None,
    target_lab: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig = TrainConfig(),
) -> tuple[Tensor, LossReport]:
    """Generator objective and its recorded components.

    MSE is taken over all Lab channels and pixels; the adversarial term is
    sigmoid cross entropy of the discriminator's verdict on the generated
    batch against "real"; classification is softmax cross entropy against the
    character label.
    """
    mse_t = nn.mse_loss(lab_out, target_lab)
    total_t = mse_t
    adv_value = 0.0
    if disc is not None and config.adversarial_weight > 0:
        fake_logits = disc.forward(scale_lab_to_unit(lab_out), train_mode=True, update_running=False)
        adv_t = nn.sigmoid_cross_entropy(fake_logits, 1.0)
        if config.adversarial_weight != 1.0:
            adv_t = nn.mul_scalar(adv_t, config.adversarial_weight)
        total_t = nn.add(total_t, adv_t)
        adv_value = float(adv_t.data)
    cls_t = nn.softmax_cross_entropy(class_logits, labels)
    total_t = nn.add(total_t, nn.mul_scalar(cls_t, config.classification_weight))
    mse = float(mse_t.data)
    cls = float(cls_t.data)
    report = LossReport(
        mse=mse,
        adversarial=adv_value,
        classification=cls,
        total=mse + adv_value + config.classification_weight * cls,
    )
    return total_t, report


def train_discriminator_step(
    disc: Discriminator,
    disc_state: AdamState,
    real_lab: np.ndarray,
    fake_lab: np.ndarray,
) -> float:
    """One Adam step on the discriminator: real against 1, fake against 0.

    ``fake_lab`` is a plain array (already detached), so generator weights
    cannot receive gradients from this step.
    """
    disc.params.zero_grads()
    real_logits = disc.forward(scale_lab_to_unit(Tensor(real_lab)), train_mode=True)
    fake_logits = disc.forward(scale_lab_to_unit(Tensor(fake_lab)), train_mode=True)
    loss = nn.mul_scalar(
        nn.add(nn.sigmoid_cross_entropy(real_logits, 1.0), nn.sigmoid_cross_entropy(fake_logits, 0.0)),
        0.5,
    )
    loss.backward()
    adam_step(disc.params, disc_state)
    return float(loss.data)


def _assemble_batch(examples: list[TrainingExample]):
    x = Tensor(np.stack([e.input for e in examples]))
    f = Tensor(np.stack([e.feature for e in examples]))
    targets = np.stack([e.target_lab for e in examples])
    labels = np.array([e.label for e in examples], np.int64)
    return x, f, targets, labels


def train_loop(config: TrainConfig, dataset: list[tuple[RasterImage, int]]) -> TrainResult:
    """Alternating GAN training with periodic checkpoints and a loss curve.

    When ``adversarial_weight`` is 0 the discriminator is skipped entirely
    (it would receive no gradient into the generator) and the adversarial
    component is recorded as 0.0.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    for _, label in dataset:
        if not 0 <= label < config.label_count:
            raise ValueError(f"label {label} outside label_count {config.label_count}")
    master = np.random.default_rng(config.seed)
    model = ColorizationModel(config.label_count, config.channel_scale, seed=config.seed)
    use_adv = config.adversarial_weight > 0
    disc = Discriminator(config.channel_scale, seed=config.seed + 1) if use_adv else None
    adam_cfg = AdamConfig(alpha=config.alpha, beta1=config.beta1, beta2=config.beta2)
    gen_state = AdamState(config=replace(adam_cfg))
    disc_state = AdamState(config=replace(adam_cfg))

    prepared = [
        (resize(img, config.resize_to, config.resize_to, "bilinear")
         if (img.width, img.height) != (config.resize_to, config.resize_to) else img, label)
        for img, label in dataset
    ]

    reports: list[LossReport] = []
    disc_losses: list[float] = []
    checkpoints: list[str] = []
    if config.out_dir:
        os.makedirs(config.out_dir, exist_ok=True)

    for it in range(1, config.iterations + 1):
        idxs = master.integers(0, len(prepared), size=config.batch_size)
        examples = []
        for i in idxs:
            img, label = prepared[int(i)]
            examples.append(build_example(img, label, int(master.integers(0, 2**62)), config))
        x, f, targets, labels = _assemble_batch(examples)

        lab_out, class_logits = model.forward(x, f, train_mode=True)

        if use_adv:
            disc_loss = train_discriminator_step(disc, disc_state, targets, lab_out.data.copy())
        else:
            disc_loss = 0.0

        total_t, report = compute_losses(lab_out, class_logits, disc, targets, labels, config)
        if not np.isfinite(report.total) or not np.isfinite(disc_loss):
            raise TrainingDiverged(it, f"non-finite loss (total={report.total}, disc={disc_loss})")
        model.params.zero_grads()
        if disc is not None:
            disc.params.zero_grads()
        total_t.backward()
        adam_step(model.params, gen_state)

        reports.append(report)
        disc_losses.append(disc_loss)

        if config.out_dir and config.checkpoint_every and it % config.checkpoint_every == 0:
            path = os.path.join(config.out_dir, f"model_{it:06d}.ckpt")
            model.save(path)
            checkpoints.append(path)

    if config.out_dir:
        path = os.path.join(config.out_dir, "model_final.ckpt")
        model.save(path)
        checkpoints.append(path)
        if disc is not None:
            disc.save(os.path.join(config.out_dir, "disc_final.ckpt"))
        write_loss_curve(os.path.join(config.out_dir, "loss_curve.csv"), reports, disc_losses)

    return TrainResult(model, disc, reports, disc_losses, checkpoints)


def train_sr(
    sr,
    targets: list[RasterImage],
    iterations: int,
    batch_size: int = 4,
    crop: int = 64,
    alpha: float = 0.001,
    seed: int = 0,
) -> list[float]:
    """Fit the super-resolver on aligned crop pairs from high-res targets.

    Inputs are the targets bilinearly halved; training samples random
    low-res crops with their exactly-corresponding high-res windows. Returns
    the per-iteration MSE curve.
    """
    if not targets:
        raise ValueError("no training images")
    rng = np.random.default_rng(seed)
    pairs = []
    for img in targets:
        img.require(Encoding.RGB8)
        if img.width % 2 or img.height % 2:
            raise ValueError("target dimensions must be even")
        small = resize(img, img.width // 2, img.height // 2, "bilinear")
        pairs.append(
            (
                small.data.astype(np.float32).transpose(2, 0, 1) / 255.0,
                img.data.astype(np.float32).transpose(2, 0, 1) / 255.0,
            )
        )
    state = AdamState(config=AdamConfig(alpha=alpha))
    losses = []
    for _ in range(iterations):
        xs, ts = [], []
        for _ in range(batch_size):
            lo, hi = pairs[int(rng.integers(0, len(pairs)))]
            oy = int(rng.integers(0, lo.shape[1] - crop + 1))
            ox = int(rng.integers(0, lo.shape[2] - crop + 1))
            xs.append(lo[:, oy : oy + crop, ox : ox + crop])
            ts.append(hi[:, 2 * oy : 2 * (oy + crop), 2 * ox : 2 * (ox + crop)])
        out = sr.forward(Tensor(np.stack(xs)), train_mode=True)
        loss = nn.mse_loss(out, np.stack(ts))
        sr.params.zero_grads()
        loss.backward()
        adam_step(sr.params, state)
        losses.append(float(loss.data))
    return losses


def write_loss_curve(path, reports: list[LossReport], disc_losses: list[float]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "mse", "adversarial", "classification", "total", "disc_loss"])
        for i, (r, d) in enumerate(zip(reports, disc_losses), start=1):
            writer.writerow([i, repr(r.mse), repr(r.adversarial), repr(r.classification), repr(r.total), repr(d)])


def read_loss_curve(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append(
                {
                    "iteration": int(row["iteration"]),
                    "mse": float(row["mse"]),
                    "adversarial": float(row["adversarial"]),
                    "classification": float(row["classification"]),
                    "total": float(row["total"]),
                    "disc_loss": float(row["disc_loss"]),
                }
            )
    return rows


def load_train_config(path) -> tuple[TrainConfig, list[tuple[str, int]]]:
    """Parse a training config JSON: hyperparameters plus a dataset listing."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    entries = doc.pop("dataset", [])
    dataset = [(e["path"], int(e["label"])) for e in entries]
    known = {f.name for f in TrainConfig.__dataclass_fields__.values()}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown training config keys: {sorted(unknown)}")
    return TrainConfig(**doc), dataset
