"""The colorization network, its discriminator, and the 2x super-resolver.

The colorization model is an encoder/decoder with four towers: a low-level
feature tower shared by the mid-level and global paths, a global path ending
in a classification head plus a fusion vector, a learned projection of the
216-bin color feature to a fusion vector, and a decoder that consumes the
fused representation. Global and color vectors are broadcast across the
28x28 grid and concatenated with the mid-level map at the fusion layer.

``channel_scale`` multiplies every internal width while preserving the
architecture's ratios, so desk-scale training runs use the same topology as
the full-width model.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .features import BIN_COUNT
from .nn import ParamSet, Tensor

ARCH_VERSION = 1

# Per-channel affine map from sigmoid output to L*a*b ranges.
LAB_SCALE = np.array([100.0, 255.0, 255.0], dtype=np.float32)
LAB_SHIFT = np.array([0.0, -128.0, -128.0], dtype=np.float32)

INPUT_SIZE = 224


def _scaled(width: int, scale: float) -> int:
    value = width * scale
    if abs(value - round(value)) > 1e-9 or round(value) < 1:
        raise ValueError(f"channel_scale {scale} does not divide width {width}")
    return int(round(value))


class _NetBase:
    """Shared parameter declaration / application helpers."""

    def __init__(self, seed: int):
        self.params = ParamSet()
        self._rng = np.random.default_rng(seed)

    def _declare_conv(self, name: str, cin: int, cout: int, k: int, with_bn: bool = True) -> None:
        fan_in = cin * k * k
        self.params.add(f"{name}.weight", Tensor(nn.he_init(self._rng, (cout, cin, k, k), fan_in), requires_grad=True))
        self.params.add(f"{name}.bias", Tensor(np.zeros(cout, np.float32), requires_grad=True))
        if with_bn:
            self.params.add(f"{name}.bn.gamma", Tensor(np.ones(cout, np.float32), requires_grad=True))
            self.params.add(f"{name}.bn.beta", Tensor(np.zeros(cout, np.float32), requires_grad=True))
            self.params.add(f"{name}.bn.mean", Tensor(np.zeros(cout, np.float32)))
            self.params.add(f"{name}.bn.var", Tensor(np.ones(cout, np.float32)))

    def _declare_fc(self, name: str, nin: int, nout: int) -> None:
        self.params.add(f"{name}.weight", Tensor(nn.he_init(self._rng, (nout, nin), nin), requires_grad=True))
        self.params.add(f"{name}.bias", Tensor(np.zeros(nout, np.float32), requires_grad=True))

    def _conv(self, name: str, x: Tensor, stride: int, train: bool, update_running: bool, act: str = "relu") -> Tensor:
        p = self.params
        out = nn.conv2d(x, p[f"{name}.weight"], p[f"{name}.bias"], stride=stride)
        if f"{name}.bn.gamma" in p:
            out = nn.batch_norm(
                out,
                p[f"{name}.bn.gamma"],
                p[f"{name}.bn.beta"],
                p[f"{name}.bn.mean"],
                p[f"{name}.bn.var"],
                train_mode=train,
                update_running=update_running,
            )
        if act == "relu":
            out = nn.relu(out)
        elif act == "sigmoid":
            out = nn.sigmoid(out)
        return out

    def _fc(self, name: str, x: Tensor, act: str | None = "relu") -> Tensor:
        out = nn.fully_connected(x, self.params[f"{name}.weight"], self.params[f"{name}.bias"])
        return nn.relu(out) if act == "relu" else out


class ColorizationModel(_NetBase):
    """Encoder/decoder colorization network conditioned on a color feature."""

    def __init__(self, label_count: int, channel_scale: float = 1.0, seed: int = 0, validate: bool = True):
        super().__init__(seed)
        self.label_count = label_count
        self.channel_scale = channel_scale
        s = lambda c: _scaled(c, channel_scale)

        # Low-level tower: 224 -> 112 -> 56 -> 28.
        for i, (cin, cout, stride) in enumerate(
            [(3, s(64), 2), (s(64), s(128), 1), (s(128), s(128), 2), (s(128), s(256), 1), (s(256), s(256), 2), (s(256), s(512), 1)],
            start=1,
        ):
            self._declare_conv(f"low.conv{i}", cin, cout, 3)
            setattr(self, f"_low{i}_stride", stride)

        # Global path: 28 -> 14 -> 7, then FC stack and heads.
        for i, (cin, cout, stride) in enumerate(
            [(s(512), s(512), 2), (s(512), s(512), 1), (s(512), s(512), 2), (s(512), s(512), 1)], start=1
        ):
            self._declare_conv(f"global.conv{i}", cin, cout, 3)
        self._declare_fc("global.fc1", 7 * 7 * s(512), s(1024))
        self._declare_fc("global.fc2", s(1024), s(512))
        self._declare_fc("global.fuse", s(512), s(256))
        self._declare_fc("global.classify", s(512), label_count)

        # Mid-level path.
        self._declare_conv("mid.conv1", s(512), s(512), 3)
        self._declare_conv("mid.conv2", s(512), s(256), 3)

        # Color-feature projection and fusion.
        self._declare_fc("color.project", BIN_COUNT, s(256))
        self._declare_conv("fusion.conv", s(768), s(256), 1)

        # Decoder: 28 -> 56 -> 112, sigmoid output, fixed bilinear x2 to 224.
        self._declare_conv("dec.conv1", s(256), s(128), 3)
        self._declare_conv("dec.conv2", s(128), s(64), 3)
        self._declare_conv("dec.conv3", s(64), s(64), 3)
        self._declare_conv("dec.conv4", s(64), s(32), 3)
        self._declare_conv("dec.out", s(32), 3, 3, with_bn=False)

        self._s = s
        if validate:
            self.assert_shape_ledger()

    def forward(
        self,
        x: Tensor,
        feature: Tensor,
        train_mode: bool = False,
        update_running: bool = True,
        probes: dict | None = None,
    ) -> tuple[Tensor, Tensor]:
        """Map (N,3,224,224) inputs plus (N,216) features to Lab and logits."""
        n = x.shape[0]
        if x.shape != (n, 3, INPUT_SIZE, INPUT_SIZE):
            raise ValueError(f"expected (N,3,{INPUT_SIZE},{INPUT_SIZE}) input, got {x.shape}")
        if feature.shape != (n, BIN_COUNT):
            raise ValueError(f"expected (N,{BIN_COUNT}) feature, got {feature.shape}")
        f = x
        for i in range(1, 7):
            f = self._conv(f"low.conv{i}", f, getattr(self, f"_low{i}_stride"), train_mode, update_running)
        if probes is not None:
            probes["low"] = f.shape

        mid = self._conv("mid.conv1", f, 1, train_mode, update_running)
        mid = self._conv("mid.conv2", mid, 1, train_mode, update_running)
        if probes is not None:
            probes["mid"] = mid.shape

        g = f
        for i, stride in enumerate((2, 1, 2, 1), start=1):
            g = self._conv(f"global.conv{i}", g, stride, train_mode, update_running)
        g = nn.reshape(g, (n, g.shape[1] * g.shape[2] * g.shape[3]))
        g = self._fc("global.fc1", g)
        g = self._fc("global.fc2", g)
        logits = self._fc("global.classify", g, act=None)
        gvec = self._fc("global.fuse", g)

        cvec = self._fc("color.project", feature)

        grid = mid.shape[2]
        fused_in = nn.concat_channels(
            [mid, nn.broadcast_spatial(gvec, grid, grid), nn.broadcast_spatial(cvec, grid, grid)]
        )
        if probes is not None:
            probes["fusion_in"] = fused_in.shape
        d = self._conv("fusion.conv", fused_in, 1, train_mode, update_running)
        if probes is not None:
            probes["fusion_out"] = d.shape

        d = self._conv("dec.conv1", d, 1, train_mode, update_running)
        d = nn.upsample2x_nearest(d)
        d = self._conv("dec.conv2", d, 1, train_mode, update_running)
        d = self._conv("dec.conv3", d, 1, train_mode, update_running)
        d = nn.upsample2x_nearest(d)
        d = self._conv("dec.conv4", d, 1, train_mode, update_running)
        d = self._conv("dec.out", d, 1, train_mode, update_running, act="sigmoid")
        d = nn.upsample2x_bilinear(d)
        lab = nn.scale_shift(d, LAB_SCALE, LAB_SHIFT)
        if probes is not None:
            probes["out"] = lab.shape
            probes["logits"] = logits.shape
        return lab, logits

    def assert_shape_ledger(self) -> None:
        """One construction-time pass asserting the documented shape flow."""
        s = self._s
        probes: dict = {}
        x = Tensor(np.zeros((1, 3, INPUT_SIZE, INPUT_SIZE), np.float32))
        feat = Tensor(np.zeros((1, BIN_COUNT), np.float32))
        self.forward(x, feat, train_mode=False, probes=probes)
        expected = {
            "low": (1, s(512), 28, 28),
            "mid": (1, s(256), 28, 28),
            "fusion_in": (1, s(768), 28, 28),
            "fusion_out": (1, s(256), 28, 28),
            "out": (1, 3, INPUT_SIZE, INPUT_SIZE),
            "logits": (1, self.label_count),
        }
        for key, want in expected.items():
            if probes[key] != want:
                raise AssertionError(f"shape ledger violated at {key}: {probes[key]} != {want}")

    def save(self, path) -> None:
        nn.save_checkpoint(
            self.params,
            path,
            meta={
                "kind": "colorization",
                "arch_version": ARCH_VERSION,
                "label_count": self.label_count,
                "channel_scale": self.channel_scale,
            },
        )

    @classmethod
    def load(cls, path) -> "ColorizationModel":
        params, meta = nn.load_checkpoint(path)
        if meta.get("kind") != "colorization":
            raise ValueError(f"{path} is not a colorization checkpoint")
        model = cls(meta["label_count"], meta["channel_scale"], validate=False)
        _swap_params(model, params)
        return model


class Discriminator(_NetBase):
    """Four 4x4 stride-2 convs, global average pooling, and an affine logit."""

    def __init__(self, channel_scale: float = 1.0, seed: int = 1, validate: bool = True):
        super().__init__(seed)
        self.channel_scale = channel_scale
        s = lambda c: _scaled(c, channel_scale)
        for i, (cin, cout) in enumerate([(3, s(64)), (s(64), s(128)), (s(128), s(256)), (s(256), s(512))], start=1):
            self._declare_conv(f"disc.conv{i}", cin, cout, 4)
        self._declare_fc("disc.out", s(512), 1)
        self._s = s
        if validate:
            self.assert_shape_ledger()

    def forward(self, x: Tensor, train_mode: bool = False, update_running: bool = True, probes: dict | None = None) -> Tensor:
        if x.shape[1:] != (3, INPUT_SIZE, INPUT_SIZE):
            raise ValueError(f"discriminator expects (N,3,{INPUT_SIZE},{INPUT_SIZE}), got {x.shape}")
        f = x
        for i in range(1, 5):
            f = self._conv(f"disc.conv{i}", f, 2, train_mode, update_running)
            if probes is not None:
                probes[f"conv{i}"] = f.shape
        pooled = nn.mean_spatial(f)
        logit = self._fc("disc.out", pooled, act=None)
        return nn.reshape(logit, (x.shape[0],))

    def assert_shape_ledger(self) -> None:
        s = self._s
        probes: dict = {}
        self.forward(Tensor(np.zeros((1, 3, INPUT_SIZE, INPUT_SIZE), np.float32)), probes=probes)
        chain = [(s(64), 112), (s(128), 56), (s(256), 28), (s(512), 14)]
        for i, (c, hw) in enumerate(chain, start=1):
            if probes[f"conv{i}"] != (1, c, hw, hw):
                raise AssertionError(f"discriminator shape ledger violated at conv{i}: {probes[f'conv{i}']}")

    def save(self, path) -> None:
        nn.save_checkpoint(
            self.params,
            path,
            meta={"kind": "discriminator", "arch_version": ARCH_VERSION, "channel_scale": self.channel_scale},
        )

    @classmethod
    def load(cls, path) -> "Discriminator":
        params, meta = nn.load_checkpoint(path)
        if meta.get("kind") != "discriminator":
            raise ValueError(f"{path} is not a discriminator checkpoint")
        model = cls(meta["channel_scale"], validate=False)
        _swap_params(model, params)
        return model


class SRModel(_NetBase):
    """Three-level encoder/decoder with skip concatenation and a residual path.

    The output is the nearest-upsampled input plus a learned correction, so a
    zeroed final layer reproduces plain 2x nearest upsampling exactly.
    """

    def __init__(self, channel_scale: float = 1.0, seed: int = 2):
        super().__init__(seed)
        self.channel_scale = channel_scale
        s = lambda c: _scaled(c, channel_scale)
        self._declare_conv("sr.enc0", 3, s(32), 3)
        self._declare_conv("sr.enc1", s(32), s(64), 3)
        self._declare_conv("sr.enc2", s(64), s(128), 3)
        self._declare_conv("sr.dec2", s(128) + s(64), s(64), 3)
        self._declare_conv("sr.dec1", s(64) + s(32), s(32), 3)
        self._declare_conv("sr.out", s(32), 3, 3, with_bn=False)
        self._s = s

    def forward(self, x: Tensor, train_mode: bool = False, update_running: bool = True) -> Tensor:
        h, w = x.shape[2], x.shape[3]
        if h % 4 or w % 4:
            raise ValueError("SR input dims must be divisible by 4")
        e0 = self._conv("sr.enc0", x, 1, train_mode, update_running)
        e1 = self._conv("sr.enc1", e0, 2, train_mode, update_running)
        e2 = self._conv("sr.enc2", e1, 2, train_mode, update_running)
        d2 = nn.concat_channels([nn.upsample2x_nearest(e2), e1])
        d2 = self._conv("sr.dec2", d2, 1, train_mode, update_running)
        d1 = nn.concat_channels([nn.upsample2x_nearest(d2), e0])
        d1 = self._conv("sr.dec1", d1, 1, train_mode, update_running)
        residual = self._conv("sr.out", nn.upsample2x_nearest(d1), 1, train_mode, update_running, act=None)
        return nn.add(nn.upsample2x_nearest(x), residual)

    def super_resolve(self, x: Tensor) -> Tensor:
        """Eval-mode 224x224 -> 448x448 upscaling (the deployment contract)."""
        if x.shape[1:] != (3, INPUT_SIZE, INPUT_SIZE):
            raise ValueError(f"super_resolve expects (N,3,{INPUT_SIZE},{INPUT_SIZE}), got {x.shape}")
        out = self.forward(x, train_mode=False)
        if out.shape[1:] != (3, 2 * INPUT_SIZE, 2 * INPUT_SIZE) or not np.isfinite(out.data).all():
            raise AssertionError("super-resolution output invariant violated")
        return out

    def save(self, path) -> None:
        nn.save_checkpoint(
            self.params,
            path,
            meta={"kind": "superres", "arch_version": ARCH_VERSION, "channel_scale": self.channel_scale},
        )

    @classmethod
    def load(cls, path) -> "SRModel":
        params, meta = nn.load_checkpoint(path)
        if meta.get("kind") != "superres":
            raise ValueError(f"{path} is not a super-resolution checkpoint")
        model = cls(meta["channel_scale"])
        _swap_params(model, params)
        return model


def _swap_params(model: _NetBase, loaded: ParamSet) -> None:
    """Replace a freshly-built model's parameters with checkpointed ones."""
    built = model.params
    if set(built.names()) != set(loaded.names()):
        missing = set(built.names()) ^ set(loaded.names())
        raise ValueError(f"checkpoint parameter names do not match model: {sorted(missing)[:5]}")
    for name, t in built.items():
        if loaded[name].data.shape != t.data.shape:
            raise ValueError(f"checkpoint shape mismatch for {name!r}")
    model.params = loaded


def scale_lab_to_unit(lab: Tensor) -> Tensor:
    """Affinely map Lab ranges onto [0,1]^3 for the discriminator."""
    return nn.scale_shift(lab, 1.0 / LAB_SCALE, -LAB_SHIFT / LAB_SCALE)
