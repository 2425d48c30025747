"""Forward and backward passes for the layer vocabulary.

Convolution is implemented as im2col plus a float32 BLAS matmul; its input
gradient is reassembled with one vectorized scatter per kernel tap. Spatial
padding conventions: 3x3 stride-1 preserves spatial dims, 3x3/4x4 stride-2
halve them (pad 1 throughout). Statistical reductions (means, variances,
losses) accumulate in float64 before being stored as float32.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, make, needs_graph


def _pad_for(kernel: int, stride: int) -> int:
    if kernel == 1:
        return 0
    if kernel in (3, 4):
        return 1
    raise ValueError(f"unsupported kernel size {kernel}")


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1, pad: int | None = None) -> Tensor:
    """Cross-correlation of NCHW input with OIHW weights."""
    n, c, h, w = x.shape
    oc, ic, kh, kw = weight.shape
    if ic != c:
        raise ValueError(f"conv2d channel mismatch: input {c}, weight {ic}")
    if bias.shape != (oc,):
        raise ValueError("bias length must equal output channels")
    if pad is None:
        pad = _pad_for(kh, stride)
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]  # (n, c, oh, ow, kh, kw)
    cols = np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5)).reshape(
        n * oh * ow, c * kh * kw
    )
    wmat = weight.data.reshape(oc, c * kh * kw)
    out = cols @ wmat.T + bias.data
    out = out.reshape(n, oh, ow, oc).transpose(0, 3, 1, 2)

    def backward(grad: np.ndarray) -> None:
        gmat = np.ascontiguousarray(grad.transpose(0, 2, 3, 1)).reshape(n * oh * ow, oc)
        if weight.requires_grad:
            weight.accumulate_grad((gmat.T @ cols).reshape(weight.shape))
        if bias.requires_grad:
            bias.accumulate_grad(gmat.sum(axis=0, dtype=np.float64).astype(np.float32))
        if x.requires_grad:
            gcols = (gmat @ wmat).reshape(n, oh, ow, c, kh, kw).transpose(0, 3, 4, 5, 1, 2)
            gxp = np.zeros_like(xp)
            for ki in range(kh):
                for kj in range(kw):
                    gxp[:, :, ki : ki + stride * oh : stride, kj : kj + stride * ow : stride] += gcols[
                        :, :, ki, kj
                    ]
            x.accumulate_grad(gxp[:, :, pad : pad + h, pad : pad + w] if pad else gxp)

    return make(out, (x, weight, bias), backward)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: Tensor,
    running_var: Tensor,
    train_mode: bool,
    momentum: float = 0.9,
    eps: float = 1e-5,
    update_running: bool = True,
) -> Tensor:
    """Per-channel batch normalization over an NCHW tensor.

    Train mode normalizes by batch statistics and (optionally) updates the
    running estimates in place; eval mode normalizes by the running estimates.
    """
    n, c, h, w = x.shape
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ValueError("batch_norm parameter length must equal channel count")
    if train_mode:
        mean = x.data.mean(axis=(0, 2, 3), dtype=np.float64)
        var = x.data.astype(np.float64).var(axis=(0, 2, 3))
        if update_running:
            running_mean.data[:] = (momentum * running_mean.data + (1 - momentum) * mean).astype(
                np.float32
            )
            running_var.data[:] = (momentum * running_var.data + (1 - momentum) * var).astype(
                np.float32
            )
    else:
        mean = running_mean.data.astype(np.float64)
        var = running_var.data.astype(np.float64)
    inv_std = (1.0 / np.sqrt(var + eps)).astype(np.float32)
    mean32 = mean.astype(np.float32)
    xhat = (x.data - mean32[None, :, None, None]) * inv_std[None, :, None, None]
    out = xhat * gamma.data[None, :, None, None] + beta.data[None, :, None, None]

    def backward(grad: np.ndarray) -> None:
        if gamma.requires_grad:
            gamma.accumulate_grad(
                (grad * xhat).sum(axis=(0, 2, 3), dtype=np.float64).astype(np.float32)
            )
        if beta.requires_grad:
            beta.accumulate_grad(grad.sum(axis=(0, 2, 3), dtype=np.float64).astype(np.float32))
        if not (x.requires_grad or x._parents):
            return
        gxhat = grad * gamma.data[None, :, None, None]
        if train_mode:
            m = n * h * w
            sum_gxhat = gxhat.sum(axis=(0, 2, 3), dtype=np.float64).astype(np.float32)
            sum_gxhat_xhat = (
                (gxhat * xhat).sum(axis=(0, 2, 3), dtype=np.float64).astype(np.float32)
            )
            gx = (
                inv_std[None, :, None, None]
                / m
                * (m * gxhat - sum_gxhat[None, :, None, None] - xhat * sum_gxhat_xhat[None, :, None, None])
            )
        else:
            gx = gxhat * inv_std[None, :, None, None]
        x.accumulate_grad(gx.astype(np.float32))

    return make(out, (x, gamma, beta), backward)


def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0.0)

    def backward(grad: np.ndarray) -> None:
        x.accumulate_grad(grad * (x.data > 0))

    return make(out, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    z = x.data
    out = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
    out = out.astype(np.float32)

    def backward(grad: np.ndarray) -> None:
        x.accumulate_grad(grad * out * (1.0 - out))

    return make(out, (x,), backward)


def upsample2x_nearest(x: Tensor) -> Tensor:
    out = x.data.repeat(2, axis=2).repeat(2, axis=3)

    def backward(grad: np.ndarray) -> None:
        n, c, h2, w2 = grad.shape
        g = grad.reshape(n, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5))
        x.accumulate_grad(g)

    return make(out, (x,), backward)


def _bilinear2x_axis(data: np.ndarray, axis: int) -> np.ndarray:
    """Double one spatial axis with half-pixel-aligned linear interpolation."""
    a = np.moveaxis(data, axis, -1)
    prev = np.concatenate([a[..., :1], a[..., :-1]], axis=-1)
    nxt = np.concatenate([a[..., 1:], a[..., -1:]], axis=-1)
    even = 0.25 * prev + 0.75 * a
    odd = 0.75 * a + 0.25 * nxt
    out = np.stack([even, odd], axis=-1).reshape(*a.shape[:-1], a.shape[-1] * 2)
    return np.moveaxis(out, -1, axis).astype(np.float32)


def _bilinear2x_axis_adjoint(grad: np.ndarray, axis: int) -> np.ndarray:
    g = np.moveaxis(grad, axis, -1)
    even = g[..., 0::2]
    odd = g[..., 1::2]
    out = 0.75 * (even + odd)
    # input k also receives 0.25 from even[k+1] and 0.25 from odd[k-1]
    out[..., :-1] += 0.25 * even[..., 1:]
    out[..., 1:] += 0.25 * odd[..., :-1]
    # clamped edges: even[0] taps input 0 twice, odd[-1] taps input -1 twice
    out[..., 0] += 0.25 * even[..., 0]
    out[..., -1] += 0.25 * odd[..., -1]
    return np.moveaxis(out, -1, axis).astype(np.float32)


def upsample2x_bilinear(x: Tensor) -> Tensor:
    """Fixed (non-learned) bilinear 2x upsampling of an NCHW tensor."""
    out = _bilinear2x_axis(_bilinear2x_axis(x.data, 2), 3)

    def backward(grad: np.ndarray) -> None:
        x.accumulate_grad(_bilinear2x_axis_adjoint(_bilinear2x_axis_adjoint(grad, 3), 2))

    return make(out, (x,), backward)


def fully_connected(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map of (N, in) by (out, in) weights."""
    if x.data.ndim != 2 or weight.data.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ValueError(f"fully_connected shape mismatch: {x.shape} vs {weight.shape}")
    out = x.data @ weight.data.T + bias.data

    def backward(grad: np.ndarray) -> None:
        if weight.requires_grad:
            weight.accumulate_grad(grad.T @ x.data)
        if bias.requires_grad:
            bias.accumulate_grad(grad.sum(axis=0, dtype=np.float64).astype(np.float32))
        if x.requires_grad:
            x.accumulate_grad(grad @ weight.data)

    return make(out, (x, weight, bias), backward)


def concat_channels(parts: list[Tensor]) -> Tensor:
    """Stack NCHW tensors along the channel axis."""
    out = np.concatenate([p.data for p in parts], axis=1)
    sizes = [p.shape[1] for p in parts]

    def backward(grad: np.ndarray) -> None:
        offset = 0
        for p, sz in zip(parts, sizes):
            if p.requires_grad:
                p.accumulate_grad(grad[:, offset : offset + sz])
            offset += sz

    return make(out, tuple(parts), backward)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = x.data.reshape(shape)

    def backward(grad: np.ndarray) -> None:
        x.accumulate_grad(grad.reshape(x.shape))

    return make(out, (x,), backward)


def broadcast_spatial(x: Tensor, h: int, w: int) -> Tensor:
    """Tile an (N, C) vector to (N, C, h, w); used to fuse globals into maps."""
    out = np.broadcast_to(x.data[:, :, None, None], (*x.shape, h, w)).copy()

    def backward(grad: np.ndarray) -> None:
        x.accumulate_grad(grad.sum(axis=(2, 3), dtype=np.float64).astype(np.float32))

    return make(out, (x,), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"add shape mismatch: {a.shape} vs {b.shape}")
    out = a.data + b.data

    def backward(grad: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate_grad(grad)
        if b.requires_grad:
            b.accumulate_grad(grad)

    return make(out, (a, b), backward)


def scale_shift(x: Tensor, scale: np.ndarray, shift: np.ndarray) -> Tensor:
    """Fixed per-channel affine map y = x*scale + shift on an NCHW tensor."""
    s = np.asarray(scale, dtype=np.float32)[None, :, None, None]
    t = np.asarray(shift, dtype=np.float32)[None, :, None, None]
    out = x.data * s + t

    def backward(grad: np.ndarray) -> None:
        x.accumulate_grad(grad * s)

    return make(out, (x,), backward)


def mul_scalar(x: Tensor, k: float) -> Tensor:
    out = x.data * np.float32(k)

    def backward(grad: np.ndarray) -> None:
        x.accumulate_grad(grad * np.float32(k))

    return make(out, (x,), backward)


def mean_spatial(x: Tensor) -> Tensor:
    """Global average pooling of NCHW to (N, C)."""
    n, c, h, w = x.shape
    out = x.data.mean(axis=(2, 3), dtype=np.float64).astype(np.float32)

    def backward(grad: np.ndarray) -> None:
        g = np.broadcast_to(grad[:, :, None, None] / np.float32(h * w), x.shape)
        x.accumulate_grad(g.astype(np.float32))

    return make(out, (x,), backward)


def mse_loss(pred: Tensor, target: np.ndarray) -> Tensor:
    """Mean squared error over every element."""
    target = np.asarray(target, dtype=np.float32)
    if pred.shape != target.shape:
        raise ValueError(f"mse shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred.data.astype(np.float64) - target
    out = np.float32((diff * diff).mean())

    def backward(grad: np.ndarray) -> None:
        pred.accumulate_grad((grad * 2.0 / diff.size * diff).astype(np.float32))

    return make(out, (pred,), backward)


def sigmoid_cross_entropy(logits: Tensor, target: float) -> Tensor:
    """Mean sigmoid cross entropy of logits against a constant 0/1 target."""
    z = logits.data.astype(np.float64)
    losses = np.maximum(z, 0.0) - z * target + np.log1p(np.exp(-np.abs(z)))
    out = np.float32(losses.mean())

    def backward(grad: np.ndarray) -> None:
        p = 1.0 / (1.0 + np.exp(-z))
        logits.accumulate_grad((grad * (p - target) / z.size).astype(np.float32))

    return make(out, (logits,), backward)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean softmax cross entropy of (N, K) logits against integer labels."""
    labels = np.asarray(labels, dtype=np.int64)
    z = logits.data.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    out = np.float32((logsum - z[np.arange(len(labels)), labels]).mean())

    def backward(grad: np.ndarray) -> None:
        p = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
        p[np.arange(len(labels)), labels] -= 1.0
        logits.accumulate_grad((grad * p / len(labels)).astype(np.float32))

    return make(out, (logits,), backward)
