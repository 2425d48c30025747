"""Named parameter collections and the Adam optimizer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


class ParamSet:
    """An ordered name -> Tensor map holding weights, biases, and BN buffers.

    Trainable entries have ``requires_grad=True``; batch-norm running stats
    are stored alongside with ``requires_grad=False`` so checkpoints capture
    the full model state.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, tensor: Tensor) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        self._params[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def trainable(self):
        return [(n, t) for n, t in self._params.items() if t.requires_grad]

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.zero_grad()

    def assert_finite(self, context: str = "") -> None:
        for name, t in self._params.items():
            if not np.isfinite(t.data).all():
                raise FloatingPointError(f"non-finite values in parameter {name!r} {context}".strip())

    def checksum(self) -> float:
        """Order-stable fingerprint of all parameter values."""
        return float(sum(np.float64(t.data).sum() * (i + 1) for i, t in enumerate(self._params.values())))


@dataclass
class AdamConfig:
    alpha: float = 0.0001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    """First/second moment buffers plus the shared step counter."""

    config: AdamConfig = field(default_factory=AdamConfig)
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: ParamSet, state: AdamState) -> None:
    """One bias-corrected Adam update over every trainable parameter.

    Gradients must already be populated (a backward pass ran); a NaN gradient
    aborts with the offending parameter's name.
    """
    cfg = state.config
    trainable = params.trainable()
    for name, p in trainable:
        if p.grad is None:
            raise ValueError(f"no gradient for parameter {name!r}")
        if not np.isfinite(p.grad).all():
            raise ValueError(f"gradient for parameter {name!r} contains NaN/Inf")
    state.t += 1
    bc1 = 1.0 - cfg.beta1**state.t
    bc2 = 1.0 - cfg.beta2**state.t
    for name, p in trainable:
        g = p.grad
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        m_hat = m / np.float32(bc1)
        v_hat = v / np.float32(bc2)
        p.data -= np.float32(cfg.alpha) * m_hat / (np.sqrt(v_hat) + np.float32(cfg.eps))
    params.assert_finite("after adam step")


def he_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(np.float32)
