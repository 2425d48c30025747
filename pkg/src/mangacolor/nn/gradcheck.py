"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .params import ParamSet
from .tensor import Tensor


def grad_check(
    f: Callable[[], Tensor],
    params: ParamSet,
    eps: float = 1e-3,
    max_coords_per_param: int = 24,
    rng: np.random.Generator | None = None,
) -> float:
    """Max guarded relative error between analytic and numeric gradients.

    ``f`` evaluates a deterministic scalar (batch norm in eval mode) from the
    current parameter values. Analytic gradients come from one backward pass;
    numeric ones from central differences at sampled coordinates, using the
    actually-realized float32 perturbation as the divisor. The error at each
    coordinate is |a - n| / max(1, |a|, |n|).
    """
    rng = rng or np.random.default_rng(0)
    params.zero_grads()
    f().backward()
    analytic = {name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data)) for name, t in params.trainable()}

    max_err = 0.0
    for name, t in params.trainable():
        flat = t.data.reshape(-1)
        n_coords = flat.size
        coords = (
            np.arange(n_coords)
            if n_coords <= max_coords_per_param
            else rng.choice(n_coords, size=max_coords_per_param, replace=False)
        )
        for idx in coords:
            original = flat[idx]
            flat[idx] = np.float32(float(original) + eps)
            hi_val = float(flat[idx])
            hi = float(f().data)
            flat[idx] = np.float32(float(original) - eps)
            lo_val = float(flat[idx])
            lo = float(f().data)
            flat[idx] = original
            numeric = (hi - lo) / (hi_val - lo_val)
            a = float(analytic[name].reshape(-1)[idx])
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            max_err = max(max_err, err)
    return max_err
