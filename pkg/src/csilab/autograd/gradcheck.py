"""Central finite-difference check of autograd gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tensor, backward, no_grad


def finite_diff_check(fn: Callable[[], Tensor], tensor: Tensor, h: float = 1e-3, n_samples: int = 24,
                      seed: int = 0, floor: float = 1e-3) -> float:
    """
    Worst relative discrepancy between autograd and central differences.

    ``fn`` takes no arguments and must compute a scalar from ``tensor`` (and
    whatever else it closes over). The analytic gradient is taken in the
    tensor's own precision. The difference quotients
    ``(f(x + h e) - f(x - h e)) / 2h`` are evaluated with ``tensor`` promoted
    to float64, so they are not swamped by float32 rounding of ``f``.

    The error at a coordinate is ``|a - n| / max(|a|, |n|, floor * g_max)``
    where ``g_max`` is the largest analytic gradient magnitude in the tensor;
    the floor keeps near-zero entries from producing meaningless ratios.
    At most ``n_samples`` coordinates are checked, chosen with ``seed``.
    """
    if not tensor.requires_grad:
        raise ValueError("tensor must require grad")
    tensor.zero_grad()
    backward(fn())
    analytic = tensor.grad.astype(np.float64).reshape(-1)
    tensor.zero_grad()
    g_max = float(np.max(np.abs(analytic))) if analytic.size else 0.0

    rng = np.random.default_rng(seed)
    size = tensor.data.size
    coords = np.arange(size) if size <= n_samples else rng.choice(size, n_samples, replace=False)

    original = tensor.data
    work = original.astype(np.float64).reshape(-1)
    tensor.data = work.reshape(original.shape)
    worst = 0.0
    try:
        with no_grad():
            for k in coords:
                x0 = work[k]
                work[k] = x0 + h
                f_plus = float(fn().data)
                work[k] = x0 - h
                f_minus = float(fn().data)
                work[k] = x0
                numeric = (f_plus - f_minus) / (2.0 * h)
                a = analytic[k]
                denom = max(abs(a), abs(numeric), floor * g_max, 1e-300)
                worst = max(worst, abs(a - numeric) / denom)
    finally:
        tensor.data = original
    return worst
