"""
Differentiable operators used by the SR networks.

Images use the ``[batch, channels, height, width]`` layout. Convolutions are
stride-1 cross-correlations with "same" zero padding, implemented by
unfolding the padded input into a patch matrix and doing one matmul.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, make_result


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _same_shape(a: Tensor, b: Tensor, what: str):
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _same_shape(a, b, "add")
    return make_result(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _same_shape(a, b, "sub")
    return make_result(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def scale(a, c: float) -> Tensor:
    a = _as_tensor(a)
    c = np.asarray(c, dtype=a.dtype)
    return make_result(a.data * c, (a,), lambda g: (g * c,), "scale")


def relu(x) -> Tensor:
    x = _as_tensor(x)
    mask = x.data > 0
    # np.maximum propagates NaN so divergence stays visible downstream
    return make_result(np.maximum(x.data, 0).astype(x.dtype, copy=False), (x,),
                       lambda g: (g * mask,), "relu")


def _unfold(xh: np.ndarray, kh: int, kw: int) -> np.ndarray:
    # channels-last padded (B, H+kh-1, W+kw-1, C) -> patches (B*H*W, kh*kw*C)
    b, hp, wp, c = xh.shape
    h, w = hp - kh + 1, wp - kw + 1
    win = sliding_window_view(xh, (kh, kw), axis=(1, 2))
    return win.transpose(0, 1, 2, 4, 5, 3).reshape(b * h * w, kh * kw * c)


def _pad_nhwc(x: np.ndarray, ph: int, pw: int) -> np.ndarray:
    return np.pad(x.transpose(0, 2, 3, 1), ((0, 0), (ph, ph), (pw, pw), (0, 0)))


def _fold(cols: np.ndarray, b: int, h: int, w: int, c: int, kh: int, kw: int) -> np.ndarray:
    # adjoint of _unfold; returns the unpadded gradient as (B, C, H, W)
    ph, pw = kh // 2, kw // 2
    patches = cols.reshape(b, h, w, kh, kw, c)
    out = np.zeros((b, h + kh - 1, w + kw - 1, c), dtype=cols.dtype)
    for dy in range(kh):
        for dx in range(kw):
            out[:, dy:dy + h, dx:dx + w] += patches[:, :, :, dy, dx]
    return np.ascontiguousarray(out[:, ph:ph + h, pw:pw + w].transpose(0, 3, 1, 2))


def conv2d(x, weight, bias=None) -> Tensor:
    """
    "Same" 2-D cross-correlation with bias.

    Parameters
    ----------
    x : Tensor
        Input, ``(B, Cin, H, W)``.
    weight : Tensor
        Kernel, ``(Cout, Cin, kh, kw)`` with odd ``kh`` and ``kw``.
    bias : Tensor, optional
        ``(Cout,)``.

    Returns
    -------
    Tensor
        ``(B, Cout, H, W)``.
    """
    x, weight = _as_tensor(x), _as_tensor(weight)
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise ValueError(f"conv2d expects 4-D input and kernel, got {x.shape} and {weight.shape}")
    b, cin, h, w = x.shape
    cout, kcin, kh, kw = weight.shape
    if kcin != cin:
        raise ValueError(f"conv2d: input has {cin} channels but kernel expects {kcin}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"conv2d: kernel extents must be odd, got {kh}x{kw}")
    parents = [x, weight]
    if bias is not None:
        bias = _as_tensor(bias)
        if bias.shape != (cout,):
            raise ValueError(f"conv2d: bias must have shape ({cout},), got {bias.shape}")
        parents.append(bias)

    ph, pw = kh // 2, kw // 2
    cols = _unfold(_pad_nhwc(x.data, ph, pw), kh, kw)
    wmat = weight.data.transpose(0, 2, 3, 1).reshape(cout, -1)
    out = cols @ wmat.T
    if bias is not None:
        out = out + bias.data
    out = np.ascontiguousarray(out.reshape(b, h, w, cout).transpose(0, 3, 1, 2))
    need_x = x.requires_grad

    def backward_fn(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(b * h * w, cout)
        gw = (gmat.T @ cols).reshape(cout, kh, kw, cin).transpose(0, 3, 1, 2)
        gx = None
        if need_x:
            if cout <= 2 * cin:
                # correlate the output gradient with the flipped, transposed kernel
                gcols = _unfold(_pad_nhwc(g, ph, pw), kh, kw)
                wflip = weight.data[:, :, ::-1, ::-1].transpose(1, 2, 3, 0).reshape(cin, -1)
                gx = np.ascontiguousarray((gcols @ wflip.T).reshape(b, h, w, cin).transpose(0, 3, 1, 2))
            else:
                gx = _fold(gmat @ wmat, b, h, w, cin, kh, kw)
        grads = [gx, np.ascontiguousarray(gw)]
        if bias is not None:
            grads.append(gmat.sum(axis=0))
        return grads

    return make_result(out, parents, backward_fn, "conv2d")


def pixel_shuffle(x, r: int) -> Tensor:
    """``(B, C*r*r, H, W) -> (B, C, r*H, r*W)``, ``out[b, c, r*h+dy, r*w+dx] = x[b, c*r*r+dy*r+dx, h, w]``."""
    x = _as_tensor(x)
    if x.data.ndim != 4:
        raise ValueError(f"pixel_shuffle expects a 4-D tensor, got {x.shape}")
    b, c, h, w = x.shape
    if r < 1 or c % (r * r):
        raise ValueError(f"pixel_shuffle: {c} channels not divisible by r^2={r * r}")
    co = c // (r * r)
    out = x.data.reshape(b, co, r, r, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(b, co, h * r, w * r)

    def backward_fn(g):
        return (g.reshape(b, co, h, r, w, r).transpose(0, 1, 3, 5, 2, 4).reshape(b, c, h, w),)

    return make_result(np.ascontiguousarray(out), (x,), backward_fn, "pixel_shuffle")


def resample(x, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    """
    Fixed separable linear map ``out[b, c] = rows @ x[b, c] @ cols.T``.

    ``rows`` is ``(H_out, H)`` and ``cols`` is ``(W_out, W)``.
    """
    x = _as_tensor(x)
    if x.data.ndim != 4:
        raise ValueError(f"resample expects a 4-D tensor, got {x.shape}")
    rows = np.asarray(rows, dtype=x.dtype)
    cols = np.asarray(cols, dtype=x.dtype)
    if rows.shape[1] != x.shape[2] or cols.shape[1] != x.shape[3]:
        raise ValueError(f"resample: maps {rows.shape} x {cols.shape} do not fit input {x.shape}")
    out = np.ascontiguousarray(rows @ x.data @ cols.T)

    def backward_fn(g):
        return (np.ascontiguousarray(rows.T @ g @ cols),)

    return make_result(out, (x,), backward_fn, "resample")


def mse_loss(pred, target) -> Tensor:
    """Mean of squared differences over every element."""
    pred, target = _as_tensor(pred), _as_tensor(target)
    _same_shape(pred, target, "mse_loss")
    d = pred.data - target.data
    n = d.size
    value = np.asarray(np.sum(d * d, dtype=np.float64) / n, dtype=pred.dtype)

    def backward_fn(g):
        gd = (2.0 / n) * g * d
        return gd, -gd

    return make_result(value, (pred, target), backward_fn, "mse_loss")


def l1_loss(pred, target) -> Tensor:
    """Mean absolute difference; the subgradient at ties is 0."""
    pred, target = _as_tensor(pred), _as_tensor(target)
    _same_shape(pred, target, "l1_loss")
    d = pred.data - target.data
    n = d.size
    value = np.asarray(np.sum(np.abs(d), dtype=np.float64) / n, dtype=pred.dtype)

    def backward_fn(g):
        gd = (g / n) * np.sign(d)
        return gd, -gd

    return make_result(value, (pred, target), backward_fn, "l1_loss")
