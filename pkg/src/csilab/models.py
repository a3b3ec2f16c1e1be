"""
Channel grids as real images, and the two SR networks.

A complex grid ``(B, H, W, n_r, n_t)`` becomes a float32 image with
``2 * n_r * n_t`` channels; antenna pair ``(a, b)`` owns channel
``2 * (a * n_t + b)`` (real part) and the next one (imaginary part).
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional

import numpy as np

from .autograd import Tensor, add, conv2d, no_grad, pixel_shuffle, relu, resample, scale


# ---------------------------------------------------------------------------
# encoding

@dataclass(frozen=True)
class NormalizationStats:
    scale: float

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"normalization scale must be positive and finite, got {self.scale!r}")

    @classmethod
    def from_grids(cls, grids) -> "NormalizationStats":
        """Largest absolute real or imaginary component over ``grids``."""
        values = np.asarray(grids)
        peak = max(float(np.max(np.abs(values.real))), float(np.max(np.abs(values.imag))))
        return cls(peak if peak > 0 else 1.0)


def _batch(grids) -> np.ndarray:
    if isinstance(grids, (list, tuple)):
        arrays = [np.asarray(getattr(g, "values", g)) for g in grids]
        shapes = {a.shape for a in arrays}
        if len(shapes) != 1:
            raise ValueError(f"mixed grid dims in batch: {sorted(shapes)}")
        return np.stack(arrays)
    arr = np.asarray(getattr(grids, "values", grids))
    return arr[None] if arr.ndim == 4 else arr


def to_channel_image(grids, stats: Optional[NormalizationStats] = None) -> np.ndarray:
    """
    Encode complex grids as normalized float32 images.

    Parameters
    ----------
    grids : array or sequence of grids
        ``(B, H, W, n_r, n_t)`` complex, a single ``(H, W, n_r, n_t)`` grid,
        or a list of ChannelGrid / EstimatedPilotGrid objects.
    stats : NormalizationStats, optional
        Values are divided by ``stats.scale``; no scaling when omitted.

    Returns
    -------
    np.ndarray
        ``(B, 2 * n_r * n_t, H, W)`` float32.
    """
    g = _batch(grids)
    if g.ndim != 5:
        raise ValueError(f"expected (B, H, W, n_r, n_t) grids, got shape {g.shape}")
    b, h, w, n_r, n_t = g.shape
    parts = np.stack([g.real.astype(np.float32), g.imag.astype(np.float32)], axis=-1)
    img = parts.reshape(b, h, w, 2 * n_r * n_t).transpose(0, 3, 1, 2)
    if stats is not None:
        img = img / np.float32(stats.scale)
    return np.ascontiguousarray(img, dtype=np.float32)


def from_channel_image(image, stats: Optional[NormalizationStats] = None, n_t: Optional[int] = None) -> np.ndarray:
    """Inverse of :func:`to_channel_image`; returns complex64 ``(B, H, W, n_r, n_t)``.

    ``n_t`` defaults to a square antenna configuration.
    """
    img = np.asarray(getattr(image, "data", image), dtype=np.float32)
    if img.ndim != 4 or img.shape[1] % 2:
        raise ValueError(f"expected (B, 2*n_r*n_t, H, W) image, got shape {img.shape}")
    b, c, h, w = img.shape
    pairs = c // 2
    if n_t is None:
        n_t = int(round(math.sqrt(pairs)))
    if pairs % n_t:
        raise ValueError(f"{c} channels do not split into antenna pairs with n_t={n_t}")
    n_r = pairs // n_t
    if stats is not None:
        img = img * np.float32(stats.scale)
    parts = img.transpose(0, 2, 3, 1).reshape(b, h, w, n_r, n_t, 2)
    out = np.empty((b, h, w, n_r, n_t), dtype=np.complex64)
    out.real = parts[..., 0]
    out.imag = parts[..., 1]
    return out


# ---------------------------------------------------------------------------
# networks

def _kaiming(rng: np.random.Generator, cout: int, cin: int, kh: int, kw: int) -> np.ndarray:
    std = math.sqrt(2.0 / (cin * kh * kw))
    return (rng.standard_normal((cout, cin, kh, kw)) * std).astype(np.float32)


class Model:
    """Ordered named parameters plus a forward pass."""

    arch = ""

    def __init__(self):
        self.params: "OrderedDict[str, Tensor]" = OrderedDict()

    def _conv(self, rng, name: str, cin: int, cout: int, k: int):
        self.params[f"{name}.weight"] = Tensor(_kaiming(rng, cout, cin, k, k), requires_grad=True)
        self.params[f"{name}.bias"] = Tensor(np.zeros(cout, dtype=np.float32), requires_grad=True)

    def _apply(self, name: str, x: Tensor) -> Tensor:
        return conv2d(x, self.params[f"{name}.weight"], self.params[f"{name}.bias"])

    def parameters(self) -> list:
        return list(self.params.values())

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((k, v.data.copy()) for k, v in self.params.items())

    def load_state_dict(self, state: Dict[str, np.ndarray]):
        if list(state) != list(self.params):
            missing = sorted(set(self.params) - set(state))
            extra = sorted(set(state) - set(self.params))
            raise ValueError(f"parameter names do not match {self.arch}: missing {missing}, unexpected {extra}")
        for name, value in state.items():
            if value.shape != self.params[name].shape:
                raise ValueError(f"{name}: expected shape {self.params[name].shape}, got {value.shape}")
            self.params[name].data = np.array(value, dtype=np.float32)

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def __call__(self, x) -> Tensor:
        return self.forward(x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32)))

    def predict(self, images: np.ndarray, batch_size: int = 8) -> np.ndarray:
        """Graph-free forward over ``images`` in chunks."""
        outs = []
        with no_grad():
            for start in range(0, len(images), batch_size):
                outs.append(self(images[start:start + batch_size]).data)
        return np.concatenate(outs)


@dataclass(frozen=True)
class SrcnnSpec:
    """Three-layer SR-CNN over a pre-interpolated input.

    With ``residual`` the network predicts a correction that is added to its
    input, so a zero last layer is an exact identity.
    """

    in_channels: int = 18
    out_channels: int = 18
    kernels: tuple = (9, 5, 5)
    widths: tuple = (64, 32)
    interp: str = "bilinear"
    residual: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kernels", tuple(self.kernels))
        object.__setattr__(self, "widths", tuple(self.widths))
        if len(self.kernels) != 3 or len(self.widths) != 2:
            raise ValueError("SR-CNN needs three kernel sizes and two hidden widths")
        if any(k % 2 == 0 for k in self.kernels):
            raise ValueError(f"kernel sizes must be odd, got {self.kernels}")
        if self.interp not in ("paper_linear", "paper_gaussian", "bilinear"):
            raise ValueError(f"unsupported SR-CNN pre-interpolation {self.interp!r}")
        if self.residual and self.in_channels != self.out_channels:
            raise ValueError("a residual SR-CNN needs equal input and output channels")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kernels"], d["widths"] = list(self.kernels), list(self.widths)
        return d


class SRCNN(Model):
    arch = "srcnn"

    def __init__(self, spec: SrcnnSpec = SrcnnSpec(), seed: int = 0):
        super().__init__()
        self.spec = spec
        rng = np.random.default_rng(seed)
        k1, k2, k3 = spec.kernels
        w1, w2 = spec.widths
        self._conv(rng, "conv1", spec.in_channels, w1, k1)
        self._conv(rng, "conv2", w1, w2, k2)
        self._conv(rng, "conv3", w2, spec.out_channels, k3)
        if spec.residual:
            # start as the exact identity; the correction is learned from zero
            self.params["conv3.weight"].data[...] = 0.0

    def forward(self, x: Tensor) -> Tensor:
        y = relu(self._apply("conv1", x))
        y = relu(self._apply("conv2", y))
        y = self._apply("conv3", y)
        return add(x, y) if self.spec.residual else y

    @classmethod
    def identity(cls, spec: SrcnnSpec = SrcnnSpec()) -> "SRCNN":
        """Degenerate network whose output equals its input.

        The first two layers route the positive part of each input channel
        through their centre taps; the last layer is zero, so the residual
        path returns the input unchanged.
        """
        if not spec.residual:
            raise ValueError("the exact identity construction needs a residual SR-CNN")
        model = cls(spec)
        c = spec.in_channels
        for name, cin, cout in (("conv1", c, spec.widths[0]), ("conv2", spec.widths[0], spec.widths[1])):
            w = model.params[f"{name}.weight"].data
            w[...] = 0.0
            k = w.shape[-1] // 2
            for ch in range(min(cin, cout, c)):
                w[ch, ch, k, k] = 1.0
        model.params["conv3.weight"].data[...] = 0.0
        return model


@dataclass(frozen=True)
class EdsrSpec:
    in_channels: int = 18
    out_channels: int = 18
    n_blocks: int = 8
    n_feats: int = 64
    res_scale: float = 0.1
    scale: int = 4
    residual: bool = True

    def __post_init__(self):
        if self.scale not in (2, 4):
            raise ValueError(f"EDSR upscale factor must be 2 or 4, got {self.scale}")
        if self.n_blocks < 0 or self.n_feats < 1:
            raise ValueError("EDSR needs n_blocks >= 0 and n_feats >= 1")

    @property
    def stages(self) -> int:
        return int(round(math.log2(self.scale)))

    def to_dict(self) -> dict:
        return asdict(self)


def lattice_upsampler(m: int, r: int) -> np.ndarray:
    """
    ``(m*r, m)`` linear interpolation matrix from a stride-``r`` lattice at
    offset 0; positions past the last sample hold its value.
    """
    if m < 1 or r < 1:
        raise ValueError("lattice_upsampler needs m >= 1 and r >= 1")
    a = np.zeros((m * r, m))
    if m == 1:
        a[:, 0] = 1.0
        return a
    p = np.arange(m * r) / r
    k = np.clip(np.floor(p).astype(int), 0, m - 2)
    c = np.clip(p - k, 0.0, 1.0)
    rows = np.arange(m * r)
    a[rows, k] = 1.0 - c
    a[rows, k + 1] += c
    return a


class EDSR(Model):
    """
    Residual SR network working from the pilot lattice directly.

    head conv -> ``n_blocks`` x (conv, relu, conv, * res_scale, + skip) ->
    body conv + global skip -> (conv to 4F, pixel shuffle x2) per stage ->
    output conv. With ``spec.residual`` the output is added to a fixed
    linear upsampling of the lattice and the output conv starts at zero.
    """

    arch = "edsr"

    def __init__(self, spec: EdsrSpec = EdsrSpec(), seed: int = 0):
        super().__init__()
        self.spec = spec
        rng = np.random.default_rng(seed)
        f = spec.n_feats
        self._conv(rng, "head", spec.in_channels, f, 3)
        for i in range(spec.n_blocks):
            self._conv(rng, f"block{i}.conv1", f, f, 3)
            self._conv(rng, f"block{i}.conv2", f, f, 3)
        self._conv(rng, "body", f, f, 3)
        for s in range(spec.stages):
            self._conv(rng, f"up{s}", f, 4 * f, 3)
        self._conv(rng, "tail", f, spec.out_channels, 3)
        if spec.residual:
            self.params["tail.weight"].data[...] = 0

    def forward(self, x: Tensor) -> Tensor:
        h = self._apply("head", x)
        y = h
        for i in range(self.spec.n_blocks):
            r = relu(self._apply(f"block{i}.conv1", y))
            r = self._apply(f"block{i}.conv2", r)
            y = add(y, scale(r, self.spec.res_scale))
        y = add(self._apply("body", y), h)
        for s in range(self.spec.stages):
            y = pixel_shuffle(self._apply(f"up{s}", y), 2)
        y = self._apply("tail", y)
        if self.spec.residual:
            r = self.spec.scale
            y = add(y, resample(x, lattice_upsampler(x.shape[2], r), lattice_upsampler(x.shape[3], r)))
        return y


ARCHITECTURES = {"srcnn": (SRCNN, SrcnnSpec), "edsr": (EDSR, EdsrSpec)}


def build_srcnn(spec: SrcnnSpec = SrcnnSpec(), seed: int = 0) -> SRCNN:
    return SRCNN(spec, seed)


def build_edsr(spec: EdsrSpec = EdsrSpec(), seed: int = 0) -> EDSR:
    return EDSR(spec, seed)


def spec_from_dict(arch: str, data: dict):
    if arch not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {arch!r}")
    return ARCHITECTURES[arch][1](**data)


@dataclass
class Checkpoint:
    """Everything needed to rebuild a trained network and invert its scaling."""

    arch: str
    spec: object
    params: "OrderedDict[str, np.ndarray]"
    stats: NormalizationStats
    meta: dict = field(default_factory=dict)

    def build(self) -> Model:
        cls = ARCHITECTURES[self.arch][0]
        model = cls(self.spec)
        model.load_state_dict(self.params)
        return model

    @classmethod
    def from_model(cls, model: Model, stats: NormalizationStats, meta: Optional[dict] = None) -> "Checkpoint":
        return cls(model.arch, model.spec, model.state_dict(), stats, dict(meta or {}))
