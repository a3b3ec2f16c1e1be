"""
Expansion of pilot-lattice CSI to the full resource block.

Four interpolators are provided:

``paper_linear``
    Two diagonal corners of the enclosing lattice cell, weights
    ``(1 - a)(1 - b)`` and ``a b``. The weights do not sum to one off the cell
    diagonal; the formula is kept as is.
``paper_gaussian``
    Three-term second-order rule over the lattice points
    ``(2 i1 - i2, 2 t1 - t2)``, ``(i1, t1)`` and ``(2 i1 + i2, 2 t1 + t2)``
    (0-based grid coordinates), weights ``(a^2 - a)(b^2 - b) / 4``,
    ``(1 - a^2)(1 - b^2)`` and ``(a^2 + a)(b^2 + b) / 4``. Referenced
    coordinates are snapped to the nearest existing lattice point.
``bilinear`` / ``bicubic``
    Conventional four-corner bilinear and separable Catmull-Rom.

Every antenna pair is interpolated independently as a complex field. In all
modes the output at the pilot positions is the pilot value itself. Queries
outside the span of the lattice reuse the nearest cell with ``a``/``b``
clamped to ``[0, 1]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .pilots import EstimatedPilotGrid, PilotPattern


class InterpMode(enum.Enum):
    PAPER_LINEAR = "paper_linear"
    PAPER_GAUSSIAN = "paper_gaussian"
    BILINEAR = "bilinear"
    BICUBIC = "bicubic"

    @classmethod
    def parse(cls, value) -> "InterpMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown interpolation mode {value!r} (expected one of {names})") from None


@dataclass(frozen=True)
class LatticeCell:
    corner1: tuple
    corner2: tuple
    query: tuple
    alpha: float
    beta: float


@dataclass(frozen=True)
class _Axis:
    k1: np.ndarray      # lower lattice index of the enclosing cell
    k2: np.ndarray      # upper lattice index
    coef: np.ndarray    # clamped position inside the cell
    coords: np.ndarray  # grid coordinate of each lattice point
    offset: int
    stride: int

    def snap(self, c: np.ndarray) -> np.ndarray:
        """Lattice index nearest to grid coordinate ``c``."""
        k = np.floor((c - self.offset) / self.stride + 0.5).astype(np.intp)
        return np.clip(k, 0, len(self.coords) - 1)


def _axis(n: int, offset: int, stride: int) -> _Axis:
    coords = np.arange(offset, n, stride)
    m = len(coords)
    q = np.arange(n)
    if m == 1:
        zeros = np.zeros(n, dtype=np.intp)
        return _Axis(zeros, zeros, np.zeros(n), coords, offset, stride)
    k1 = np.clip((q - offset) // stride, 0, m - 2).astype(np.intp)
    k2 = k1 + 1
    coef = (q - coords[k1]) / (coords[k2] - coords[k1])
    return _Axis(k1, k2, np.clip(coef, 0.0, 1.0), coords, offset, stride)


def _axes(pattern: PilotPattern, dims) -> tuple:
    return (_axis(dims[0], pattern.freq_offset, pattern.freq_stride),
            _axis(dims[1], pattern.time_offset, pattern.time_stride))


def lattice_cell(pattern: PilotPattern, dims, i: int, t: int) -> LatticeCell:
    """Enclosing lattice cell and coefficients for the query ``(i, t)``."""
    fa, ta = _axes(pattern, dims)
    return LatticeCell(corner1=(int(fa.coords[fa.k1[i]]), int(ta.coords[ta.k1[t]])),
                       corner2=(int(fa.coords[fa.k2[i]]), int(ta.coords[ta.k2[t]])),
                       query=(i, t), alpha=float(fa.coef[i]), beta=float(ta.coef[t]))


def _check(values: np.ndarray, pattern: PilotPattern, dims) -> np.ndarray:
    if values.size == 0:
        raise ValueError("empty pilot grid")
    expected = pattern.counts(dims)
    if values.shape[:2] != expected:
        raise ValueError(f"pilot grid is {values.shape[:2]} but the pattern gives {expected} on {dims[:2]}")
    return values


def _restore_pilots(out: np.ndarray, pilots: np.ndarray, pattern: PilotPattern, dims) -> np.ndarray:
    fi = pattern.freq_indices(dims[0])
    ti = pattern.time_indices(dims[1])
    out[np.ix_(fi, ti)] = pilots
    return out


def _grid_values(est) -> np.ndarray:
    return est.values if isinstance(est, EstimatedPilotGrid) else np.asarray(est)


def linear_interpolate(est, pattern: PilotPattern, dims, mode="paper_linear") -> np.ndarray:
    """
    Linear expansion of pilot CSI to an ``(n_sc, n_s, n_r, n_t)`` grid.

    Parameters
    ----------
    est : EstimatedPilotGrid or np.ndarray
        Pilot values, shape ``(n_pf, n_pt, n_r, n_t)``.
    pattern : PilotPattern
        Lattice the pilots were taken on.
    dims : tuple
        Full grid size; only the first two entries are used.
    mode : InterpMode or str
        ``paper_linear`` or ``bilinear``.

    Returns
    -------
    np.ndarray
        Interpolated grid with the dtype of the pilot values.
    """
    mode = InterpMode.parse(mode)
    if mode not in (InterpMode.PAPER_LINEAR, InterpMode.BILINEAR):
        raise ValueError(f"linear_interpolate does not support {mode.value}")
    pilots = _check(_grid_values(est), pattern, dims)
    fa, ta = _axes(pattern, dims)
    p = pilots.astype(np.complex128)
    a = fa.coef[:, None, None, None]
    b = ta.coef[None, :, None, None]
    h11 = p[fa.k1[:, None], ta.k1[None, :]]
    h22 = p[fa.k2[:, None], ta.k2[None, :]]
    if mode is InterpMode.PAPER_LINEAR:
        out = (1 - a) * (1 - b) * h11 + a * b * h22
    else:
        h21 = p[fa.k2[:, None], ta.k1[None, :]]
        h12 = p[fa.k1[:, None], ta.k2[None, :]]
        out = (1 - a) * (1 - b) * h11 + a * (1 - b) * h21 + (1 - a) * b * h12 + a * b * h22
    return _restore_pilots(out.astype(pilots.dtype), pilots, pattern, dims)


def _catmull_rom(s: np.ndarray) -> np.ndarray:
    s2 = s * s
    s3 = s2 * s
    return np.stack([(-s3 + 2 * s2 - s) / 2,
                     (3 * s3 - 5 * s2 + 2) / 2,
                     (-3 * s3 + 4 * s2 + s) / 2,
                     (s3 - s2) / 2], axis=-1)


def _bicubic_matrix(ax: _Axis) -> np.ndarray:
    m = len(ax.coords)
    n = len(ax.k1)
    w = np.zeros((n, m))
    weights = _catmull_rom(ax.coef)
    rows = np.arange(n)
    for j, idx in enumerate((ax.k1 - 1, ax.k1, ax.k2, ax.k2 + 1)):
        np.add.at(w, (rows, np.clip(idx, 0, m - 1)), weights[:, j])
    return w


def gaussian_interpolate(est, pattern: PilotPattern, dims, mode="paper_gaussian") -> np.ndarray:
    """
    Second-order expansion of pilot CSI (``paper_gaussian`` or ``bicubic``).

    Same contract as :func:`linear_interpolate`.
    """
    mode = InterpMode.parse(mode)
    if mode not in (InterpMode.PAPER_GAUSSIAN, InterpMode.BICUBIC):
        raise ValueError(f"gaussian_interpolate does not support {mode.value}")
    pilots = _check(_grid_values(est), pattern, dims)
    fa, ta = _axes(pattern, dims)
    p = pilots.astype(np.complex128)
    if mode is InterpMode.BICUBIC:
        out = np.einsum("ik,kmab,tm->itab", _bicubic_matrix(fa), p, _bicubic_matrix(ta))
    else:
        a = fa.coef[:, None, None, None]
        b = ta.coef[None, :, None, None]
        c1f, c2f = fa.coords[fa.k1], fa.coords[fa.k2]
        c1t, c2t = ta.coords[ta.k1], ta.coords[ta.k2]
        near_f, far_f = fa.snap(2 * c1f - c2f), fa.snap(2 * c1f + c2f)
        near_t, far_t = ta.snap(2 * c1t - c2t), ta.snap(2 * c1t + c2t)
        h_near = p[near_f[:, None], near_t[None, :]]
        h_center = p[fa.k1[:, None], ta.k1[None, :]]
        h_far = p[far_f[:, None], far_t[None, :]]
        out = (0.25 * (a * a - a) * (b * b - b) * h_near
               + (1 - a * a) * (1 - b * b) * h_center
               + 0.25 * (a * a + a) * (b * b + b) * h_far)
    return _restore_pilots(out.astype(pilots.dtype), pilots, pattern, dims)


def interpolate(est, pattern: PilotPattern, dims, mode) -> np.ndarray:
    """Dispatch to the linear or second-order family by ``mode``."""
    mode = InterpMode.parse(mode)
    if mode in (InterpMode.PAPER_LINEAR, InterpMode.BILINEAR):
        return linear_interpolate(est, pattern, dims, mode)
    return gaussian_interpolate(est, pattern, dims, mode)
