"""
Estimation quality metrics.

PSNR is taken over the real image encoding of the CSI (real and imaginary
parts as separate samples) with the dataset normalization scale as peak.
NMSE is the Frobenius error power over the true power, averaged per frame
and then converted to dB; ``aggregate=True`` uses the ratio of summed
powers instead.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

PSNR_CONVENTION = ("PSNR = 10*log10(peak^2 / MSE) over the real/imaginary channel-image samples, "
                   "peak = dataset max-abs normalization scale")
NMSE_CONVENTION = "NMSE = 10*log10(mean_j ||H_j - Hhat_j||_F^2 / ||H_j||_F^2)"


def _real_view(x) -> np.ndarray:
    arr = np.asarray(x)
    if np.iscomplexobj(arr):
        arr = np.stack([arr.real, arr.imag], axis=-1)
    return arr.astype(np.float64)


def mse(estimate, truth) -> float:
    e, t = _real_view(estimate), _real_view(truth)
    if e.shape != t.shape:
        raise ValueError(f"shape mismatch: {e.shape} vs {t.shape}")
    return float(np.mean((e - t) ** 2))


def psnr(estimate, truth, peak: float) -> float:
    """``10 log10(peak^2 / MSE)``; returns ``inf`` when the estimate is exact."""
    err = mse(estimate, truth)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


def nmse_db(estimates, truths, aggregate: bool = False) -> float:
    """
    Normalized MSE in dB over a sequence of frames.

    Parameters
    ----------
    estimates, truths : array_like
        Equal-length frame sequences; the leading axis indexes frames.
    aggregate : bool
        Use ``sum ||H - Hhat||^2 / sum ||H||^2`` instead of the mean of
        per-frame ratios.

    Returns
    -------
    float
        NMSE in dB, ``-inf`` for a perfect estimate.
    """
    e = np.asarray(estimates)
    t = np.asarray(truths)
    if e.shape != t.shape:
        raise ValueError(f"shape mismatch: {e.shape} vs {t.shape}")
    if e.ndim < 2:
        raise ValueError("expected a sequence of frames")
    axes = tuple(range(1, t.ndim))
    err = np.sum(np.abs(e.astype(np.complex128) - t) ** 2, axis=axes)
    power = np.sum(np.abs(t.astype(np.complex128)) ** 2, axis=axes)
    if np.any(power == 0):
        raise ValueError("a truth frame has zero power; NMSE is undefined")
    ratio = float(np.sum(err) / np.sum(power)) if aggregate else float(np.mean(err / power))
    if ratio == 0.0:
        return -math.inf
    return 10.0 * math.log10(ratio)


def format_db(value: float) -> str:
    if value == math.inf:
        return "inf"
    if value == -math.inf:
        return "-inf"
    return f"{value:.4f}"


@dataclass
class MetricReport:
    method: str
    recovery: str
    pilots: str
    scenario: str
    snr_db: float
    psnr_db: float
    nmse_db: float
    frames: int

    COLUMNS = ("method", "recovery", "pilots", "scenario", "snr_db", "psnr_db", "nmse_db", "frames")

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("a metric report needs at least one frame")
        for name in ("psnr_db", "nmse_db"):
            if math.isnan(getattr(self, name)):
                raise ValueError(f"{name} is NaN")

    def row(self) -> dict:
        d = asdict(self)
        d["snr_db"] = format_db(self.snr_db) if math.isinf(self.snr_db) else f"{self.snr_db:g}"
        d["psnr_db"] = format_db(self.psnr_db)
        d["nmse_db"] = format_db(self.nmse_db)
        return d

    @classmethod
    def from_row(cls, row: dict) -> "MetricReport":
        missing = [c for c in cls.COLUMNS if c not in row]
        if missing:
            raise ValueError(f"report row lacks columns {missing}")
        return cls(method=row["method"], recovery=row["recovery"], pilots=row["pilots"],
                   scenario=row["scenario"], snr_db=float(row["snr_db"]), psnr_db=float(row["psnr_db"]),
                   nmse_db=float(row["nmse_db"]), frames=int(row["frames"]))
