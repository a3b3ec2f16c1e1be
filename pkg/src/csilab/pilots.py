"""
Pilot lattice, noisy pilot observation and LS/MMSE recovery at the pilots.

Every pilot lattice point carries an ``n_t x n_t`` orthogonal block ``X``
(``X X^H = P I``) sent over ``n_t`` channel uses, so the LS inverse is always
well posed. Noise has unit variance when the symbols are calibrated with
:meth:`PilotSymbols.for_snr`; other powers are handled by scaling the noise.

Indices are 0-based. The pilot set written ``{1, 5, ..., 61}`` in 1-based
notation is ``PilotPattern(0, 4, 0, 4)`` here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import ChannelGrid, derive_seed


@dataclass(frozen=True)
class PilotPattern:
    freq_offset: int = 0
    freq_stride: int = 4
    time_offset: int = 0
    time_stride: int = 4

    def __post_init__(self):
        for axis in ("freq", "time"):
            offset = getattr(self, f"{axis}_offset")
            stride = getattr(self, f"{axis}_stride")
            if stride < 1:
                raise ValueError(f"{axis}_stride must be >= 1, got {stride}")
            if not 0 <= offset < stride:
                raise ValueError(f"{axis}_offset must lie in [0, {stride}), got {offset}")

    @classmethod
    def uniform(cls, stride: int, offset: int = 0) -> "PilotPattern":
        return cls(offset, stride, offset, stride)

    def counts(self, dims) -> tuple:
        """Lattice size ``(n_pf, n_pt)`` on a grid of ``dims = (n_sc, n_s, ...)``."""
        n_sc, n_s = dims[0], dims[1]
        if self.freq_offset >= n_sc or self.time_offset >= n_s:
            raise ValueError(f"pilot pattern {self} does not fit a {n_sc}x{n_s} grid")
        return (-(-(n_sc - self.freq_offset) // self.freq_stride),
                -(-(n_s - self.time_offset) // self.time_stride))

    def freq_indices(self, n_sc: int) -> np.ndarray:
        return np.arange(self.freq_offset, n_sc, self.freq_stride)

    def time_indices(self, n_s: int) -> np.ndarray:
        return np.arange(self.time_offset, n_s, self.time_stride)

    def label(self, dims) -> str:
        n_pf, n_pt = self.counts(dims)
        return f"{n_pf}x{n_pt}"


def pilot_positions(pattern: PilotPattern, dims) -> list:
    """Row-major list of pilot positions ``(i_p, t_p)``.

    >>> pilot_positions(PilotPattern.uniform(4), (8, 8))
    [(0, 0), (0, 4), (4, 0), (4, 4)]
    """
    pattern.counts(dims)
    return [(int(i), int(t)) for i in pattern.freq_indices(dims[0]) for t in pattern.time_indices(dims[1])]


@dataclass(frozen=True)
class PilotSymbols:
    """Orthogonal pilot block ``X`` (``n_t x n_t``) with ``X X^H = power * I``."""

    X: np.ndarray
    power: float

    def __post_init__(self):
        x = np.asarray(self.X)
        if x.ndim != 2 or x.shape[0] != x.shape[1]:
            raise ValueError(f"pilot block must be square n_t x n_t, got shape {x.shape}")
        gram = x @ x.conj().T
        if not np.allclose(gram, self.power * np.eye(x.shape[0]), atol=1e-9 * max(1.0, self.power), rtol=0):
            raise ValueError("pilot block is not orthogonal: X X^H != power * I")

    @property
    def n_t(self) -> int:
        return self.X.shape[0]

    @classmethod
    def dft(cls, n_t: int, power: float = 1.0) -> "PilotSymbols":
        """Scaled unitary DFT block; every entry has magnitude ``sqrt(power / n_t)``."""
        k = np.arange(n_t)
        f = np.exp(-2j * np.pi * np.outer(k, k) / n_t) / math.sqrt(n_t)
        return cls(X=math.sqrt(power) * f, power=float(power))

    @classmethod
    def for_snr(cls, n_t: int, snr_db: float) -> "PilotSymbols":
        """DFT pilots whose power makes the unit-variance noise hit ``snr_db``."""
        power = 1.0 if math.isinf(snr_db) else 10.0 ** (snr_db / 10.0)
        return cls.dft(n_t, power)


def noise_variance(symbols: PilotSymbols, snr_db: float) -> float:
    """Noise variance giving per-receive-antenna SNR ``snr_db`` at unit channel power."""
    if snr_db == math.inf:
        return 0.0
    return symbols.power / 10.0 ** (snr_db / 10.0)


@dataclass
class PilotObservationSet:
    """Received blocks ``Y`` at every lattice point, shape ``(n_pf, n_pt, n_r, n_t)``."""

    pattern: PilotPattern
    grid_dims: tuple
    Y: np.ndarray
    snr_db: float
    seed: int

    def positions(self) -> list:
        return pilot_positions(self.pattern, self.grid_dims)


@dataclass
class EstimatedPilotGrid:
    """Recovered CSI at the pilot lattice, ``values[k, m, a, b]``."""

    pattern: PilotPattern
    grid_dims: tuple
    values: np.ndarray
    method: str

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("estimated pilot grid contains non-finite entries")

    @property
    def lattice_dims(self) -> tuple:
        return tuple(self.values.shape[:2])


def pilot_channel(grid, pattern: PilotPattern) -> np.ndarray:
    """True channel sampled on the lattice, ``(n_pf, n_pt, n_r, n_t)``."""
    values = grid.values if isinstance(grid, ChannelGrid) else np.asarray(grid)
    fi = pattern.freq_indices(values.shape[0])
    ti = pattern.time_indices(values.shape[1])
    return values[np.ix_(fi, ti)]


def observe_pilots(grid, pattern: PilotPattern, symbols: PilotSymbols, snr_db: float, seed: int) -> PilotObservationSet:
    """
    Simulate ``Y = H X + N`` at every pilot lattice point.

    The noise is i.i.d. circular complex Gaussian with variance
    :func:`noise_variance`; ``snr_db = inf`` disables it. Each lattice point
    draws its noise from a seed derived from ``(seed, k, m)``, so the result
    does not depend on evaluation order.
    """
    values = grid.values if isinstance(grid, ChannelGrid) else np.asarray(grid)
    dims = tuple(values.shape)
    n_pf, n_pt = pattern.counts(dims)
    n_r, n_t = dims[2], dims[3]
    if symbols.n_t != n_t:
        raise ValueError(f"pilot block is {symbols.n_t}x{symbols.n_t} but the channel has n_t={n_t}")

    h = pilot_channel(values, pattern).astype(np.complex128)
    y = h @ symbols.X
    var = noise_variance(symbols, snr_db)
    if var > 0:
        noise = np.empty_like(y)
        scale = math.sqrt(var / 2.0)
        for k in range(n_pf):
            for m in range(n_pt):
                rng = np.random.default_rng(derive_seed(seed, k, m))
                noise[k, m] = scale * (rng.standard_normal((n_r, n_t)) + 1j * rng.standard_normal((n_r, n_t)))
        y = y + noise
    return PilotObservationSet(pattern=pattern, grid_dims=dims, Y=y, snr_db=float(snr_db), seed=int(seed))


def ls_estimate(obs: PilotObservationSet, symbols: PilotSymbols) -> EstimatedPilotGrid:
    """LS recovery ``H_ls = Y X^H (X X^H)^-1`` at every pilot."""
    x = symbols.X
    gram = x @ x.conj().T
    if np.linalg.cond(gram) > 1e12:
        raise np.linalg.LinAlgError("X X^H is singular; pilots must be orthogonal")
    w = x.conj().T @ np.linalg.inv(gram)
    return EstimatedPilotGrid(obs.pattern, obs.grid_dims, obs.Y @ w, "LS")


@dataclass(frozen=True)
class ReceiveCorrelation:
    R: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.R)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ValueError(f"R_H must be square, got shape {r.shape}")
        scale = max(1.0, float(np.max(np.abs(r))))
        if not np.allclose(r, r.conj().T, atol=1e-9 * scale, rtol=0):
            raise ValueError("R_H is not Hermitian")
        if np.min(np.linalg.eigvalsh(0.5 * (r + r.conj().T))) < -1e-9 * scale:
            raise ValueError("R_H is not positive semidefinite")


def mmse_estimate(obs: PilotObservationSet, symbols: PilotSymbols, r_h: ReceiveCorrelation) -> EstimatedPilotGrid:
    """
    MMSE refinement ``R_H [R_H + sigma^2 (X X^H)^-1]^-1 H_ls``.

    With calibrated symbols ``sigma^2 = 1`` and this is the textbook
    unit-noise form. Because ``X X^H = P I``, its inverse acts on the receive
    side as ``I / P``, which keeps the expression valid when ``n_r != n_t``.
    """
    if not isinstance(r_h, ReceiveCorrelation):
        r_h = ReceiveCorrelation(np.asarray(r_h))
    r = np.asarray(r_h.R, dtype=np.complex128)
    n_r = obs.grid_dims[2]
    if r.shape != (n_r, n_r):
        raise ValueError(f"R_H must be {n_r}x{n_r}, got {r.shape}")
    var = noise_variance(symbols, obs.snr_db)
    ls = ls_estimate(obs, symbols)
    w = r @ np.linalg.inv(r + (var / symbols.power) * np.eye(n_r))
    return EstimatedPilotGrid(obs.pattern, obs.grid_dims, w @ ls.values, "MMSE")


def estimate_receive_correlation(frames: Sequence) -> ReceiveCorrelation:
    """Sample mean of ``H H^H`` over every grid point of every frame, Hermitian-symmetrized."""
    if len(frames) == 0:
        raise ValueError("need at least one frame to estimate R_H")
    acc = None
    count = 0
    for frame in frames:
        h = (frame.values if isinstance(frame, ChannelGrid) else np.asarray(frame)).astype(np.complex128)
        h = h.reshape(-1, h.shape[-2], h.shape[-1])
        part = np.einsum("nab,ncb->ac", h, h.conj())
        acc = part if acc is None else acc + part
        count += h.shape[0]
    r = acc / count
    return ReceiveCorrelation(0.5 * (r + r.conj().T))


def recover_pilots(grid, pattern: PilotPattern, snr_db: float, seed: int, method: str = "ls",
                   r_h: ReceiveCorrelation = None) -> EstimatedPilotGrid:
    """Observe with SNR-calibrated DFT pilots, then recover with ``method`` ('ls' or 'mmse')."""
    values = grid.values if isinstance(grid, ChannelGrid) else np.asarray(grid)
    symbols = PilotSymbols.for_snr(values.shape[3], snr_db)
    obs = observe_pilots(values, pattern, symbols, snr_db, seed)
    method = method.lower()
    if method == "ls":
        return ls_estimate(obs, symbols)
    if method == "mmse":
        if r_h is None:
            raise ValueError("MMSE recovery needs a receive correlation R_H")
        return mmse_estimate(obs, symbols, r_h)
    raise ValueError(f"unknown recovery method {method!r} (expected 'ls' or 'mmse')")
