"""
Statistical MIMO-OFDM channel frames over one resource block.

The generator is a clustered tapped-delay-line model with Kronecker spatial
correlation. It is a stand-in for a geometry-based model such as COST 2100:
it reproduces the time, frequency and antenna correlation structure that the
interpolators have to exploit, not the cluster statistics of the real thing.

A frame is indexed ``[subcarrier, slot, rx, tx]``, subcarriers as rows and
slots as columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

NLOS = float("-inf")


def derive_seed(base_seed: int, *keys: int) -> int:
    """Mix ``base_seed`` with integer keys into an independent 64-bit seed."""
    state = np.random.SeedSequence([int(base_seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])
    return int(state.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class ChannelModelConfig:
    """Parameters of the tapped-delay-line surrogate.

    Defaults follow the 20 MHz, 3x3 WiFi configuration at 5.3 GHz with a
    64 x 64 resource block. ``rician_k_db = -inf`` selects NLOS.
    """

    carrier_freq: float = 5.3e9
    bandwidth: float = 20e6
    n_sc: int = 64
    n_s: int = 64
    n_r: int = 3
    n_t: int = 3
    subcarrier_spacing: float = 312.5e3
    slot_duration: float = 4e-6
    n_paths: int = 12
    rms_delay_spread: float = 50e-9
    max_doppler: float = 10.0
    rician_k_db: float = 6.0
    rx_corr: float = 0.3
    tx_corr: float = 0.3
    seed: int = 0

    def __post_init__(self):
        problems = []
        for name in ("n_sc", "n_s", "n_r", "n_t", "n_paths"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                problems.append(f"{name} must be an integer >= 1 (got {value!r})")
        for name in ("carrier_freq", "bandwidth", "subcarrier_spacing", "slot_duration"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be > 0 (got {getattr(self, name)!r})")
        if not self.rms_delay_spread > 0:
            problems.append(f"rms_delay_spread must be > 0 (got {self.rms_delay_spread!r})")
        if not self.max_doppler >= 0:
            problems.append(f"max_doppler must be >= 0 (got {self.max_doppler!r})")
        for name in ("rx_corr", "tx_corr"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                problems.append(f"{name} must lie in [0, 1) (got {value!r})")
        if math.isnan(self.rician_k_db) or self.rician_k_db == math.inf:
            problems.append(f"rician_k_db must be finite or -inf (got {self.rician_k_db!r})")
        if problems:
            raise ValueError("invalid ChannelModelConfig: " + "; ".join(problems))

    @property
    def is_los(self) -> bool:
        return math.isfinite(self.rician_k_db)

    @property
    def dims(self) -> tuple:
        return (self.n_sc, self.n_s, self.n_r, self.n_t)

    def with_(self, **changes) -> "ChannelModelConfig":
        return replace(self, **changes)


@dataclass
class PathSet:
    """One realization of the multipath structure.

    ``signatures`` has shape ``(n_paths, n_r, n_t)``. When a LOS component is
    present it is stored separately and sits at delay 0 with zero Doppler.
    """

    delays: np.ndarray
    powers: np.ndarray
    dopplers: np.ndarray
    signatures: np.ndarray
    los_power: float = 0.0
    los_signature: Optional[np.ndarray] = None

    @property
    def total_power(self) -> float:
        return float(np.sum(self.powers)) + self.los_power


@dataclass
class ChannelGrid:
    """Ground-truth channel of frame ``frame_id``; ``values[i, t, a, b]``."""

    frame_id: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.values.ndim != 4:
            raise ValueError(f"channel grid must be 4-D (n_sc, n_s, n_r, n_t), got shape {self.values.shape}")

    @property
    def dims(self) -> tuple:
        return tuple(self.values.shape)


def exponential_correlation(n: int, corr: float) -> np.ndarray:
    """Exponential correlation matrix ``R[a, b] = corr ** |a - b|``.

    >>> exponential_correlation(3, 0.3)[0]
    array([1.  , 0.3 , 0.09])
    """
    idx = np.arange(n)
    return corr ** np.abs(idx[:, None] - idx[None, :]).astype(float)


def _psd_sqrt(r: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(r)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def sample_path_set(config: ChannelModelConfig, seed: int) -> PathSet:
    """
    Draw delays, powers, Doppler shifts and spatial signatures for one frame.

    Delays are i.i.d. uniform on ``[0, 5 * rms_delay_spread]`` and weighted by
    the exponential power-delay profile ``exp(-tau / rms_delay_spread)``, so
    the expected profile is a (slightly truncated) exponential with the
    configured rms spread. Each diffuse path gets a Kronecker-correlated
    signature ``R_rx^1/2 G R_tx^1/2``.

    Parameters
    ----------
    config : ChannelModelConfig
        Model parameters.
    seed : int
        Seed of this realization.

    Returns
    -------
    PathSet
        Paths whose powers (LOS included) sum to one.
    """
    rng = np.random.default_rng(seed)
    n = config.n_paths
    sigma = config.rms_delay_spread

    delays = np.sort(rng.uniform(0.0, 5.0 * sigma, size=n))
    weights = np.exp(-delays / sigma)
    powers = weights / np.sum(weights)
    dopplers = config.max_doppler * np.cos(rng.uniform(0.0, 2.0 * np.pi, size=n))

    g = (rng.standard_normal((n, config.n_r, config.n_t))
         + 1j * rng.standard_normal((n, config.n_r, config.n_t))) / np.sqrt(2.0)
    r_rx = _psd_sqrt(exponential_correlation(config.n_r, config.rx_corr))
    r_tx = _psd_sqrt(exponential_correlation(config.n_t, config.tx_corr))
    signatures = r_rx @ g @ r_tx

    los_power = 0.0
    los_signature = None
    if config.is_los:
        k = 10.0 ** (config.rician_k_db / 10.0)
        los_power = k / (k + 1.0)
        powers = powers / (k + 1.0)
        los_signature = np.ones((config.n_r, config.n_t), dtype=complex)

    return PathSet(delays=delays, powers=powers, dopplers=dopplers, signatures=signatures,
                   los_power=los_power, los_signature=los_signature)


def subcarrier_frequencies(config: ChannelModelConfig) -> np.ndarray:
    return (np.arange(config.n_sc) - config.n_sc / 2) * config.subcarrier_spacing


def evaluate_channel_grid(paths: PathSet, config: ChannelModelConfig, frame_id: int = 0) -> ChannelGrid:
    """
    Evaluate the frequency/time response of ``paths`` on the resource block.

    ``H_i(t) = sum_l sqrt(p_l) A_l exp(-j 2 pi f_i tau_l) exp(j 2 pi fd_l t Ts)``
    with ``f_i = (i - n_sc / 2) * subcarrier_spacing``. The sum is done in
    double precision and the result stored as complex64.
    """
    if abs(paths.total_power - 1.0) > 1e-9:
        raise ValueError(f"path powers must sum to 1, got {paths.total_power!r}")
    freqs = subcarrier_frequencies(config)
    times = np.arange(config.n_s) * config.slot_duration

    # (paths, n_sc) and (paths, n_s) phase factors
    freq_phase = np.exp(-2j * np.pi * np.outer(paths.delays, freqs))
    time_phase = np.exp(2j * np.pi * np.outer(paths.dopplers, times))
    amp = np.sqrt(paths.powers)[:, None, None] * paths.signatures
    h = np.einsum("li,lt,lab->itab", freq_phase, time_phase, amp, optimize=True)
    if paths.los_signature is not None:
        h = h + math.sqrt(paths.los_power) * paths.los_signature[None, None]
    return ChannelGrid(frame_id=int(frame_id), values=h.astype(np.complex64))


def generate_frame(config: ChannelModelConfig, frame_id: int, base_seed: int) -> ChannelGrid:
    paths = sample_path_set(config, derive_seed(base_seed, frame_id))
    return evaluate_channel_grid(paths, config, frame_id)


def generate_frames(config: ChannelModelConfig, count: int, base_seed: Optional[int] = None) -> list:
    """Generate ``count`` independent frames; frame ``j`` is seeded from ``(base_seed, j)``."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if base_seed is None:
        base_seed = config.seed
    return [generate_frame(config, j, base_seed) for j in range(count)]


def stack_frames(frames: Sequence[ChannelGrid]) -> np.ndarray:
    """Stack frames into one ``(J, n_sc, n_s, n_r, n_t)`` array."""
    if len(frames) == 0:
        raise ValueError("no frames to stack")
    dims = {f.dims for f in frames}
    if len(dims) != 1:
        raise ValueError(f"frames have mixed dims: {sorted(dims)}")
    return np.stack([f.values for f in frames])
