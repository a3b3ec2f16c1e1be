"""
Method evaluation shared by the command line and the experiment tests.

A method is either a conventional interpolator (see :class:`InterpMode`) or a
trained network (``srcnn`` / ``edsr``). All methods see the same recovered
pilot grids for a given ``(seed, frame_id)``, so comparisons are matched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .channel import ChannelGrid, derive_seed, stack_frames
from .interp import InterpMode, interpolate
from .metrics import MetricReport, nmse_db, psnr
from .models import Checkpoint, NormalizationStats
from .pilots import PilotPattern, ReceiveCorrelation
from .training import edsr_pipeline, recover_batch, srcnn_pipeline

NETWORKS = ("srcnn", "edsr")
METHODS = tuple(m.value for m in InterpMode) + NETWORKS


def parse_method(name: str) -> str:
    key = str(name).strip().lower()
    if key not in METHODS:
        raise ValueError(f"unknown method {name!r} (expected one of {', '.join(METHODS)})")
    return key


def scenario_label(rician_k_db: float) -> str:
    return "NLOS" if rician_k_db == float("-inf") else "LOS"


def estimate_frames(method: str, pilots: np.ndarray, pattern: PilotPattern, dims,
                    checkpoint: Optional[Checkpoint] = None) -> np.ndarray:
    """
    Full-grid estimates ``(J, n_sc, n_s, n_r, n_t)`` from recovered pilots.

    Parameters
    ----------
    method : str
        Interpolator mode or ``srcnn`` / ``edsr``.
    pilots : np.ndarray
        ``(J, n_pf, n_pt, n_r, n_t)`` recovered pilot grids.
    pattern : PilotPattern
    dims : tuple
        Full grid dims ``(n_sc, n_s, n_r, n_t)``.
    checkpoint : Checkpoint, optional
        Required for the network methods; its architecture must match.
    """
    method = parse_method(method)
    if method in NETWORKS:
        if checkpoint is None:
            raise ValueError(f"method {method} needs a trained checkpoint")
        if checkpoint.arch != method:
            raise ValueError(f"method {method} was given a {checkpoint.arch} checkpoint")
        run = srcnn_pipeline if method == "srcnn" else edsr_pipeline
        return run(pilots, pattern, (checkpoint.build(), checkpoint.stats), dims)
    return np.stack([interpolate(p, pattern, dims, method) for p in pilots])


@dataclass
class EvalSetup:
    """Everything that is fixed across the methods of one comparison."""

    frames: Sequence[ChannelGrid]
    pattern: PilotPattern
    snr_db: float
    seed: int
    peak: float
    scenario: str = "LOS"

    def pilots(self, recovery: str, r_h: Optional[ReceiveCorrelation] = None) -> np.ndarray:
        return recover_batch(self.frames, self.pattern, self.snr_db, recovery, self.seed, r_h)


def evaluate(method: str, setup: EvalSetup, recovery: str = "ls", r_h: Optional[ReceiveCorrelation] = None,
             checkpoint: Optional[Checkpoint] = None, pilots: Optional[np.ndarray] = None) -> MetricReport:
    """Score one method on ``setup.frames``; ``pilots`` may be passed to reuse a recovery."""
    truth = stack_frames(setup.frames)
    dims = truth.shape[1:]
    if pilots is None:
        pilots = setup.pilots(recovery, r_h)
    est = estimate_frames(method, pilots, setup.pattern, dims, checkpoint)
    return MetricReport(method=parse_method(method), recovery=recovery, pilots=setup.pattern.label(dims),
                        scenario=setup.scenario, snr_db=float(setup.snr_db),
                        psnr_db=psnr(est, truth, setup.peak), nmse_db=nmse_db(est, truth),
                        frames=len(setup.frames))


def dataset_peak(frames: Sequence[ChannelGrid]) -> float:
    """The normalization scale a network trained on ``frames`` would use."""
    return NormalizationStats.from_grids(stack_frames(frames)).scale


def eval_seed(seed: int) -> int:
    """Noise seed for evaluation pilots, disjoint from the training streams."""
    return derive_seed(seed, 3)
