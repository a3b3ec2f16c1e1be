"""
Training of the SR networks on simulated pilot observations.

Inputs are pilot-lattice CSI recovered by LS or MMSE from noisy
observations of the true frames; targets are the true frames. SR-CNN sees
the lattice after a conventional interpolation to full size, EDSR sees the
lattice itself.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .autograd import Adam, backward, l1_loss, mse_loss, no_grad
from .channel import ChannelGrid, derive_seed, stack_frames
from .interp import interpolate
from .models import (EDSR, SRCNN, Checkpoint, Model, NormalizationStats, from_channel_image,
                     to_channel_image)
from .pilots import EstimatedPilotGrid, PilotPattern, ReceiveCorrelation, recover_pilots

log = logging.getLogger(__name__)

LOSSES = {"mse": mse_loss, "l1": l1_loss}
DEFAULT_LOSS = {"srcnn": "mse", "edsr": "l1"}


class TrainingDiverged(RuntimeError):
    """A training loss became NaN or infinite."""


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 8
    learning_rate: float = 1e-4
    loss: Optional[str] = None
    seed: int = 0
    val_split: float = 0.1
    snr_db: float = 20.0
    recovery: str = "ls"
    keep_best: bool = True

    def loss_for(self, arch: str) -> str:
        kind = self.loss or DEFAULT_LOSS[arch]
        if kind not in LOSSES:
            raise ValueError(f"unknown loss {kind!r} (expected one of {sorted(LOSSES)})")
        return kind


def split_frames(frames: Sequence, val_split: float):
    """Deterministic tail split into (train, validation)."""
    n_val = int(round(len(frames) * val_split))
    if n_val < 1 or n_val >= len(frames):
        raise ValueError(f"cannot split {len(frames)} frames with val_split={val_split}")
    return list(frames[:-n_val]), list(frames[-n_val:])


def recover_batch(frames: Sequence[ChannelGrid], pattern: PilotPattern, snr_db: float, recovery: str,
                  seed: int, r_h: Optional[ReceiveCorrelation] = None) -> np.ndarray:
    """Recovered pilot grids ``(J, n_pf, n_pt, n_r, n_t)``; frame ``j`` draws noise from ``(seed, frame_id)``."""
    return np.stack([recover_pilots(f, pattern, snr_db, derive_seed(seed, f.frame_id), recovery, r_h).values
                     for f in frames])


def srcnn_inputs(pilots: np.ndarray, pattern: PilotPattern, dims, mode: str) -> np.ndarray:
    return np.stack([interpolate(p, pattern, dims, mode) for p in pilots])


def check_edsr_lattice(model: EDSR, pattern: PilotPattern, dims):
    n_pf, n_pt = pattern.counts(dims)
    r = model.spec.scale
    if (pattern.freq_stride, pattern.time_stride) != (r, r) or (n_pf * r, n_pt * r) != tuple(dims[:2]):
        raise ValueError(f"EDSR x{r} does not map a {n_pf}x{n_pt} lattice (strides "
                         f"{pattern.freq_stride}/{pattern.time_stride}) onto a {dims[0]}x{dims[1]} grid")


def _network_inputs(model: Model, pilots: np.ndarray, pattern: PilotPattern, dims) -> np.ndarray:
    if isinstance(model, SRCNN):
        return srcnn_inputs(pilots, pattern, dims, model.spec.interp)
    check_edsr_lattice(model, pattern, dims)
    return pilots


def _mean_loss(model: Model, loss_fn, inputs: np.ndarray, targets: np.ndarray, batch_size: int) -> float:
    total = 0.0
    with no_grad():
        for s in range(0, len(inputs), batch_size):
            loss = loss_fn(model(inputs[s:s + batch_size]), targets[s:s + batch_size])
            total += float(loss.data) * len(inputs[s:s + batch_size])
    return total / len(inputs)


def train(model: Model, train_frames: Sequence[ChannelGrid], val_frames: Sequence[ChannelGrid],
          pattern: PilotPattern, config: TrainConfig = TrainConfig(),
          r_h: Optional[ReceiveCorrelation] = None, stats: Optional[NormalizationStats] = None,
          progress=None):
    """
    Fit ``model`` to map recovered pilots to true frames.

    Parameters
    ----------
    model : SRCNN or EDSR
        Network to train in place.
    train_frames, val_frames : sequence of ChannelGrid
        Pre-split frame sets with identical dims.
    pattern : PilotPattern
        Pilot lattice, fixed for the run.
    config : TrainConfig
    r_h : ReceiveCorrelation, optional
        Needed for MMSE recovery.
    stats : NormalizationStats, optional
        Defaults to the max-abs scale of the training targets.
    progress : callable, optional
        Called with each history row as it is produced.

    Returns
    -------
    (Checkpoint, list of dict)
        The checkpoint (best validation epoch when ``keep_best``) and one
        ``{"epoch", "train_loss", "val_loss"}`` row per epoch; row 0 holds
        the losses before any update.
    """
    if not train_frames or not val_frames:
        raise ValueError("training and validation sets must both be non-empty")
    truth = stack_frames(train_frames)
    val_truth = stack_frames(val_frames)
    if truth.shape[1:] != val_truth.shape[1:]:
        raise ValueError(f"train dims {truth.shape[1:]} differ from validation dims {val_truth.shape[1:]}")
    dims = truth.shape[1:]
    loss_kind = config.loss_for(model.arch)
    loss_fn = LOSSES[loss_kind]
    stats = stats or NormalizationStats.from_grids(truth)

    train_pilots = recover_batch(train_frames, pattern, config.snr_db, config.recovery,
                                 derive_seed(config.seed, 0), r_h)
    val_pilots = recover_batch(val_frames, pattern, config.snr_db, config.recovery,
                               derive_seed(config.seed, 1), r_h)
    x_train = to_channel_image(_network_inputs(model, train_pilots, pattern, dims), stats)
    x_val = to_channel_image(_network_inputs(model, val_pilots, pattern, dims), stats)
    y_train = to_channel_image(truth, stats)
    y_val = to_channel_image(val_truth, stats)
    del truth, val_truth, train_pilots, val_pilots

    opt = Adam(model.parameters(), lr=config.learning_rate)
    bs = config.batch_size
    history: List[dict] = []

    def record(epoch, train_loss, val_loss):
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}: train={train_loss}, val={val_loss}")
        row = {"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss}
        history.append(row)
        if progress is not None:
            progress(row)
        log.info("epoch %d train %.6g val %.6g", epoch, train_loss, val_loss)

    record(0, _mean_loss(model, loss_fn, x_train, y_train, bs), _mean_loss(model, loss_fn, x_val, y_val, bs))
    best_val = history[0]["val_loss"]
    best_state = model.state_dict()
    best_epoch = 0

    for epoch in range(1, config.epochs + 1):
        order = np.random.default_rng(derive_seed(config.seed, 2, epoch)).permutation(len(x_train))
        total = 0.0
        for s in range(0, len(order), bs):
            idx = np.sort(order[s:s + bs])
            opt.zero_grad()
            loss = loss_fn(model(x_train[idx]), y_train[idx])
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingDiverged(f"non-finite training loss at epoch {epoch}, batch {s // bs}")
            backward(loss)
            opt.step()
            total += value * len(idx)
        record(epoch, total / len(order), _mean_loss(model, loss_fn, x_val, y_val, bs))
        if history[-1]["val_loss"] < best_val:
            best_val = history[-1]["val_loss"]
            best_state = model.state_dict()
            best_epoch = epoch

    if config.keep_best:
        model.load_state_dict(best_state)
    meta = {
        "epochs": config.epochs,
        "seed": config.seed,
        "loss": loss_kind,
        "learning_rate": config.learning_rate,
        "batch_size": config.batch_size,
        "snr_db": config.snr_db,
        "recovery": config.recovery,
        "pattern": [pattern.freq_offset, pattern.freq_stride, pattern.time_offset, pattern.time_stride],
        "dims": list(dims),
        "final_train_loss": history[-1]["train_loss"],
        "final_val_loss": history[-1]["val_loss"],
        "best_val_loss": best_val,
        "best_epoch": best_epoch,
    }
    return Checkpoint.from_model(model, stats, meta), history


def best_so_far(history: Sequence[dict]) -> List[float]:
    """Running minimum of the validation loss."""
    return list(np.minimum.accumulate([row["val_loss"] for row in history]))


def _pilot_batch(pilot_grid) -> np.ndarray:
    if isinstance(pilot_grid, EstimatedPilotGrid):
        return pilot_grid.values[None]
    if isinstance(pilot_grid, (list, tuple)):
        return np.stack([getattr(p, "values", p) for p in pilot_grid])
    arr = np.asarray(pilot_grid)
    return arr[None] if arr.ndim == 4 else arr


def _model_from(checkpoint) -> tuple:
    if isinstance(checkpoint, Checkpoint):
        return checkpoint.build(), checkpoint.stats
    model, stats = checkpoint
    return model, stats


def srcnn_pipeline(pilot_grid, pattern: PilotPattern, checkpoint, dims) -> np.ndarray:
    """
    Pre-interpolate, refine with SR-CNN and decode to complex grids.

    ``checkpoint`` is a :class:`Checkpoint` or a ``(model, stats)`` pair.
    Returns ``(B, n_sc, n_s, n_r, n_t)`` complex64.
    """
    model, stats = _model_from(checkpoint)
    if not isinstance(model, SRCNN):
        raise ValueError(f"srcnn_pipeline needs an SR-CNN, got {model.arch}")
    pilots = _pilot_batch(pilot_grid)
    if pilots.shape[1:3] != pattern.counts(dims):
        raise ValueError(f"pilot lattice {pilots.shape[1:3]} does not match {pattern.counts(dims)} on {dims[:2]}")
    if pilots.shape[-2] * pilots.shape[-1] * 2 != model.spec.in_channels:
        raise ValueError(f"network expects {model.spec.in_channels} channels, "
                         f"pilots have {2 * pilots.shape[-2] * pilots.shape[-1]}")
    hr = srcnn_inputs(pilots, pattern, dims, model.spec.interp)
    out = model.predict(to_channel_image(hr, stats))
    return from_channel_image(out, stats, n_t=pilots.shape[-1])


def edsr_pipeline(pilot_grid, pattern: PilotPattern, checkpoint, dims) -> np.ndarray:
    """Upscale pilot-lattice CSI with EDSR; same contract as :func:`srcnn_pipeline`."""
    model, stats = _model_from(checkpoint)
    if not isinstance(model, EDSR):
        raise ValueError(f"edsr_pipeline needs an EDSR, got {model.arch}")
    check_edsr_lattice(model, pattern, dims)
    pilots = _pilot_batch(pilot_grid)
    if pilots.shape[1:3] != pattern.counts(dims):
        raise ValueError(f"pilot lattice {pilots.shape[1:3]} does not match {pattern.counts(dims)} on {dims[:2]}")
    out = model.predict(to_channel_image(pilots, stats))
    return from_channel_image(out, stats, n_t=pilots.shape[-1])
