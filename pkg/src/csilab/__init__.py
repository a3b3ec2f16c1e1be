"""Pilot-based MIMO-OFDM CSI estimation with conventional and super-resolution interpolators."""

from .channel import ChannelGrid, ChannelModelConfig, generate_frames
from .datastore import read_checkpoint, read_dataset, write_checkpoint, write_dataset
from .interp import InterpMode, interpolate
from .metrics import MetricReport, nmse_db, psnr
from .models import EDSR, SRCNN, Checkpoint, EdsrSpec, SrcnnSpec
from .pilots import PilotPattern, recover_pilots
from .training import TrainConfig, edsr_pipeline, srcnn_pipeline, train

__version__ = "0.1.0"

__all__ = [
    "ChannelGrid", "ChannelModelConfig", "generate_frames",
    "read_checkpoint", "read_dataset", "write_checkpoint", "write_dataset",
    "InterpMode", "interpolate",
    "MetricReport", "nmse_db", "psnr",
    "EDSR", "SRCNN", "Checkpoint", "EdsrSpec", "SrcnnSpec",
    "PilotPattern", "recover_pilots",
    "TrainConfig", "edsr_pipeline", "srcnn_pipeline", "train",
]
