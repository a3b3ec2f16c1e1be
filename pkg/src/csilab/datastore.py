"""
Binary persistence for frame datasets (``CSID``) and checkpoints (``CSCK``).

Both formats are little-endian regardless of host. Dataset payloads are
float32 (re, im) pairs in row-major ``[frame][subcarrier][slot][rx][tx]``
order. Checkpoints carry the architecture id, a JSON spec/meta blob, the
float64 normalization scale and the named float32 parameter tensors.
"""

from __future__ import annotations

import json
import os
import struct
from collections import OrderedDict
from typing import List, Sequence

import numpy as np

from .channel import ChannelGrid
from .models import ARCHITECTURES, Checkpoint, NormalizationStats, spec_from_dict

DATASET_MAGIC = b"CSID"
CHECKPOINT_MAGIC = b"CSCK"
DATASET_VERSION = 1
CHECKPOINT_VERSION = 1
ARCH_IDS = {"srcnn": 1, "edsr": 2}

_DATASET_HEADER = struct.Struct("<4s7I")


class FormatError(ValueError):
    """Base class for malformed dataset or checkpoint files."""


class BadMagic(FormatError):
    pass


class Truncated(FormatError):
    pass


class VersionMismatch(FormatError):
    pass


class UnknownArchitecture(FormatError):
    pass


class TensorMismatch(FormatError):
    pass


def _write_atomic(path, blob: bytes):
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def _read(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


# ---------------------------------------------------------------------------
# datasets

def encode_dataset(frames: Sequence) -> bytes:
    arrays = [np.asarray(getattr(f, "values", f)) for f in frames]
    if not arrays:
        raise ValueError("cannot write an empty dataset")
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"dataset frames have mixed dims: {sorted(shapes)}")
    dims = arrays[0].shape
    if len(dims) != 4:
        raise ValueError(f"frames must be (n_sc, n_s, n_r, n_t), got {dims}")
    data = np.ascontiguousarray(np.stack(arrays), dtype=np.complex64)
    payload = data.view(np.float32).astype("<f4", copy=False).tobytes()
    header = _DATASET_HEADER.pack(DATASET_MAGIC, DATASET_VERSION, len(arrays), *dims, 0)
    return header + payload


def decode_dataset(blob: bytes) -> List[ChannelGrid]:
    if len(blob) < _DATASET_HEADER.size:
        raise Truncated(f"dataset header needs {_DATASET_HEADER.size} bytes, file has {len(blob)}")
    magic, version, n, n_sc, n_s, n_r, n_t, _flags = _DATASET_HEADER.unpack_from(blob)
    if magic != DATASET_MAGIC:
        raise BadMagic(f"bad magic {magic!r}, expected {DATASET_MAGIC!r}")
    if version != DATASET_VERSION:
        raise VersionMismatch(f"dataset version {version} is not supported (expected {DATASET_VERSION})")
    count = n * n_sc * n_s * n_r * n_t * 2
    need = _DATASET_HEADER.size + 4 * count
    if len(blob) < need:
        raise Truncated(f"dataset payload truncated: {len(blob)} of {need} bytes")
    if len(blob) > need:
        raise FormatError(f"{len(blob) - need} trailing bytes after dataset payload")
    flat = np.frombuffer(blob, dtype="<f4", count=count, offset=_DATASET_HEADER.size)
    values = flat.astype(np.float32).view(np.complex64).reshape(n, n_sc, n_s, n_r, n_t)
    return [ChannelGrid(j, values[j].copy()) for j in range(n)]


def write_dataset(frames: Sequence, path):
    _write_atomic(path, encode_dataset(frames))


def read_dataset(path) -> List[ChannelGrid]:
    return decode_dataset(_read(path))


# ---------------------------------------------------------------------------
# checkpoints

class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.blob):
            raise Truncated(f"checkpoint truncated while reading {what}")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size, what))


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    if ckpt.arch not in ARCH_IDS:
        raise UnknownArchitecture(f"unknown architecture {ckpt.arch!r}")
    doc = json.dumps({"spec": ckpt.spec.to_dict(), "meta": ckpt.meta}, sort_keys=True).encode()
    parts = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, ARCH_IDS[ckpt.arch]),
             struct.pack("<I", len(doc)), doc, struct.pack("<dI", ckpt.stats.scale, len(ckpt.params))]
    for name, value in ckpt.params.items():
        raw = name.encode()
        arr = np.asarray(value, dtype=np.float32)
        parts.append(struct.pack("<I", len(raw)) + raw)
        parts.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(arr.astype("<f4", copy=False).tobytes())
    return b"".join(parts)


def decode_checkpoint(blob: bytes) -> Checkpoint:
    r = _Reader(blob)
    magic = r.take(4, "magic")
    if magic != CHECKPOINT_MAGIC:
        raise BadMagic(f"bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
    version, arch_id = r.unpack("<II", "header")
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(f"checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})")
    names = {v: k for k, v in ARCH_IDS.items()}
    if arch_id not in names:
        raise UnknownArchitecture(f"unknown architecture id {arch_id}")
    arch = names[arch_id]
    (doc_len,) = r.unpack("<I", "spec length")
    doc = json.loads(r.take(doc_len, "spec").decode())
    spec = spec_from_dict(arch, doc["spec"])
    scale, n_tensors = r.unpack("<dI", "scale and tensor count")

    expected = ARCHITECTURES[arch][0](spec).state_dict()
    if n_tensors != len(expected):
        raise TensorMismatch(f"{arch} spec expects {len(expected)} tensors, file holds {n_tensors}")
    params: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for want in expected:
        (name_len,) = r.unpack("<I", "tensor name length")
        name = r.take(name_len, "tensor name").decode()
        if name != want:
            raise TensorMismatch(f"expected tensor {want!r}, found {name!r}")
        (rank,) = r.unpack("<I", f"rank of {name}")
        shape = r.unpack(f"<{rank}I", f"extents of {name}")
        if tuple(shape) != expected[want].shape:
            raise TensorMismatch(f"tensor {name} has shape {tuple(shape)}, spec needs {expected[want].shape}")
        n = int(np.prod(shape, dtype=np.int64))
        raw = r.take(4 * n, f"payload of {name}")
        params[name] = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(shape)
    if r.pos != len(blob):
        raise FormatError(f"{len(blob) - r.pos} trailing bytes after checkpoint tensors")
    return Checkpoint(arch, spec, params, NormalizationStats(scale), doc.get("meta", {}))


def write_checkpoint(ckpt: Checkpoint, path):
    _write_atomic(path, encode_checkpoint(ckpt))


def read_checkpoint(path) -> Checkpoint:
    return decode_checkpoint(_read(path))
