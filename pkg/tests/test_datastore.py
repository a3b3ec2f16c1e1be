import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csilab.channel import ChannelGrid, ChannelModelConfig, generate_frames
from csilab.datastore import (BadMagic, FormatError, Truncated, TensorMismatch, UnknownArchitecture,
                              VersionMismatch, decode_checkpoint, decode_dataset, encode_checkpoint,
                              encode_dataset, read_checkpoint, read_dataset, write_checkpoint, write_dataset)
from csilab.models import Checkpoint, EdsrSpec, NormalizationStats, SrcnnSpec, build_edsr, build_srcnn


def small_checkpoint(arch="srcnn"):
    if arch == "srcnn":
        m = build_srcnn(SrcnnSpec(in_channels=2, out_channels=2, widths=(4, 3)), seed=1)
    else:
        m = build_edsr(EdsrSpec(in_channels=2, out_channels=2, n_blocks=1, n_feats=4, scale=2), seed=1)
    return Checkpoint.from_model(m, NormalizationStats(2.25), {"epochs": 3, "loss": "l1"})


class TestDatasetLayout:
    def test_single_tiny_frame(self):
        h = np.array([[[[1 + 2j]], [[3 - 4j]]], [[[0.5j]], [[-1.0]]]], dtype=np.complex64)
        blob = encode_dataset([h])
        assert len(blob) == 32 + 32
        assert struct.unpack_from("<4s7I", blob) == (b"CSID", 1, 1, 2, 2, 1, 1, 0)
        payload = np.frombuffer(blob, "<f4", offset=32)
        np.testing.assert_array_equal(payload, [1, 2, 3, -4, 0, 0.5, -1, 0])

    def test_round_trip(self, tmp_path):
        frames = generate_frames(ChannelModelConfig(n_sc=6, n_s=5, n_r=2, n_t=3), 3, base_seed=2)
        path = tmp_path / "d.csid"
        write_dataset(frames, path)
        back = read_dataset(path)
        assert [f.frame_id for f in back] == [0, 1, 2]
        assert all(np.array_equal(a.values, b.values) for a, b in zip(frames, back))
        assert not (tmp_path / "d.csid.tmp").exists()

    @settings(max_examples=25, deadline=None)
    @given(n=st.integers(1, 3), dims=st.tuples(*[st.integers(1, 4)] * 4), seed=st.integers(0, 999))
    def test_round_trip_property(self, n, dims, seed):
        rng = np.random.default_rng(seed)
        arrays = [(rng.standard_normal(dims) + 1j * rng.standard_normal(dims)).astype(np.complex64) for _ in range(n)]
        blob = encode_dataset(arrays)
        back = decode_dataset(blob)
        assert all(np.array_equal(a, b.values) for a, b in zip(arrays, back))
        assert encode_dataset(back) == blob

    def test_non_contiguous_input(self):
        base = np.arange(64, dtype=np.complex128).reshape(2, 2, 2, 2, 4)[..., ::2]
        frames = [ChannelGrid(0, base[0]), ChannelGrid(1, base[1])]
        back = decode_dataset(encode_dataset(frames))
        assert np.array_equal(back[1].values, base[1])


class TestDatasetErrors:
    def setup_method(self):
        self.blob = encode_dataset(generate_frames(ChannelModelConfig(n_sc=4, n_s=4, n_r=1, n_t=1), 2))

    def test_bad_magic(self):
        with pytest.raises(BadMagic):
            decode_dataset(b"XSID" + self.blob[4:])

    @pytest.mark.parametrize("cut", [0, 10, 31, 40])
    def test_truncated(self, cut):
        with pytest.raises(Truncated):
            decode_dataset(self.blob[:cut])

    def test_version(self):
        with pytest.raises(VersionMismatch):
            decode_dataset(self.blob[:4] + struct.pack("<I", 2) + self.blob[8:])

    def test_trailing_bytes(self):
        with pytest.raises(FormatError):
            decode_dataset(self.blob + b"\0")

    def test_encode_validation(self):
        with pytest.raises(ValueError):
            encode_dataset([])
        with pytest.raises(ValueError, match="mixed"):
            encode_dataset([np.zeros((2, 2, 1, 1)), np.zeros((2, 3, 1, 1))])
        with pytest.raises(ValueError):
            encode_dataset([np.zeros((2, 2))])

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            read_dataset(tmp_path / "nope.csid")


class TestCheckpoint:
    @pytest.mark.parametrize("arch", ["srcnn", "edsr"])
    def test_round_trip(self, arch, tmp_path):
        ck = small_checkpoint(arch)
        write_checkpoint(ck, tmp_path / "m.csck")
        back = read_checkpoint(tmp_path / "m.csck")
        assert back.arch == arch and back.spec == ck.spec and back.meta == ck.meta
        assert back.stats.scale == 2.25
        assert list(back.params) == list(ck.params)
        assert all(np.array_equal(back.params[k], ck.params[k]) for k in ck.params)
        assert encode_checkpoint(back) == encode_checkpoint(ck)

    def test_reloaded_inference_identical(self):
        ck = small_checkpoint("edsr")
        x = np.random.default_rng(3).standard_normal((2, 2, 4, 4)).astype(np.float32)
        assert np.array_equal(decode_checkpoint(encode_checkpoint(ck)).build().predict(x), ck.build().predict(x))

    def test_bad_magic(self):
        with pytest.raises(BadMagic):
            decode_checkpoint(b"CSID" + encode_checkpoint(small_checkpoint())[4:])

    def test_version(self):
        blob = encode_checkpoint(small_checkpoint())
        with pytest.raises(VersionMismatch):
            decode_checkpoint(blob[:4] + struct.pack("<I", 9) + blob[8:])

    def test_unknown_architecture_id(self):
        blob = encode_checkpoint(small_checkpoint())
        with pytest.raises(UnknownArchitecture):
            decode_checkpoint(blob[:8] + struct.pack("<I", 7) + blob[12:])

    def test_tensor_count_mismatch(self):
        blob = encode_checkpoint(small_checkpoint())
        (doc_len,) = struct.unpack_from("<I", blob, 12)
        at = 16 + doc_len + 8
        (count,) = struct.unpack_from("<I", blob, at)
        forged = blob[:at] + struct.pack("<I", count - 1) + blob[at + 4:]
        with pytest.raises(TensorMismatch, match="tensors"):
            decode_checkpoint(forged)

    def test_tensor_shape_mismatch(self):
        ck = small_checkpoint()
        ck.params["conv1.weight"] = np.zeros((4, 2, 9, 8), np.float32)
        with pytest.raises(TensorMismatch, match="shape"):
            decode_checkpoint(encode_checkpoint(ck))

    @pytest.mark.parametrize("cut", [3, 10, 20, -1])
    def test_truncated(self, cut):
        blob = encode_checkpoint(small_checkpoint())
        with pytest.raises(Truncated):
            decode_checkpoint(blob[:cut])

    def test_trailing_bytes(self):
        with pytest.raises(FormatError):
            decode_checkpoint(encode_checkpoint(small_checkpoint()) + b"\0\0")
