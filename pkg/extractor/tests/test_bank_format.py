"""Container conformance for the bank writer.

Byte-level checks pin the header layout directly; interop checks load
the emitted file through the selection toolkit that consumes these
banks and require a clean validation report.
"""

import json
import struct

import numpy as np
import pytest

from fmextract.bankio import MAGIC, manifest_dict, write_feature_bank

csalkit_bank = pytest.importorskip("csalkit.bank")


def sample_features(n=5, d=3, seed=0):
    return np.random.default_rng(seed).normal(size=(n, d)).astype(np.float32)


class TestHeaderBytes:
    def test_header_fields_match_the_documented_layout(self, tmp_path):
        features = sample_features(7, 4)
        path = tmp_path / "bank.fb"
        write_feature_bank(path, features, [f"s{i}" for i in range(7)])
        blob = path.read_bytes()
        magic, version, n, d, norm, reserved = struct.unpack_from("<8sIIIB3s", blob, 0)
        assert magic == MAGIC
        assert version == 1
        assert (n, d) == (7, 4)
        assert norm == 0
        assert reserved == b"\x00\x00\x00"

    def test_payload_bytes_are_the_rowmajor_float32_matrix(self, tmp_path):
        features = sample_features(6, 2)
        path = tmp_path / "bank.fb"
        write_feature_bank(path, features, [f"s{i}" for i in range(6)])
        blob = path.read_bytes()
        assert blob[24 : 24 + 6 * 2 * 4] == features.tobytes()

    def test_trailer_is_lengthprefixed_compact_json(self, tmp_path):
        features = sample_features(2, 2)
        path = tmp_path / "bank.fb"
        write_feature_bank(path, features, ["x", "y"], group_ids=["g", "g"])
        blob = path.read_bytes()
        offset = 24 + 2 * 2 * 4
        (length,) = struct.unpack_from("<I", blob, offset)
        raw = blob[offset + 4 :]
        assert len(raw) == length
        trailer = json.loads(raw.decode("utf-8"))
        assert trailer["sample_ids"] == ["x", "y"]
        assert trailer["group_ids"] == ["g", "g"]


class TestInterop:
    def test_emitted_file_loads_and_validates_cleanly(self, tmp_path):
        features = sample_features(9, 5, seed=3)
        path = tmp_path / "bank.fb"
        manifest = manifest_dict("tiny-patch4", "2026-08-13T00:00:00+00:00", {"pooling": "mean_patch"})
        write_feature_bank(
            path,
            features,
            [f"img{i}.png" for i in range(9)],
            group_ids=["a"] * 4 + ["b"] * 5,
            manifest=manifest,
        )
        bank = csalkit_bank.load_feature_bank(path)
        assert csalkit_bank.validate(bank).issues == ()
        assert bank.features.tobytes() == features.tobytes()
        assert bank.sample_ids == tuple(f"img{i}.png" for i in range(9))
        assert bank.group_ids == ("a",) * 4 + ("b",) * 5
        assert bank.normalization == "raw"
        assert bank.manifest.source_model == "tiny-patch4"
        assert bank.manifest.extra["pooling"] == "mean_patch"


class TestWriterValidation:
    def test_rejects_mismatched_sample_ids(self, tmp_path):
        with pytest.raises(ValueError, match="sample_ids"):
            write_feature_bank(tmp_path / "x.fb", sample_features(3, 2), ["only-one"])

    def test_rejects_empty_matrices(self, tmp_path):
        empty = np.empty((0, 4), dtype=np.float32)
        with pytest.raises(ValueError, match="nonempty"):
            write_feature_bank(tmp_path / "x.fb", empty, [])

    def test_rejects_unknown_normalization(self, tmp_path):
        with pytest.raises(ValueError, match="normalization"):
            write_feature_bank(
                tmp_path / "x.fb",
                sample_features(2, 2),
                ["a", "b"],
                normalization="softmax",
            )
