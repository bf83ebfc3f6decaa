import struct

import numpy as np
import pytest

from particul_ood.errors import ArchiveFormatError
from particul_ood.farc import read_farc, verify_farc, write_farc


def sample_records(n=4, n_logits=3, dims=(4, 4, 8), seed=0):
    rng = np.random.default_rng(seed)
    return [
        (i % 2,
         rng.normal(size=n_logits).astype(np.float32),
         rng.normal(size=dims).astype(np.float32))
        for i in range(n)
    ]


class TestRoundTrip:
    def test_bit_identical_f32(self, tmp_path):
        records = sample_records()
        path = tmp_path / "a.farc"
        write_farc(path, records)
        archive = read_farc(path)
        assert len(archive) == 4
        for (label, logits, fmap), got_label, got_logits, got_fmap in zip(
            records, archive.labels, archive.logits, archive.fmaps
        ):
            assert got_label == label
            assert got_logits.dtype == np.float32
            assert np.array_equal(got_logits.view(np.uint32),
                                  logits.view(np.uint32))
            assert np.array_equal(got_fmap.view(np.uint32), fmap.view(np.uint32))

    def test_rewrite_is_byte_identical(self, tmp_path):
        records = sample_records(seed=1)
        p1, p2 = tmp_path / "a.farc", tmp_path / "b.farc"
        write_farc(p1, records)
        archive = read_farc(p1)
        write_farc(p2, list(zip(archive.labels, archive.logits, archive.fmaps)))
        assert p1.read_bytes() == p2.read_bytes()


class TestVerify:
    def test_summary(self, tmp_path):
        path = tmp_path / "a.farc"
        write_farc(path, sample_records(n=6))
        summary = verify_farc(path)
        assert summary["records"] == 6
        assert summary["n_logits"] == 3
        assert summary["feature_dims"] == [[4, 4, 8]]
        assert summary["per_class"] == {"0": 3, "1": 3}

    def test_bad_magic_offset_zero(self, tmp_path):
        path = tmp_path / "bad.farc"
        path.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(ArchiveFormatError) as err:
            verify_farc(path)
        assert err.value.offset == 0

    def test_bad_version(self, tmp_path):
        path = tmp_path / "bad.farc"
        path.write_bytes(b"FARC" + struct.pack("<BII", 9, 0, 0))
        with pytest.raises(ArchiveFormatError) as err:
            verify_farc(path)
        assert err.value.offset == 4

    def test_truncated_features_reports_offset(self, tmp_path):
        path = tmp_path / "a.farc"
        write_farc(path, sample_records(n=1, n_logits=2, dims=(2, 2, 2)))
        data = path.read_bytes()
        # Record starts at 13: label(4) + logits(8) + dims(12), features at 37.
        cut = 13 + 4 + 8 + 12 + 5
        path.write_bytes(data[:cut])
        with pytest.raises(ArchiveFormatError) as err:
            read_farc(path)
        assert "features in record 0" in str(err.value)
        assert err.value.offset == 13 + 4 + 8 + 12

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "a.farc"
        path.write_bytes(b"FARC\x01\x02")
        with pytest.raises(ArchiveFormatError) as err:
            read_farc(path)
        assert err.value.offset == 4

    def test_nan_feature_names_record(self, tmp_path):
        records = sample_records(n=3, n_logits=2, dims=(2, 2, 2))
        bad = records[1][2].copy()
        bad[1, 0, 1] = np.nan
        records[1] = (records[1][0], records[1][1], bad)
        path = tmp_path / "a.farc"
        write_farc(path, records)
        with pytest.raises(ArchiveFormatError) as err:
            read_farc(path)
        assert "record 1" in str(err.value)
        # Offset points at the violating float: flat index 5 of the block.
        rec0 = 4 + 8 + 12 + 4 * 8
        feat1 = 13 + rec0 + 4 + 8 + 12
        assert err.value.offset == feat1 + 4 * 5

    def test_trailing_bytes(self, tmp_path):
        path = tmp_path / "a.farc"
        write_farc(path, sample_records(n=1))
        data = path.read_bytes()
        path.write_bytes(data + b"\x00")
        with pytest.raises(ArchiveFormatError) as err:
            read_farc(path)
        assert err.value.offset == len(data)

    def test_zero_dims_rejected(self, tmp_path):
        path = tmp_path / "a.farc"
        buf = b"FARC" + struct.pack("<BII", 1, 1, 1)
        buf += struct.pack("<I", 0) + struct.pack("<f", 1.0)
        buf += struct.pack("<3I", 0, 2, 2)
        path.write_bytes(buf)
        with pytest.raises(ArchiveFormatError) as err:
            read_farc(path)
        assert "zero feature dimension" in str(err.value)
