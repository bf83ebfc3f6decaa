"""FARC feature archives: per-image feature maps and logits.

Layout, all little-endian:
  magic "FARC" | u8 version (1) | u32 record count | u32 N (logit count)
  per record: u32 label | N x f32 logits | u32 H | u32 W | u32 D
              | H*W*D x f32 features, row-major (h, w, d)

Values stay f32 end to end so archives written by external exporters round
trip bit-identically. Validation errors carry the byte offset where the
violated field begins (for truncation and finiteness, the first bad byte).
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ArchiveFormatError

MAGIC = b"FARC"
VERSION = 1


@dataclass
class FarcArchive:
    labels: list    # int per record
    logits: list    # (N,) float32 per record
    fmaps: list     # (H, W, D) float32 per record

    def __len__(self):
        return len(self.labels)


def write_farc(path, records):
    """records: iterable of (label, logits, fmap); arrays stored as f32."""
    records = list(records)
    if not records:
        raise ArchiveFormatError("refusing to write an empty archive")
    n_logits = len(np.asarray(records[0][1]).reshape(-1))
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<BII", VERSION, len(records), n_logits))
        for label, logits, fmap in records:
            logits = np.ascontiguousarray(logits, dtype="<f4").reshape(-1)
            fmap = np.ascontiguousarray(fmap, dtype="<f4")
            if logits.size != n_logits:
                raise ArchiveFormatError("inconsistent logit count across records")
            if fmap.ndim != 3:
                raise ArchiveFormatError("feature map must be (H, W, D)")
            f.write(struct.pack("<I", int(label)))
            f.write(logits.tobytes())
            h, w, d = fmap.shape
            f.write(struct.pack("<3I", h, w, d))
            f.write(fmap.tobytes())


def _scan(data, check_finite):
    if data[:4] != MAGIC:
        raise ArchiveFormatError("bad magic", offset=0)
    if len(data) < 13:
        raise ArchiveFormatError("truncated header", offset=4)
    version, count, n_logits = struct.unpack_from("<BII", data, 4)
    if version != VERSION:
        raise ArchiveFormatError(f"unsupported version {version}", offset=4)
    off = 13
    labels, logit_arrays, fmaps = [], [], []

    def need(nbytes, what, rec):
        if off + nbytes > len(data):
            raise ArchiveFormatError(
                f"truncated {what} in record {rec}", offset=off
            )

    for rec in range(count):
        need(4, "label", rec)
        (label,) = struct.unpack_from("<I", data, off)
        off += 4
        need(4 * n_logits, "logits", rec)
        logits = np.frombuffer(data, dtype="<f4", count=n_logits, offset=off)
        if check_finite and not np.isfinite(logits).all():
            bad = int(np.nonzero(~np.isfinite(logits))[0][0])
            raise ArchiveFormatError(
                f"non-finite logit in record {rec}", offset=off + 4 * bad
            )
        off += 4 * n_logits
        need(12, "feature dims", rec)
        h, w, d = struct.unpack_from("<3I", data, off)
        if h == 0 or w == 0 or d == 0:
            raise ArchiveFormatError(
                f"zero feature dimension in record {rec}", offset=off
            )
        off += 12
        n_feat = h * w * d
        need(4 * n_feat, "features", rec)
        feats = np.frombuffer(data, dtype="<f4", count=n_feat, offset=off)
        if check_finite and not np.isfinite(feats).all():
            bad = int(np.nonzero(~np.isfinite(feats))[0][0])
            raise ArchiveFormatError(
                f"non-finite feature in record {rec}", offset=off + 4 * bad
            )
        off += 4 * n_feat
        labels.append(int(label))
        logit_arrays.append(logits.copy())
        fmaps.append(feats.reshape(h, w, d).copy())
    if off != len(data):
        raise ArchiveFormatError("trailing bytes after last record", offset=off)
    return FarcArchive(labels=labels, logits=logit_arrays, fmaps=fmaps)


def read_farc(path):
    """Read and validate an archive; feature values keep their f32 bits."""
    with open(path, "rb") as f:
        data = f.read()
    return _scan(data, check_finite=True)


def verify_farc(path):
    """Validate a file and return a summary of its contents."""
    archive = read_farc(path)
    dims = sorted({f.shape for f in archive.fmaps})
    per_class = {}
    for label in archive.labels:
        per_class[label] = per_class.get(label, 0) + 1
    return {
        "records": len(archive),
        "n_logits": int(archive.logits[0].size),
        "feature_dims": [list(d) for d in dims],
        "per_class": {str(k): per_class[k] for k in sorted(per_class)},
    }
