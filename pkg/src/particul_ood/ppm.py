"""Binary portable pixmap (P6, 8-bit) reading and writing.

The dependency-free interchange format for dataset images and rendered
saliency overlays; quantization is round(value * 255).
"""

import numpy as np

from .errors import ArchiveFormatError


def write_ppm(path, image):
    """Write a float [0, 1] (H, W, 1|3) image as an 8-bit P6 file."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ArchiveFormatError(f"image must be (H, W, 1|3), got {img.shape}")
    if img.shape[2] == 1:
        img = np.repeat(img, 3, axis=2)
    data = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w, _ = data.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def read_ppm(path):
    """Read an 8-bit P6 file into a float64 (H, W, 3) image in [0, 1]."""
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P6"):
        raise ArchiveFormatError("not a P6 pixmap", offset=0)
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ArchiveFormatError("truncated header", offset=start)
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise ArchiveFormatError(f"unsupported maxval {maxval}", offset=2)
    need = w * h * 3
    if len(data) - pos < need:
        raise ArchiveFormatError("truncated pixel data", offset=pos)
    pixels = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos)
    return pixels.reshape(h, w, 3).astype(np.float64) / 255.0
