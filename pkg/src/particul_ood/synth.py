"""Deterministic synthetic shape datasets.

Inside-distribution images form one homogeneous macro-family, mimicking a
fine-grained dataset: every image carries four textured anchor patches
(checkerboard, horizontal stripes, vertical stripes, dot grid) whose color
pairs average exactly to the mid-gray background; the vertical stripes'
hue pair encodes the class. The out-of-distribution family uses different
primitives entirely (triangles, diamonds, saltires) filled with diagonal
gratings the IoD set never shows. Images are 32x32 RGB, quantized to 8-bit
levels at generation time so a PPM round trip is bit-exact.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DatasetError

SIZE = 32
BG = 0.5

IOD_FAMILIES = ("checker-red-stripe", "checker-green-stripe", "checker-blue-stripe")
OOD_FAMILIES = ("triangle-diamond", "saltire-diamond", "twin-triangles")


@dataclass
class DatasetManifest:
    name: str
    class_names: list
    ids: list
    labels: list
    split: str   # "train" | "test"
    source: str  # "synthetic" | "image-dir" | "feature-archive"

    def __post_init__(self):
        if len(self.ids) != len(set(self.ids)):
            raise DatasetError("image ids must be unique")
        if len(self.ids) != len(self.labels):
            raise DatasetError("ids and labels differ in length")
        if any(l < 0 or l >= len(self.class_names) for l in self.labels):
            raise DatasetError("label out of range")
        if self.split not in ("train", "test"):
            raise DatasetError(f"bad split {self.split!r}")
        if self.source not in ("synthetic", "image-dir", "feature-archive"):
            raise DatasetError(f"bad source {self.source!r}")

    def to_json(self):
        return json.dumps(
            {
                "name": self.name,
                "class_names": list(self.class_names),
                "ids": list(self.ids),
                "labels": [int(l) for l in self.labels],
                "split": self.split,
                "source": self.source,
            },
            indent=2,
            sort_keys=True,
        ) + "\n"

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(
            name=d["name"],
            class_names=d["class_names"],
            ids=d["ids"],
            labels=d["labels"],
            split=d["split"],
            source=d["source"],
        )


def _grid():
    ii, jj = np.meshgrid(np.arange(SIZE), np.arange(SIZE), indexing="ij")
    return ii.astype(np.float64), jj.astype(np.float64)







def _triangle(ci, cj, size):
    ii, jj = _grid()
    return (ii >= ci - size) & (ii <= ci + size) & (
        np.abs(jj - cj) <= (ii - (ci - size)) / 2.0
    )


def _diamond(ci, cj, r):
    ii, jj = _grid()
    return np.abs(ii - ci) + np.abs(jj - cj) <= r


def _saltire(ci, cj, arm, thick):
    ii, jj = _grid()
    box = (np.abs(ii - ci) <= arm) & (np.abs(jj - cj) <= arm)
    d1 = np.abs((ii - ci) - (jj - cj)) <= thick
    d2 = np.abs((ii - ci) + (jj - cj)) <= thick
    return box & (d1 | d2)



def _paint_texture(img, mask, phase, color_a, color_b, rng, scale):
    """Two-color texture, contrast-scaled symmetrically about the background.

    The multiplicative factor is shared by all parts of one image: it keeps
    each pair's mean exactly at the background, spreads detection scores
    symmetrically, and never flips which part responds strongest.
    """
    shift = rng.uniform(-0.02, 0.02, size=3)
    a = np.clip(BG + scale * (np.asarray(color_a) - BG) + shift, 0.0, 1.0)
    b = np.clip(BG + scale * (np.asarray(color_b) - BG) + shift, 0.0, 1.0)
    img[mask & phase] = a
    img[mask & ~phase] = b


def _jitter_pos(rng, base_i, base_j, spread=2):
    return (base_i + rng.integers(-spread, spread + 1),
            base_j + rng.integers(-spread, spread + 1))


def _box(ci, cj, half_h, half_w):
    ii, jj = _grid()
    return (np.abs(ii - ci) <= half_h) & (np.abs(jj - cj) <= half_w)


def _stripes_h(ci, cj, half_h, half_w, period=4, width=2):
    ii, jj = _grid()
    return _box(ci, cj, half_h, half_w) & ((jj - cj) % period < width)


def _stripes_v(ci, cj, half_h, half_w, period=4, width=2):
    ii, jj = _grid()
    return _box(ci, cj, half_h, half_w) & ((ii - ci) % period < width)


def _checker(ci, cj, half, cell=2):
    ii, jj = _grid()
    phase = ((ii - ci) // cell + (jj - cj) // cell) % 2 == 0
    return _box(ci, cj, half, half) & phase


def _dots(ci, cj, half, period=4, width=2):
    ii, jj = _grid()
    return (_box(ci, cj, half, half)
            & ((ii - ci) % period < width) & ((jj - cj) % period < width))


def _diag_phase(period=4, width=2):
    ii, jj = _grid()
    return (ii + jj) % period < width


# Anchor texture color pairs; every pair averages to the background (the
# dots run at 25% duty, hence the asymmetric second color) so only
# contrast-sensitive channels respond.
ANCHOR_PAIRS = {
    "checker": ((0.9, 0.9, 0.9), (0.1, 0.1, 0.1)),
    "h_stripes": ((0.85, 0.55, 0.5), (0.15, 0.45, 0.5)),
    "dots": ((0.9, 0.1, 0.9), (0.37, 0.63, 0.37)),
}

# Color pair of the class-coding vertical-stripe anchor, one per class;
# every pair averages to the background.
CLASS_PAIRS = (
    ((0.9, 0.3, 0.3), (0.1, 0.7, 0.7)),
    ((0.3, 0.9, 0.3), (0.7, 0.1, 0.7)),
    ((0.3, 0.3, 0.9), (0.7, 0.7, 0.1)),
)


def _draw_iod(label, rng):
    img = np.full((SIZE, SIZE, 3), BG)
    # Four textured anchor patches, every texture mean-matched to the
    # mid-gray background. Blob-like channels see nothing, so only
    # contrast-sensitive features respond, and those decay monotonically
    # under blur. Three anchors are identical across classes; the vertical
    # stripes carry the class identity in their hue pair, leaving texture
    # geometry homogeneous across the whole set.
    scale = rng.uniform(0.75, 1.25)
    ai, aj = _jitter_pos(rng, 8, 8)
    _paint_texture(img, _box(ai, aj, 5, 5), _checker(ai, aj, 5),
                   *ANCHOR_PAIRS["checker"], rng, scale)
    bi, bj = _jitter_pos(rng, 26, 13)
    _paint_texture(img, _box(bi, bj, 2, 8), _stripes_h(bi, bj, 2, 8),
                   *ANCHOR_PAIRS["h_stripes"], rng, scale)
    pair = CLASS_PAIRS[label]
    ci, cj = _jitter_pos(rng, 10, 21)
    _paint_texture(img, _box(ci, cj, 5, 3), _stripes_v(ci, cj, 5, 3),
                   pair[0], pair[1], rng, scale)
    di, dj = _jitter_pos(rng, 24, 25)
    _paint_texture(img, _box(di, dj, 4, 4), _dots(di, dj, 4),
                   *ANCHOR_PAIRS["dots"], rng, scale)
    return img


def _paint_diag(img, mask, color_a, color_b, rng, scale):
    """Fill a shape with a mean-neutral diagonal grating."""
    _paint_texture(img, mask, _diag_phase(), color_a, color_b, rng, scale)


def _draw_ood(family, rng):
    img = np.full((SIZE, SIZE, 3), BG)
    # A different macro-family: big shapes filled with diagonal gratings,
    # mean-matched to the background like the IoD anchors but with an
    # orientation the IoD set never shows.
    scale = rng.uniform(0.75, 1.25)
    if family == 0:  # triangle-diamond
        ti, tj = _jitter_pos(rng, 10, 12)
        _paint_diag(img, _triangle(ti, tj, 8), (0.85, 0.85, 0.85),
                    (0.15, 0.15, 0.15), rng, scale)
        di, dj = _jitter_pos(rng, 23, 22)
        _paint_diag(img, _diamond(di, dj, 7), (0.8, 0.5, 0.2),
                    (0.2, 0.5, 0.8), rng, scale)
    elif family == 1:  # saltire-diamond
        si, sj = _jitter_pos(rng, 11, 11)
        _paint_diag(img, _saltire(si, sj, 8, 3), (0.75, 0.35, 0.65),
                    (0.25, 0.65, 0.35), rng, scale)
        di, dj = _jitter_pos(rng, 23, 21)
        _paint_diag(img, _diamond(di, dj, 6), (0.9, 0.7, 0.3),
                    (0.1, 0.3, 0.7), rng, scale)
    else:  # twin-triangles
        ai, aj = _jitter_pos(rng, 9, 9)
        bi, bj = _jitter_pos(rng, 20, 21)
        _paint_diag(img, _triangle(ai, aj, 7), (0.7, 0.4, 0.85),
                    (0.3, 0.6, 0.15), rng, scale)
        _paint_diag(img, _triangle(bi, bj, 7), (0.85, 0.7, 0.4),
                    (0.15, 0.3, 0.6), rng, scale)
    return img


def _quantize(img):
    return np.rint(np.clip(img, 0.0, 1.0) * 255.0) / 255.0


_SPLIT_CODE = {"train": 0, "test": 1}


def gen_synth(classes, per_class, seed, split="train"):
    """Seeded IoD shape dataset: (images, manifest)."""
    if classes < 2:
        raise ConfigError("need at least 2 classes")
    if classes > len(IOD_FAMILIES):
        raise ConfigError(f"at most {len(IOD_FAMILIES)} shape classes available")
    if per_class < 1:
        raise ConfigError("per_class must be >= 1")
    images, ids, labels = [], [], []
    for label in range(classes):
        for idx in range(per_class):
            rng = np.random.default_rng([seed, _SPLIT_CODE[split], label, idx])
            images.append(_quantize(_draw_iod(label, rng)))
            ids.append(f"iod-{split}-{label}-{idx:04d}")
            labels.append(label)
    manifest = DatasetManifest(
        name="synthetic-shapes",
        class_names=list(IOD_FAMILIES[:classes]),
        ids=ids,
        labels=labels,
        split=split,
        source="synthetic",
    )
    return images, manifest


def gen_synth_ood(count, seed, split="test"):
    """Seeded OoD dataset from a shape family disjoint from the IoD one."""
    if count < 1:
        raise ConfigError("count must be >= 1")
    images, ids, labels = [], [], []
    for idx in range(count):
        family = idx % len(OOD_FAMILIES)
        rng = np.random.default_rng([seed, 2 + _SPLIT_CODE[split], family, idx])
        images.append(_quantize(_draw_ood(family, rng)))
        ids.append(f"ood-{split}-{family}-{idx:04d}")
        labels.append(family)
    manifest = DatasetManifest(
        name="synthetic-shapes-ood",
        class_names=list(OOD_FAMILIES),
        ids=ids,
        labels=labels,
        split=split,
        source="synthetic",
    )
    return images, manifest
