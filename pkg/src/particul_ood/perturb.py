"""Parameterized image perturbations and confidence-vs-magnitude sweeps.

Kinds and magnitudes:
  gaussian_blur   std in pixels, separable kernel of radius ceil(3*std),
                  reflect padding; 0 is the identity
  brightness      multiplicative factor <= 1; 1 is the identity
  gaussian_noise  i.i.d. additive noise std, seeded, clamped to [0, 1];
                  0 is the identity
  rotation        degrees about the image center, bilinear interpolation,
                  out-of-frame filled with mid-gray 0.5; 0 is the identity

Identity magnitudes return the input bitwise. Default grids start at the
identity and end at a magnitude that visibly destroys the image.
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .core import as_image
from .errors import DatasetError, DimensionError, MagnitudeError

KINDS = ("gaussian_blur", "brightness", "gaussian_noise", "rotation")

IDENTITY_MAGNITUDE = {
    "gaussian_blur": 0.0,
    "brightness": 1.0,
    "gaussian_noise": 0.0,
    "rotation": 0.0,
}

# Hard magnitude range per kind; grids must stay inside.
MAGNITUDE_RANGE = {
    "gaussian_blur": (0.0, 8.0),
    "brightness": (0.1, 1.0),
    "gaussian_noise": (0.0, 0.4),
    "rotation": (0.0, 180.0),
}

DEFAULT_GRIDS = {
    "gaussian_blur": (0.0, 0.5, 1.0, 2.0, 4.0, 8.0),
    "brightness": (1.0, 0.8, 0.6, 0.4, 0.2, 0.1),
    "gaussian_noise": (0.0, 0.05, 0.1, 0.2, 0.3, 0.4),
    "rotation": (0.0, 15.0, 30.0, 60.0, 90.0, 135.0, 180.0),
}


@dataclass(frozen=True)
class Perturbation:
    kind: str
    magnitude: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MagnitudeError(f"unknown perturbation kind {self.kind!r}")
        lo, hi = MAGNITUDE_RANGE[self.kind]
        if not lo <= self.magnitude <= hi:
            raise MagnitudeError(
                f"{self.kind} magnitude {self.magnitude} outside [{lo}, {hi}]"
            )


@dataclass(frozen=True)
class MagnitudeGrid:
    """Magnitudes ordered by increasing perturbation strength, identity first."""

    kind: str
    values: tuple

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MagnitudeError(f"unknown perturbation kind {self.kind!r}")
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) < 3:
            raise MagnitudeError("grid needs at least 3 magnitudes")
        if vals[0] != IDENTITY_MAGNITUDE[self.kind]:
            raise MagnitudeError("grid must start at the identity magnitude")
        diffs = np.diff(vals)
        increasing = self.kind != "brightness"
        if increasing and not (diffs > 0).all():
            raise MagnitudeError("grid must strictly increase")
        if not increasing and not (diffs < 0).all():
            raise MagnitudeError("brightness grid must strictly decrease")
        lo, hi = MAGNITUDE_RANGE[self.kind]
        if min(vals) < lo or max(vals) > hi:
            raise MagnitudeError(f"grid leaves range [{lo}, {hi}]")

    def __len__(self):
        return len(self.values)


def default_grid(kind):
    return MagnitudeGrid(kind=kind, values=DEFAULT_GRIDS[kind])


def _blur(x, std):
    radius = int(np.ceil(3.0 * std))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (t / std) ** 2)
    kernel /= kernel.sum()
    out = correlate1d(x, kernel, axis=0, mode="reflect")
    out = correlate1d(out, kernel, axis=1, mode="reflect")
    return out


def _rotate(x, degrees):
    h, w, _ = x.shape
    theta = np.deg2rad(degrees)
    ci, cj = (h - 1) / 2.0, (w - 1) / 2.0
    ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    di, dj = ii - ci, jj - cj
    # Inverse map: rotate output coords back into the source frame.
    si = ci + np.cos(theta) * di + np.sin(theta) * dj
    sj = cj - np.sin(theta) * di + np.cos(theta) * dj
    i0 = np.floor(si).astype(int)
    j0 = np.floor(sj).astype(int)
    fi = si - i0
    fj = sj - j0
    out = np.zeros_like(x)
    for (oi, oj, wgt) in ((0, 0, (1 - fi) * (1 - fj)), (0, 1, (1 - fi) * fj),
                          (1, 0, fi * (1 - fj)), (1, 1, fi * fj)):
        pi = i0 + oi
        pj = j0 + oj
        valid = (pi >= 0) & (pi < h) & (pj >= 0) & (pj < w)
        sample = np.where(valid[:, :, None],
                          x[np.clip(pi, 0, h - 1), np.clip(pj, 0, w - 1)], 0.5)
        out += wgt[:, :, None] * sample
    return out


def apply(p, x):
    """Apply a perturbation to an image; the identity magnitude is exact."""
    x = as_image(x)
    if p.magnitude == IDENTITY_MAGNITUDE[p.kind]:
        return x.copy()
    if p.kind == "gaussian_blur":
        out = _blur(x, p.magnitude)
    elif p.kind == "brightness":
        out = x * p.magnitude
    elif p.kind == "gaussian_noise":
        rng = np.random.default_rng(p.seed)
        out = x + rng.normal(0.0, p.magnitude, size=x.shape)
    else:
        out = _rotate(x, p.magnitude)
    return np.clip(out, 0.0, 1.0)


def perturb_dataset(kind, magnitude, images, seed=0):
    """Apply one perturbation to every image; noise seeds derive per image."""
    out = []
    for i, x in enumerate(images):
        child = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        out.append(apply(Perturbation(kind, magnitude, seed=child), x))
    return out


def gamma(confidence, images, kind, magnitude, seed=0):
    """Mean confidence over the perturbed dataset."""
    if len(images) == 0:
        raise DatasetError("empty dataset")
    perturbed = perturb_dataset(kind, magnitude, images, seed=seed)
    return float(np.mean([confidence(x) for x in perturbed]))


def gamma_sweep(confidence, images, kind, grid, seed=0):
    """gamma at every grid magnitude, in grid order."""
    if grid.kind != kind:
        raise DimensionError(f"grid kind {grid.kind!r} != {kind!r}")
    return np.array([gamma(confidence, images, kind, lam, seed=seed)
                     for lam in grid.values])
