"""Dense array conventions and the spatial primitives everything else uses.

Three array roles, all float64 and row-major:
  image       (H, W, C) with C in {1, 3}, finite intensities in [0, 1]
  feature map (H, W, D) finite reals, the last-conv output of a classifier
  map2        (H, W) finite reals, an activation or probability surface
"""

import numpy as np

from . import _kernels
from .errors import DimensionError


def as_image(x):
    """Validate and return x as a float64 (H, W, C) image in [0, 1]."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 3 or a.shape[2] not in (1, 3):
        raise DimensionError(f"image must be (H, W, 1|3), got {a.shape}")
    if a.size == 0:
        raise DimensionError("image is empty")
    if not np.isfinite(a).all():
        raise DimensionError("image has non-finite values")
    if a.min() < 0.0 or a.max() > 1.0:
        raise DimensionError("image intensities must lie in [0, 1]")
    return a


def as_feature_map(x):
    """Validate and return x as a float64 (H, W, D) feature map."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 3 or a.size == 0:
        raise DimensionError(f"feature map must be non-empty (H, W, D), got {a.shape}")
    if not np.isfinite(a).all():
        raise DimensionError("feature map has non-finite values")
    return a


def as_map2(x):
    """Validate and return x as a float64 (H, W) map."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise DimensionError(f"map must be non-empty (H, W), got {a.shape}")
    if not np.isfinite(a).all():
        raise DimensionError("map has non-finite values")
    return a


def correlate_1x1(fmap, kernel):
    """Correlation map out[h, w] = sum_d fmap[h, w, d] * kernel[d]."""
    fmap = as_feature_map(fmap)
    kernel = np.ascontiguousarray(kernel, dtype=np.float64)
    if kernel.ndim != 1 or kernel.shape[0] != fmap.shape[2]:
        raise DimensionError(
            f"kernel length {kernel.shape} does not match depth {fmap.shape[2]}"
        )
    return _kernels.correlate_maps(fmap, kernel[None, :])[0]


def spatial_softmax(m):
    """Softmax over all cells, stabilized by max subtraction; sums to 1."""
    m = as_map2(m)
    e = np.exp(m - m.max())
    return e / e.sum()


def smooth_3x3(m):
    """Sum over each cell's 3x3 neighborhood, zero-padded at the borders."""
    m = as_map2(m)
    return _kernels.box3_sum(m[None, :, :])[0]


def argmax2(m):
    """Row-major location of the maximum; ties go to smallest (h, then w)."""
    m = as_map2(m)
    idx = int(np.argmax(m))
    return idx // m.shape[1], idx % m.shape[1]
