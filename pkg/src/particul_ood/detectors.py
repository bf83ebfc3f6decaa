"""Unsupervised pattern detectors on frozen feature maps.

Each detector is a 1x1xD kernel trained so that it correlates strongly with
exactly one location per feature map. The loss per map combines:

  locality  L_l = (1/p) * sum_i (1 - max_hw box3(softmax(A_i)))
  unicity   L_u = max(0, max_hw sum_i box3(softmax(A_i)) - 1)

with A_i the correlation map of kernel i. Locality rewards a single dominant
activation peak; unicity penalizes two detectors stacking probability mass on
the same 3x3 neighborhood. Class-based banks train one kernel group per class
on that class's samples only; groups share no state, so removing one class
cannot change another class's kernels.
"""

import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import as_feature_map
from .errors import ArchiveFormatError, DatasetError, DimensionError

_PBNK_MAGIC = b"PBNK"
_PBNK_VERSION = 1
_MODES = ("vanilla", "class_based")

# RMSprop constants; learning rate and weight decay come from the config.
_RMS_ALPHA = 0.9
_RMS_EPS = 1e-8


@dataclass
class DetectorBank:
    mode: str
    kernels: np.ndarray  # (N, p, D); N = 1 in vanilla mode

    def __post_init__(self):
        self.kernels = np.ascontiguousarray(self.kernels, dtype=np.float64)
        if self.mode not in _MODES:
            raise DimensionError(f"unknown mode {self.mode!r}")
        if self.kernels.ndim != 3:
            raise DimensionError("kernels must be (N, p, D)")
        if self.mode == "vanilla" and self.kernels.shape[0] != 1:
            raise DimensionError("vanilla bank must have N = 1")
        if not np.isfinite(self.kernels).all():
            raise DimensionError("kernels must be finite")

    @property
    def n_classes(self):
        return self.kernels.shape[0]

    @property
    def detectors_per_class(self):
        return self.kernels.shape[1]

    @property
    def depth(self):
        return self.kernels.shape[2]


@dataclass
class DetectorTrainConfig:
    epochs: int = 30
    learning_rate: float = 1e-4
    weight_decay: float = 1e-5
    unicity_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.learning_rate <= 0 or self.weight_decay < 0:
            raise DatasetError("invalid detector training config")
        if self.unicity_weight < 0:
            raise DatasetError("unicity weight must be >= 0")


def _check_kernels(fmap, kernels):
    kernels = np.ascontiguousarray(kernels, dtype=np.float64)
    if kernels.ndim == 1:
        kernels = kernels[None, :]
    if kernels.ndim != 2 or kernels.shape[1] != fmap.shape[2]:
        raise DimensionError(
            f"kernels {kernels.shape} do not match feature depth {fmap.shape[2]}"
        )
    return kernels


def detection_score(fmap, kernel):
    """Max over locations of the correlation between kernel and feature map."""
    fmap = as_feature_map(fmap)
    kernels = _check_kernels(fmap, kernel)
    return float(_kernels.correlate_maps(fmap, kernels)[0].max())


def _smoothed_masses(fmap, kernels):
    """box3(softmax(A_i)) for every kernel, shape (p, H, W)."""
    maps = _kernels.correlate_maps(fmap, kernels)
    flat = maps.reshape(maps.shape[0], -1)
    flat = flat - flat.max(axis=1, keepdims=True)
    e = np.exp(flat)
    soft = (e / e.sum(axis=1, keepdims=True)).reshape(maps.shape)
    return _kernels.box3_sum(np.ascontiguousarray(soft)), soft


def locality_loss(fmap, kernels):
    fmap = as_feature_map(fmap)
    kernels = _check_kernels(fmap, kernels)
    masses, _ = _smoothed_masses(fmap, kernels)
    peaks = masses.reshape(masses.shape[0], -1).max(axis=1)
    return float(np.mean(1.0 - peaks))


def unicity_loss(fmap, kernels):
    fmap = as_feature_map(fmap)
    kernels = _check_kernels(fmap, kernels)
    masses, _ = _smoothed_masses(fmap, kernels)
    stacked = masses.sum(axis=0)
    return float(max(0.0, stacked.max() - 1.0))


def detector_loss(fmap, kernels, unicity_weight=1.0):
    return locality_loss(fmap, kernels) + unicity_weight * unicity_loss(fmap, kernels)


def loss_gradient(fmap, kernels, unicity_weight=1.0):
    """Analytic gradient of detector_loss w.r.t. each kernel, shape (p, D).

    Max locations take the first-in-row-major subgradient; the unicity hinge
    contributes nothing at exactly max mass = 1.
    """
    fmap = as_feature_map(fmap)
    kernels = _check_kernels(fmap, kernels)
    p = kernels.shape[0]
    masses, soft = _smoothed_masses(fmap, kernels)
    h, w = masses.shape[1], masses.shape[2]

    g_mass = np.zeros_like(masses)
    flat = masses.reshape(p, -1)
    peak_idx = np.argmax(flat, axis=1)
    g_mass.reshape(p, -1)[np.arange(p), peak_idx] -= 1.0 / p

    stacked = masses.sum(axis=0)
    top = int(np.argmax(stacked))
    if stacked.reshape(-1)[top] > 1.0:
        g_mass.reshape(p, -1)[:, top] += unicity_weight

    # box3 is symmetric with zero padding, so it is its own adjoint.
    g_soft = _kernels.box3_sum(np.ascontiguousarray(g_mass))
    # Softmax Jacobian: dA = S * (g - <g, S>).
    inner = (g_soft.reshape(p, -1) * soft.reshape(p, -1)).sum(axis=1)
    g_maps = soft * (g_soft - inner[:, None, None])
    return np.einsum("phw,hwd->pd", g_maps, fmap)


def _init_kernels(p, depth, seed):
    rng = np.random.default_rng([seed, 0])
    return rng.normal(0.0, 1.0 / np.sqrt(depth), size=(p, depth))


def _train_kernel_group(fmaps, p, config):
    """Train one group of p kernels on a list of feature maps.

    Kernel init and per-epoch sample order depend only on the seed and the
    sample count, so groups trained on different subsets are independent.
    """
    depth = fmaps[0].shape[2]
    kernels = _init_kernels(p, depth, config.seed)
    cache = np.zeros_like(kernels)
    for epoch in range(config.epochs):
        order = np.random.default_rng([config.seed, 1, epoch]).permutation(len(fmaps))
        for idx in order:
            g = loss_gradient(fmaps[idx], kernels, config.unicity_weight)
            g += config.weight_decay * kernels
            cache *= _RMS_ALPHA
            cache += (1.0 - _RMS_ALPHA) * g * g
            kernels -= config.learning_rate * g / (np.sqrt(cache) + _RMS_EPS)
    return kernels


def train_vanilla(fmaps, p, config=None):
    """Train p global detectors over the whole feature set, labels ignored."""
    config = config or DetectorTrainConfig()
    if len(fmaps) == 0:
        raise DatasetError("empty feature set")
    if p < 1:
        raise DatasetError("need p >= 1 detectors")
    fmaps = [as_feature_map(f) for f in fmaps]
    kernels = _train_kernel_group(fmaps, p, config)
    return DetectorBank(mode="vanilla", kernels=kernels[None, :, :])


def train_class_based(fmaps, labels, n_classes, p, config=None):
    """Train p detectors per class, each class on its own samples only."""
    config = config or DetectorTrainConfig()
    if len(fmaps) == 0:
        raise DatasetError("empty feature set")
    if len(labels) != len(fmaps):
        raise DatasetError("features and labels differ in length")
    if p < 1:
        raise DatasetError("need p >= 1 detectors")
    labels = [int(l) for l in labels]
    if any(l < 0 or l >= n_classes for l in labels):
        raise DatasetError("label out of range")
    fmaps = [as_feature_map(f) for f in fmaps]
    groups = []
    for c in range(n_classes):
        subset = [f for f, l in zip(fmaps, labels) if l == c]
        if not subset:
            raise DatasetError(f"class {c} has no samples")
        groups.append(_train_kernel_group(subset, p, config))
    return DetectorBank(mode="class_based", kernels=np.stack(groups))


def save_bank(bank, path):
    """Bank file: magic PBNK, version byte, mode byte, u32 N/p/D, f64 kernels."""
    with open(path, "wb") as f:
        f.write(_PBNK_MAGIC)
        f.write(struct.pack("<BB", _PBNK_VERSION, _MODES.index(bank.mode)))
        n, p, d = bank.kernels.shape
        f.write(struct.pack("<3I", n, p, d))
        f.write(np.ascontiguousarray(bank.kernels, dtype="<f8").tobytes())


def load_bank(path):
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != _PBNK_MAGIC:
        raise ArchiveFormatError("bad magic", offset=0)
    version, mode_byte = struct.unpack_from("<BB", data, 4)
    if version != _PBNK_VERSION:
        raise ArchiveFormatError(f"unsupported version {version}", offset=4)
    if mode_byte >= len(_MODES):
        raise ArchiveFormatError(f"unknown mode byte {mode_byte}", offset=5)
    n, p, d = struct.unpack_from("<3I", data, 6)
    expect = 18 + 8 * n * p * d
    if len(data) != expect:
        raise ArchiveFormatError("truncated kernel data", offset=min(len(data), expect))
    kernels = np.frombuffer(data, dtype="<f8", offset=18).reshape(n, p, d)
    return DetectorBank(mode=_MODES[mode_byte], kernels=kernels.copy())
