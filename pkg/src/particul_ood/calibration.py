"""Logistic calibration of detection scores into [0, 1] confidences.

Training-set detection scores of each detector are modeled as a logistic
distribution; the fitted CDF turns a raw score into a confidence. Fitting is
method of moments: mu is the sample mean and sigma the unbiased sample
standard deviation scaled by sqrt(3)/pi (the std of a unit-scale logistic
is pi/sqrt(3)).
"""

import struct
from dataclasses import dataclass

import numpy as np

from .core import as_feature_map
from .detectors import detection_score
from .errors import (
    ArchiveFormatError,
    CalibrationError,
    DatasetError,
    DegenerateCalibration,
    DimensionError,
    ModeError,
)

_PCAL_MAGIC = b"PCAL"
_PCAL_VERSION = 1


@dataclass
class LogisticCalibration:
    mu: np.ndarray     # (N, p)
    sigma: np.ndarray  # (N, p), strictly positive

    def __post_init__(self):
        self.mu = np.ascontiguousarray(self.mu, dtype=np.float64)
        self.sigma = np.ascontiguousarray(self.sigma, dtype=np.float64)
        if self.mu.shape != self.sigma.shape or self.mu.ndim != 2:
            raise DimensionError("mu and sigma must both be (N, p)")
        if (self.sigma <= 0).any():
            raise CalibrationError("sigma must be positive")


def fit_logistic(scores):
    """Method-of-moments logistic fit; needs >= 2 distinct scores."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size < 2:
        raise DegenerateCalibration("need at least 2 scores")
    std = scores.std(ddof=1)
    if std == 0.0:
        raise DegenerateCalibration("scores are constant")
    return float(scores.mean()), float(std * np.sqrt(3.0) / np.pi)


def detector_confidence(score, mu, sigma):
    """Logistic CDF at the detection score: 1 / (1 + exp(-(H - mu) / sigma))."""
    if sigma <= 0:
        raise CalibrationError("sigma must be positive")
    z = (score - mu) / sigma
    if z >= 0:
        return 1.0 / (1.0 + np.exp(-z))
    e = np.exp(z)
    return float(e / (1.0 + e))


def _check_matching(bank, cal):
    if cal.mu.shape != bank.kernels.shape[:2]:
        raise DimensionError(
            f"calibration {cal.mu.shape} does not match bank {bank.kernels.shape[:2]}"
        )


def _class_mean_confidence(fmap, bank, cal, c):
    confs = [
        detector_confidence(detection_score(fmap, bank.kernels[c, i]),
                            cal.mu[c, i], cal.sigma[c, i])
        for i in range(bank.detectors_per_class)
    ]
    return float(np.mean(confs))


def vanilla_confidence(fmap, bank, cal):
    """Mean confidence of the p global detectors."""
    if bank.mode != "vanilla":
        raise ModeError("vanilla_confidence needs a vanilla bank")
    _check_matching(bank, cal)
    fmap = as_feature_map(fmap)
    return _class_mean_confidence(fmap, bank, cal, 0)


def class_confidence(fmap, logits, bank, cal):
    """Mean confidence of the detectors of the predicted class only."""
    if bank.mode != "class_based":
        raise ModeError("class_confidence needs a class-based bank")
    _check_matching(bank, cal)
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1 or logits.shape[0] != bank.n_classes:
        raise DimensionError(
            f"logits length {logits.shape} != class count {bank.n_classes}"
        )
    fmap = as_feature_map(fmap)
    z = int(np.argmax(logits))  # smallest index wins ties
    return _class_mean_confidence(fmap, bank, cal, z)


def calibrate_bank(bank, fmaps, labels=None):
    """Fit one (mu, sigma) pair per kernel over the relevant training subset.

    Vanilla banks fit on every feature map; class-based banks fit each class's
    detectors on that class's samples only.
    """
    if len(fmaps) == 0:
        raise DatasetError("empty feature set")
    fmaps = [as_feature_map(f) for f in fmaps]
    n, p, _ = bank.kernels.shape
    mu = np.zeros((n, p))
    sigma = np.zeros((n, p))
    for c in range(n):
        if bank.mode == "class_based":
            if labels is None:
                raise DatasetError("class-based calibration needs labels")
            subset = [f for f, l in zip(fmaps, labels) if int(l) == c]
            if not subset:
                raise DatasetError(f"class {c} has no calibration samples")
        else:
            subset = fmaps
        for i in range(p):
            scores = [detection_score(f, bank.kernels[c, i]) for f in subset]
            try:
                mu[c, i], sigma[c, i] = fit_logistic(scores)
            except DegenerateCalibration as exc:
                raise DegenerateCalibration(
                    f"detector (class {c}, index {i}): {exc}"
                ) from exc
    return LogisticCalibration(mu=mu, sigma=sigma)


def save_calibration(cal, path):
    """Calibration file: magic PCAL, version byte, u32 N/p, f64 (mu, sigma) pairs."""
    with open(path, "wb") as f:
        f.write(_PCAL_MAGIC)
        f.write(struct.pack("<B", _PCAL_VERSION))
        n, p = cal.mu.shape
        f.write(struct.pack("<2I", n, p))
        pairs = np.stack([cal.mu, cal.sigma], axis=-1)
        f.write(np.ascontiguousarray(pairs, dtype="<f8").tobytes())


def load_calibration(path):
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != _PCAL_MAGIC:
        raise ArchiveFormatError("bad magic", offset=0)
    if data[4] != _PCAL_VERSION:
        raise ArchiveFormatError(f"unsupported version {data[4]}", offset=4)
    n, p = struct.unpack_from("<2I", data, 5)
    expect = 13 + 16 * n * p
    if len(data) != expect:
        raise ArchiveFormatError("truncated pairs", offset=min(len(data), expect))
    pairs = np.frombuffer(data, dtype="<f8", offset=13).reshape(n, p, 2)
    return LogisticCalibration(mu=pairs[:, :, 0].copy(), sigma=pairs[:, :, 1].copy())
