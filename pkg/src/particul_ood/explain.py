"""SmoothGrad saliency for detector activations and visual pattern references.

A saliency map is the channel-summed absolute input gradient averaged over
seeded noisy copies of the image, normalized to max 1. Pattern references are
the top-k training images per detector ranked by detection score; the first
one serves as the visual reference for the pattern.
"""

from dataclasses import dataclass

import numpy as np

from .calibration import detector_confidence
from .classifier import forward, input_gradient
from .detectors import detection_score
from .errors import DatasetError
from .ppm import write_ppm

SMOOTHGRAD_SAMPLES = 16
SMOOTHGRAD_NOISE_STD = 0.1


@dataclass
class ReferenceEntry:
    image_index: int
    score: float
    confidence: float
    saliency: np.ndarray  # (H, W), max 1 unless all zero


@dataclass
class PatternReference:
    class_index: int
    detector_index: int
    entries: list  # ReferenceEntry, scores descending


def smoothgrad(model, x, selector, n=SMOOTHGRAD_SAMPLES,
               noise_std=SMOOTHGRAD_NOISE_STD, seed=0):
    """Noise-averaged absolute input gradient, channel-summed, max-normalized."""
    if n < 1:
        raise DatasetError("need n >= 1 samples")
    if noise_std < 0:
        raise DatasetError("noise_std must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    acc = np.zeros(x.shape[:2])
    for j in range(n):
        if noise_std > 0:
            rng = np.random.default_rng([seed, j])
            noisy = x + rng.normal(0.0, noise_std, size=x.shape)
        else:
            noisy = x
        g = input_gradient(model, noisy, selector)
        acc += np.abs(g).sum(axis=2)
    acc /= n
    peak = acc.max()
    if peak > 0:
        acc /= peak
    return acc


def pattern_references(bank, cal, model, images, k, n=SMOOTHGRAD_SAMPLES,
                       noise_std=SMOOTHGRAD_NOISE_STD, seed=0):
    """Top-k training images per detector, with saliency and confidence."""
    if k < 1 or k > len(images):
        raise DatasetError(f"k must be in [1, {len(images)}]")
    fmaps = [forward(model, x)[0] for x in images]
    refs = []
    for c in range(bank.n_classes):
        for i in range(bank.detectors_per_class):
            kernel = bank.kernels[c, i]
            scores = [detection_score(f, kernel) for f in fmaps]
            # Descending score, ties broken by image index.
            ranked = sorted(range(len(images)), key=lambda j: (-scores[j], j))
            entries = []
            for j in ranked[:k]:
                entries.append(
                    ReferenceEntry(
                        image_index=j,
                        score=scores[j],
                        confidence=detector_confidence(
                            scores[j], cal.mu[c, i], cal.sigma[c, i]
                        ),
                        saliency=smoothgrad(model, images[j], kernel, n=n,
                                            noise_std=noise_std, seed=seed),
                    )
                )
            refs.append(PatternReference(class_index=c, detector_index=i,
                                         entries=entries))
    return refs


def render_saliency(x, saliency, path):
    """Alpha-blend the saliency as red heat over the image and write a P6 file."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[2] == 1:
        x = np.repeat(x, 3, axis=2)
    alpha = np.asarray(saliency, dtype=np.float64)[:, :, None]
    heat = np.zeros_like(x)
    heat[:, :, 0] = 1.0
    out = (1.0 - alpha) * x + alpha * heat
    write_ppm(path, out)
    return out
