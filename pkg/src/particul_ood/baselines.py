"""OoD-agnostic baseline confidence measures: MCP, energy, fNRD.

The energy score is a raw log-sum-exp, unbounded; ranking metrics consume it
directly. Where a [0, 1] value is needed (perturbation curves), pass it
through a logistic calibration fitted on training-set energy scores.
"""

import numpy as np

from .calibration import detector_confidence, fit_logistic
from .errors import DimensionError


def _check_logits(logits):
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1 or logits.size == 0:
        raise DimensionError("logits must be a non-empty vector")
    if not np.isfinite(logits).all():
        raise DimensionError("logits must be finite")
    return logits


def mcp_confidence(logits):
    """Maximum class probability: max(softmax(logits))."""
    logits = _check_logits(logits)
    e = np.exp(logits - logits.max())
    return float(e.max() / e.sum())


def energy_confidence(logits):
    """Energy score log(sum(exp(logits))); unbounded, for ranking only."""
    logits = _check_logits(logits)
    m = logits.max()
    return float(m + np.log(np.exp(logits - m).sum()))


def fnrd_confidence(activations, ranges):
    """1 minus the fraction of monitored neurons strictly outside their range."""
    activations = np.asarray(activations, dtype=np.float64)
    if activations.shape != ranges.mins.shape:
        raise DimensionError(
            f"activations {activations.shape} != monitored {ranges.mins.shape}"
        )
    outside = (activations < ranges.mins) | (activations > ranges.maxs)
    return 1.0 - outside.mean()


def fit_energy_calibration(train_logits):
    """Logistic (mu, sigma) over training-set energy scores."""
    scores = [energy_confidence(l) for l in train_logits]
    return fit_logistic(scores)


def calibrated_energy_confidence(logits, mu, sigma):
    """Energy score squashed to [0, 1] through the fitted logistic CDF."""
    return detector_confidence(energy_confidence(logits), mu, sigma)
