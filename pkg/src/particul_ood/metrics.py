"""Threshold-free separability metrics and rank correlation.

Conventions, fixed so independent oracles can match bit-for-bit:
  - IoD samples are the positive class; a sample is classified positive
    when its score >= threshold; thresholds sweep the observed scores
    descending with ties grouped.
  - AUROC integrates the tie-grouped ROC curve trapezoidally (equal to the
    Mann-Whitney pairwise statistic with half credit for ties).
  - AUPR uses step-wise summation sum_k (R_k - R_{k-1}) * P_k, never
    trapezoidal interpolation.
  - FPR at target TPR thresholds only at observed score values: the largest
    t with TPR(>= t) >= target.
  - Spearman is the Pearson correlation of average ranks; degenerate input
    raises instead of silently returning 0.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DatasetError, DegenerateInput
from .perturb import gamma_sweep


@dataclass
class EvalReport:
    auroc: float
    aupr: float
    fpr80: float

    def as_dict(self):
        return {"auroc": self.auroc, "aupr": self.aupr, "fpr80": self.fpr80}


def _check_pair(iod_scores, ood_scores):
    iod = np.asarray(iod_scores, dtype=np.float64)
    ood = np.asarray(ood_scores, dtype=np.float64)
    if iod.size == 0 or ood.size == 0:
        raise DatasetError("both score lists must be non-empty")
    return iod, ood


def _sweep_counts(iod, ood):
    """Cumulative (tp, fp) after each tie group of the descending sweep."""
    scores = np.concatenate([iod, ood])
    positive = np.concatenate([np.ones(iod.size, bool), np.zeros(ood.size, bool)])
    order = np.argsort(-scores, kind="stable")
    scores = scores[order]
    positive = positive[order]
    # Last index of each tie group.
    boundary = np.nonzero(np.diff(scores))[0]
    ends = np.append(boundary, scores.size - 1)
    tp = np.cumsum(positive)[ends]
    fp = np.cumsum(~positive)[ends]
    return tp, fp, scores[ends]


def auroc(iod_scores, ood_scores):
    """Area under the ROC curve via tie-grouped trapezoidal integration."""
    iod, ood = _check_pair(iod_scores, ood_scores)
    tp, fp, _ = _sweep_counts(iod, ood)
    tpr = np.concatenate([[0.0], tp / iod.size])
    fpr = np.concatenate([[0.0], fp / ood.size])
    return float(np.trapezoid(tpr, fpr))


def aupr(iod_scores, ood_scores):
    """Area under the precision-recall curve, step-wise summation."""
    iod, ood = _check_pair(iod_scores, ood_scores)
    tp, fp, _ = _sweep_counts(iod, ood)
    recall = tp / iod.size
    precision = tp / (tp + fp)
    dr = np.diff(np.concatenate([[0.0], recall]))
    return float((dr * precision).sum())


def fpr_at_tpr(iod_scores, ood_scores, target_tpr=0.8):
    """FPR at the largest observed threshold whose TPR reaches the target."""
    if not 0.0 < target_tpr <= 1.0:
        raise DatasetError("target TPR must be in (0, 1]")
    iod, ood = _check_pair(iod_scores, ood_scores)
    tp, fp, thresholds = _sweep_counts(iod, ood)
    tpr = tp / iod.size
    hit = np.nonzero(tpr >= target_tpr)[0]
    # Thresholds descend, so the first hit is the largest qualifying value.
    k = hit[0]
    return float(fp[k] / ood.size)


def _average_ranks(values):
    """Rank from 1, ties averaged."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs, ys):
    """Spearman rank correlation with average ranks for ties."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise DegenerateInput("inputs must be equal-length vectors")
    if xs.size < 3:
        raise DegenerateInput("need at least 3 points")
    if (xs == xs[0]).all() or (ys == ys[0]).all():
        raise DegenerateInput("constant input has no rank correlation")
    rx = _average_ranks(xs)
    ry = _average_ranks(ys)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    return float((dx * dy).sum() / np.sqrt((dx * dx).sum() * (dy * dy).sum()))


def cross_dataset_eval(confidence, iod_samples, ood_samples):
    """Score both sample sets with a confidence callable; all three metrics."""
    if len(iod_samples) == 0 or len(ood_samples) == 0:
        raise DatasetError("both sample sets must be non-empty")
    iod = [confidence(s) for s in iod_samples]
    ood = [confidence(s) for s in ood_samples]
    return EvalReport(auroc=auroc(iod, ood), aupr=aupr(iod, ood),
                      fpr80=fpr_at_tpr(iod, ood))


def perturbation_eval(confidence, images, kind, grid, seed=0):
    """Confidence sweep over a magnitude grid plus its Spearman correlation.

    Returns (gammas, r_s); r_s is None when the sweep is constant (undefined
    correlation, deliberately distinct from 0).
    """
    if len(grid) < 3:
        raise DegenerateInput("grid must have at least 3 magnitudes")
    gammas = gamma_sweep(confidence, images, kind, grid, seed=seed)
    try:
        r_s = spearman(np.arange(len(gammas), dtype=np.float64), gammas)
    except DegenerateInput:
        r_s = None
    return gammas, r_s
