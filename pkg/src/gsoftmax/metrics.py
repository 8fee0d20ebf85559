"""Multi-label evaluation: average precision and precision/recall/F1.

AP ranks items by descending score (ties keep input order) and averages
the precision at every relevant rank.  Per-class ("C-") metrics average
per-class ratios; overall ("O-") metrics divide summed counts.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError, DomainError, ShapeError

__all__ = [
    "ConfusionCounts",
    "average_precision",
    "per_class_average_precision",
    "mean_average_precision",
    "prf_metrics",
    "binarize_predictions",
    "ranked_from_matrix",
]

METRIC_KEYS = ("C-P", "C-R", "C-F1", "O-P", "O-R", "O-F1")


def average_precision(ranked):
    """AP of a list of ``(score, relevant)`` pairs.

    Raises DegenerateError if nothing is relevant.
    """
    if len(ranked) == 0:
        raise DegenerateError("no items to rank")
    scores = np.array([s for s, _ in ranked], dtype=np.float64)
    rel = np.array([bool(r) for _, r in ranked], dtype=np.float64)
    n_rel = rel.sum()
    if n_rel == 0:
        raise DegenerateError("no relevant items")
    order = np.argsort(-scores, kind="stable")
    rel = rel[order]
    precision_at_k = np.cumsum(rel) / np.arange(1, rel.size + 1)
    return float(np.sum(precision_at_k * rel) / n_rel)


def per_class_average_precision(ranked_by_class):
    """Return ``({class: AP}, [classes without relevant items])``."""
    aps, excluded = {}, []
    for cid, ranked in ranked_by_class.items():
        try:
            aps[cid] = average_precision(ranked)
        except DegenerateError:
            excluded.append(cid)
    return aps, excluded


def mean_average_precision(ranked_by_class):
    aps, _ = per_class_average_precision(ranked_by_class)
    if not aps:
        raise DomainError("no class has a relevant item")
    return float(np.mean(list(aps.values())))


def ranked_from_matrix(scores, targets):
    """``{class: [(score, relevant), ...]}`` from ``(items, classes)`` arrays."""
    scores = np.asarray(scores, dtype=np.float64)
    targets = np.asarray(targets)
    if scores.shape != targets.shape or scores.ndim != 2:
        raise ShapeError("scores and targets must both be (items, classes)")
    return {i: list(zip(scores[:, i].tolist(), targets[:, i].astype(bool).tolist()))
            for i in range(scores.shape[1])}


@dataclass
class ConfusionCounts:
    """Per-class counts: correct, predicted, and ground-truth positives."""

    n_correct: np.ndarray
    n_pred: np.ndarray
    n_true: np.ndarray

    def __post_init__(self):
        self.n_correct = np.asarray(self.n_correct, dtype=np.int64)
        self.n_pred = np.asarray(self.n_pred, dtype=np.int64)
        self.n_true = np.asarray(self.n_true, dtype=np.int64)
        if not (self.n_correct.shape == self.n_pred.shape == self.n_true.shape):
            raise ShapeError("count arrays must have one shape")
        if np.any(self.n_correct < 0) or np.any(self.n_correct > np.minimum(self.n_pred, self.n_true)):
            raise DomainError("need 0 <= correct <= min(predicted, ground truth)")


def _f1(p, r):
    return 0.0 if p + r == 0 else 2.0 * p * r / (p + r)


def _class_mean(num, den, skip_empty):
    keep = den > 0
    ratios = np.where(keep, num / np.where(keep, den, 1), 0.0)
    if skip_empty:
        return float(ratios[keep].mean()) if keep.any() else 0.0
    return float(ratios.mean())


def prf_metrics(counts, skip_empty=False):
    """C-P/C-R/C-F1 and O-P/O-R/O-F1 as a dict.

    A class that predicted nothing scores precision 0 (recall likewise for
    a class with no ground truth); ``skip_empty`` drops such classes from
    the per-class means instead.
    """
    nc, npred, ng = counts.n_correct, counts.n_pred, counts.n_true
    if npred.sum() == 0 and ng.sum() == 0:
        raise DomainError("all counts are zero")
    cp = _class_mean(nc, npred, skip_empty)
    cr = _class_mean(nc, ng, skip_empty)
    op = nc.sum() / npred.sum() if npred.sum() else 0.0
    orc = nc.sum() / ng.sum() if ng.sum() else 0.0
    return {
        "C-P": cp, "C-R": cr, "C-F1": _f1(cp, cr),
        "O-P": float(op), "O-R": float(orc), "O-F1": _f1(float(op), float(orc)),
    }


def binarize_predictions(probs, targets, threshold=0.5):
    """Count predictions ``prob >= threshold`` against binary targets."""
    if not 0 < threshold < 1:
        raise DomainError("threshold must lie in (0, 1)")
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets).astype(bool)
    if probs.shape != targets.shape or probs.ndim != 2:
        raise ShapeError("probs and targets must both be (items, classes)")
    pred = probs >= threshold
    return ConfusionCounts(
        n_correct=np.sum(pred & targets, axis=0),
        n_pred=np.sum(pred, axis=0),
        n_true=np.sum(targets, axis=0),
    )
