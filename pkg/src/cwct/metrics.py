"""Training objectives (forward only) and per-frame ranking metrics.

Ranking convention shared by every metric here: frames are ordered by
descending score, ties broken by ascending frame index.
"""
import math
import warnings

import numpy as np

from .errors import ContractError

LOG_FLOOR = 1e-12


def cross_entropy_window(pred, labels) -> float:
    """Summed negative log-likelihood of ``labels`` under per-frame distributions ``pred``."""
    pred = np.asarray(pred, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if pred.ndim != 2 or pred.shape[0] != labels.shape[0]:
        raise ContractError(f"predictions {pred.shape} and labels {labels.shape} disagree in length")
    if labels.size and (labels.min() < 0 or labels.max() >= pred.shape[1]):
        raise ContractError("label index out of range")
    picked = pred[np.arange(len(labels)), labels]
    # + 0.0 turns a perfect score's -0.0 into 0.0
    return -float(np.log(np.maximum(picked, LOG_FLOOR)).sum()) + 0.0


def total_loss(oad, oas, cascade_oad, cascade_oas, weights=(0.2, 0.7, 0.4)) -> float:
    l1, l2, l3 = weights
    return oad + l1 * oas + l2 * cascade_oad + l3 * cascade_oas


def ranking(scores):
    scores = np.asarray(scores, dtype=np.float64)
    # lexsort: last key is primary
    return np.lexsort((np.arange(len(scores)), -scores))


def _hits(scores, positives):
    positives = np.asarray(positives, dtype=bool)
    if len(positives) != len(scores):
        raise ContractError("scores and positives differ in length")
    return positives[ranking(scores)]


def average_precision(scores, positives) -> float:
    hits = _hits(scores, positives)
    n_pos = int(hits.sum())
    if n_pos == 0:
        raise ContractError("average precision needs at least one positive")
    tp = np.cumsum(hits)
    ranks = np.arange(1, len(hits) + 1)
    # fsum: correctly rounded, so the result does not depend on summation order
    return math.fsum((tp[hits] / ranks[hits]).tolist()) / n_pos


def calibrated_ap(scores, positives) -> float:
    """AP with false positives down-weighted by ``w = negatives / positives``."""
    hits = _hits(scores, positives)
    n_pos = int(hits.sum())
    n_neg = len(hits) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ContractError("calibrated AP needs at least one positive and one negative")
    ratio = n_neg / n_pos
    tp = np.cumsum(hits)
    fp = np.cumsum(~hits)
    prec = tp / (tp + fp / ratio)
    return math.fsum(prec[hits].tolist()) / n_pos


def per_class(metric, table, labels, skip_degenerate=False):
    """``{class: metric(scores, labels == class)}`` over action classes (background 0 excluded)."""
    table = np.asarray(table, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if table.ndim != 2 or table.shape[0] != labels.shape[0]:
        raise ContractError(f"score table {table.shape} and labels {labels.shape} disagree")
    out = {}
    for k in range(1, table.shape[1]):
        pos = labels == k
        if not pos.any() or (skip_degenerate and pos.all()):
            continue
        out[k] = metric(table[:, k], pos)
    return out


def _class_mean(values, what):
    if not values:
        raise ContractError(f"no action class has positives; {what} undefined")
    return float(math.fsum(values.values()) / len(values))


def mean_ap(table, labels) -> float:
    return _class_mean(per_class(average_precision, table, labels), "mAP")


def mean_calibrated_ap(table, labels) -> float:
    return _class_mean(per_class(calibrated_ap, table, labels, skip_degenerate=True), "mcAP")


def evaluate(table, labels):
    """Both metrics plus the list of action classes skipped for lack of positives."""
    table = np.asarray(table)
    labels = np.asarray(labels)
    present = set(np.unique(labels).tolist())
    skipped = [k for k in range(1, table.shape[1]) if k not in present]
    if skipped:
        warnings.warn(f"classes without positives skipped: {skipped}", stacklevel=2)
    return {"mAP": mean_ap(table, labels), "mcAP": mean_calibrated_ap(table, labels), "skipped": skipped}
