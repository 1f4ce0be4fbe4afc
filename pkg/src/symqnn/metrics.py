"""ROC curves and AUC with tie handling."""
from __future__ import annotations

import numpy as np


class DegenerateInputError(ValueError):
    """ROC needs at least one positive and one negative example."""


def roc_curve(scores, labels) -> list[tuple[float, float]]:
    """(fpr, tpr) points from (0, 0) to (1, 1), one per distinct score threshold.

    Labels are +1 (positive) / -1 (negative); higher scores mean "more positive".
    Equal scores form a single step, so ties contribute a diagonal segment.
    """
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if s.shape != y.shape:
        raise ValueError(f"{s.size} scores vs {y.size} labels")
    pos = y == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise DegenerateInputError("both classes must be present")
    order = np.argsort(-s, kind="mergesort")
    s, pos = s[order], pos[order]
    tp = np.cumsum(pos)
    fp = np.cumsum(~pos)
    # last index of each tie group
    ends = np.flatnonzero(np.append(s[1:] != s[:-1], True))
    fpr = np.concatenate([[0.0], fp[ends] / n_neg])
    tpr = np.concatenate([[0.0], tp[ends] / n_pos])
    return list(zip(fpr.tolist(), tpr.tolist()))


def auc(roc) -> float:
    """Trapezoidal area under an ROC curve given as (fpr, tpr) pairs."""
    pts = np.asarray(roc, dtype=np.float64)
    return float(np.trapezoid(pts[:, 1], pts[:, 0]))


def roc_auc(scores, labels) -> float:
    return auc(roc_curve(scores, labels))


def interpolate_tpr(roc, grid: np.ndarray) -> np.ndarray:
    """tpr on a fixed fpr grid; vertical segments resolve to their upper end."""
    pts = np.asarray(roc, dtype=np.float64)
    fpr, tpr = pts[:, 0], pts[:, 1]
    uniq, inv = np.unique(fpr, return_inverse=True)
    top = np.full(uniq.shape, -np.inf)
    np.maximum.at(top, inv, tpr)
    return np.interp(grid, uniq, top)


def roc_band(rocs, n_grid: int = 101) -> dict:
    """Pointwise mean and standard deviation of several ROC curves on a shared fpr grid."""
    grid = np.linspace(0.0, 1.0, n_grid)
    tprs = np.stack([interpolate_tpr(r, grid) for r in rocs])
    return {"fpr": grid.tolist(), "tpr_mean": tprs.mean(axis=0).tolist(), "tpr_std": tprs.std(axis=0).tolist()}
