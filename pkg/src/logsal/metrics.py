"""Saliency evaluation metrics: SIM, CC, AUC-Judd, shuffled AUC."""

import json
from dataclasses import dataclass

import numpy as np

from .validation import check_grid, check_same_shape

__all__ = ["FixationSet", "load_fixations", "sim", "cc", "auc_judd", "sauc"]


@dataclass(frozen=True)
class FixationSet:
    """Integer (row, col) fixation coordinates on an H x W reference grid."""

    points: tuple  # ((r, c), ...)
    height: int
    width: int

    def __post_init__(self):
        for r, c in self.points:
            if not (0 <= r < self.height and 0 <= c < self.width):
                raise ValueError(
                    f"fixation ({r}, {c}) outside {self.height}x{self.width}")

    def __len__(self):
        return len(self.points)

    def values_on(self, sal):
        rows = np.array([p[0] for p in self.points])
        cols = np.array([p[1] for p in self.points])
        return sal[rows, cols]


def load_fixations(path):
    """Read a fixation file: {"dims": [H, W], "points": [[r, c], ...]}."""
    with open(path) as f:
        raw = json.load(f)
    h, w = (int(d) for d in raw["dims"])
    pts = tuple((int(r), int(c)) for r, c in raw["points"])
    return FixationSet(points=pts, height=h, width=w)


def sim(p, g):
    """Histogram intersection of the sum-normalized maps, in [0, 1]."""
    p = check_grid(p, "p")
    g = check_grid(g, "g")
    check_same_shape(p, g)
    ps, gs = p.sum(), g.sum()
    if ps <= 0 or gs <= 0:
        raise ValueError("maps must have positive sums")
    return float(np.minimum(p / ps, g / gs).sum())


def cc(p, g):
    """Pearson correlation between the two maps over all pixels."""
    p = check_grid(p, "p")
    g = check_grid(g, "g")
    check_same_shape(p, g)
    pd = p - p.mean()
    gd = g - g.mean()
    denom = np.sqrt((pd * pd).sum() * (gd * gd).sum())
    if denom == 0:
        raise ValueError("correlation undefined for a constant map")
    return float((pd * gd).sum() / denom)


def _auc(pos_scores, neg_scores):
    """Trapezoidal ROC area with >= thresholds at distinct positive values."""
    pos_scores = np.asarray(pos_scores, dtype=np.float64)
    neg_scores = np.asarray(neg_scores, dtype=np.float64)
    thresholds = np.unique(pos_scores)[::-1]
    tpr = [0.0]
    fpr = [0.0]
    for t in thresholds:
        tpr.append(float((pos_scores >= t).mean()))
        fpr.append(float((neg_scores >= t).mean()))
    tpr.append(1.0)
    fpr.append(1.0)
    return float(np.trapezoid(tpr, fpr))


def auc_judd(p, fix):
    """ROC area with fixations as positives and every other pixel as a
    negative (fixation locations are excluded from the negative set, so a
    perfectly separating map scores exactly 1)."""
    p = check_grid(p, "p")
    if len(fix) == 0:
        raise ValueError("fixation set is empty")
    if (fix.height, fix.width) != p.shape:
        raise ValueError(
            f"fixation dims ({fix.height}, {fix.width}) do not match map {p.shape}")
    mask = np.ones(p.shape, dtype=bool)
    for r, c in fix.points:
        mask[r, c] = False
    if not mask.any():
        raise ValueError("no non-fixation pixels left for the negative set")
    return _auc(fix.values_on(p), p[mask])


def sauc(p, fix, neg):
    """Shuffled AUC: negatives come from another image's fixations."""
    p = check_grid(p, "p")
    if len(fix) == 0 or len(neg) == 0:
        raise ValueError("fixation sets must be nonempty")
    for fs in (fix, neg):
        if (fs.height, fs.width) != p.shape:
            raise ValueError(
                f"fixation dims ({fs.height}, {fs.width}) do not match map {p.shape}")
    return _auc(fix.values_on(p), neg.values_on(p))
