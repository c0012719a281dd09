"""Depth-map and point-cloud evaluation metrics.

Depth metrics reduce over jointly valid pixels; the inlier ratios use the
strict max-ratio test ``max(p/g, g/p) < 1.25**i``, so boundary cases fail.
Cloud metrics use exact nearest neighbors in both directions; ``overall``
is the mean of the accuracy and completeness means, and the percentage
metrics count distances strictly below the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyCloud, EmptyOverlap, NonPositiveGT
from .fusion import PointCloud
from .geometry import DepthMap

__all__ = [
    "DepthMetrics",
    "CloudMetrics",
    "depth_metrics",
    "cloud_metrics",
    "overall_from_means",
]


@dataclass
class DepthMetrics:
    """Standard depth error statistics plus the three inlier ratios."""

    abs_rel: float
    abs_diff: float
    sq_rel: float
    rmse: float
    rmse_log: float
    delta1: float
    delta2: float
    delta3: float
    n_evaluated: int

    def report_lines(self):
        return [
            f"abs_rel = {self.abs_rel:.17g}",
            f"abs_diff = {self.abs_diff:.17g}",
            f"sq_rel = {self.sq_rel:.17g}",
            f"rmse = {self.rmse:.17g}",
            f"rmse_log = {self.rmse_log:.17g}",
            f"delta1 = {self.delta1:.17g}",
            f"delta2 = {self.delta2:.17g}",
            f"delta3 = {self.delta3:.17g}",
            f"n_evaluated = {self.n_evaluated}",
        ]

    def csv_row(self):
        return (
            f"{self.abs_rel:.17g},{self.abs_diff:.17g},{self.sq_rel:.17g},"
            f"{self.rmse:.17g},{self.rmse_log:.17g},{self.delta1:.17g},"
            f"{self.delta2:.17g},{self.delta3:.17g},{self.n_evaluated}"
        )

    CSV_HEADER = "abs_rel,abs_diff,sq_rel,rmse,rmse_log,delta1,delta2,delta3,n_evaluated"


@dataclass
class CloudMetrics:
    """Accuracy / completeness distance statistics and threshold percentages.

    Variance fields are population variances; the matching standard
    deviations are also emitted in reports. ``f_score`` is the harmonic
    mean of the two percentages.
    """

    acc_mean: float
    acc_median: float
    acc_var: float
    comp_mean: float
    comp_median: float
    comp_var: float
    overall: float
    acc_pct: float
    comp_pct: float
    f_score: float
    threshold: float

    def report_lines(self):
        return [
            f"acc_mean = {self.acc_mean:.17g}",
            f"acc_median = {self.acc_median:.17g}",
            f"acc_var = {self.acc_var:.17g}",
            f"acc_std = {np.sqrt(self.acc_var):.17g}",
            f"comp_mean = {self.comp_mean:.17g}",
            f"comp_median = {self.comp_median:.17g}",
            f"comp_var = {self.comp_var:.17g}",
            f"comp_std = {np.sqrt(self.comp_var):.17g}",
            f"overall = {self.overall:.17g}",
            f"acc_pct = {self.acc_pct:.17g}",
            f"comp_pct = {self.comp_pct:.17g}",
            f"f_score = {self.f_score:.17g}",
            f"threshold = {self.threshold:.17g}",
        ]

    def csv_row(self):
        return (
            f"{self.acc_mean:.17g},{self.acc_median:.17g},{self.acc_var:.17g},"
            f"{self.comp_mean:.17g},{self.comp_median:.17g},{self.comp_var:.17g},"
            f"{self.overall:.17g},{self.acc_pct:.17g},{self.comp_pct:.17g},"
            f"{self.f_score:.17g},{self.threshold:.17g}"
        )

    CSV_HEADER = ("acc_mean,acc_median,acc_var,comp_mean,comp_median,comp_var,"
                  "overall,acc_pct,comp_pct,f_score,threshold")


def depth_metrics(pred: DepthMap, gt: DepthMap) -> DepthMetrics:
    """Error statistics of a predicted depth map against ground truth.

    Raises EmptyOverlap when no pixel is valid in both maps and
    NonPositiveGT when the ground truth is not strictly positive there.
    """
    both = pred.valid & gt.valid
    n = int(both.sum())
    if n == 0:
        raise EmptyOverlap("no jointly valid pixels")
    p = pred.values[both]
    g = gt.values[both]
    if (g <= 0).any():
        raise NonPositiveGT("ground-truth depth must be positive")
    diff = p - g
    ratio = np.maximum(p / g, g / p)
    return DepthMetrics(
        abs_rel=float(np.mean(np.abs(diff) / g)),
        abs_diff=float(np.mean(np.abs(diff))),
        sq_rel=float(np.mean(diff * diff / g)),
        rmse=float(np.sqrt(np.mean(diff * diff))),
        rmse_log=float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2))),
        delta1=float(np.mean(ratio < 1.25)),
        delta2=float(np.mean(ratio < 1.25 ** 2)),
        delta3=float(np.mean(ratio < 1.25 ** 3)),
        n_evaluated=n,
    )


def overall_from_means(acc_mean: float, comp_mean: float) -> float:
    """Combined distance score: the mean of the two distance means."""
    return 0.5 * (acc_mean + comp_mean)


def cloud_metrics(pred: PointCloud, gt: PointCloud, threshold: float) -> CloudMetrics:
    """Accuracy/completeness statistics between two point clouds.

    Accuracy reduces nearest-ground-truth distances of predicted points;
    completeness reduces nearest-prediction distances of ground-truth
    points. Nearest neighbors are exact.
    """
    if len(pred) == 0 or len(gt) == 0:
        raise EmptyCloud("cloud metrics need non-empty clouds")
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    d_acc, _ = cKDTree(gt.points).query(pred.points, k=1)
    d_comp, _ = cKDTree(pred.points).query(gt.points, k=1)
    acc_pct = 100.0 * float(np.mean(d_acc < threshold))
    comp_pct = 100.0 * float(np.mean(d_comp < threshold))
    denom = acc_pct + comp_pct
    f_score = 2.0 * acc_pct * comp_pct / denom if denom > 0 else 0.0
    return CloudMetrics(
        acc_mean=float(np.mean(d_acc)),
        acc_median=float(np.median(d_acc)),
        acc_var=float(np.var(d_acc)),
        comp_mean=float(np.mean(d_comp)),
        comp_median=float(np.median(d_comp)),
        comp_var=float(np.var(d_comp)),
        overall=overall_from_means(float(np.mean(d_acc)), float(np.mean(d_comp))),
        acc_pct=acc_pct,
        comp_pct=comp_pct,
        f_score=f_score,
        threshold=float(threshold),
    )
