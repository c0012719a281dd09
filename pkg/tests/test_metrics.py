"""Depth and point-cloud evaluation metrics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symmvs import (
    DepthMap,
    PointCloud,
    cloud_metrics,
    depth_metrics,
    overall_from_means,
)
from symmvs.errors import EmptyCloud, EmptyOverlap, NonPositiveGT

from _oracles import nearest_distances_brute


def flat_depth(value, shape=(6, 8)):
    return DepthMap(np.full(shape, float(value)))


class TestDepthMetrics:
    def test_perfect_prediction(self):
        rng = np.random.default_rng(0)
        gt = DepthMap(rng.uniform(1.0, 3.0, (6, 8)))
        m = depth_metrics(gt, gt.copy())
        assert m.abs_rel == m.abs_diff == m.sq_rel == m.rmse == m.rmse_log == 0.0
        assert m.delta1 == m.delta2 == m.delta3 == 1.0
        assert m.n_evaluated == 48

    def test_strict_boundary_at_factor_1_25(self):
        # dyadic ground truth keeps 1.25 * gt exact, so the ratio equals
        # 1.25 bit-for-bit and the strict inequality fails
        gt = flat_depth(4.0)
        pred = DepthMap(gt.values * 1.25)
        m = depth_metrics(pred, gt)
        assert m.abs_rel == pytest.approx(0.25, rel=1e-12)
        assert m.delta1 == 0.0
        assert m.delta2 == 1.0
        assert m.delta3 == 1.0

    def test_doubled_prediction(self):
        gt = flat_depth(3.0)
        pred = DepthMap(gt.values * 2.0)
        m = depth_metrics(pred, gt)
        assert m.abs_rel == pytest.approx(1.0, rel=1e-12)
        assert m.rmse_log == pytest.approx(math.log(2.0), rel=1e-12)
        # 2 < 1.25**3 = 1.953125 is false, so every ratio test fails
        assert (m.delta1, m.delta2, m.delta3) == (0.0, 0.0, 0.0)

    def test_deltas_and_rmse_log_symmetric_under_swap(self):
        rng = np.random.default_rng(1)
        gt = DepthMap(rng.uniform(1.0, 3.0, (7, 7)))
        pred = DepthMap(gt.values * rng.uniform(0.7, 1.4, (7, 7)))
        a = depth_metrics(pred, gt)
        b = depth_metrics(gt, pred)
        assert a.delta1 == b.delta1
        assert a.delta2 == b.delta2
        assert a.delta3 == b.delta3
        assert a.rmse_log == pytest.approx(b.rmse_log, rel=1e-12)

    def test_deltas_are_nested(self):
        rng = np.random.default_rng(2)
        gt = DepthMap(rng.uniform(1.0, 3.0, (9, 9)))
        pred = DepthMap(gt.values * rng.uniform(0.5, 2.0, (9, 9)))
        m = depth_metrics(pred, gt)
        assert m.delta1 <= m.delta2 <= m.delta3

    @given(st.floats(min_value=1.01, max_value=1.24))
    @settings(max_examples=25, deadline=None)
    def test_ratios_below_1_25_count_as_inliers(self, r):
        gt = flat_depth(2.0)
        pred = DepthMap(gt.values * r)
        assert depth_metrics(pred, gt).delta1 == 1.0

    def test_only_joint_valid_pixels_count(self):
        gt_vals = np.full((4, 4), 2.0)
        gt = DepthMap(gt_vals, np.ones((4, 4), bool))
        pred_valid = np.zeros((4, 4), bool)
        pred_valid[0, :2] = True
        pred_vals = np.where(pred_valid, 4.0, 0.0)
        m = depth_metrics(DepthMap(pred_vals, pred_valid), gt)
        assert m.n_evaluated == 2
        assert m.abs_diff == pytest.approx(2.0)

    def test_empty_overlap(self):
        gt = DepthMap(np.full((3, 3), 2.0), np.zeros((3, 3), bool))
        pred = flat_depth(2.0, (3, 3))
        with pytest.raises(EmptyOverlap):
            depth_metrics(pred, gt)

    def test_nonpositive_gt(self):
        gt = DepthMap(np.full((3, 3), 1.0))
        object.__setattr__  # no-op; keep construction explicit below
        bad = DepthMap(np.full((3, 3), 1.0))
        bad.values[0, 0] = -1.0  # sneak a bad value past construction
        with pytest.raises(NonPositiveGT):
            depth_metrics(flat_depth(1.0, (3, 3)), bad)


class TestCloudMetrics:
    def test_identical_clouds(self):
        rng = np.random.default_rng(3)
        pts = rng.uniform(size=(100, 3))
        m = cloud_metrics(PointCloud(pts), PointCloud(pts.copy()), threshold=1.0)
        assert m.acc_mean == m.comp_mean == m.overall == 0.0
        assert m.acc_pct == m.comp_pct == m.f_score == 100.0

    def test_single_pair_half_unit_apart(self):
        gt = PointCloud(np.array([[0.0, 0.0, 0.0]]))
        pred = PointCloud(np.array([[0.0, 0.0, 0.5]]))
        m = cloud_metrics(pred, gt, threshold=1.0)
        assert m.acc_mean == m.comp_mean == 0.5
        assert m.overall == 0.5
        assert m.acc_pct == m.comp_pct == m.f_score == 100.0

    def test_outlier_moves_accuracy_only(self):
        rng = np.random.default_rng(4)
        pts = rng.uniform(size=(50, 3))
        outlier = pts.mean(axis=0) + np.array([10.0, 0.0, 0.0])
        pred = PointCloud(np.vstack([pts, outlier]))
        gt = PointCloud(pts)
        m = cloud_metrics(pred, gt, threshold=0.5)
        d_out = nearest_distances_brute(outlier[None, :], pts)[0]
        assert m.comp_mean == 0.0
        assert m.acc_mean == pytest.approx(d_out / 51.0, rel=1e-12)
        assert m.comp_pct == 100.0
        assert m.acc_pct == pytest.approx(100.0 * 50 / 51, rel=1e-12)

    def test_matches_brute_force_all_pairs(self):
        rng = np.random.default_rng(5)
        pred = PointCloud(rng.uniform(size=(400, 3)))
        gt = PointCloud(rng.uniform(size=(300, 3)))
        m = cloud_metrics(pred, gt, threshold=0.1)
        d_acc = nearest_distances_brute(pred.points, gt.points)
        d_comp = nearest_distances_brute(gt.points, pred.points)
        assert m.acc_mean == pytest.approx(d_acc.mean(), rel=1e-12)
        assert m.acc_median == pytest.approx(np.median(d_acc), rel=1e-12)
        assert m.acc_var == pytest.approx(np.var(d_acc), rel=1e-12)
        assert m.comp_mean == pytest.approx(d_comp.mean(), rel=1e-12)
        assert m.acc_pct == pytest.approx(100.0 * (d_acc < 0.1).mean(), rel=1e-12)
        assert m.comp_pct == pytest.approx(100.0 * (d_comp < 0.1).mean(), rel=1e-12)
        expected_f = 2 * m.acc_pct * m.comp_pct / (m.acc_pct + m.comp_pct)
        assert m.f_score == pytest.approx(expected_f, rel=1e-9)

    def test_rigid_motion_invariance(self):
        rng = np.random.default_rng(6)
        pred = rng.uniform(size=(200, 3))
        gt = rng.uniform(size=(150, 3))
        angle = 0.7
        R = np.array(
            [
                [np.cos(angle), 0.0, np.sin(angle)],
                [0.0, 1.0, 0.0],
                [-np.sin(angle), 0.0, np.cos(angle)],
            ]
        )
        t = np.array([3.0, -2.0, 1.0])
        m1 = cloud_metrics(PointCloud(pred), PointCloud(gt), 0.1)
        m2 = cloud_metrics(PointCloud(pred @ R.T + t), PointCloud(gt @ R.T + t), 0.1)
        for field in ("acc_mean", "acc_median", "acc_var", "comp_mean",
                      "comp_median", "comp_var", "overall", "acc_pct",
                      "comp_pct", "f_score"):
            assert getattr(m1, field) == pytest.approx(getattr(m2, field),
                                                       abs=1e-9)

    def test_empty_cloud_rejected(self):
        good = PointCloud(np.zeros((1, 3)))
        empty = PointCloud(np.zeros((0, 3)))
        with pytest.raises(EmptyCloud):
            cloud_metrics(empty, good, 1.0)
        with pytest.raises(EmptyCloud):
            cloud_metrics(good, empty, 1.0)


def test_overall_reading_reproduces_published_row():
    # the mean-of-means reading of the combined score: (0.760 + 0.515) / 2
    assert overall_from_means(0.760, 0.515) == pytest.approx(0.6375, abs=1e-12)
    assert abs(overall_from_means(0.760, 0.515) - 0.637) <= 0.0005 + 1e-12
