import numpy as np
import pytest

from symmvs import (
    CameraView,
    DepthHypotheses,
    DepthMap,
    LossWeights,
    PlanePrimitive,
    SceneSpec,
    compute_all_masks,
    render_scene,
)
from symmvs.consistency import SceneState

# Desk-scale softmax temperature: matching costs live at the ~1e-3 feature-
# variance scale here, so the expectation needs a much sharper softmax than
# the 1.0 default.
DESK_TEMPERATURE = 3e-6


def make_camera(center_x, f=55.0, width=64, height=48, center=None):
    K = np.array(
        [[f, 0.0, (width - 1) / 2.0], [0.0, f, (height - 1) / 2.0], [0.0, 0.0, 1.0]]
    )
    c = np.array([center_x, 0.0, 0.0]) if center is None else np.asarray(center, float)
    return CameraView(K, np.eye(3), -c, None)


@pytest.fixture(scope="session")
def plane_scene():
    """Three-camera rig viewing one textured fronto-parallel plane whose
    depth sits exactly on a hypothesis sample."""
    hyp = DepthHypotheses(1.8, 1.8 + 63 * 0.05, 64)
    z0 = float(hyp.samples[24])
    spec = SceneSpec(
        primitives=[
            PlanePrimitive(normal=[0, 0, 1], offset=z0, texture_id=0, texture_scale=1.3)
        ],
        cameras=[make_camera(-0.55), make_camera(0.0), make_camera(0.55)],
        width=64,
        height=48,
        channels=1,
        seed=7,
    )
    views, gt_depths, visibility = render_scene(spec)
    return {
        "spec": spec,
        "views": views,
        "gt": gt_depths,
        "visibility": visibility,
        "hyp": hyp,
        "z0": z0,
        "weights": LossWeights(tau_occ=1.0),
    }


@pytest.fixture(scope="session")
def occluder_scene():
    """Background plane plus a nearer half-covering patch, wide baselines:
    view 2's content is heavily occluded in view 0."""
    # the patch covers world x <= -0.6 (its in-plane u axis is -x)
    patch = PlanePrimitive(
        normal=[0, 0, 1], offset=1.7, texture_id=1, texture_scale=1.6,
        bounds=(0.6, 50.0, -50.0, 50.0),
    )
    background = PlanePrimitive(normal=[0, 0, 1], offset=3.6, texture_id=0,
                                texture_scale=1.2)
    spec = SceneSpec(
        primitives=[patch, background],
        cameras=[
            make_camera(-1.1, f=110.0, width=128, height=96),
            make_camera(0.0, f=110.0, width=128, height=96),
            make_camera(1.1, f=110.0, width=128, height=96),
        ],
        width=128,
        height=96,
        channels=1,
        seed=3,
    )
    views, gt_depths, visibility = render_scene(spec)
    return {
        "spec": spec,
        "views": views,
        "gt": gt_depths,
        "visibility": visibility,
        "d_occ": 1.7,
        "d_bg": 3.6,
    }


def scene_state(views, depths, weights):
    masks = compute_all_masks(views, depths, weights)
    return SceneState(views, depths, masks, weights)


def noisy_depths(gt_depths, sigma, hyp, seed=5):
    rng = np.random.default_rng(seed)
    out = []
    for d in gt_depths:
        vals = np.clip(
            d.values + rng.normal(0.0, sigma, d.values.shape), hyp.d_min, hyp.d_max
        )
        out.append(DepthMap(np.where(d.valid, vals, 0.0), d.valid.copy()))
    return out


def median_abs_error(depths, gt_depths):
    errs = []
    for d, g in zip(depths, gt_depths):
        both = d.valid & g.valid
        errs.append(np.abs(d.values - g.values)[both])
    return float(np.median(np.concatenate(errs)))
