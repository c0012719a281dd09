"""The command-line surface: subcommands, exit codes, determinism."""

import numpy as np
import pytest

from symmvs.cli import main
from symmvs.fileio import read_pfm, read_ply, write_ply
from symmvs.fusion import PointCloud


SCENE_CFG = """\
size 48 36
channels 1
seed 21
depth_range 2.0 0.04
camera fx=42 cx=23.5 cy=17.5 center=-0.4,0,0
camera fx=42 cx=23.5 cy=17.5 center=0,0,0
camera fx=42 cx=23.5 cy=17.5 center=0.4,0,0
plane normal=0,0,1 offset=3.0 texture=0 scale=1.5
"""

RUN_CFG = """\
tau_occ = 1.0
max_outer_iters = 4
inner_steps_per_mask_update = 3
temperature = 3e-6
hyp_count = 32
convergence_tol = 1e-6
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    scene = root / "scene.cfg"
    scene.write_text(SCENE_CFG)
    run_cfg = root / "run.cfg"
    run_cfg.write_text(RUN_CFG)
    bundle = root / "bundle"
    assert main(["synth", str(scene), str(bundle)]) == 0
    return {"root": root, "scene": scene, "run_cfg": run_cfg, "bundle": bundle}


def test_synth_writes_complete_bundle(workspace):
    bundle = workspace["bundle"]
    for i in range(3):
        assert (bundle / f"view_{i:04d}.pgm").exists()
        assert (bundle / f"view_{i:04d}_cam.txt").exists()
        assert (bundle / f"view_{i:04d}_gt.pfm").exists()


def test_sweep_writes_depth_maps(workspace):
    out = workspace["root"] / "sweep"
    code = main(["sweep", str(workspace["bundle"]), str(out),
                 "--hyp-count", "32", "--temperature", "3e-6"])
    assert code == 0
    d = read_pfm(out / "depth_0001.pfm")
    center = d.values[10:-10, 14:-14]
    assert np.median(np.abs(center - 3.0)) < 0.1


def test_optimize_then_eval_depth(workspace, capsys):
    out = workspace["root"] / "opt"
    code = main(["optimize", str(workspace["bundle"]), str(out),
                 "--config", str(workspace["run_cfg"])])
    assert code == 0
    assert (out / "loss_history.csv").exists()
    assert (out / "loss_report.txt").exists()
    header = (out / "loss_history.csv").read_text().splitlines()[0]
    assert header == "iter,total,Lu,Ls,Lm,Ld,Lb"
    assert (out / "mask_0_1.pgm").exists()
    capsys.readouterr()

    code = main(["eval-depth", str(out), str(workspace["bundle"])])
    assert code == 0
    printed = capsys.readouterr().out
    abs_rel = [float(l.split("=")[1]) for l in printed.splitlines()
               if l.strip().startswith("abs_rel")]
    assert abs_rel and max(abs_rel) < 0.02


def test_optimize_runs_are_byte_identical(workspace):
    out_a = workspace["root"] / "det_a"
    out_b = workspace["root"] / "det_b"
    for out in (out_a, out_b):
        assert main(["optimize", str(workspace["bundle"]), str(out),
                     "--config", str(workspace["run_cfg"])]) == 0
    for name in sorted(p.name for p in out_a.iterdir()):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_fuse_and_eval_cloud(workspace, capsys):
    out = workspace["root"] / "opt"
    ply = workspace["root"] / "fused.ply"
    code = main(["fuse", str(out), str(workspace["bundle"]), str(ply),
                 "--min-views", "2", "--hyp-count", "32"])
    assert code == 0
    cloud = read_ply(ply)
    assert len(cloud) > 1000
    # fused points sit near the z = 3 plane
    assert np.median(np.abs(cloud.points[:, 2] - 3.0)) < 0.05

    code = main(["eval-cloud", str(ply), str(ply), "--threshold", "0.04"])
    assert code == 0
    printed = capsys.readouterr().out
    assert "f_score = 100" in printed


def test_eval_cloud_self_comparison(workspace, tmp_path, capsys):
    rng = np.random.default_rng(0)
    ply = tmp_path / "a.ply"
    write_ply(ply, PointCloud(rng.uniform(size=(64, 3))))
    assert main(["eval-cloud", str(ply), str(ply)]) == 0
    out = capsys.readouterr().out
    assert "f_score = 100" in out
    assert "acc_mean = 0" in out


def test_missing_camera_file_exits_1(workspace, tmp_path, capsys):
    bundle = tmp_path / "broken"
    bundle.mkdir()
    code = main(["sweep", str(bundle), str(tmp_path / "out")])
    assert code == 1
    assert str(bundle) in capsys.readouterr().err


def test_fuse_missing_depth_file_exits_1(workspace, tmp_path, capsys):
    empty = tmp_path / "no_depths"
    empty.mkdir()
    code = main(["fuse", str(empty), str(workspace["bundle"]),
                 str(tmp_path / "out.ply")])
    assert code == 1
    assert "depth_0000.pfm" in capsys.readouterr().err


def test_missing_scene_file_exits_1(tmp_path, capsys):
    code = main(["synth", str(tmp_path / "nope.cfg"), str(tmp_path / "out")])
    assert code == 1
    assert "nope.cfg" in capsys.readouterr().err


def test_usage_error_exits_1(capsys):
    assert main(["frobnicate"]) == 1
    err = capsys.readouterr().err
    assert "usage" in err.lower()


def test_diverged_run_exits_2(workspace, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(RUN_CFG + "step_size = 1e6\nmax_halvings = 0\n")
    code = main(["optimize", str(workspace["bundle"]), str(tmp_path / "out"),
                 "--config", str(cfg)])
    assert code == 2
