"""Round trips and error handling for every file format."""

import numpy as np
import pytest

from symmvs import DepthMap, LossWeights, PointCloud
from symmvs.errors import ParseError, UnsupportedVariant
from symmvs.fileio import (
    load_bundle,
    read_camera,
    read_image,
    read_pfm,
    read_ply,
    read_run_config,
    read_scene_config,
    write_bundle,
    write_camera,
    write_image,
    write_mask_pgm,
    write_pfm,
    write_ply,
)



class TestCameraFiles:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        K = np.array([[55.3, 0.17, 31.49], [0, 54.9, 23.51], [0, 0, 1.0]])
        angle = 0.21
        R = np.array(
            [
                [np.cos(angle), -np.sin(angle), 0],
                [np.sin(angle), np.cos(angle), 0],
                [0, 0, 1.0],
            ]
        )
        t = rng.uniform(-1, 1, 3)
        path = tmp_path / "cam.txt"
        write_camera(path, K, R, t, 425.0, 2.6)
        K2, R2, t2, dmin, dint = read_camera(path)
        np.testing.assert_array_equal(K2, K)
        np.testing.assert_array_equal(R2, R)
        np.testing.assert_array_equal(t2, t)
        assert dmin == 425.0 and dint == 2.6

    def test_identity_extrinsic_and_depth_line(self, tmp_path):
        path = tmp_path / "cam.txt"
        path.write_text(
            "extrinsic\n"
            "1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n\n"
            "intrinsic\n1 0 0\n0 1 0\n0 0 1\n\n"
            "425 2.6\n"
        )
        K, R, t, dmin, dint = read_camera(path)
        np.testing.assert_array_equal(R, np.eye(3))
        np.testing.assert_array_equal(t, np.zeros(3))
        np.testing.assert_array_equal(K, np.eye(3))
        assert (dmin, dint) == (425.0, 2.6)

    def test_malformed_row_names_line(self, tmp_path):
        path = tmp_path / "cam.txt"
        path.write_text(
            "extrinsic\n1 0 0 0\n0 1 oops 0\n0 0 1 0\n0 0 0 1\n"
            "intrinsic\n1 0 0\n0 1 0\n0 0 1\n425 2.6\n"
        )
        with pytest.raises(ParseError) as err:
            read_camera(path)
        assert ":2:" in str(err.value) or ":3:" in str(err.value)

    def test_missing_keyword(self, tmp_path):
        path = tmp_path / "cam.txt"
        path.write_text("1 0 0 0\n")
        with pytest.raises(ParseError):
            read_camera(path)


class TestPfm:
    def test_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(1)
        vals = rng.uniform(1.0, 5.0, (9, 7)).astype(np.float32).astype(np.float64)
        valid = rng.uniform(size=(9, 7)) > 0.25
        d = DepthMap(np.where(valid, vals, 0.0), valid)
        path = tmp_path / "d.pfm"
        write_pfm(path, d)
        back = read_pfm(path)
        np.testing.assert_array_equal(back.values, d.values)
        np.testing.assert_array_equal(back.valid, valid)

    def test_fixed_header_layout(self, tmp_path):
        d = DepthMap(np.array([[1.0, 2.0], [3.0, 4.0]]))
        path = tmp_path / "d.pfm"
        write_pfm(path, d)
        raw = path.read_bytes()
        assert raw.startswith(b"Pf\n2 2\n-1.0\n")
        assert len(raw) == len(b"Pf\n2 2\n-1.0\n") + 16
        # bottom-up row order: the last image row comes first
        pix = np.frombuffer(raw[-16:], dtype="<f4").reshape(2, 2)
        np.testing.assert_array_equal(pix, [[3.0, 4.0], [1.0, 2.0]])

    def test_positive_scale_rejected(self, tmp_path):
        path = tmp_path / "d.pfm"
        path.write_bytes(b"Pf\n2 2\n1.0\n" + b"\x00" * 16)
        with pytest.raises(UnsupportedVariant):
            read_pfm(path)

    def test_color_variant_rejected(self, tmp_path):
        path = tmp_path / "d.pfm"
        path.write_bytes(b"PF\n2 2\n-1.0\n" + b"\x00" * 48)
        with pytest.raises(UnsupportedVariant):
            read_pfm(path)


class TestImages:
    def test_pgm_round_trip_at_8bit(self, tmp_path):
        rng = np.random.default_rng(2)
        img = np.rint(rng.uniform(size=(6, 8, 1)) * 255) / 255.0
        path = tmp_path / "img.pgm"
        write_image(path, img)
        back = read_image(path)
        np.testing.assert_array_equal(back, img)

    def test_ppm_round_trip_at_8bit(self, tmp_path):
        rng = np.random.default_rng(3)
        img = np.rint(rng.uniform(size=(5, 4, 3)) * 255) / 255.0
        path = tmp_path / "img.ppm"
        write_image(path, img)
        back = read_image(path)
        np.testing.assert_array_equal(back, img)

    def test_mask_pgm(self, tmp_path):
        mask = np.zeros((4, 6), bool)
        mask[1:3, 2:5] = True
        path = tmp_path / "mask.pgm"
        write_mask_pgm(path, mask)
        back = read_image(path)
        np.testing.assert_array_equal(back[..., 0] > 0.5, mask)

    def test_rejects_unknown_magic(self, tmp_path):
        path = tmp_path / "img.pgm"
        path.write_bytes(b"P3\n2 2\n255\n0 0 0 0\n")
        with pytest.raises(ParseError):
            read_image(path)

    def test_png_round_trip_when_pillow_available(self, tmp_path):
        pytest.importorskip("PIL")
        rng = np.random.default_rng(6)
        img = np.rint(rng.uniform(size=(5, 7, 1)) * 255) / 255.0
        path = tmp_path / "img.png"
        write_image(path, img)
        np.testing.assert_array_equal(read_image(path), img)


class TestPly:
    def test_binary_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        pts = rng.uniform(-2, 2, (57, 3)).astype(np.float32).astype(np.float64)
        colors = np.rint(rng.uniform(size=(57, 3)) * 255) / 255.0
        path = tmp_path / "c.ply"
        write_ply(path, PointCloud(pts, colors), binary=True)
        back = read_ply(path)
        np.testing.assert_array_equal(back.points, pts)
        np.testing.assert_array_equal(back.colors, colors)

    def test_ascii_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        pts = rng.uniform(-2, 2, (23, 3)).astype(np.float32).astype(np.float64)
        path = tmp_path / "c.ply"
        write_ply(path, PointCloud(pts), binary=False)
        back = read_ply(path)
        np.testing.assert_array_equal(back.points, pts)
        assert back.colors is None

    def test_empty_cloud_round_trip(self, tmp_path):
        path = tmp_path / "c.ply"
        write_ply(path, PointCloud(np.zeros((0, 3))), binary=True)
        assert len(read_ply(path)) == 0

    def test_rejects_non_ply(self, tmp_path):
        path = tmp_path / "c.ply"
        path.write_bytes(b"obj\n")
        with pytest.raises(ParseError):
            read_ply(path)


class TestSceneConfig:
    def test_parse_and_render(self, tmp_path):
        cfg = tmp_path / "scene.cfg"
        cfg.write_text(
            "# a small scene\n"
            "size 32 24\n"
            "channels 1\n"
            "seed 9\n"
            "depth_range 1.5 0.05\n"
            "camera fx=30 cx=15.5 cy=11.5 center=0,0,0\n"
            "camera fx=30 cx=15.5 cy=11.5 center=0.3,0,0\n"
            "plane normal=0,0,1 offset=2.4 texture=0 scale=1.5\n"
            "plane normal=0,0,1 offset=1.9 texture=1 scale=1.5 bounds=0.2,9,-9,9\n"
        )
        spec, d_min, d_int = read_scene_config(cfg)
        assert (d_min, d_int) == (1.5, 0.05)
        assert len(spec.cameras) == 2
        assert len(spec.primitives) == 2
        assert spec.primitives[1].bounds == (0.2, 9.0, -9.0, 9.0)
        from symmvs import render_scene
        views, depths, _ = render_scene(spec)
        assert views[0].image.shape == (24, 32, 1)

    def test_unknown_entry_rejected(self, tmp_path):
        cfg = tmp_path / "scene.cfg"
        cfg.write_text("size 8 8\ndepth_range 1 0.1\nsphere radius=1\n")
        with pytest.raises(ParseError):
            read_scene_config(cfg)

    def test_missing_size_rejected(self, tmp_path):
        cfg = tmp_path / "scene.cfg"
        cfg.write_text("depth_range 1 0.1\ncamera fx=1 cx=0 cy=0 center=0,0,0\n"
                       "plane normal=0,0,1 offset=2\n")
        with pytest.raises(ParseError):
            read_scene_config(cfg)


class TestRunConfig:
    def test_parses_weights_and_solver_keys(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "lambda1 = 0.4\n"
            "tau_occ = 1.0\n"
            "max_outer_iters = 7\n"
            "step_size = auto\n"
            "temperature = 1e-5\n"
            "hyp_count = 32\n"
        )
        weights, solver_kw = read_run_config(cfg)
        assert weights.lambda1 == 0.4
        assert weights.lambda2 == LossWeights().lambda2
        assert weights.tau_occ == 1.0
        assert solver_kw["max_outer_iters"] == 7
        assert solver_kw["step_size"] is None
        assert solver_kw["temperature"] == 1e-5

    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("lamda1 = 0.4\n")
        with pytest.raises(ParseError):
            read_run_config(cfg)


class TestBundle:
    def test_round_trip(self, tmp_path, plane_scene):
        views, gt = plane_scene["views"], plane_scene["gt"]
        out = tmp_path / "bundle"
        write_bundle(out, views, 1.8, 0.05, gt)
        loaded_views, d_min, d_int, loaded_gt = load_bundle(out)
        assert (d_min, d_int) == (1.8, 0.05)
        assert len(loaded_views) == 3
        assert loaded_gt is not None
        np.testing.assert_array_equal(loaded_views[0].intrinsics,
                                      views[0].intrinsics)
        # images went through 8-bit quantization
        assert np.abs(loaded_views[0].image - views[0].image).max() <= 0.5 / 255
        np.testing.assert_allclose(loaded_gt[1].values, gt[1].values, atol=1e-6)

    def test_missing_image_rejected(self, tmp_path, plane_scene):
        views = plane_scene["views"]
        out = tmp_path / "bundle"
        write_bundle(out, views, 1.8, 0.05)
        (out / "view_0001.pgm").unlink()
        with pytest.raises(ParseError):
            load_bundle(out)

    def test_empty_dir_rejected(self, tmp_path):
        with pytest.raises(ParseError):
            load_bundle(tmp_path)
