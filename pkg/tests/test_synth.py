import numpy as np
import pytest

from mvkit.mvopt import extract_pose, global_objective, MvOptConfig
from mvkit.synth import (
    DEFAULT_BONES,
    MotionParams,
    SceneConfig,
    Skeleton3D,
    corrupt_views,
    generate_scene,
    make_skeleton_sequence,
    project_view,
    render_frame,
)
from mvkit.core import KeypointSet
from mvkit.rng import generator


def small_config(seed=0, **kw):
    defaults = dict(frame_count=4, view_count=4, height=24, width=24, seed=seed)
    defaults.update(kw)
    return SceneConfig(**defaults)


class TestSkeleton:
    def test_static_with_zero_motion(self):
        cfg = small_config()
        skel = make_skeleton_sequence(cfg, MotionParams.zero())
        assert np.allclose(skel.positions, skel.positions[0])

    def test_same_seed_identical(self):
        cfg = small_config(seed=3)
        a = make_skeleton_sequence(cfg)
        b = make_skeleton_sequence(cfg)
        assert np.array_equal(a.positions, b.positions)

    def test_bone_lengths_rigid(self):
        cfg = SceneConfig(frame_count=16, view_count=2, height=24, width=24, seed=5)
        skel = make_skeleton_sequence(cfg)
        lengths = np.array(
            [
                [np.linalg.norm(skel.positions[t, c] - skel.positions[t, p]) for p, c in skel.bones]
                for t in range(16)
            ]
        )
        assert np.abs(lengths - lengths[0]).max() < 1e-9

    def test_tree_validation(self):
        with pytest.raises(ValueError):
            Skeleton3D(positions=np.zeros((2, 13, 3)), bones=((0, 1), (0, 1)) + DEFAULT_BONES[2:])


class TestProjection:
    def test_frontal_view_is_canonical(self):
        cfg = small_config(seed=1)
        skel = make_skeleton_sequence(cfg)
        kp = project_view(skel, 0, 0.0, 24, 24)
        x = skel.positions[0, :, 0]
        y = skel.positions[0, :, 1]
        scale = 0.36 * 24
        assert np.allclose(kp.xy[:, 0], 11.5 + scale * x)
        assert np.allclose(kp.xy[:, 1], 11.5 - scale * y)

    def test_opposite_azimuth_mirrors_x(self):
        cfg = small_config(seed=2)
        skel = make_skeleton_sequence(cfg)
        front = project_view(skel, 1, 0.0, 24, 24)
        back = project_view(skel, 1, 180.0, 24, 24)
        assert np.allclose(back.xy[:, 0], 23.0 - front.xy[:, 0], atol=1e-9)
        assert np.allclose(back.xy[:, 1], front.xy[:, 1], atol=1e-12)

    def test_quarter_turn_uses_depth_axis(self):
        cfg = small_config(seed=2)
        skel = make_skeleton_sequence(cfg)
        side = project_view(skel, 0, 90.0, 24, 24)
        depth = skel.positions[0, :, 2]
        assert np.allclose(side.xy[:, 0], 11.5 - 0.36 * 24 * depth, atol=1e-9)

    def test_confidence_range(self):
        cfg = small_config(seed=4)
        skel = make_skeleton_sequence(cfg)
        kp = project_view(skel, 0, 45.0, 24, 24)
        assert kp.confidence.min() == pytest.approx(0.3)
        assert kp.confidence.max() == pytest.approx(1.0)


class TestRendering:
    def test_far_keypoint_contributes_nothing(self):
        kp = KeypointSet(xy=np.array([[500.0, 500.0]]), confidence=np.ones(1))
        frame = render_frame(kp, 16, 16, 1.5)
        assert frame.pixels.max() < 1e-30

    def test_round_trip_single_blob(self):
        kp = KeypointSet(xy=np.array([[10.5, 7.25]]), confidence=np.ones(1))
        frame = render_frame(kp, 24, 24, 1.5)
        got = extract_pose(frame)
        assert np.abs(got.xy - kp.xy).max() < 0.5

    def test_identical_keypoints_identical_channels(self):
        kp = KeypointSet(xy=np.array([[8.0, 9.0], [8.0, 9.0]]), confidence=np.ones(2))
        frame = render_frame(kp, 20, 20, 1.2)
        assert np.array_equal(frame.pixels[:, :, 0], frame.pixels[:, :, 1])

    def test_round_trip_full_figures(self):
        for seed in range(4):
            scene = generate_scene(small_config(seed=seed, height=32, width=32))
            for t in range(scene.config.frame_count):
                for m in range(scene.config.view_count):
                    got = extract_pose(scene.clean.frames[t, m])
                    want = scene.keypoints[t][m]
                    err = np.sqrt(((got.xy - want.xy) ** 2).sum(axis=1)).max()
                    assert err <= 0.5


class TestCorruption:
    def test_zero_sigma_is_identity(self):
        scene = generate_scene(small_config(seed=7))
        out = corrupt_views(scene.clean, np.zeros(4), seed=7)
        assert np.array_equal(out.frames, scene.clean.frames)

    def test_same_seed_identical(self):
        scene = generate_scene(small_config(seed=8))
        a = corrupt_views(scene.clean, np.full(4, 0.1), seed=1)
        b = corrupt_views(scene.clean, np.full(4, 0.1), seed=1)
        assert np.array_equal(a.frames, b.frames)
        c = corrupt_views(scene.clean, np.full(4, 0.1), seed=2)
        assert not np.array_equal(a.frames, c.frames)

    def test_noise_std_mid_gray(self):
        rig = scene = None
        from mvkit.core import FrameSequence, build_view_rig

        rig = build_view_rig(2, 0)
        frames = np.full((2, 2, 64, 64, 16), 0.5)
        seq = FrameSequence(rig=rig, frames=frames)
        noisy = corrupt_views(seq, [0.1, 0.1], seed=3)
        resid = noisy.frames - 0.5
        assert 0.097 <= resid.std() <= 0.103

    def test_cross_view_y_consistency(self):
        scene = generate_scene(small_config(seed=9, view_count=6))
        for t in range(scene.config.frame_count):
            ys = np.array([scene.keypoints[t][m].xy[:, 1] for m in range(6)])
            assert np.abs(ys - ys[0]).max() < 1e-9

    def test_corruption_raises_objective(self):
        cfg = MvOptConfig()
        for seed in range(5):
            rng = generator(seed, "test-corrupt")
            config = small_config(seed=seed, sigmas=tuple(rng.uniform(0.05, 0.2, 4)))
            scene = generate_scene(config)
            assert global_objective(scene.corrupted, cfg) > global_objective(scene.clean, cfg)


class TestSceneConfig:
    def test_sigma_length_checked(self):
        with pytest.raises(ValueError):
            SceneConfig(frame_count=4, view_count=4, height=16, width=16, seed=0, sigmas=(0.1,) * 3)

    def test_frame_count_minimum(self):
        with pytest.raises(ValueError):
            SceneConfig(frame_count=1, view_count=2, height=16, width=16, seed=0)

    def test_scene_determinism(self):
        cfg = small_config(seed=11, sigmas=(0.05, 0.1, 0.15, 0.2))
        a = generate_scene(cfg)
        b = generate_scene(cfg)
        assert np.array_equal(a.corrupted.frames, b.corrupted.frames)
        assert np.array_equal(a.clean.frames, b.clean.frames)
