import numpy as np
import pytest

from mvkit.core import Frame, FrameSequence, build_view_rig
from mvkit.mvopt import (
    LossTrace,
    MvOptConfig,
    TraceRecord,
    block_stationarity,
    check_monotone,
    extract_pose,
    global_block_gradient,
    global_objective,
    init_state,
    loss_mv_pose,
    loss_mv_semantic,
    loss_temporal,
    mvopt_block_update,
    mvopt_converge,
    mvopt_run,
    objective_components,
    semantic_by_view,
    total_loss,
)
from mvkit.rng import generator
from mvkit.synth import SceneConfig, generate_scene, render_frame
from mvkit.core import KeypointSet


def render_pose(xy, h=24, w=24, sigma=1.5):
    kp = KeypointSet(xy=np.asarray(xy, dtype=float), confidence=np.ones(len(xy)))
    return render_frame(kp, h, w, sigma).pixels


def static_sequence(m_count=3, t_count=3, xy=((8.0, 9.0), (14.0, 12.0))):
    rig = build_view_rig(m_count, 0)
    frame = render_pose(xy)
    frames = np.broadcast_to(frame, (t_count, m_count) + frame.shape).copy()
    return FrameSequence(rig=rig, frames=frames)


class TestExtractPose:
    def test_single_pixel_mass(self):
        pixels = np.zeros((8, 8, 2))
        pixels[5, 3, 0] = 1.0  # (x, y) = (3, 5)
        pixels[2, 6, 1] = 1.0
        kp = extract_pose(Frame(pixels=pixels))
        assert np.allclose(kp.xy[0], [3.0, 5.0], atol=1e-6)
        assert np.allclose(kp.xy[1], [6.0, 2.0], atol=1e-6)
        assert kp.confidence.tolist() == [1.0, 1.0]

    def test_symmetric_two_pixel_mass(self):
        pixels = np.zeros((8, 8, 1))
        pixels[2, 2, 0] = 0.5
        pixels[2, 4, 0] = 0.5
        kp = extract_pose(pixels)
        assert np.allclose(kp.xy[0], [3.0, 2.0], atol=1e-6)

    def test_empty_channel_center_convention(self):
        pixels = np.zeros((9, 7, 1))
        kp = extract_pose(pixels)
        assert kp.xy[0].tolist() == [3.0, 4.0]
        assert kp.confidence[0] == 0.0

    def test_render_round_trip(self):
        target = np.array([[10.5, 7.25]])
        kp = KeypointSet(xy=target, confidence=np.ones(1))
        frame = render_frame(kp, 24, 24, 1.5)
        got = extract_pose(frame)
        assert np.abs(got.xy - target).max() < 0.5


class TestLosses:
    def test_identical_frames_zero(self):
        seq = static_sequence()
        assert loss_temporal(seq, 1) == 0.0
        assert loss_mv_pose(seq, 1) == 0.0
        assert loss_mv_semantic(seq, 1) == 0.0

    def test_temporal_translation_value(self):
        # both keypoints shift by (1, 0): squared displacement sums to 2
        rig = build_view_rig(1, 0)
        a = render_pose([(8.0, 9.0), (14.0, 12.0)])
        b = render_pose([(9.0, 9.0), (15.0, 12.0)])
        seq = FrameSequence(rig=rig, frames=np.stack([a, b])[:, None])
        assert loss_temporal(seq, 1) == pytest.approx(2.0, abs=1e-6)

    def test_empty_frames_zero(self):
        rig = build_view_rig(1, 0)
        frames = np.zeros((2, 1, 8, 8, 2))
        seq = FrameSequence(rig=rig, frames=frames)
        assert loss_temporal(seq, 1) == 0.0

    def test_temporal_needs_predecessor(self):
        seq = static_sequence()
        with pytest.raises(ValueError):
            loss_temporal(seq, 0)
        with pytest.raises(ValueError):
            loss_temporal(seq, 3)

    def test_mv_pose_two_views_unit_shift(self):
        rig = build_view_rig(2, 0)
        a = render_pose([(10.0, 10.0)])
        b = render_pose([(10.0, 11.0)])
        frames = np.stack([np.stack([a, a]), np.stack([b, b])])
        seq = FrameSequence(rig=rig, frames=frames)
        assert loss_mv_pose(seq, 1) == pytest.approx(2.0, abs=1e-6)

    def test_mv_pose_single_view_equals_temporal(self):
        rig = build_view_rig(1, 0)
        a = render_pose([(8.0, 9.0), (14.0, 12.0)])
        b = render_pose([(9.5, 9.0), (14.0, 13.5)])
        seq = FrameSequence(rig=rig, frames=np.stack([a, b])[:, None])
        assert loss_mv_pose(seq, 1) == pytest.approx(loss_temporal(seq, 1), abs=1e-12)

    def test_mv_pose_opposite_needs_even(self):
        seq = static_sequence(m_count=3)
        with pytest.raises(ValueError):
            loss_mv_pose(seq, 1, opposite_view_term=True)

    def test_mv_semantic_hand_value(self):
        # one novel view at weight 0.25, uniform +0.1 offset on a 2x2x1 frame
        rig = build_view_rig(2, 0)
        main = np.full((2, 2, 1), 0.4)
        novel = main + 0.1
        frames = np.stack([np.stack([main, novel])] * 2)
        seq = FrameSequence(rig=rig, frames=frames)
        assert loss_mv_semantic(seq, 1) == pytest.approx(0.01, abs=1e-15)

    def test_mv_semantic_zero_mask(self):
        rig = build_view_rig(2, 0)
        rng = generator(0, "sem-mask")
        frames = rng.uniform(0.0, 1.0, (2, 2, 4, 4, 2))
        seq = FrameSequence(rig=rig, frames=frames)
        assert loss_mv_semantic(seq, 1, mask=np.zeros((4, 4))) == 0.0
        assert loss_mv_semantic(seq, 1) > 0.0


class TestTotalLoss:
    def test_global_minimum(self):
        seq = static_sequence()
        f, grad = total_loss(seq, 1, 0, MvOptConfig())
        assert f == 0.0
        assert np.allclose(grad, 0.0)

    def test_weight_zeroing(self):
        scene = generate_scene(
            SceneConfig(frame_count=3, view_count=3, height=24, width=24, seed=3,
                        sigmas=(0.05, 0.1, 0.1))
        )
        cfg = MvOptConfig(w2=0.0, w3=0.0)
        f, _ = total_loss(scene.corrupted, 1, 0, cfg)
        assert f == pytest.approx(loss_temporal(scene.corrupted, 1), rel=1e-12)

    def test_gradient_matches_finite_differences_seed7(self):
        rng = generator(7, "fd-seed")
        rig = build_view_rig(3, 0)
        frames = rng.uniform(0.05, 0.95, (3, 3, 8, 8, 2))
        seq = FrameSequence(rig=rig, frames=frames)
        cfg = MvOptConfig()
        for t, view in [(1, 0), (1, 2), (2, 1)]:
            _, grad = total_loss(seq, t, view, cfg)
            fd = np.zeros_like(grad)
            h = 1e-5
            for idx in np.ndindex(*grad.shape):
                fp = np.array(frames)
                fp[t, view][idx] += h
                fm = np.array(frames)
                fm[t, view][idx] -= h
                fd[idx] = (
                    total_loss(FrameSequence(rig=rig, frames=fp), t, view, cfg)[0]
                    - total_loss(FrameSequence(rig=rig, frames=fm), t, view, cfg)[0]
                ) / (2 * h)
            rel = np.linalg.norm(grad - fd) / max(np.linalg.norm(grad), np.linalg.norm(fd))
            assert rel < 1e-5

    def test_components_sum_to_objective(self):
        scene = generate_scene(
            SceneConfig(frame_count=3, view_count=4, height=24, width=24, seed=5,
                        sigmas=(0.1, 0.1, 0.05, 0.2))
        )
        cfg = MvOptConfig()
        f, l1, l2, l3 = objective_components(scene.corrupted, cfg)
        assert f == pytest.approx(cfg.w1 * l1 + cfg.w2 * l2 + cfg.w3 * l3, rel=1e-15)
        assert f == global_objective(scene.corrupted, cfg)


class TestBlockUpdate:
    def test_no_op_at_global_minimum(self):
        seq = static_sequence()
        state = init_state(seq, MvOptConfig())
        mvopt_block_update(state, 1, 0)
        assert np.array_equal(state.sequence.frames, seq.frames)
        assert state.trace.records[-1].f_total == 0.0

    def test_semantic_only_update_decreases(self):
        rig = build_view_rig(2, 0)
        main = render_pose([(10.0, 10.0)])
        novel = render_pose([(12.0, 13.0)])
        frames = np.stack([np.stack([main, novel])] * 2)
        seq = FrameSequence(rig=rig, frames=frames)
        cfg = MvOptConfig(w1=0.0, w2=0.0)
        state = init_state(seq, cfg)
        f0 = state.f_total
        mvopt_block_update(state, 1, 1)
        assert state.f_total < f0

    def test_exhausted_backtracks_leaves_unchanged(self):
        scene = generate_scene(
            SceneConfig(frame_count=3, view_count=2, height=24, width=24, seed=6,
                        sigmas=(0.1, 0.1))
        )
        cfg = MvOptConfig(step_init=1e14, max_backtracks=0)
        state = init_state(scene.corrupted, cfg)
        f0 = state.f_total
        mvopt_block_update(state, 1, 0)
        assert state.f_total == f0
        assert np.array_equal(state.sequence.frames, scene.corrupted.frames)
        assert state.trace.records[-1].step == 0.0

    def test_schedule_position_validated(self):
        state = init_state(static_sequence(), MvOptConfig())
        with pytest.raises(ValueError):
            mvopt_block_update(state, 0, 0)
        with pytest.raises(ValueError):
            mvopt_block_update(state, 1, 5)

    def test_zero_weights_make_novel_blocks_inert(self):
        scene = generate_scene(
            SceneConfig(frame_count=3, view_count=3, height=24, width=24, seed=8,
                        sigmas=(0.1, 0.1, 0.1))
        )
        cfg = MvOptConfig(w2=0.0, w3=0.0)
        for t in (1, 2):
            for view in (1, 2):
                g = global_block_gradient(scene.corrupted, t, view, cfg)
                assert np.allclose(g, 0.0)


class TestRun:
    def _scene(self, seed=42):
        return generate_scene(
            SceneConfig(frame_count=4, view_count=4, height=24, width=24, seed=seed,
                        sigmas=(0.05, 0.12, 0.2, 0.08))
        )

    def test_already_optimal_identity(self):
        seq = static_sequence(m_count=4, t_count=4)
        refined, trace = mvopt_run(seq, MvOptConfig())
        assert np.array_equal(refined.frames, seq.frames)
        assert np.all(trace.f_values() == 0.0)

    def test_zero_passes_identity(self):
        scene = self._scene()
        refined, trace = mvopt_run(scene.corrupted, MvOptConfig(passes_per_timestamp=0))
        assert np.array_equal(refined.frames, scene.corrupted.frames)
        assert len(trace) == 1  # baseline only

    def test_monotone_and_effective(self):
        scene = self._scene()
        refined, trace = mvopt_run(scene.corrupted, MvOptConfig())
        ok, violation = check_monotone(trace)
        assert ok and violation is None
        f = trace.f_values()
        assert f[-1] < 0.6 * f[0]
        # record layout: baseline plus one record per block update
        assert len(trace) == 1 + (4 - 1) * 8 * 4

    def test_trace_deterministic(self):
        scene = self._scene(seed=13)
        _, trace_a = mvopt_run(scene.corrupted, MvOptConfig())
        _, trace_b = mvopt_run(scene.corrupted, MvOptConfig())
        assert trace_a.records == trace_b.records

    def test_converge_reaches_stationarity(self):
        scene = self._scene(seed=21)
        cfg = MvOptConfig()
        res = mvopt_converge(scene.corrupted, cfg, sweep_tol=1e-10, max_sweeps=2000)
        assert res.converged
        ok, _ = check_monotone(res.trace)
        assert ok
        norms = block_stationarity(res.sequence, cfg)
        assert norms.max() < 1e-4

    def test_semantic_by_view_accounting(self):
        scene = self._scene(seed=17)
        per_view = semantic_by_view(scene.corrupted)
        assert per_view[scene.rig.main_index] == 0.0
        total = sum(
            loss_mv_semantic(scene.corrupted, t) for t in range(1, scene.config.frame_count)
        )
        weighted = sum(
            scene.rig.weight_of_view(int(v)) * per_view[int(v)] for v in scene.rig.novel_order
        )
        assert weighted == pytest.approx(total, rel=1e-12)


class TestMonotoneCheck:
    def _trace(self, values):
        trace = LossTrace()
        for i, f in enumerate(values):
            trace.append(
                TraceRecord(
                    update=i, t=0, view=0, pass_index=0, f_total=f,
                    l_temp=0.0, l_mv_pose=0.0, l_mv_semantic=0.0, step=0.0, backtracks=0,
                )
            )
        return trace

    def test_decreasing_ok(self):
        ok, violation = check_monotone(self._trace([3.0, 2.0, 1.0]))
        assert ok and violation is None

    def test_flat_ok(self):
        ok, _ = check_monotone(self._trace([1.0, 1.0]))
        assert ok

    def test_violation_index(self):
        ok, violation = check_monotone(self._trace([1.0, 1.0 + 1e-6]), tol=1e-9)
        assert not ok
        assert violation == 1

    def test_empty_trace_rejected(self):
        with pytest.raises(ValueError):
            check_monotone(LossTrace())


class TestStationarityNorms:
    def test_zero_at_global_minimum(self):
        seq = static_sequence(m_count=3, t_count=3)
        norms = block_stationarity(seq, MvOptConfig())
        assert norms.shape == (2, 3)
        assert np.allclose(norms, 0.0)

    def test_semantic_only_hand_value(self):
        # pixel objective w3 * omega * |f - main|^2 has gradient
        # 2 w3 omega (f - main), so the norm is 2 w3 omega |residual|
        rig = build_view_rig(2, 0)
        main = render_pose([(10.0, 10.0)])
        novel = render_pose([(12.0, 13.0)])
        frames = np.stack([np.stack([main, novel])] * 2)
        seq = FrameSequence(rig=rig, frames=frames)
        cfg = MvOptConfig(w1=0.0, w2=0.0)
        norms = block_stationarity(seq, cfg)
        expected = 2 * cfg.w3 * 0.25 * np.linalg.norm(novel - main)
        assert norms[0, 1] == pytest.approx(expected, rel=1e-12)

    def test_opposite_term_gradient_fd(self):
        rng = generator(15, "opp-fd")
        rig = build_view_rig(4, 0)
        frames = rng.uniform(0.05, 0.95, (3, 4, 8, 8, 2))
        seq = FrameSequence(rig=rig, frames=frames)
        cfg = MvOptConfig(opposite_view_term=True)
        grad = global_block_gradient(seq, 1, 2, cfg)
        fd = np.zeros_like(grad)
        h = 1e-5
        for idx in np.ndindex(*grad.shape):
            fp = np.array(frames)
            fp[1, 2][idx] += h
            fm = np.array(frames)
            fm[1, 2][idx] -= h
            fd[idx] = (
                global_objective(FrameSequence(rig=rig, frames=fp), cfg)
                - global_objective(FrameSequence(rig=rig, frames=fm), cfg)
            ) / (2 * h)
        rel = np.linalg.norm(grad - fd) / max(np.linalg.norm(grad), np.linalg.norm(fd))
        assert rel < 1e-5


def test_config_validation():
    with pytest.raises(ValueError):
        MvOptConfig(w1=-0.1)
    with pytest.raises(ValueError):
        MvOptConfig(shrink=1.0)
    with pytest.raises(ValueError):
        MvOptConfig(c_decrease=0.0)
    with pytest.raises(ValueError):
        MvOptConfig(step_growth=0.5)
    cfg = MvOptConfig()
    assert (cfg.w1, cfg.w2, cfg.w3) == (1.0, 0.1, 0.02)
    assert cfg.passes_per_timestamp == 8
