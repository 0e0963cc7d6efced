import numpy as np
import pytest

from mvkit.core import AttentionMap, Frame, FrameSequence, KeypointSet, build_view_rig


def test_rig_m8_default_weights():
    rig = build_view_rig(8, 0)
    assert rig.novel_order.tolist() == [1, 7, 2, 6, 3, 5, 4]
    assert rig.omega_mv.tolist() == [0.25, 0.25, 0.1, 0.1, 0.1, 0.1, 0.1]
    assert rig.omega_mv.sum() == pytest.approx(1.0, abs=1e-12)


def test_rig_m4():
    rig = build_view_rig(4, 0)
    assert rig.azimuths.tolist() == [0.0, 90.0, 180.0, 270.0]
    assert rig.novel_order.tolist() == [1, 3, 2]
    assert rig.omega_mv.tolist() == [0.25, 0.25, 0.1]


def test_rig_single_view():
    rig = build_view_rig(1, 0)
    assert rig.novel_order.size == 0
    assert rig.omega_mv.size == 0


def test_rig_small_counts_all_quarter():
    assert build_view_rig(2, 0).omega_mv.tolist() == [0.25]
    assert build_view_rig(3, 0).omega_mv.tolist() == [0.25, 0.25]


def test_rig_nonzero_main():
    rig = build_view_rig(8, 3)
    # views 2 and 4 are the closest to view 3
    assert rig.novel_order.tolist()[:2] == [2, 4]
    assert rig.weight_of_view(2) == 0.25
    assert rig.weight_of_view(7) == 0.1


def test_rig_deterministic():
    a = build_view_rig(8, 0)
    b = build_view_rig(8, 0)
    assert np.array_equal(a.azimuths, b.azimuths)
    assert np.array_equal(a.omega_mv, b.omega_mv)
    assert np.array_equal(a.novel_order, b.novel_order)


@pytest.mark.parametrize("m", [2, 4, 6, 8, 10])
def test_rig_opposite_views(m):
    rig = build_view_rig(m, 0)
    for v in range(m):
        o = rig.opposite_view(v)
        d = abs(rig.azimuths[v] - rig.azimuths[o]) % 360.0
        assert min(d, 360.0 - d) == pytest.approx(180.0)


def test_rig_bad_args():
    with pytest.raises(ValueError):
        build_view_rig(0, 0)
    with pytest.raises(ValueError):
        build_view_rig(4, 4)
    with pytest.raises(ValueError):
        build_view_rig(4, -1)
    with pytest.raises(ValueError):
        build_view_rig(5, 0).opposite_view(1)


def test_frame_validation():
    f = Frame(pixels=np.zeros((4, 5, 2)))
    assert (f.height, f.width, f.channels) == (4, 5, 2)
    assert not f.pixels.flags.writeable
    with pytest.raises(ValueError):
        Frame(pixels=np.full((2, 2, 1), np.nan))
    with pytest.raises(ValueError):
        Frame(pixels=np.zeros((2, 2)))


def test_frame_sequence_validation():
    rig = build_view_rig(2, 0)
    frames = np.zeros((3, 2, 4, 4, 1))
    seq = FrameSequence(rig=rig, frames=frames)
    assert seq.frame_count == 3
    assert seq.frame_shape == (4, 4, 1)
    clamped = FrameSequence(rig=rig, frames=frames + 1.5).clamped()
    assert clamped.frames.max() == 1.0
    with pytest.raises(ValueError):
        FrameSequence(rig=rig, frames=np.zeros((1, 2, 4, 4, 1)))
    with pytest.raises(ValueError):
        FrameSequence(rig=rig, frames=np.zeros((3, 3, 4, 4, 1)))


def test_keypoint_set_validation():
    kp = KeypointSet(xy=np.zeros((5, 2)), confidence=np.ones(5))
    assert kp.count == 5
    with pytest.raises(ValueError):
        KeypointSet(xy=np.zeros((5, 2)), confidence=np.full(5, 1.5))
    with pytest.raises(ValueError):
        KeypointSet(xy=np.full((5, 2), np.inf), confidence=np.ones(5))


def test_attention_map_row_stochastic():
    ok = AttentionMap(np.full((3, 3), 1.0 / 3.0), row_stochastic=True)
    assert ok.size == 3
    with pytest.raises(ValueError):
        AttentionMap(np.eye(3) * 1.1, row_stochastic=True)
    with pytest.raises(ValueError):
        AttentionMap(np.array([[0.5, 0.5], [-0.1, 1.1]]))
    with pytest.raises(ValueError):
        AttentionMap(np.zeros((2, 3)))
