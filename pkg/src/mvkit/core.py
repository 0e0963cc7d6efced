"""Shared domain types and view-rig construction.

All types are immutable after construction (arrays are copied and marked
read-only), so instances can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _frozen(a, dtype=np.float64) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def angular_distance(a: float, b: float) -> float:
    """Circular distance between two azimuths in degrees."""
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


@dataclass(frozen=True)
class ViewRig:
    """M azimuthal views around a subject, one of them the main view.

    ``novel_order`` lists the non-main views sorted by angular distance to
    the main view (ties broken by lower view index); ``omega_mv[i]`` is the
    semantic-loss weight of view ``novel_order[i]``.
    """

    view_count: int
    azimuths: np.ndarray
    main_index: int
    omega_mv: np.ndarray
    novel_order: np.ndarray

    def __post_init__(self):
        if self.view_count < 1:
            raise ValueError("view_count must be >= 1")
        if not 0 <= self.main_index < self.view_count:
            raise ValueError(f"main_index {self.main_index} out of range [0, {self.view_count})")
        az = self.azimuths
        if az.shape != (self.view_count,):
            raise ValueError("azimuths must have one entry per view")
        if np.any(az < 0.0) or np.any(az >= 360.0) or np.any(np.diff(az) <= 0.0):
            raise ValueError("azimuths must be strictly increasing in [0, 360)")
        if self.omega_mv.shape != (self.view_count - 1,):
            raise ValueError("omega_mv must have one entry per novel view")
        if np.any(self.omega_mv <= 0.0):
            raise ValueError("omega_mv entries must be > 0")
        expected = set(range(self.view_count)) - {self.main_index}
        if set(self.novel_order.tolist()) != expected:
            raise ValueError("novel_order must be a permutation of the novel views")

    def weight_of_view(self, view: int) -> float:
        """Semantic weight of the given novel view index."""
        pos = int(np.nonzero(self.novel_order == view)[0][0])
        return float(self.omega_mv[pos])

    def opposite_view(self, view: int) -> int:
        """The view half a turn away; defined for even view counts only."""
        if self.view_count % 2 != 0:
            raise ValueError("opposite views exist only for even view counts")
        return (view + self.view_count // 2) % self.view_count


def build_view_rig(view_count: int, main_index: int, omega_mv=None) -> ViewRig:
    """Construct the uniform azimuthal rig with default novel-view weights.

    View ``m`` sits at azimuth ``m * 360 / M``. The two novel views closest
    in angle to the main view get weight 0.25, the rest 0.1 (with two or
    fewer novel views, all get 0.25). ``omega_mv`` overrides the default
    weights; it is indexed along ``novel_order``.
    """
    if view_count < 1:
        raise ValueError("view_count must be >= 1")
    if not 0 <= main_index < view_count:
        raise ValueError(f"main_index {main_index} out of range [0, {view_count})")
    azimuths = np.arange(view_count, dtype=np.float64) * (360.0 / view_count)
    main_az = azimuths[main_index]
    novel = [m for m in range(view_count) if m != main_index]
    novel.sort(key=lambda m: (angular_distance(azimuths[m], main_az), m))
    n_novel = len(novel)
    if omega_mv is None:
        if n_novel <= 2:
            omega = np.full(n_novel, 0.25)
        else:
            omega = np.full(n_novel, 0.1)
            omega[:2] = 0.25
    else:
        omega = np.asarray(omega_mv, dtype=np.float64)
        if omega.shape != (n_novel,):
            raise ValueError("omega_mv override must have one entry per novel view")
    return ViewRig(
        view_count=view_count,
        azimuths=_frozen(azimuths),
        main_index=int(main_index),
        omega_mv=_frozen(omega),
        novel_order=_frozen(novel, dtype=np.int64),
    )


def _as_pixels(frame) -> np.ndarray:
    """Accept a Frame or a raw (H, W, C) array."""
    a = frame.pixels if isinstance(frame, Frame) else np.asarray(frame, dtype=np.float64)
    if a.ndim != 3:
        raise ValueError(f"expected an (H, W, C) pixel array, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class Frame:
    """One multi-channel raster, a channel per skeleton part.

    Values are in [0, 1] straight after rendering; optimizer iterates may
    leave that range, so only finiteness is enforced here.
    """

    pixels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pixels", _frozen(self.pixels))
        if self.pixels.ndim != 3 or min(self.pixels.shape) < 1:
            raise ValueError("pixels must be a nonempty (H, W, C) array")
        if not np.all(np.isfinite(self.pixels)):
            raise ValueError("pixel values must be finite")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True)
class FrameSequence:
    """T x M grid of frames over a rig; the optimization variable.

    ``frames`` has shape (T, M, H, W, C). T >= 2 because the temporal losses
    need a predecessor frame.
    """

    rig: ViewRig
    frames: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "frames", _frozen(self.frames))
        f = self.frames
        if f.ndim != 5:
            raise ValueError("frames must be a (T, M, H, W, C) array")
        if f.shape[0] < 2:
            raise ValueError("need at least two timestamps")
        if f.shape[1] != self.rig.view_count:
            raise ValueError(f"frames have {f.shape[1]} views, rig has {self.rig.view_count}")
        if not np.all(np.isfinite(f)):
            raise ValueError("frame values must be finite")

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_shape(self) -> tuple[int, int, int]:
        return self.frames.shape[2:]

    def frame(self, t: int, view: int) -> Frame:
        return Frame(self.frames[t, view])

    def clamped(self) -> "FrameSequence":
        """Copy with pixels clipped to [0, 1]; the final-output step."""
        return FrameSequence(rig=self.rig, frames=np.clip(self.frames, 0.0, 1.0))


@dataclass(frozen=True)
class KeypointSet:
    """J 2-D keypoints in pixel coordinates with confidences in [0, 1]."""

    xy: np.ndarray
    confidence: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "xy", _frozen(self.xy))
        object.__setattr__(self, "confidence", _frozen(self.confidence))
        if self.xy.ndim != 2 or self.xy.shape[1] != 2:
            raise ValueError("xy must be a (J, 2) array")
        if self.confidence.shape != (self.xy.shape[0],):
            raise ValueError("confidence must have one entry per keypoint")
        if not np.all(np.isfinite(self.xy)):
            raise ValueError("keypoint coordinates must be finite")
        if np.any(self.confidence < 0.0) or np.any(self.confidence > 1.0):
            raise ValueError("confidences must lie in [0, 1]")

    @property
    def count(self) -> int:
        return self.xy.shape[0]


ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class AttentionMap:
    """Square nonnegative matrix, optionally validated as row-stochastic."""

    matrix: np.ndarray
    row_stochastic: bool = field(default=False)

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("matrix must be square")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix entries must be finite")
        if np.any(m < 0.0):
            raise ValueError("matrix entries must be nonnegative")
        if self.row_stochastic:
            sums = m.sum(axis=1)
            if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
                worst = int(np.argmax(np.abs(sums - 1.0)))
                raise ValueError(f"row {worst} sums to {sums[worst]!r}, not 1")

    @property
    def size(self) -> int:
        return self.matrix.shape[0]
