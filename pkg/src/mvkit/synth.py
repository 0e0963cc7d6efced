"""Deterministic synthetic multi-view scenes.

An articulated 13-joint stick figure moves sinusoidally, is projected
orthographically to M evenly spaced azimuthal views, rendered to per-joint
heatmap channels, and corrupted with per-view Gaussian pixel noise. The
corruption level plays the role of per-view unreliability, which ties the
scenes to the fusion model and gives the sequence optimizer something real
to remove.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backends
from .core import Frame, FrameSequence, KeypointSet, ViewRig, build_view_rig
from .rng import generator

# joint layout: 0 pelvis, 1 neck, 2 head, 3-5 left arm, 6-8 right arm,
# 9-10 left leg, 11-12 right leg
JOINT_NAMES = (
    "pelvis",
    "neck",
    "head",
    "l_shoulder",
    "l_elbow",
    "l_wrist",
    "r_shoulder",
    "r_elbow",
    "r_wrist",
    "l_knee",
    "l_ankle",
    "r_knee",
    "r_ankle",
)

DEFAULT_BONES = (
    (0, 1),
    (1, 2),
    (1, 3),
    (3, 4),
    (4, 5),
    (1, 6),
    (6, 7),
    (7, 8),
    (0, 9),
    (9, 10),
    (0, 11),
    (11, 12),
)

# rest offsets child relative to parent, scene units, y up
_REST_OFFSETS = {
    1: (0.0, 0.52, 0.0),
    2: (0.0, 0.26, 0.0),
    3: (-0.22, -0.04, 0.0),
    4: (-0.05, -0.26, 0.0),
    5: (-0.03, -0.24, 0.0),
    6: (0.22, -0.04, 0.0),
    7: (0.05, -0.26, 0.0),
    8: (0.03, -0.24, 0.0),
    9: (-0.12, -0.44, 0.0),
    10: (0.0, -0.4, 0.0),
    11: (0.12, -0.44, 0.0),
    12: (0.0, -0.4, 0.0),
}

# rotation axis per animated bone: arms and legs swing in the sagittal
# plane (about x), the spine and head sway laterally (about z)
_BONE_AXES = {1: "z", 2: "z", 4: "x", 5: "x", 7: "x", 8: "x", 9: "x", 10: "x", 11: "x", 12: "x"}
_AMPLITUDE_SCALE = {1: 0.1, 2: 0.15, 4: 0.5, 5: 0.5, 7: 0.5, 8: 0.5, 9: 0.3, 10: 0.3, 11: 0.3, 12: 0.3}

# stroke width and endpoint inset keep the segments faint enough that
# channel centroids stay within half a pixel of the true keypoints
BONE_INTENSITY = 0.2
BONE_SIGMA = 0.3
BONE_INSET = 0.15


@dataclass(frozen=True)
class SceneConfig:
    """Everything needed to regenerate one scene bit for bit."""

    frame_count: int
    view_count: int
    height: int
    width: int
    seed: int
    joint_count: int = 13
    blob_sigma: float = 1.5
    sigmas: tuple[float, ...] | None = None
    main_index: int = 0

    def __post_init__(self):
        if min(self.frame_count, self.view_count, self.height, self.width) < 1:
            raise ValueError("frame_count, view_count, height and width must be positive")
        if self.frame_count < 2:
            raise ValueError("need at least two timestamps")
        if self.joint_count != len(JOINT_NAMES):
            raise ValueError(f"only the {len(JOINT_NAMES)}-joint figure is supported")
        if self.blob_sigma <= 0.0:
            raise ValueError("blob_sigma must be > 0")
        sig = self.sigmas
        if sig is None:
            sig = (0.0,) * self.view_count
        sig = tuple(float(s) for s in np.atleast_1d(sig))
        if len(sig) != self.view_count:
            raise ValueError(f"need one sigma per view, got {len(sig)} for {self.view_count} views")
        if any(s < 0.0 or not np.isfinite(s) for s in sig):
            raise ValueError("sigmas must be finite and >= 0")
        object.__setattr__(self, "sigmas", sig)


@dataclass(frozen=True)
class MotionParams:
    """Sinusoidal bone rotations plus a global lateral sway of the root."""

    amplitude: np.ndarray
    speed: np.ndarray
    phase: np.ndarray
    sway_amplitude: float
    sway_speed: float
    sway_phase: float

    @classmethod
    def zero(cls, bone_count: int = len(DEFAULT_BONES)) -> "MotionParams":
        z = np.zeros(bone_count)
        return cls(z, z.copy(), z.copy(), 0.0, 0.0, 0.0)

    @classmethod
    def from_seed(cls, seed: int, bone_count: int = len(DEFAULT_BONES)) -> "MotionParams":
        rng = generator(seed, "skeleton-motion")
        scale = np.array([_AMPLITUDE_SCALE.get(child, 0.0) for _, child in DEFAULT_BONES])
        amplitude = scale * rng.uniform(0.5, 1.0, bone_count)
        speed = rng.uniform(0.6, 1.4, bone_count)
        phase = rng.uniform(0.0, 2.0 * np.pi, bone_count)
        return cls(amplitude, speed, phase, float(rng.uniform(0.04, 0.1)), 1.0,
                   float(rng.uniform(0.0, 2.0 * np.pi)))


@dataclass(frozen=True)
class Skeleton3D:
    """Joint trajectories (T, J, 3) over a fixed bone tree."""

    positions: np.ndarray
    bones: tuple[tuple[int, int], ...] = DEFAULT_BONES
    motion: MotionParams | None = None

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=np.float64)
        object.__setattr__(self, "positions", p)
        if p.ndim != 3 or p.shape[2] != 3:
            raise ValueError("positions must have shape (T, J, 3)")
        if p.shape[1] < 5:
            raise ValueError("need at least 5 joints")
        if not np.all(np.isfinite(p)):
            raise ValueError("positions must be finite")
        children = [c for _, c in self.bones]
        if len(set(children)) != len(children) or len(self.bones) != p.shape[1] - 1:
            raise ValueError("bones must form a tree over the joints")

    @property
    def frame_count(self) -> int:
        return self.positions.shape[0]

    @property
    def joint_count(self) -> int:
        return self.positions.shape[1]


def _axis_rotation(axis: str, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    if axis == "x":
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    if axis == "z":
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def make_skeleton_sequence(config: SceneConfig, motion: MotionParams | None = None) -> Skeleton3D:
    """Animate the stick figure; rotations are rigid, so bone lengths are exact."""
    if motion is None:
        motion = MotionParams.from_seed(config.seed)
    t_count = config.frame_count
    j_count = config.joint_count
    positions = np.zeros((t_count, j_count, 3))
    for t in range(t_count):
        tau = 2.0 * np.pi * t / t_count
        root_x = motion.sway_amplitude * np.sin(motion.sway_speed * tau + motion.sway_phase)
        positions[t, 0] = (root_x, 0.0, 0.0)
        for b, (parent, child) in enumerate(DEFAULT_BONES):
            offset = np.array(_REST_OFFSETS[child])
            angle = motion.amplitude[b] * np.sin(motion.speed[b] * tau + motion.phase[b])
            rot = _axis_rotation(_BONE_AXES.get(child, "x"), angle)
            positions[t, child] = positions[t, parent] + rot @ offset
    return Skeleton3D(positions=positions, motion=motion)


def pixels_per_unit(height: int, width: int) -> float:
    return 0.36 * min(height, width)


def project_view(
    skeleton: Skeleton3D,
    t: int,
    azimuth: float,
    height: int,
    width: int,
    scale: float | None = None,
) -> KeypointSet:
    """Orthographic projection of the figure as seen from the given azimuth.

    The scene is rotated by -azimuth about the vertical axis and flattened
    along the depth axis; confidence falls linearly from 1 (closest joint)
    to 0.3 (farthest).
    """
    if not 0 <= t < skeleton.frame_count:
        raise ValueError(f"timestamp {t} out of range")
    if scale is None:
        scale = pixels_per_unit(height, width)
    phi = np.deg2rad(azimuth)
    pts = skeleton.positions[t]
    x = np.cos(phi) * pts[:, 0] - np.sin(phi) * pts[:, 2]
    depth = np.sin(phi) * pts[:, 0] + np.cos(phi) * pts[:, 2]
    y = pts[:, 1]
    px = (width - 1) / 2.0 + scale * x
    py = (height - 1) / 2.0 - scale * y
    near, far = depth.max(), depth.min()
    span = near - far
    if span > 0.0:
        conf = 1.0 - 0.7 * (near - depth) / span
    else:
        conf = np.ones_like(depth)
    return KeypointSet(xy=np.stack([px, py], axis=1), confidence=conf)


def render_frame(
    keypoints: KeypointSet,
    height: int,
    width: int,
    blob_sigma: float,
    bones: tuple[tuple[int, int], ...] | None = None,
) -> Frame:
    """Rasterize keypoints as per-channel Gaussian blobs with faint bone segments.

    Channel j peaks at keypoints.confidence[j]; each bone adds a soft
    segment at 0.2 intensity to both endpoint channels. Output is clamped
    to [0, 1].
    """
    if blob_sigma <= 0.0:
        raise ValueError("blob_sigma must be > 0")
    xy = keypoints.xy
    pixels = backends.render_blobs(
        np.ascontiguousarray(xy[:, 0]),
        np.ascontiguousarray(xy[:, 1]),
        np.ascontiguousarray(keypoints.confidence),
        height,
        width,
        float(blob_sigma),
    )
    if bones:
        pixels = np.ascontiguousarray(pixels)
        for parent, child in bones:
            pa, pb = xy[parent], xy[child]
            x0, y0 = pa + BONE_INSET * (pb - pa)
            x1, y1 = pb - BONE_INSET * (pb - pa)
            for channel in (parent, child):
                img = np.ascontiguousarray(pixels[:, :, channel])
                backends.add_soft_segment(img, x0, y0, x1, y1, BONE_INTENSITY, BONE_SIGMA)
                pixels[:, :, channel] = img
    return Frame(pixels=np.clip(pixels, 0.0, 1.0))


def corrupt_views(clean: FrameSequence, sigmas, seed: int) -> FrameSequence:
    """Add per-view Gaussian pixel noise, clamped to [0, 1].

    Each (t, view) frame gets its own derived noise stream, so corruption
    of one frame never depends on the others.
    """
    sigmas = np.atleast_1d(np.asarray(sigmas, dtype=np.float64))
    t_count, m_count = clean.frames.shape[:2]
    if sigmas.shape != (m_count,):
        raise ValueError(f"need one sigma per view, got {sigmas.shape[0]} for {m_count}")
    out = np.array(clean.frames, copy=True)
    for t in range(t_count):
        for m in range(m_count):
            s = sigmas[m]
            if s > 0.0:
                noise = generator(seed, "corrupt", t, m).standard_normal(out[t, m].shape)
                out[t, m] = np.clip(out[t, m] + s * noise, 0.0, 1.0)
    return FrameSequence(rig=clean.rig, frames=out)


@dataclass(frozen=True)
class SyntheticScene:
    """A generated scene: rig, clean and corrupted sequences, true keypoints."""

    config: SceneConfig
    rig: ViewRig
    clean: FrameSequence
    corrupted: FrameSequence
    keypoints: tuple[tuple[KeypointSet, ...], ...] = field(repr=False)


def generate_scene(config: SceneConfig, motion: MotionParams | None = None) -> SyntheticScene:
    """Full pipeline: skeleton, projection, rendering, per-view corruption."""
    rig = build_view_rig(config.view_count, config.main_index)
    skeleton = make_skeleton_sequence(config, motion)
    frames = np.empty(
        (config.frame_count, config.view_count, config.height, config.width, config.joint_count)
    )
    keypoints = []
    for t in range(config.frame_count):
        row = []
        for m in range(config.view_count):
            kp = project_view(skeleton, t, rig.azimuths[m], config.height, config.width)
            frames[t, m] = render_frame(
                kp, config.height, config.width, config.blob_sigma, skeleton.bones
            ).pixels
            row.append(kp)
        keypoints.append(tuple(row))
    clean = FrameSequence(rig=rig, frames=frames)
    corrupted = corrupt_views(clean, np.asarray(config.sigmas), config.seed)
    return SyntheticScene(
        config=config, rig=rig, clean=clean, corrupted=corrupted, keypoints=tuple(keypoints)
    )
