"""Scene container, verify report, and trace serialization.

Scenes and reports are JSON, traces CSV. Floats are written with Python's
shortest round-trip repr, so read(write(x)) reproduces every value exactly.
Scene frames are stored as nested arrays indexed [t][m][channel][y][x].
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .core import FrameSequence, ViewRig, build_view_rig
from .errors import SceneFormatError
from .mvopt import LossTrace, TraceRecord
from .synth import SceneConfig, SyntheticScene

SCENE_VERSION = "mvkit-scene-1"
REPORT_VERSION = "mvkit-report-1"

TRACE_COLUMNS = (
    "update",
    "t",
    "view",
    "pass",
    "F_total",
    "L_temp",
    "L_mvP",
    "L_mvS",
    "step",
    "backtracks",
)


def scene_to_document(
    config: SceneConfig,
    rig: ViewRig,
    frames: np.ndarray,
    keypoints=None,
) -> dict:
    """Assemble the JSON scene document from in-memory values."""
    doc = {
        "version": SCENE_VERSION,
        "config": {
            "frame_count": config.frame_count,
            "view_count": config.view_count,
            "height": config.height,
            "width": config.width,
            "joint_count": config.joint_count,
            "blob_sigma": config.blob_sigma,
            "sigmas": list(config.sigmas),
            "seed": config.seed,
            "main_index": config.main_index,
        },
        "rig": {
            "azimuths": rig.azimuths.tolist(),
            "main_index": rig.main_index,
            "omega_mv": rig.omega_mv.tolist(),
            "novel_order": rig.novel_order.tolist(),
        },
        # frames are channel-major per view: [t][m][c][y][x]
        "frames": np.transpose(frames, (0, 1, 4, 2, 3)).tolist(),
    }
    if keypoints is not None:
        doc["clean_keypoints"] = [
            [
                [[float(kp.xy[j, 0]), float(kp.xy[j, 1]), float(kp.confidence[j])]
                 for j in range(kp.count)]
                for kp in row
            ]
            for row in keypoints
        ]
    return doc


def write_scene(scene_or_doc, path: str) -> None:
    if isinstance(scene_or_doc, SyntheticScene):
        doc = scene_to_document(
            scene_or_doc.config,
            scene_or_doc.rig,
            scene_or_doc.corrupted.frames,
            scene_or_doc.keypoints,
        )
    else:
        doc = scene_or_doc
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise SceneFormatError(f"{path}.{key}" if path else key, "missing field")
    return doc[key]


def _to_array(value, expected_shape, path: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError):
        arr = None
    if arr is None or arr.shape != tuple(expected_shape):
        _diagnose_shape(value, list(expected_shape), path)
        raise SceneFormatError(
            path, f"expected shape {tuple(expected_shape)}, got {None if arr is None else arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise SceneFormatError(path, "contains non-finite values")
    return arr


def _diagnose_shape(value, expected: list, path: str) -> None:
    """Walk a nested list to name the first level whose length is wrong."""
    if not expected:
        return
    if not isinstance(value, (list, tuple)) or len(value) != expected[0]:
        got = len(value) if isinstance(value, (list, tuple)) else type(value).__name__
        raise SceneFormatError(path, f"expected length {expected[0]}, got {got}")
    for i, item in enumerate(value):
        _diagnose_shape(item, expected[1:], f"{path}[{i}]")


def read_scene(path: str) -> tuple[SceneConfig, FrameSequence, dict]:
    """Load and validate a scene file; returns (config, sequence, raw document)."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SceneFormatError("<document>", f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SceneFormatError("<document>", "top level must be an object")
    version = _require(doc, "version", "")
    if version != SCENE_VERSION:
        raise SceneFormatError("version", f"expected {SCENE_VERSION!r}, got {version!r}")
    raw_cfg = _require(doc, "config", "")
    cfg_fields = {}
    for key in ("frame_count", "view_count", "height", "width", "joint_count", "seed", "main_index"):
        cfg_fields[key] = int(_require(raw_cfg, key, "config"))
    blob_sigma = float(_require(raw_cfg, "blob_sigma", "config"))
    sigmas = _require(raw_cfg, "sigmas", "config")
    try:
        config = SceneConfig(
            frame_count=cfg_fields["frame_count"],
            view_count=cfg_fields["view_count"],
            height=cfg_fields["height"],
            width=cfg_fields["width"],
            seed=cfg_fields["seed"],
            joint_count=cfg_fields["joint_count"],
            blob_sigma=blob_sigma,
            sigmas=tuple(float(s) for s in sigmas),
            main_index=cfg_fields["main_index"],
        )
    except (TypeError, ValueError) as exc:
        raise SceneFormatError("config", str(exc)) from exc

    raw_rig = _require(doc, "rig", "")
    omega = _to_array(
        _require(raw_rig, "omega_mv", "rig"), (config.view_count - 1,), "rig.omega_mv"
    )
    if int(_require(raw_rig, "main_index", "rig")) != config.main_index:
        raise SceneFormatError("rig.main_index", "does not match config.main_index")
    try:
        rig = build_view_rig(config.view_count, config.main_index, omega_mv=omega)
    except ValueError as exc:
        raise SceneFormatError("rig", str(exc)) from exc
    azimuths = _to_array(
        _require(raw_rig, "azimuths", "rig"), (config.view_count,), "rig.azimuths"
    )
    if not np.array_equal(azimuths, rig.azimuths):
        raise SceneFormatError("rig.azimuths", "azimuths are not the uniform rig layout")
    order = _to_array(
        _require(raw_rig, "novel_order", "rig"), (config.view_count - 1,), "rig.novel_order"
    )
    if not np.array_equal(order.astype(np.int64), rig.novel_order):
        raise SceneFormatError("rig.novel_order", "ordering does not match the angular rule")

    raw_frames = _require(doc, "frames", "")
    shape = (
        config.frame_count,
        config.view_count,
        config.joint_count,
        config.height,
        config.width,
    )
    if not isinstance(raw_frames, list) or len(raw_frames) != config.frame_count:
        raise SceneFormatError(
            "frames",
            f"expected {config.frame_count} timestamps, got "
            f"{len(raw_frames) if isinstance(raw_frames, list) else type(raw_frames).__name__}",
        )
    for t, per_view in enumerate(raw_frames):
        if not isinstance(per_view, list) or len(per_view) != config.view_count:
            raise SceneFormatError(f"frames[{t}]", f"expected {config.view_count} views")
        for m, frame in enumerate(per_view):
            _to_array(frame, shape[2:], f"frames[{t}][{m}]")
    frames = np.transpose(np.asarray(raw_frames, dtype=np.float64), (0, 1, 3, 4, 2))
    seq = FrameSequence(rig=rig, frames=frames)
    return config, seq, doc


def write_report(report: dict, path: str) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"


def write_trace_csv(trace: LossTrace, path: str) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for r in trace:
            writer.writerow(
                [
                    r.update,
                    r.t,
                    r.view,
                    r.pass_index,
                    repr(r.f_total),
                    repr(r.l_temp),
                    repr(r.l_mv_pose),
                    repr(r.l_mv_semantic),
                    repr(r.step),
                    r.backtracks,
                ]
            )


def read_trace_csv(path: str) -> LossTrace:
    trace = LossTrace()
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRACE_COLUMNS:
            raise SceneFormatError("<header>", f"expected columns {TRACE_COLUMNS}")
        for row in reader:
            trace.append(
                TraceRecord(
                    update=int(row[0]),
                    t=int(row[1]),
                    view=int(row[2]),
                    pass_index=int(row[3]),
                    f_total=float(row[4]),
                    l_temp=float(row[5]),
                    l_mv_pose=float(row[6]),
                    l_mv_semantic=float(row[7]),
                    step=float(row[8]),
                    backtracks=int(row[9]),
                )
            )
    return trace


def dump_pgm(channel: np.ndarray, path: str) -> None:
    """Write one frame channel as a plain (P2) PGM image for eyeballing."""
    values = np.clip(np.asarray(channel, dtype=np.float64), 0.0, 1.0)
    gray = np.round(values * 255.0).astype(int)
    h, w = gray.shape
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"P2\n{w} {h}\n255\n")
        for row in gray:
            fh.write(" ".join(str(v) for v in row))
            fh.write("\n")


def dump_sequence_pgm(seq: FrameSequence, directory: str, prefix: str = "frame") -> list[str]:
    """One PGM per (timestamp, view, channel); returns the written paths."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    t_count, m_count, _, _, channels = seq.frames.shape
    for t in range(t_count):
        for m in range(m_count):
            for c in range(channels):
                name = f"{prefix}_t{t:03d}_v{m:02d}_c{c:02d}.pgm"
                p = os.path.join(directory, name)
                dump_pgm(seq.frames[t, m, :, :, c], p)
                paths.append(p)
    return paths
