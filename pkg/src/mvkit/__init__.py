"""mvkit: multi-view frame refinement toolkit.

Synthetic multi-view scenes, view-weighted attention fusion with its
inverse-variance theory, attention-map alignment, and a monotone
block-coordinate sequence refiner, all numerically verified by the
`verify` property suites.
"""

__version__ = "0.1.0"

from .core import AttentionMap, Frame, FrameSequence, KeypointSet, ViewRig, build_view_rig

__all__ = [
    "AttentionMap",
    "Frame",
    "FrameSequence",
    "KeypointSet",
    "ViewRig",
    "build_view_rig",
    "__version__",
]
