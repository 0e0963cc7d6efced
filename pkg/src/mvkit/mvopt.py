"""Block-coordinate refinement of a multi-view frame sequence.

The objective over the whole sequence is, summed for t >= 1,

    F = w1 * |pose(f_t) - pose(f_{t-1})|^2                    (main view)
      + w2 * sum_m |pose(f_t^m) - pose(f_{t-1}^m)|^2          (all views)
      + w3 * sum_novel omega_m * |mask (f_t^m - f_t^main)|^2  (pixels)

with pose() the differentiable soft-centroid extractor below. Frames at
t = 0 anchor the temporal chain and are never updated. One block is one
frame f_t^m; each block update takes a gradient step with a backtracking
line search that only accepts a sufficient decrease
F_new <= F_old - c * |delta|^2, which makes the recorded objective trace
nonincreasing by construction. The schedule refines the main view first,
then the novel views from angularly closest to farthest, several passes
per timestamp, then moves to t + 1.

Pixel values are optimized unconstrained; clamping to [0, 1] is a final
output step (see FrameSequence.clamped) because clamping inside the loop
would break differentiability.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backends
from .core import Frame, FrameSequence, KeypointSet, ViewRig, _as_pixels
from .errors import NumericalFailureError

CENTROID_EPS = 1e-8
DEFAULT_REF_MASS = 1.0
# line-search guard: candidates that would drive any channel's total mass
# under this floor are rejected, keeping iterates away from the centroid
# singularity at mass -> -CENTROID_EPS where gradients blow up
MASS_FLOOR = 0.25


@dataclass(frozen=True)
class MvOptConfig:
    """Loss weights and line-search constants of the block optimizer.

    Each block's line search starts at step_init on its first update and is
    warm-started afterwards (step_growth times the last accepted step); the
    per-block curvatures differ by orders of magnitude, so a fixed start
    would stall the flat directions. step_growth = 1 recovers the fixed
    start.
    """

    w1: float = 1.0
    w2: float = 0.1
    w3: float = 0.02
    passes_per_timestamp: int = 8
    step_init: float = 0.5
    shrink: float = 0.5
    c_decrease: float = 1e-4
    max_backtracks: int = 30
    step_growth: float = 2.0
    opposite_view_term: bool = False

    def __post_init__(self):
        if min(self.w1, self.w2, self.w3) < 0.0:
            raise ValueError("loss weights must be >= 0")
        if self.passes_per_timestamp < 0:
            raise ValueError("passes_per_timestamp must be >= 0")
        if self.step_init <= 0.0 or not 0.0 < self.shrink < 1.0:
            raise ValueError("need step_init > 0 and shrink in (0, 1)")
        if self.c_decrease <= 0.0 or self.max_backtracks < 0:
            raise ValueError("need c_decrease > 0 and max_backtracks >= 0")
        if self.step_growth < 1.0:
            raise ValueError("step_growth must be >= 1")


@dataclass(frozen=True)
class TraceRecord:
    update: int
    t: int
    view: int
    pass_index: int
    f_total: float
    l_temp: float
    l_mv_pose: float
    l_mv_semantic: float
    step: float
    backtracks: int


@dataclass
class LossTrace:
    """Per-update objective history; record 0 is the pre-optimization baseline."""

    records: list[TraceRecord] = field(default_factory=list)

    def append(self, record: TraceRecord) -> None:
        if self.records and record.update <= self.records[-1].update:
            raise ValueError("update indices must be strictly increasing")
        if record.f_total < 0.0:
            raise ValueError("objective values cannot be negative")
        self.records.append(record)

    def f_values(self) -> np.ndarray:
        return np.array([r.f_total for r in self.records])

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def extract_pose(frame, ref_mass: float = DEFAULT_REF_MASS) -> KeypointSet:
    """Intensity-weighted centroid of each channel, as a keypoint set.

    keypoint_j = sum((x, y) * I_j) / (sum(I_j) + 1e-8), which is smooth in
    the pixel values; confidence_j = clip(mass_j / ref_mass, 0, 1). An
    exactly empty channel reports the image center with confidence 0.
    """
    pixels = _as_pixels(frame)
    h, w, _ = pixels.shape
    moments = backends.channel_moments(np.ascontiguousarray(pixels, dtype=np.float64))
    mass = moments[:, 0]
    cx = moments[:, 1] / (mass + CENTROID_EPS)
    cy = moments[:, 2] / (mass + CENTROID_EPS)
    empty = mass == 0.0
    cx = np.where(empty, (w - 1) / 2.0, cx)
    cy = np.where(empty, (h - 1) / 2.0, cy)
    conf = np.clip(mass / ref_mass, 0.0, 1.0)
    return KeypointSet(xy=np.stack([cx, cy], axis=1), confidence=conf)


def _pose_table(pixels: np.ndarray):
    """Centroids and inverse masses of one frame, raw smooth formula."""
    moments = backends.channel_moments(pixels)
    inv = 1.0 / (moments[:, 0] + CENTROID_EPS)
    return moments[:, 1] * inv, moments[:, 2] * inv, inv


def _centroid_sq_diff(cx_a, cy_a, cx_b, cy_b) -> float:
    dx = cx_a - cx_b
    dy = cy_a - cy_b
    return float(dx @ dx + dy @ dy)


class _Objective:
    """Frame array plus cached pose/loss tables for fast block updates."""

    def __init__(self, seq: FrameSequence, config: MvOptConfig, mask=None):
        rig = seq.rig
        if config.opposite_view_term and rig.view_count % 2 != 0:
            raise ValueError("the opposite-view term needs an even view count")
        self.rig = rig
        self.config = config
        self.frames = np.ascontiguousarray(seq.frames, dtype=np.float64).copy()
        t_count, m_count, h, w, c = self.frames.shape
        self.shape = (t_count, m_count, h, w, c)
        self.mask = None if mask is None else np.ascontiguousarray(mask, dtype=np.float64)
        if self.mask is not None and self.mask.shape != (h, w):
            raise ValueError(f"mask must have shape {(h, w)}")
        self.novel = [int(v) for v in rig.novel_order]
        self.omega = np.asarray(rig.omega_mv, dtype=np.float64)
        self.cx = np.empty((t_count, m_count, c))
        self.cy = np.empty((t_count, m_count, c))
        self.invm = np.empty((t_count, m_count, c))
        self.d_temp = np.zeros(t_count)
        self.d_mvp = np.zeros((t_count, m_count))
        self.d_opp = np.zeros((t_count, m_count))
        self.s_sem = np.zeros((t_count, m_count))
        self.l1 = np.zeros(t_count)
        self.l2 = np.zeros(t_count)
        self.l3 = np.zeros(t_count)
        # warm-start memory per block: slots for gradient, relaxation,
        # momentum and Gauss-Newton updates (Newton's natural step is 1)
        self.step_start = np.full((4, t_count, m_count), config.step_init)
        self.step_start[3] = 1.0
        self.prev_sweep = self.frames.copy()
        self.prev_global = self.frames.copy()
        self.global_step = config.step_init
        self._rebuild_tables()

    def _rebuild_tables(self):
        t_count, m_count = self.shape[:2]
        for t in range(t_count):
            for m in range(m_count):
                self._refresh_pose(t, m)
        for t in range(1, t_count):
            self._refresh_timestamp(t)
        self._refresh_total()

    # table maintenance -------------------------------------------------

    def _refresh_pose(self, t, m):
        self.cx[t, m], self.cy[t, m], self.invm[t, m] = _pose_table(self.frames[t, m])

    def _pose_diff(self, t, m) -> float:
        return _centroid_sq_diff(
            self.cx[t, m], self.cy[t, m], self.cx[t - 1, m], self.cy[t - 1, m]
        )

    def _mirror_diff(self, t, m, o) -> float:
        w = self.shape[3]
        dx = (w - 1) - self.cx[t, m] - self.cx[t, o]
        dy = self.cy[t, m] - self.cy[t, o]
        return float(dx @ dx + dy @ dy)

    def _semantic(self, t, v) -> float:
        a = self.frames[t, v]
        b = self.frames[t, self.rig.main_index]
        if self.mask is None:
            return backends.sq_diff_sum(a, b)
        return backends.masked_sq_diff_sum(a, b, self.mask)

    def _refresh_timestamp(self, t):
        main = self.rig.main_index
        for m in range(self.shape[1]):
            self.d_mvp[t, m] = self._pose_diff(t, m)
            if self.config.opposite_view_term:
                self.d_opp[t, m] = self._mirror_diff(t, m, self.rig.opposite_view(m))
        self.d_temp[t] = self.d_mvp[t, main]
        for v in self.novel:
            self.s_sem[t, v] = self._semantic(t, v)
        self._refresh_losses(t)

    def _refresh_losses(self, t):
        self.l1[t] = self.d_temp[t]
        acc = 0.0
        for m in range(self.shape[1]):
            acc += self.d_mvp[t, m]
        if self.config.opposite_view_term:
            for m in range(self.shape[1]):
                acc += self.d_opp[t, m]
        self.l2[t] = acc
        acc = 0.0
        for i, v in enumerate(self.novel):
            acc += self.omega[i] * self.s_sem[t, v]
        self.l3[t] = acc

    def _refresh_total(self):
        c1 = c2 = c3 = 0.0
        for t in range(1, self.shape[0]):
            c1 += self.l1[t]
            c2 += self.l2[t]
            c3 += self.l3[t]
        self.comp = (c1, c2, c3)
        cfg = self.config
        self.f_total = cfg.w1 * c1 + cfg.w2 * c2 + cfg.w3 * c3

    # candidate evaluation ----------------------------------------------

    def evaluate_block(self, t, m, candidate):
        """Objective value if frame (t, m) became ``candidate``; no mutation.

        Returns (f_new, pending) where ``pending`` carries the recomputed
        table entries for commit_block, so an accepted candidate is stored
        with the exact float values that produced f_new.
        """
        t_count = self.shape[0]
        w = self.shape[3]
        main = self.rig.main_index
        cfg = self.config
        cxc, cyc, invc = _pose_table(candidate)
        d_self = _centroid_sq_diff(cxc, cyc, self.cx[t - 1, m], self.cy[t - 1, m])
        d_next = (
            _centroid_sq_diff(self.cx[t + 1, m], self.cy[t + 1, m], cxc, cyc)
            if t + 1 < t_count
            else 0.0
        )
        if m == main:
            sem = [self._semantic_vs(t, v, candidate) for v in self.novel]
        else:
            sem = self._semantic_vs(t, m, self.frames[t, main], a_override=candidate)
        if cfg.opposite_view_term:
            o = self.rig.opposite_view(m)
            dx = (w - 1) - cxc - self.cx[t, o]
            dy = cyc - self.cy[t, o]
            d_opp_val = float(dx @ dx + dy @ dy)
        else:
            o = m
            d_opp_val = 0.0

        # substituted per-timestamp components at t and t + 1
        l1_t = d_self if m == main else self.d_temp[t]
        acc = 0.0
        for mm in range(self.shape[1]):
            acc += d_self if mm == m else self.d_mvp[t, mm]
        if cfg.opposite_view_term:
            for mm in range(self.shape[1]):
                acc += d_opp_val if mm in (m, o) else self.d_opp[t, mm]
        l2_t = acc
        acc = 0.0
        if m == main:
            for i, v in enumerate(self.novel):
                acc += self.omega[i] * sem[i]
        else:
            for i, v in enumerate(self.novel):
                acc += self.omega[i] * (sem if v == m else self.s_sem[t, v])
        l3_t = acc
        if t + 1 < t_count:
            l1_t1 = d_next if m == main else self.d_temp[t + 1]
            acc = 0.0
            for mm in range(self.shape[1]):
                acc += d_next if mm == m else self.d_mvp[t + 1, mm]
            if cfg.opposite_view_term:
                for mm in range(self.shape[1]):
                    acc += self.d_opp[t + 1, mm]
            l2_t1 = acc
            l3_t1 = self.l3[t + 1]
        else:
            l1_t1 = l2_t1 = l3_t1 = 0.0

        c1 = c2 = c3 = 0.0
        for tt in range(1, t_count):
            if tt == t:
                c1 += l1_t
                c2 += l2_t
                c3 += l3_t
            elif tt == t + 1:
                c1 += l1_t1
                c2 += l2_t1
                c3 += l3_t1
            else:
                c1 += self.l1[tt]
                c2 += self.l2[tt]
                c3 += self.l3[tt]
        f_new = cfg.w1 * c1 + cfg.w2 * c2 + cfg.w3 * c3
        pending = (cxc, cyc, invc, d_self, d_next, sem, d_opp_val, o,
                   (l1_t, l2_t, l3_t, l1_t1, l2_t1, l3_t1), (c1, c2, c3), f_new)
        return f_new, pending

    def _semantic_vs(self, t, v, b, a_override=None) -> float:
        a = self.frames[t, v] if a_override is None else a_override
        if self.mask is None:
            return backends.sq_diff_sum(a, b)
        return backends.masked_sq_diff_sum(a, b, self.mask)

    def commit_block(self, t, m, candidate, pending) -> float:
        """Store an evaluated candidate and its table entries."""
        t_count = self.shape[0]
        main = self.rig.main_index
        (cxc, cyc, invc, d_self, d_next, sem, d_opp_val, o, lvals, comp, f_new) = pending
        self.frames[t, m] = candidate
        self.cx[t, m] = cxc
        self.cy[t, m] = cyc
        self.invm[t, m] = invc
        self.d_mvp[t, m] = d_self
        if t + 1 < t_count:
            self.d_mvp[t + 1, m] = d_next
        if m == main:
            self.d_temp[t] = d_self
            if t + 1 < t_count:
                self.d_temp[t + 1] = d_next
            for i, v in enumerate(self.novel):
                self.s_sem[t, v] = sem[i]
        else:
            self.s_sem[t, m] = sem
        if self.config.opposite_view_term:
            self.d_opp[t, m] = d_opp_val
            self.d_opp[t, o] = d_opp_val
        self.l1[t], self.l2[t], self.l3[t] = lvals[0], lvals[1], lvals[2]
        if t + 1 < t_count:
            self.l1[t + 1], self.l2[t + 1], self.l3[t + 1] = lvals[3], lvals[4], lvals[5]
        self.comp = comp
        self.f_total = f_new
        return f_new

    # gradients ----------------------------------------------------------

    def newton_direction(self, t, m) -> np.ndarray | None:
        """Gauss-Newton step for one block, solved in closed form.

        The block's Gauss-Newton Hessian decomposes per channel into the
        constant semantic diagonal plus rank-2 centroid-pattern terms from
        the pose losses, so Sherman-Morrison-Woodbury gives the exact solve
        in one array pass. Returns None when the semantic diagonal is
        unavailable (zero semantic weight, or a pixel mask in use).
        """
        cfg = self.config
        if cfg.w3 <= 0.0 or self.mask is not None:
            return None
        main = self.rig.main_index
        if m == main:
            diag = 2.0 * cfg.w3 * float(np.sum(self.omega))
        else:
            diag = 2.0 * cfg.w3 * float(self.omega[self.novel.index(m)])
        if diag <= 0.0:
            return None
        grad = self.block_gradient(t, m, include_future=True)
        t_count, _, h, w, _ = self.shape
        pose_terms = 1 + (1 if t + 1 < t_count else 0)
        weight = cfg.w2 + (cfg.w1 if m == main else 0.0)
        alpha = 2.0 * weight * pose_terms
        if cfg.opposite_view_term:
            alpha += 4.0 * cfg.w2
        if alpha == 0.0:
            return -grad / diag
        xs = np.arange(w, dtype=np.float64)[None, :, None]
        ys = np.arange(h, dtype=np.float64)[:, None, None]
        u = (xs - self.cx[t, m]) * self.invm[t, m]
        v = (ys - self.cy[t, m]) * self.invm[t, m]
        guu = h * (u * u).sum(axis=(0, 1))
        gvv = w * (v * v).sum(axis=(0, 1))
        guv = u.sum(axis=(0, 1)) * v.sum(axis=(0, 1))
        gu = (grad * u).sum(axis=(0, 1))
        gv = (grad * v).sum(axis=(0, 1))
        k11 = 1.0 / alpha + guu / diag
        k22 = 1.0 / alpha + gvv / diag
        k12 = guv / diag
        det = k11 * k22 - k12 * k12
        cu = (k22 * gu - k12 * gv) / det
        cv = (k11 * gv - k12 * gu) / det
        return -(grad - (u * cu + v * cv) / diag) / diag

    def block_gradient(self, t, m, include_future: bool = True) -> np.ndarray:
        """Gradient of the objective w.r.t. frame (t, m).

        include_future adds the coupling of f_t into the pose terms at
        t + 1; switch it off to differentiate only the timestamp-t part.
        """
        cfg = self.config
        t_count, m_count, h, w, c = self.shape
        main = self.rig.main_index
        coeff_x = np.zeros(c)
        coeff_y = np.zeros(c)
        if t >= 1:
            dx = self.cx[t, m] - self.cx[t - 1, m]
            dy = self.cy[t, m] - self.cy[t - 1, m]
            scale = 2.0 * (cfg.w2 + (cfg.w1 if m == main else 0.0))
            coeff_x += scale * dx
            coeff_y += scale * dy
            if cfg.opposite_view_term:
                o = self.rig.opposite_view(m)
                mirror_own = (w - 1) - self.cx[t, m]
                coeff_x += -2.0 * cfg.w2 * (mirror_own - self.cx[t, o])
                coeff_y += 2.0 * cfg.w2 * (self.cy[t, m] - self.cy[t, o])
                mirror_other = (w - 1) - self.cx[t, o]
                coeff_x += -2.0 * cfg.w2 * (mirror_other - self.cx[t, m])
                coeff_y += -2.0 * cfg.w2 * (self.cy[t, o] - self.cy[t, m])
        if include_future and t + 1 < t_count:
            dx = self.cx[t + 1, m] - self.cx[t, m]
            dy = self.cy[t + 1, m] - self.cy[t, m]
            scale = -2.0 * (cfg.w2 + (cfg.w1 if m == main else 0.0))
            coeff_x += scale * dx
            coeff_y += scale * dy
        grad = backends.centroid_backprop(
            h, w, self.cx[t, m], self.cy[t, m], self.invm[t, m], coeff_x, coeff_y
        )
        if cfg.w3 > 0.0:
            fm = self.frames[t, main]
            if m == main:
                acc = np.zeros((h, w, c))
                for i, v in enumerate(self.novel):
                    acc += self.omega[i] * (fm - self.frames[t, v])
                sem = 2.0 * cfg.w3 * acc
                if self.mask is not None:
                    sem *= (self.mask * self.mask)[:, :, None]
                grad += sem
            else:
                pos = self.novel.index(m)
                scale = 2.0 * cfg.w3 * self.omega[pos]
                if self.mask is None:
                    grad += backends.diff_grad(self.frames[t, m], fm, scale)
                else:
                    grad += backends.masked_diff_grad(self.frames[t, m], fm, self.mask, scale)
        return grad


# public losses --------------------------------------------------------


def _check_t(seq: FrameSequence, t: int, lowest: int = 1):
    if not lowest <= t < seq.frame_count:
        raise ValueError(f"timestamp {t} out of range [{lowest}, {seq.frame_count})")


def _pose_sq_diff(a: np.ndarray, b: np.ndarray) -> float:
    cxa, cya, _ = _pose_table(np.ascontiguousarray(a))
    cxb, cyb, _ = _pose_table(np.ascontiguousarray(b))
    dx = cxa - cxb
    dy = cya - cyb
    return float(dx @ dx + dy @ dy)


def loss_temporal(seq: FrameSequence, t: int) -> float:
    """Squared keypoint displacement of the main view between t-1 and t."""
    _check_t(seq, t)
    main = seq.rig.main_index
    return _pose_sq_diff(seq.frames[t, main], seq.frames[t - 1, main])


def loss_mv_pose(seq: FrameSequence, t: int, opposite_view_term: bool = False) -> float:
    """Per-view squared keypoint displacement between t-1 and t, equal weights.

    With opposite_view_term (even view counts only), adds the mirrored
    cross-check of each view against the view half a turn away at t.
    """
    _check_t(seq, t)
    rig = seq.rig
    if opposite_view_term and rig.view_count % 2 != 0:
        raise ValueError("the opposite-view term needs an even view count")
    acc = 0.0
    for m in range(rig.view_count):
        acc += _pose_sq_diff(seq.frames[t, m], seq.frames[t - 1, m])
    if opposite_view_term:
        w = seq.frames.shape[3]
        tables = [
            _pose_table(np.ascontiguousarray(seq.frames[t, m])) for m in range(rig.view_count)
        ]
        for m in range(rig.view_count):
            o = rig.opposite_view(m)
            dx = (w - 1) - tables[m][0] - tables[o][0]
            dy = tables[m][1] - tables[o][1]
            acc += float(dx @ dx + dy @ dy)
    return acc


def loss_mv_semantic(seq: FrameSequence, t: int, mask=None) -> float:
    """Weighted pixel difference of every novel view against the main view at t."""
    _check_t(seq, t, lowest=0)
    rig = seq.rig
    main = seq.rig.main_index
    acc = 0.0
    for i, v in enumerate(rig.novel_order):
        a = seq.frames[t, int(v)]
        b = seq.frames[t, main]
        if mask is None:
            acc += rig.omega_mv[i] * backends.sq_diff_sum(a, b)
        else:
            m2 = np.ascontiguousarray(mask, dtype=np.float64)
            acc += rig.omega_mv[i] * backends.masked_sq_diff_sum(a, b, m2)
    return acc


def total_loss(seq: FrameSequence, t: int, view: int, config: MvOptConfig, mask=None):
    """Timestamp-t objective and its gradient w.r.t. frame (t, view).

    Returns (value, gradient); the gradient covers only the timestamp-t
    terms, matching central finite differences of the value.
    """
    _check_t(seq, t)
    if not 0 <= view < seq.rig.view_count:
        raise ValueError(f"view {view} out of range")
    obj = _Objective(seq, config, mask)
    f_t = config.w1 * obj.l1[t] + config.w2 * obj.l2[t] + config.w3 * obj.l3[t]
    return f_t, obj.block_gradient(t, view, include_future=False)


def global_objective(seq: FrameSequence, config: MvOptConfig, mask=None) -> float:
    """The full objective summed over t >= 1."""
    return _Objective(seq, config, mask).f_total


def objective_components(seq: FrameSequence, config: MvOptConfig, mask=None):
    """(F, temporal, pose, semantic) totals of the full objective."""
    obj = _Objective(seq, config, mask)
    return (obj.f_total, *obj.comp)


def global_block_gradient(seq: FrameSequence, t: int, view: int, config: MvOptConfig, mask=None):
    """Gradient of the full objective w.r.t. frame (t, view), couplings included."""
    _check_t(seq, t)
    return _Objective(seq, config, mask).block_gradient(t, view, include_future=True)


def semantic_by_view(seq: FrameSequence, mask=None) -> np.ndarray:
    """Unweighted per-view semantic loss summed over t >= 1 (0 at the main view)."""
    rig = seq.rig
    out = np.zeros(rig.view_count)
    m2 = None if mask is None else np.ascontiguousarray(mask, dtype=np.float64)
    for t in range(1, seq.frame_count):
        b = seq.frames[t, rig.main_index]
        for v in rig.novel_order:
            a = seq.frames[t, int(v)]
            if m2 is None:
                out[int(v)] += backends.sq_diff_sum(a, b)
            else:
                out[int(v)] += backends.masked_sq_diff_sum(a, b, m2)
    return out


# optimizer ------------------------------------------------------------


@dataclass
class OptState:
    """Owned optimizer state: current iterate, trace, schedule position."""

    objective: _Objective
    trace: LossTrace
    t: int = 1
    view: int = 0
    pass_index: int = 0
    updates: int = 0

    @property
    def sequence(self) -> FrameSequence:
        return FrameSequence(rig=self.objective.rig, frames=self.objective.frames)

    @property
    def f_total(self) -> float:
        return self.objective.f_total


def init_state(seq: FrameSequence, config: MvOptConfig, mask=None) -> OptState:
    """Build optimizer state and record the pre-optimization baseline."""
    obj = _Objective(seq, config, mask)
    trace = LossTrace()
    trace.append(
        TraceRecord(
            update=0,
            t=0,
            view=obj.rig.main_index,
            pass_index=0,
            f_total=obj.f_total,
            l_temp=obj.comp[0],
            l_mv_pose=obj.comp[1],
            l_mv_semantic=obj.comp[2],
            step=0.0,
            backtracks=0,
        )
    )
    return OptState(objective=obj, trace=trace, view=obj.rig.main_index)


def _directional_update(state: OptState, t: int, view: int, direction, slot: int) -> bool:
    """Backtracking line search along ``direction``, sufficient-decrease gated.

    A candidate is accepted only with F_new <= F_old - c |delta|^2; when no
    backtracked step qualifies the block is left unchanged (delta = 0
    satisfies the bound trivially), so the trace never increases. Each
    (slot, block) pair keeps its own warm-started trial step.
    """
    obj = state.objective
    cfg = obj.config
    d2 = float(np.sum(direction * direction))
    f_old = obj.f_total
    base = obj.frames[t, view]
    step = obj.step_start[slot, t, view]
    backtracks = 0
    accepted = False
    while True:
        candidate = base + step * direction
        f_new, pending = obj.evaluate_block(t, view, candidate)
        mass_ok = float(np.min(1.0 / pending[2])) - CENTROID_EPS >= MASS_FLOOR
        if mass_ok and f_new <= f_old - cfg.c_decrease * step * step * d2:
            obj.commit_block(t, view, candidate, pending)
            accepted = True
            break
        if backtracks >= cfg.max_backtracks:
            break
        step *= cfg.shrink
        backtracks += 1
    if accepted:
        # grow the warm start only after a clean first-try acceptance
        if backtracks == 0:
            obj.step_start[slot, t, view] = min(step * cfg.step_growth, 1e12)
        else:
            obj.step_start[slot, t, view] = step
    state.updates += 1
    state.t, state.view = t, view
    state.trace.append(
        TraceRecord(
            update=state.updates,
            t=t,
            view=view,
            pass_index=state.pass_index,
            f_total=obj.f_total,
            l_temp=obj.comp[0],
            l_mv_pose=obj.comp[1],
            l_mv_semantic=obj.comp[2],
            step=step if accepted else 0.0,
            backtracks=backtracks,
        )
    )
    return accepted


def _check_block(obj: _Objective, t: int, view: int) -> None:
    t_count, m_count = obj.shape[:2]
    if not 1 <= t < t_count:
        raise ValueError(f"timestamp {t} out of range [1, {t_count})")
    if not 0 <= view < m_count:
        raise ValueError(f"view {view} out of range")


def mvopt_block_update(state: OptState, t: int, view: int) -> OptState:
    """One line-searched gradient step on frame (t, view)."""
    obj = state.objective
    _check_block(obj, t, view)
    grad = obj.block_gradient(t, view, include_future=True)
    if not np.all(np.isfinite(grad)):
        raise NumericalFailureError(t, view)
    _directional_update(state, t, view, -grad, slot=0)
    return state


def relax_block_update(state: OptState, t: int, view: int) -> OptState:
    """Line-searched step along the block's semantic residual.

    The residual points at the view's pixel comparison target (the main
    view, or for the main view the weight-averaged novel views); it shifts
    blob content wholesale and does the heavy lifting early in a
    refinement. Acceptance is the same sufficient-decrease rule, so the
    trace stays monotone.
    """
    obj = state.objective
    _check_block(obj, t, view)
    main = obj.rig.main_index
    if view == main:
        total = float(np.sum(obj.omega))
        if total == 0.0 or not obj.novel:
            return state
        target = np.zeros_like(obj.frames[t, main])
        for i, v in enumerate(obj.novel):
            target += obj.omega[i] * obj.frames[t, v]
        target /= total
    else:
        target = obj.frames[t, main]
    residual = target - obj.frames[t, view]
    if np.any(residual):
        _directional_update(state, t, view, residual, slot=1)
    return state


def newton_block_update(state: OptState, t: int, view: int) -> OptState:
    """Line-searched Gauss-Newton step on one block.

    The closed-form solve rescales the stiff centroid directions and the
    flat semantic directions to comparable curvature, which is what plain
    gradient steps cannot do; near the basin it converges superlinearly.
    Acceptance is the same sufficient-decrease rule, so the trace stays
    monotone. No-op when the Newton system is unavailable.
    """
    obj = state.objective
    _check_block(obj, t, view)
    direction = obj.newton_direction(t, view)
    if direction is not None and np.all(np.isfinite(direction)) and np.any(direction):
        _directional_update(state, t, view, direction, slot=3)
    return state


def momentum_block_update(state: OptState, t: int, view: int) -> OptState:
    """Line-searched step along the block's displacement since the last sweep.

    Plain gradient steps crawl here: their accepted length is capped by the
    stiff pose curvature (~30) while the slow mode's curvature is the tiny
    semantic weight (~0.008), so progress per update is their ratio. The
    inter-sweep displacement aligns with that slow mode and is nearly free
    of the stiff components, letting one searched move remove most of the
    remaining amplitude. Acceptance is the same sufficient-decrease rule,
    so the trace stays monotone.
    """
    obj = state.objective
    _check_block(obj, t, view)
    direction = obj.frames[t, view] - obj.prev_sweep[t, view]
    if np.any(direction):
        _directional_update(state, t, view, direction, slot=2)
    obj.prev_sweep[t, view] = obj.frames[t, view]
    return state


def global_momentum_update(state: OptState) -> OptState:
    """Line-searched move of the whole sequence along its inter-sweep drift.

    The slowest modes of the block schedule are collective (all views drift
    together), so per-block moves partly cancel; one joint step along the
    full displacement removes the shared component. Acceptance uses the
    same sufficient-decrease rule on the full variable, so the trace stays
    monotone; the record is tagged t = -1, view = -1.
    """
    obj = state.objective
    cfg = obj.config
    direction = obj.frames - obj.prev_global
    if not np.any(direction):
        return state
    d2 = float(np.sum(direction * direction))
    f_old = obj.f_total
    step = obj.global_step
    backtracks = 0
    accepted = False
    rig = obj.rig
    while True:
        candidate = obj.frames + step * direction
        if np.all(np.isfinite(candidate)) and candidate.sum(axis=(2, 3)).min() >= MASS_FLOOR:
            f_new = global_objective(
                FrameSequence(rig=rig, frames=candidate), cfg, obj.mask
            )
            if f_new <= f_old - cfg.c_decrease * step * step * d2:
                accepted = True
                break
        if backtracks >= cfg.max_backtracks:
            break
        step *= cfg.shrink
        backtracks += 1
    if accepted:
        obj.frames[:] = candidate
        obj._rebuild_tables()
        obj.global_step = min(step * cfg.step_growth, 1e12) if backtracks == 0 else step
    obj.prev_global[:] = obj.frames
    state.updates += 1
    state.trace.append(
        TraceRecord(
            update=state.updates,
            t=-1,
            view=-1,
            pass_index=0,
            f_total=obj.f_total,
            l_temp=obj.comp[0],
            l_mv_pose=obj.comp[1],
            l_mv_semantic=obj.comp[2],
            step=step if accepted else 0.0,
            backtracks=backtracks,
        )
    )
    return state


def run_sweep(state: OptState, accelerate: bool = False, newton: bool = False) -> OptState:
    """One full schedule pass: per timestamp, several (main, then novel) rounds.

    ``accelerate`` interleaves relaxation updates with the gradient updates
    and ends each timestamp with one momentum update per block (used by
    the convergence driver; plain refinement runs keep the schedule as is).
    ``newton`` additionally follows each gradient update with a
    Gauss-Newton update, for the fine-convergence phase.
    """
    obj = state.objective
    for t in range(1, obj.shape[0]):
        for p in range(1, obj.config.passes_per_timestamp + 1):
            state.pass_index = p
            for v in [obj.rig.main_index] + obj.novel:
                mvopt_block_update(state, t, v)
                if accelerate:
                    relax_block_update(state, t, v)
                if newton:
                    newton_block_update(state, t, v)
        if accelerate:
            momentum_block_update(state, t, obj.rig.main_index)
            for v in obj.novel:
                momentum_block_update(state, t, v)
    if accelerate:
        global_momentum_update(state)
    return state


def mvopt_run(seq: FrameSequence, config: MvOptConfig, mask=None):
    """Refine a sequence with one schedule pass; returns (refined, trace).

    The refined frames are the raw iterate; clamp with
    FrameSequence.clamped() when writing final output.
    """
    state = init_state(seq, config, mask)
    run_sweep(state)
    return state.sequence, state.trace


@dataclass(frozen=True)
class ConvergenceResult:
    sequence: FrameSequence
    trace: LossTrace
    sweeps: int
    converged: bool
    f_initial: float
    f_final: float


def mvopt_converge(
    seq: FrameSequence,
    config: MvOptConfig,
    mask=None,
    sweep_tol: float = 1e-10,
    max_sweeps: int = 2000,
    accelerate: bool = True,
    newton_threshold: float = 1e-2,
) -> ConvergenceResult:
    """Repeat schedule passes until one pass decreases F by less than sweep_tol.

    With ``accelerate``, relaxation and momentum moves run alongside the
    gradient schedule, and once the per-sweep decrease falls under
    ``newton_threshold`` the Gauss-Newton phase kicks in; it balances the
    stiff centroid directions against the flat semantic ones and finishes
    the convergence superlinearly.
    """
    state = init_state(seq, config, mask)
    f_initial = state.f_total
    sweeps = 0
    converged = False
    newton = False
    prev = f_initial
    while sweeps < max_sweeps:
        run_sweep(state, accelerate=accelerate, newton=newton)
        sweeps += 1
        dec = prev - state.f_total
        if dec < sweep_tol:
            converged = True
            break
        if accelerate and dec < newton_threshold:
            newton = True
        prev = state.f_total
    return ConvergenceResult(
        sequence=state.sequence,
        trace=state.trace,
        sweeps=sweeps,
        converged=converged,
        f_initial=f_initial,
        f_final=state.f_total,
    )


def check_monotone(trace: LossTrace, tol: float = 1e-9):
    """Verify the objective trace never rises by more than tol.

    Returns (ok, first_violation_index), the index being the position of
    the first record that exceeds its predecessor.
    """
    if len(trace) == 0:
        raise ValueError("trace is empty")
    f = trace.f_values()
    rises = np.nonzero(f[1:] > f[:-1] + tol)[0]
    if rises.size:
        return False, int(rises[0]) + 1
    return True, None


def block_stationarity(seq: FrameSequence, config: MvOptConfig, mask=None) -> np.ndarray:
    """Gradient norm of the full objective for every optimized block.

    Row i holds timestamp t = i + 1; columns are views. Near-zero norms at
    convergence certify a block-coordinate stationary point.
    """
    obj = _Objective(seq, config, mask)
    t_count, m_count = obj.shape[:2]
    out = np.empty((t_count - 1, m_count))
    for t in range(1, t_count):
        for m in range(m_count):
            g = obj.block_gradient(t, m, include_future=True)
            out[t - 1, m] = np.sqrt(np.sum(g * g))
    return out
