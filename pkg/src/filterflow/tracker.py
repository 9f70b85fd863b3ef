"""Downstream consumers of accumulated flows: mask propagation, pose-joint
propagation, shot-boundary detection, and the evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.ndimage import distance_transform_edt

from .fields import warp_with_flow
from .grid import ensure_image
from .losses import charbonnier
from .multigrid import long_range_flow


@dataclass
class MaskStack:
    """Per-object probability grids in [0, 1], shape (num_objects, H, W)."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 3:
            raise ValueError(f"mask stack must be (objects, H, W), got {p.shape}")
        if p.min() < 0.0 or p.max() > 1.0:
            raise ValueError("mask probabilities must lie in [0, 1]")
        self.probs = p

    @property
    def num_objects(self) -> int:
        return self.probs.shape[0]

    @property
    def shape(self):
        return self.probs.shape[1:]


@dataclass
class JointMap:
    """Tracked joints: point estimates, visibility, optional heatmaps."""

    points: np.ndarray  # (J, 2) as (row, col)
    visible: np.ndarray  # (J,) bool
    shape: tuple[int, int]
    heatmaps: np.ndarray | None = None  # (J, H, W)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        self.visible = np.asarray(self.visible, dtype=bool)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ValueError(f"points must be (J, 2), got {self.points.shape}")
        if self.visible.shape != (self.points.shape[0],):
            raise ValueError("visible flags must match the joint count")


@dataclass(frozen=True)
class TrackerConfig:
    window: int = 3  # K previous frames fused per update
    mask_threshold: float = 0.8
    joint_radius: int = 3
    pyramid: Any = None  # PyramidConfig carried for CLI flow construction

    def __post_init__(self):
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if not (0.0 < self.mask_threshold < 1.0):
            raise ValueError(f"mask threshold must be in (0, 1), got {self.mask_threshold}")
        if self.joint_radius < 0:
            raise ValueError(f"joint radius must be >= 0, got {self.joint_radius}")


def propagate_masks(
    history,
    target_frame: np.ndarray,
    flow_fn,
    cfg: TrackerConfig = TrackerConfig(),
    anchor=None,
) -> MaskStack:
    """Fuse the last K frames' masks (plus an optional first-frame anchor)
    onto the target frame.

    history: ordered [(frame, MaskStack), ...], oldest first, at most K
    entries; the implied frame sequence is history frames then the target.
    Warped probabilities are averaged, thresholded, and overlaps resolved
    by per-pixel argmax. anchor, when given, is a (frame, MaskStack) whose
    flow to the target is predicted directly (long-range pair).
    """
    if len(history) == 0:
        raise ValueError("history is empty")
    history = list(history[-cfg.window :])
    target_frame = ensure_image(target_frame)
    shape = target_frame.shape[:2]
    num_objects = history[0][1].num_objects
    for frame, stack in history:
        if ensure_image(frame).shape[:2] != shape or stack.shape != shape:
            raise ValueError("history frames/masks must match the target size")

    frames = [f for f, _ in history] + [target_frame]
    acc = np.zeros((num_objects, *shape))
    count = 0
    for idx, (_, stack) in enumerate(history):
        flow = long_range_flow(frames, idx, len(frames) - 1, flow_fn)
        for obj in range(num_objects):
            acc[obj] += warp_with_flow(stack.probs[obj][:, :, None], flow)[:, :, 0]
        count += 1
    if anchor is not None:
        frame0, stack0 = anchor
        if stack0.num_objects != num_objects:
            raise ValueError("anchor object count differs from history")
        flow = flow_fn(ensure_image(frame0), target_frame)
        for obj in range(num_objects):
            acc[obj] += warp_with_flow(stack0.probs[obj][:, :, None], flow)[:, :, 0]
        count += 1
    acc /= count

    passed = acc >= cfg.mask_threshold
    winner = acc.argmax(axis=0)
    out = np.zeros_like(acc)
    for obj in range(num_objects):
        out[obj] = (passed[obj] & (winner == obj)).astype(np.float64)
    return MaskStack(out)


def dilate_joint_heatmaps(joints: JointMap, radius: int) -> np.ndarray:
    """Disk of the given radius around each visible joint, with a linear
    peak at the joint (1 at the center, 0.25 at the rim) so the post-warp
    argmax vote is unique instead of tying across a flat plateau."""
    h, w = joints.shape
    rr, cc = np.mgrid[0:h, 0:w].astype(np.float64)
    maps = np.zeros((joints.points.shape[0], h, w))
    for j, (r, c) in enumerate(joints.points):
        if not joints.visible[j]:
            continue
        dist = np.sqrt((rr - r) ** 2 + (cc - c) ** 2)
        inside = dist <= radius
        profile = 1.0 - 0.75 * dist / max(radius, 1)
        maps[j] = np.where(inside, profile, 0.0)
    return maps


def propagate_pose(joints: JointMap, flow: np.ndarray, cfg: TrackerConfig = TrackerConfig()) -> JointMap:
    """One propagation step: dilate each joint to a disk, warp by the pull
    flow, and vote for the new location at the warped maximum (ties break
    to the smallest (row, col)). Visibility clears when the peak collapses
    below half its original height."""
    h, w = joints.shape
    if flow.shape[:2] != (h, w):
        raise ValueError(f"flow shape {flow.shape[:2]} does not match joints {joints.shape}")
    maps = dilate_joint_heatmaps(joints, cfg.joint_radius)
    out_points = joints.points.copy()
    out_vis = joints.visible.copy()
    warped_maps = np.zeros_like(maps)
    for j in range(maps.shape[0]):
        if not joints.visible[j]:
            continue
        warped = warp_with_flow(maps[j][:, :, None], flow)[:, :, 0]
        warped_maps[j] = warped
        peak = maps[j].max()
        if warped.max() < 0.5 * peak:
            out_vis[j] = False
            continue
        loc = np.unravel_index(int(np.argmax(warped)), warped.shape)
        out_points[j] = loc
    return JointMap(out_points, out_vis, (h, w), heatmaps=warped_maps)


def detect_shots(frames, flow_fn, trailing: int = 20, min_history: int = 5):
    """Indices of abrupt transitions, scored by adjacent-pair reconstruction
    error. Pair error e(t) covers (frame t, frame t+1); a boundary at t+1
    (the first frame of the new shot) is flagged when e(t) spikes above the
    trailing robust band: e > median + 3*MAD and e > 2*median, over up to
    `trailing` previous pairs (at least `min_history` required)."""
    if len(frames) < 3:
        raise ValueError(f"need at least 3 frames, got {len(frames)}")
    frames = [ensure_image(f) for f in frames]
    errors = []
    for t in range(len(frames) - 1):
        flow = flow_fn(frames[t], frames[t + 1])
        recon = warp_with_flow(frames[t], flow)
        errors.append(float(charbonnier(frames[t + 1] - recon).mean()))
    boundaries = []
    for t, err in enumerate(errors):
        window = errors[max(0, t - trailing) : t]
        if len(window) < min_history:
            continue
        med = float(np.median(window))
        mad = float(np.median(np.abs(np.asarray(window) - med)))
        if err > med + 3.0 * mad and err > 2.0 * med:
            boundaries.append(t + 1)
    return boundaries, errors


def eval_jaccard(pred: np.ndarray, gt: np.ndarray) -> float:
    pred = np.asarray(pred).astype(bool)
    gt = np.asarray(gt).astype(bool)
    if pred.shape != gt.shape:
        raise ValueError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    union = np.logical_or(pred, gt).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(pred, gt).sum() / union)


def mask_boundary(mask: np.ndarray) -> np.ndarray:
    """Boundary pixels by 4-neighborhood transition; outside the image
    counts as background, so a full-frame mask has its border as boundary."""
    mask = np.asarray(mask).astype(bool)
    padded = np.pad(mask, 1, mode="constant", constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return mask & ~interior


def eval_boundary_f(pred: np.ndarray, gt: np.ndarray, tolerance: float = 2.0) -> float:
    pred = np.asarray(pred).astype(bool)
    gt = np.asarray(gt).astype(bool)
    if pred.shape != gt.shape:
        raise ValueError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    pb = mask_boundary(pred)
    gb = mask_boundary(gt)
    if not pb.any() and not gb.any():
        return 1.0
    if not pb.any() or not gb.any():
        return 0.0
    dist_to_gt = distance_transform_edt(~gb)
    dist_to_pred = distance_transform_edt(~pb)
    precision = float((dist_to_gt[pb] <= tolerance).mean())
    recall = float((dist_to_pred[gb] <= tolerance).mean())
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def eval_pck(pred_joints: np.ndarray, gt_joints: np.ndarray, tau: float,
             bbox_size: float, visible=None) -> float:
    """Fraction of joints within tau * bbox_size of ground truth (inclusive)."""
    pred = np.asarray(pred_joints, dtype=np.float64)
    gt = np.asarray(gt_joints, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"joint counts differ: {pred.shape} vs {gt.shape}")
    if bbox_size <= 0:
        raise ValueError(f"bbox size must be > 0, got {bbox_size}")
    mask = np.ones(pred.shape[0], dtype=bool) if visible is None else np.asarray(visible, dtype=bool)
    if not mask.any():
        return 0.0
    err = np.sqrt(((pred[mask] - gt[mask]) ** 2).sum(axis=1))
    return float((err <= tau * bbox_size).mean())


def recon_l1(a: np.ndarray, b: np.ndarray) -> float:
    """Mean absolute difference on the 8-bit [0, 255] scale after clamping."""
    a = ensure_image(a)
    b = ensure_image(b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return float(np.abs(255.0 * np.clip(a, 0, 1) - 255.0 * np.clip(b, 0, 1)).mean())


def masks_from_label_image(label: np.ndarray, num_objects: int | None = None) -> MaskStack:
    """Inverse of the mask file convention: gray level i*255/num_objects."""
    label = ensure_image(label)[:, :, 0]
    levels = sorted(v for v in np.unique(np.round(label * 255).astype(int)) if v > 0)
    if num_objects is None:
        num_objects = len(levels)
    probs = np.zeros((num_objects, *label.shape))
    for idx, lv in enumerate(levels[:num_objects]):
        probs[idx] = (np.round(label * 255).astype(int) == lv).astype(np.float64)
    return MaskStack(probs)
