"""Synthetic scenes with analytic ground truth: the desk-scale stand-in for
real video corpora. Every generator is deterministic in its seed.

Ground-truth flows are stored in pull convention: the flow written for the
pair (frame t, frame t+1) maps frame t+1 pixels to their source positions
in frame t, so warp_with_flow(frame_t, flow) reconstructs frame t+1 on
persistent shape pixels. Background and disoccluded pixels carry zero flow.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter


def octave_noise(h: int, w: int, seed: int,
                 octaves=((12.0, 1.2), (6.0, 0.6), (3.0, 0.4), (1.5, 0.25))) -> np.ndarray:
    """Smooth multi-octave noise in [0, 1], textured at every pyramid level.

    The widest octave keeps photometric matching well conditioned after
    repeated 2x downsampling; the finer octaves disambiguate small shifts.
    """
    rng = np.random.default_rng(seed)
    acc = np.zeros((h, w))
    for sigma, amp in octaves:
        acc += amp * gaussian_filter(rng.random((h, w)), sigma, mode="reflect")
    lo, hi = acc.min(), acc.max()
    return ((acc - lo) / (hi - lo + 1e-12))[:, :, None]


def translating_window_frames(canvas_h, canvas_w, shift_per_frame, frames, seed,
                              window=None, octaves=None):
    """Frames cut from a sliding window over one big texture: pure global
    translation with no wrap-around artifacts. Returns (frames, pull shift).

    shift_per_frame is (rows, cols) the *content* moves per frame; the pull
    flow of each adjacent pair is the constant -shift_per_frame.
    """
    dr, dc = shift_per_frame
    if window is None:
        window = (canvas_h, canvas_w)
    wh, ww = window
    big_h = wh + abs(dr) * (frames - 1) + 2
    big_w = ww + abs(dc) * (frames - 1) + 2
    if octaves is None:
        big = octave_noise(big_h, big_w, seed)
    else:
        big = octave_noise(big_h, big_w, seed, octaves)
    out = []
    r0 = big_h - wh - 1 if dr > 0 else 1
    c0 = big_w - ww - 1 if dc > 0 else 1
    for t in range(frames):
        r = r0 - t * dr
        c = c0 - t * dc
        out.append(big[r : r + wh, c : c + ww].copy())
    return out, (-float(dr), -float(dc))


@dataclass(frozen=True)
class ShapeSpec:
    kind: str = "rectangle"  # rectangle | disk | stick
    size: float = 12.0  # half-extent in px (disk radius, rect half-side, stick length)
    center: tuple[float, float] = (32.0, 32.0)  # initial (row, col)
    motion: str = "translate"  # translate | sinusoid | rotate
    velocity: tuple[float, float] = (0.0, 2.0)  # px per frame (translate/sinusoid amp)
    period: float = 8.0  # frames per sinusoid cycle
    angular_velocity: float = 0.15  # radians per frame (rotate / stick)
    flat_value: float | None = None  # flat color; None = textured

    def __post_init__(self):
        if self.kind not in ("rectangle", "disk", "stick"):
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if self.motion not in ("translate", "sinusoid", "rotate"):
            raise ValueError(f"unknown motion model {self.motion!r}")


@dataclass(frozen=True)
class SynthSceneConfig:
    height: int = 64
    width: int = 64
    frames: int = 8
    shapes: tuple[ShapeSpec, ...] = dc_field(default_factory=lambda: (ShapeSpec(),))
    background: str = "noise"  # noise | flat
    background_value: float = 0.35
    background_gain: float = 1.0  # dims noise backgrounds to boost shape contrast
    seed: int = 0

    def __post_init__(self):
        if self.height < 8 or self.width < 8:
            raise ValueError("canvas too small")
        if self.frames < 2:
            raise ValueError("need at least two frames")
        if self.background not in ("noise", "flat"):
            raise ValueError(f"unknown background {self.background!r}")


def _shape_offset(spec: ShapeSpec, t: int):
    """Center displacement of the shape at frame t relative to frame 0."""
    if spec.motion == "translate":
        return spec.velocity[0] * t, spec.velocity[1] * t
    if spec.motion == "sinusoid":
        phase = 2.0 * math.pi * t / spec.period
        return spec.velocity[0] * math.sin(phase), spec.velocity[1] * math.sin(phase)
    return 0.0, 0.0  # rotation moves points, not the center


def _rotation_angle(spec: ShapeSpec, t: int) -> float:
    return spec.angular_velocity * t if spec.motion == "rotate" or spec.kind == "stick" else 0.0


def _stick_endpoints(spec: ShapeSpec, t: int, canvas_center):
    """(pivot, tip) of a stick at frame t; the pivot translates with the
    motion model while the whole stick turns by the angular velocity."""
    orow, ocol = _shape_offset(spec, t)
    pivot = (spec.center[0] + orow, spec.center[1] + ocol)
    ang = spec.angular_velocity * t
    tip = (
        pivot[0] + spec.size * math.sin(ang),
        pivot[1] + spec.size * math.cos(ang),
    )
    return pivot, tip


def _shape_support_and_source(spec: ShapeSpec, t: int, h: int, w: int):
    """Boolean support of the shape at frame t plus, for each supported
    pixel, the source position at frame t-1 (pull convention)."""
    rr, cc = np.mgrid[0:h, 0:w].astype(np.float64)
    center = (h / 2.0, w / 2.0)

    def local_coords(tt):
        orow, ocol = _shape_offset(spec, tt)
        crow = spec.center[0] + orow
        ccol = spec.center[1] + ocol
        ang = _rotation_angle(spec, tt) if spec.motion == "rotate" else 0.0
        dr = rr - (center[0] if spec.motion == "rotate" else crow)
        dc = cc - (center[1] if spec.motion == "rotate" else ccol)
        if spec.motion == "rotate":
            # undo the rotation about the canvas center, then center on shape
            ca, sa = math.cos(-ang), math.sin(-ang)
            ur = ca * dr - sa * dc
            uc = sa * dr + ca * dc
            ur -= spec.center[0] - center[0]
            uc -= spec.center[1] - center[1]
            return ur, uc
        return dr, dc

    ur, uc = local_coords(t)
    if spec.kind == "rectangle":
        support = (np.abs(ur) <= spec.size) & (np.abs(uc) <= spec.size)
    elif spec.kind == "disk":
        support = ur * ur + uc * uc <= spec.size * spec.size
    else:  # stick: thick segment from pivot to tip
        pivot, tip = _stick_endpoints(spec, t, center)
        vr, vc = tip[0] - pivot[0], tip[1] - pivot[1]
        length2 = vr * vr + vc * vc
        pr, pc = rr - pivot[0], cc - pivot[1]
        s = np.clip((pr * vr + pc * vc) / (length2 + 1e-12), 0.0, 1.0)
        dist2 = (pr - s * vr) ** 2 + (pc - s * vc) ** 2
        support = dist2 <= 2.5**2

    if t == 0:
        return support, rr, cc

    if spec.motion == "rotate":
        ang_now = _rotation_angle(spec, t)
        ang_prev = _rotation_angle(spec, t - 1)
        da = ang_now - ang_prev
        ca, sa = math.cos(-da), math.sin(-da)
        dr = rr - center[0]
        dc = cc - center[1]
        src_r = center[0] + ca * dr - sa * dc
        src_c = center[1] + sa * dr + ca * dc
    elif spec.kind == "stick":
        # rigid motion: rotation by the angular step about the current pivot,
        # plus the pivot's own translation
        pivot_now, _ = _stick_endpoints(spec, t, center)
        pivot_prev, _ = _stick_endpoints(spec, t - 1, center)
        da = spec.angular_velocity
        ca, sa = math.cos(-da), math.sin(-da)
        dr = rr - pivot_now[0]
        dc = cc - pivot_now[1]
        src_r = pivot_prev[0] + ca * dr - sa * dc
        src_c = pivot_prev[1] + sa * dr + ca * dc
    else:
        o_now = _shape_offset(spec, t)
        o_prev = _shape_offset(spec, t - 1)
        src_r = rr - (o_now[0] - o_prev[0])
        src_c = cc - (o_now[1] - o_prev[1])
    return support, src_r, src_c


def _check_inside(support: np.ndarray, h: int, w: int, t: int):
    if support[0, :].any() or support[-1, :].any() or support[:, 0].any() or support[:, -1].any():
        raise ValueError(f"shape touches the canvas border at frame {t}; shrink or slow it")


@dataclass
class SynthScene:
    frames: list[np.ndarray]
    flows: list[np.ndarray]  # pull flow for each adjacent pair, len frames-1
    masks: list[np.ndarray]  # (num_objects, H, W) uint8 0/1 per frame
    joints: list[np.ndarray] | None  # (J, 2) analytic points per frame, stick scenes
    config: SynthSceneConfig


def generate_scene(cfg: SynthSceneConfig) -> SynthScene:
    h, w = cfg.height, cfg.width
    if cfg.background == "noise":
        background = octave_noise(h, w, cfg.seed) * cfg.background_gain
    else:
        background = np.full((h, w, 1), cfg.background_value)

    textures = [
        octave_noise(h, w, cfg.seed + 101 + i) if spec.flat_value is None else None
        for i, spec in enumerate(cfg.shapes)
    ]

    frames, flows, masks = [], [], []
    joints: list[np.ndarray] = []
    has_sticks = any(s.kind == "stick" for s in cfg.shapes)
    center = (h / 2.0, w / 2.0)

    for t in range(cfg.frames):
        frame = background.copy()
        mask_t = np.zeros((len(cfg.shapes), h, w), dtype=np.uint8)
        flow_t = np.zeros((h, w, 2)) if t > 0 else None
        joints_t = []
        for i, spec in enumerate(cfg.shapes):
            support, src_r, src_c = _shape_support_and_source(spec, t, h, w)
            _check_inside(support, h, w, t)
            if spec.flat_value is not None:
                frame[support] = spec.flat_value
            else:
                # sample the shape's own texture at its undisplaced position so
                # the pattern rides along with the shape
                ur, uc = np.mgrid[0:h, 0:w].astype(np.float64)
                o = _shape_offset(spec, t)
                if spec.motion == "rotate" or spec.kind == "stick":
                    # texture pinned to frame-0 geometry via the source chain
                    tex_r, tex_c = ur.copy(), uc.copy()
                    for back in range(t, 0, -1):
                        _, sr, sc = _shape_support_and_source(spec, back, h, w)
                        from .fields import bilinear_gather

                        tex_r = bilinear_gather(tex_r[:, :, None], sr, sc)[:, :, 0]
                        tex_c = bilinear_gather(tex_c[:, :, None], sr, sc)[:, :, 0]
                else:
                    tex_r = ur - o[0]
                    tex_c = uc - o[1]
                from .fields import bilinear_gather

                vals = bilinear_gather(textures[i], np.clip(tex_r, 0, h - 1), np.clip(tex_c, 0, w - 1))
                frame[support] = vals[support]
            mask_t[i][support] = 1
            if t > 0:
                flow_t[support, 0] = (src_r - np.mgrid[0:h, 0:w][0])[support]
                flow_t[support, 1] = (src_c - np.mgrid[0:h, 0:w][1])[support]
            if spec.kind == "stick":
                pivot, tip = _stick_endpoints(spec, t, center)
                joints_t.extend([pivot, tip])
        frames.append(frame)
        masks.append(mask_t)
        if t > 0:
            flows.append(flow_t)
        if has_sticks:
            joints.append(np.asarray(joints_t))
    return SynthScene(frames, flows, masks, joints if has_sticks else None, cfg)


def write_joints_csv(path, joints_per_frame, visible=None):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "joint_id", "row", "col", "visible"])
        for t, pts in enumerate(joints_per_frame):
            for j, (r, c) in enumerate(np.asarray(pts)):
                vis = 1 if visible is None else int(visible[t][j])
                writer.writerow([t, j, f"{r:.3f}", f"{c:.3f}", vis])


def read_joints_csv(path):
    frames: dict[int, list] = {}
    vis: dict[int, list] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            t = int(row["frame"])
            frames.setdefault(t, []).append((float(row["row"]), float(row["col"])))
            vis.setdefault(t, []).append(bool(int(row["visible"])))
    order = sorted(frames)
    return [np.asarray(frames[t]) for t in order], [np.asarray(vis[t]) for t in order]


def write_corpus(scene: SynthScene, out_dir) -> list[Path]:
    """frames_NNNN.png, flow_NNNN.flo (pair t-1,t), mask_NNNN.png, joints.csv."""
    from .fileio import write_flo, write_image

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for t, frame in enumerate(scene.frames):
        p = out / f"frame_{t:04d}.png"
        write_image(frame, p)
        written.append(p)
    for t, flow in enumerate(scene.flows, start=1):
        p = out / f"flow_{t:04d}.flo"
        write_flo(flow, p)
        written.append(p)
    n_obj = len(scene.config.shapes)
    for t, mask in enumerate(scene.masks):
        label = np.zeros(mask.shape[1:], dtype=np.float64)
        for i in range(n_obj):
            label[mask[i] > 0] = round((i + 1) * 255.0 / n_obj) / 255.0
        p = out / f"mask_{t:04d}.png"
        write_image(label[:, :, None], p)
        written.append(p)
    if scene.joints is not None:
        p = out / "joints.csv"
        write_joints_csv(p, scene.joints)
        written.append(p)
    return written
