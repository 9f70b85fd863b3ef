"""Per-pixel filter fields and the coordinate flows they project onto.

A FilterFlowField stores unconstrained logits; the softmax over each pixel's
k*k taps yields the non-negative, sum-to-one kernel that acts on a source
image. Kernel taps are enumerated row-major from offset (-r, -r) to (r, r),
r = (k-1)//2, and that ordering is part of every serialization.

Coordinate flows are (H, W, 2) arrays of (d_row, d_col) displacements in
pull convention: the value at target pixel p points at the source sample
location p + d(p). Warping gathers with bilinear interpolation and clamps
sample coordinates to the image bounds (replicate semantics, matching the
padding policy of the filter operator).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ensure_image, patch_stack


def kernel_offsets(k: int) -> np.ndarray:
    """(k*k, 2) integer (d_row, d_col) offsets, row-major from (-r,-r)."""
    if k < 1 or k % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 1, got {k}")
    r = k // 2
    rows, cols = np.mgrid[-r : r + 1, -r : r + 1]
    return np.stack([rows.ravel(), cols.ravel()], axis=1).astype(np.float64)


@dataclass(frozen=True)
class FilterFlowField:
    """Per-pixel kernel logits at one pyramid scale. Treat as immutable."""

    logits: np.ndarray  # (H, W, k*k)
    k: int
    scale_index: int = 1

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64) if not isinstance(self.logits, np.ndarray) else self.logits
        object.__setattr__(self, "logits", logits)
        if self.k < 1 or self.k % 2 == 0:
            raise ValueError(f"kernel size must be odd and >= 1, got {self.k}")
        if logits.ndim != 3 or logits.shape[2] != self.k * self.k:
            raise ValueError(
                f"logits must have shape (H, W, {self.k * self.k}), got {logits.shape}"
            )
        if not np.isfinite(logits).all():
            raise ValueError("logits contain non-finite values")

    @property
    def height(self) -> int:
        return self.logits.shape[0]

    @property
    def width(self) -> int:
        return self.logits.shape[1]

    @property
    def radius(self) -> int:
        return self.k // 2

    def probabilities(self) -> np.ndarray:
        return softmax_filters(self)


def softmax_filters(field: FilterFlowField) -> np.ndarray:
    """Max-subtracted per-pixel softmax of the logits; each pixel sums to 1."""
    z = field.logits
    z = z - z.max(axis=2, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=2, keepdims=True)


def softmax_vjp(probs: np.ndarray, dprobs: np.ndarray) -> np.ndarray:
    """Gradient wrt logits given gradient wrt softmax probabilities."""
    inner = (probs * dprobs).sum(axis=-1, keepdims=True)
    return probs * (dprobs - inner)


def delta_logits(h: int, w: int, k: int, offset: tuple[int, int], gain: float = 1000.0) -> np.ndarray:
    """Logits that saturate the softmax onto a single tap at `offset`."""
    offs = kernel_offsets(k)
    idx = np.flatnonzero((offs[:, 0] == offset[0]) & (offs[:, 1] == offset[1]))
    if idx.size == 0:
        raise ValueError(f"offset {offset} outside kernel window of size {k}")
    logits = np.zeros((h, w, k * k))
    logits[:, :, idx[0]] = gain
    return logits


def apply_filter_flow(field: FilterFlowField, src: np.ndarray) -> np.ndarray:
    """Apply the per-pixel kernels to a source image.

    output(p) is the inner product of pixel p's kernel with the k x k
    neighborhood of p in src (replicate padded); the same kernel is applied
    to every channel.
    """
    src = ensure_image(src)
    if src.shape[:2] != (field.height, field.width):
        raise ValueError(
            f"source shape {src.shape[:2]} does not match field {(field.height, field.width)}"
        )
    probs = field.probabilities()
    patches = patch_stack(src, field.k)  # (H, W, C, K)
    return np.einsum("hwk,hwck->hwc", probs, patches, optimize=True)


def filters_to_flow(field: FilterFlowField) -> np.ndarray:
    """Project kernels to their expected offset, the nearest coordinate flow.

    Uses symmetric marginal differences so that uniform kernels give an
    exact zero and saturated single-tap kernels give the exact offset.
    """
    probs = field.probabilities()
    h, w = probs.shape[:2]
    k, r = field.k, field.radius
    grid = probs.reshape(h, w, k, k)
    row_marg = grid.sum(axis=3)  # weight per d_row value
    col_marg = grid.sum(axis=2)  # weight per d_col value
    flow = np.zeros((h, w, 2), dtype=probs.dtype)
    for m in range(1, r + 1):
        flow[:, :, 0] += m * (row_marg[:, :, r + m] - row_marg[:, :, r - m])
        flow[:, :, 1] += m * (col_marg[:, :, r + m] - col_marg[:, :, r - m])
    return flow


def flow_vjp_to_probs(dflow: np.ndarray, k: int) -> np.ndarray:
    """Gradient wrt kernel probabilities given gradient wrt the flow."""
    offs = kernel_offsets(k)
    return np.einsum("hwd,kd->hwk", dflow, offs, optimize=True)


def _check_flow(flow: np.ndarray) -> np.ndarray:
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"flow must have shape (H, W, 2), got {flow.shape}")
    return flow


def zero_flow(h: int, w: int, dtype=np.float64) -> np.ndarray:
    return np.zeros((h, w, 2), dtype=dtype)


def bilinear_gather(img: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Sample img at fractional (rows, cols), clamped to the image bounds.

    Exact at integer coordinates. img is (H, W, C); rows/cols are (h, w).
    """
    h, w = img.shape[:2]
    r = np.clip(rows, 0.0, float(h - 1))
    c = np.clip(cols, 0.0, float(w - 1))
    r0 = np.floor(r).astype(np.intp)
    c0 = np.floor(c).astype(np.intp)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    tr = (r - r0)[..., None]
    tc = (c - c0)[..., None]
    v00 = img[r0, c0]
    v01 = img[r0, c1]
    v10 = img[r1, c0]
    v11 = img[r1, c1]
    top = v00 + (v01 - v00) * tc
    bot = v10 + (v11 - v10) * tc
    return top + (bot - top) * tr


def bilinear_gather_vjp(
    img: np.ndarray,
    rows: np.ndarray,
    cols: np.ndarray,
    dout: np.ndarray,
    need_dimg: bool = True,
):
    """VJP of bilinear_gather: returns (dimg, drows, dcols).

    The clamp contributes zero derivative outside the open interval
    (0, H-1) x (0, W-1); the L-shaped kinks at exact integers take the
    right-sided derivative.
    """
    h, w = img.shape[:2]
    r = np.clip(rows, 0.0, float(h - 1))
    c = np.clip(cols, 0.0, float(w - 1))
    r0 = np.floor(r).astype(np.intp)
    c0 = np.floor(c).astype(np.intp)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    tr = (r - r0)[..., None]
    tc = (c - c0)[..., None]
    v00 = img[r0, c0]
    v01 = img[r0, c1]
    v10 = img[r1, c0]
    v11 = img[r1, c1]

    dval_dtr = (1.0 - tc) * (v10 - v00) + tc * (v11 - v01)
    dval_dtc = (1.0 - tr) * (v01 - v00) + tr * (v11 - v10)
    row_open = (rows > 0.0) & (rows < h - 1.0) if h > 1 else np.zeros_like(rows, dtype=bool)
    col_open = (cols > 0.0) & (cols < w - 1.0) if w > 1 else np.zeros_like(cols, dtype=bool)
    drows = (dout * dval_dtr).sum(axis=-1) * row_open
    dcols = (dout * dval_dtc).sum(axis=-1) * col_open

    dimg = None
    if need_dimg:
        dimg = np.zeros_like(img)
        w00 = (1.0 - tr) * (1.0 - tc) * dout
        w01 = (1.0 - tr) * tc * dout
        w10 = tr * (1.0 - tc) * dout
        w11 = tr * tc * dout
        np.add.at(dimg, (r0, c0), w00)
        np.add.at(dimg, (r0, c1), w01)
        np.add.at(dimg, (r1, c0), w10)
        np.add.at(dimg, (r1, c1), w11)
    return dimg, drows, dcols


def _sample_grid(h: int, w: int):
    return np.mgrid[0:h, 0:w].astype(np.float64)


def warp_with_flow(src: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Backward-warp src: output(p) = bilinear sample of src at p + d(p)."""
    src = ensure_image(src)
    flow = _check_flow(flow)
    if src.shape[:2] != flow.shape[:2]:
        raise ValueError(
            f"source shape {src.shape[:2]} does not match flow {flow.shape[:2]}"
        )
    base_r, base_c = _sample_grid(*flow.shape[:2])
    return bilinear_gather(src, base_r + flow[:, :, 0], base_c + flow[:, :, 1])


def compose_flows(g: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Pull-compose: result(p) = g(p) + h(p + g(p)), h sampled bilinearly.

    Warping by the result approximates warping by h then by g.
    """
    g = _check_flow(g)
    h = _check_flow(h)
    if g.shape != h.shape:
        raise ValueError(f"flow shapes differ: {g.shape} vs {h.shape}")
    base_r, base_c = _sample_grid(*g.shape[:2])
    h_at = bilinear_gather(h, base_r + g[:, :, 0], base_c + g[:, :, 1])
    return g + h_at


def upscale_flow_2x(flow: np.ndarray) -> np.ndarray:
    """Nearest-neighbor upsample and double the displacements."""
    flow = _check_flow(flow)
    up = np.repeat(np.repeat(flow, 2, axis=0), 2, axis=1)
    return up * 2.0
