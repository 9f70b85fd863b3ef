"""Dense image grids and the resampling primitives everything else builds on.

Convention used across the whole package: an image is a float ndarray of
shape (H, W, C), indexed (row, col) with row increasing downward, values
nominally in [0, 1] but never clamped outside file output. Borders are
always completed by replicate (clamp-to-edge) padding.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def ensure_image(img: np.ndarray) -> np.ndarray:
    """Coerce to a (H, W, C) float array, validating shape and finiteness."""
    arr = np.asarray(img)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"image must be 2-d or 3-d, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1 or arr.shape[2] < 1:
        raise ValueError(f"image axes must be >= 1, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    if not np.isfinite(arr).all():
        raise ValueError("image contains non-finite values")
    return arr


def downsample_half(img: np.ndarray) -> np.ndarray:
    """2x2 mean pooling. Requires even height and width.

    The sum is grouped pairwise so that a constant 2x2 block averages to
    exactly its value, making upsample_nn_2x followed by downsample_half
    the bitwise identity.
    """
    img = ensure_image(img)
    h, w = img.shape[:2]
    if h % 2 != 0:
        raise ValueError(f"height {h} is odd; pad before downsampling")
    if w % 2 != 0:
        raise ValueError(f"width {w} is odd; pad before downsampling")
    a = img[0::2, 0::2] + img[0::2, 1::2]
    b = img[1::2, 0::2] + img[1::2, 1::2]
    return (a + b) * 0.25


def upsample_nn_2x(img: np.ndarray) -> np.ndarray:
    """Nearest-neighbor 2x upsampling: each pixel becomes a 2x2 block."""
    img = ensure_image(img)
    return np.repeat(np.repeat(img, 2, axis=0), 2, axis=1)


def pad_to_multiple(img: np.ndarray, m: int) -> tuple[np.ndarray, tuple[int, int]]:
    """Replicate-pad right/bottom so H and W are multiples of m.

    Returns (padded, (orig_h, orig_w)); undo with crop_to.
    """
    if m < 1:
        raise ValueError(f"multiple must be >= 1, got {m}")
    img = ensure_image(img)
    h, w = img.shape[:2]
    ph = (-h) % m
    pw = (-w) % m
    if ph == 0 and pw == 0:
        return img, (h, w)
    padded = np.pad(img, ((0, ph), (0, pw), (0, 0)), mode="edge")
    return padded, (h, w)


def crop_to(img: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    h, w = size
    return img[:h, :w]


def patch_stack(img: np.ndarray, k: int) -> np.ndarray:
    """All k x k neighborhoods under replicate padding, shape (H, W, C, k*k).

    The last axis enumerates window offsets row-major from (-r, -r) to
    (r, r) with r = (k - 1) // 2.
    """
    if k < 1 or k % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 1, got {k}")
    img = ensure_image(img)
    h, w, c = img.shape
    r = k // 2
    if r == 0:
        return img[:, :, :, None]
    padded = np.pad(img, ((r, r), (r, r), (0, 0)), mode="edge")
    win = sliding_window_view(padded, (k, k), axis=(0, 1))  # (H, W, C, k, k)
    return win.reshape(h, w, c, k * k)


def im2col(img: np.ndarray, k: int) -> np.ndarray:
    """Vectorized neighborhoods: one row per pixel, shape (H*W, k*k*C).

    Rows are channel-major: for each channel, the k*k window values in
    row-major window order. Pixel rows follow row-major image order.
    """
    img = ensure_image(img)
    h, w, c = img.shape
    return patch_stack(img, k).reshape(h * w, c * k * k)


def build_pyramid(img: np.ndarray, levels: int) -> list[np.ndarray]:
    """Level 1 is full resolution; level l is downsampled (l-1) times.

    Dimensions must be divisible by 2^(levels-1); callers pad first.
    """
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    img = ensure_image(img)
    h, w = img.shape[:2]
    d = 2 ** (levels - 1)
    if h % d != 0:
        raise ValueError(f"height {h} not divisible by {d}; pad first")
    if w % d != 0:
        raise ValueError(f"width {w} not divisible by {d}; pad first")
    out = [img]
    for _ in range(levels - 1):
        out.append(downsample_half(out[-1]))
    return out
