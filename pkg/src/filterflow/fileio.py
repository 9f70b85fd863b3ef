"""File formats.

Images: PGM (P5, 8-bit) and PNG (8-bit gray or RGB), intensities mapped
linearly to [0, 1]; writing clamps to [0, 1] and quantizes by round(255 x).

Flows: Middlebury .flo -- 4-byte tag "PIEH", little-endian int32 width and
height, then row-major interleaved float32 (u, v) with u horizontal. Our
(d_row, d_col) maps to (v, u).

Filter fields: magic "MGPF", then version, H, W, k, scale_index as
little-endian int32, then H*W*k*k little-endian float32 logits.

Checkpoints: magic "MGPC", version int32, section count int32; per section
a uint16 name length, UTF-8 name, int32 ndim, int32 dims, then float32
data. Network weights live under "param/<name>", configuration scalars and
arrays under "config/<field>".
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .fields import FilterFlowField
from .grid import ensure_image

FLO_MAGIC = b"PIEH"
FIELD_MAGIC = b"MGPF"
CHECKPOINT_MAGIC = b"MGPC"


class FileFormatError(Exception):
    """Unreadable or unsupported file contents."""


def read_image(path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"P5":
        return _read_pgm(path)
    if magic == b"\x89P":
        return _read_png(path)
    raise FileFormatError(f"{path}: unknown magic bytes {magic!r}")


def write_image(img: np.ndarray, path) -> None:
    img = ensure_image(img)
    quant = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        if quant.shape[2] != 1:
            raise ValueError("PGM output requires a single channel")
        _write_pgm(quant[:, :, 0], path)
        return
    if quant.shape[2] == 1:
        PILImage.fromarray(quant[:, :, 0], mode="L").save(path, format="PNG")
    elif quant.shape[2] == 3:
        PILImage.fromarray(quant, mode="RGB").save(path, format="PNG")
    else:
        raise ValueError(f"cannot write {quant.shape[2]}-channel image")


def _read_pgm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    if not data.startswith(b"P5"):
        raise FileFormatError(f"{path}: not a P5 PGM")
    # header tokens: magic, width, height, maxval; comments start with '#'
    tokens = []
    i = 2
    while len(tokens) < 3:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < len(data) and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise FileFormatError(f"{path}: truncated PGM header")
        tokens.append(data[start:i])
    i += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as e:
        raise FileFormatError(f"{path}: bad PGM header") from e
    if maxval != 255:
        raise FileFormatError(f"{path}: unsupported PGM maxval {maxval} (only 255)")
    pixels = data[i : i + width * height]
    if len(pixels) != width * height:
        raise FileFormatError(f"{path}: truncated PGM pixel data")
    arr = np.frombuffer(pixels, dtype=np.uint8).reshape(height, width)
    return arr.astype(np.float64)[:, :, None] / 255.0


def _write_pgm(gray: np.ndarray, path: Path) -> None:
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(gray.tobytes())


def _read_png(path: Path) -> np.ndarray:
    try:
        im = PILImage.open(path)
        im.load()
    except Exception as e:
        raise FileFormatError(f"{path}: unreadable PNG ({e})") from e
    if im.mode in ("I", "I;16", "I;16B", "I;16L"):
        raise FileFormatError(f"{path}: unsupported bit depth (16-bit PNG)")
    if im.mode == "L":
        arr = np.asarray(im, dtype=np.uint8)[:, :, None]
    elif im.mode == "RGB":
        arr = np.asarray(im, dtype=np.uint8)
    elif im.mode in ("P", "LA", "RGBA"):
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    else:
        raise FileFormatError(f"{path}: unsupported PNG mode {im.mode}")
    return arr.astype(np.float64) / 255.0


def read_flo(path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 12:
        raise FileFormatError(f"{path}: truncated .flo header")
    if data[:4] != FLO_MAGIC:
        raise FileFormatError(f"{path}: bad .flo magic {data[:4]!r}")
    w, h = struct.unpack("<ii", data[4:12])
    need = 12 + 8 * w * h
    if len(data) != need:
        raise FileFormatError(f"{path}: size {len(data)} does not match header ({need})")
    uv = np.frombuffer(data[12:], dtype="<f4").reshape(h, w, 2)
    flow = np.empty((h, w, 2), dtype=np.float32)
    flow[:, :, 0] = uv[:, :, 1]  # v -> d_row
    flow[:, :, 1] = uv[:, :, 0]  # u -> d_col
    return flow.astype(np.float64)


def write_flo(flow: np.ndarray, path) -> None:
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"flow must be (H, W, 2), got {flow.shape}")
    h, w = flow.shape[:2]
    uv = np.empty((h, w, 2), dtype="<f4")
    uv[:, :, 0] = flow[:, :, 1]
    uv[:, :, 1] = flow[:, :, 0]
    with open(path, "wb") as fh:
        fh.write(FLO_MAGIC)
        fh.write(struct.pack("<ii", w, h))
        fh.write(uv.tobytes())


def read_field(path) -> FilterFlowField:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 24 or data[:4] != FIELD_MAGIC:
        raise FileFormatError(f"{path}: not a filter-field container")
    version, h, w, k, scale_index = struct.unpack("<iiiii", data[4:24])
    if version != 1:
        raise FileFormatError(f"{path}: unsupported field version {version}")
    count = h * w * k * k
    if len(data) != 24 + 4 * count:
        raise FileFormatError(f"{path}: field payload size mismatch")
    logits = np.frombuffer(data[24:], dtype="<f4").reshape(h, w, k * k)
    return FilterFlowField(logits.astype(np.float64), k, scale_index=scale_index)


def write_field(field: FilterFlowField, path) -> None:
    with open(path, "wb") as fh:
        fh.write(FIELD_MAGIC)
        fh.write(struct.pack("<iiiii", 1, field.height, field.width, field.k, field.scale_index))
        fh.write(field.logits.astype("<f4").tobytes())


def _write_section(fh, name: str, arr: np.ndarray) -> None:
    encoded = name.encode()
    fh.write(struct.pack("<H", len(encoded)))
    fh.write(encoded)
    arr = np.asarray(arr, dtype="<f4")
    fh.write(struct.pack("<i", arr.ndim))
    for d in arr.shape:
        fh.write(struct.pack("<i", d))
    fh.write(arr.tobytes())


def save_checkpoint(path, params: dict, net_cfg) -> None:
    sections: list[tuple[str, np.ndarray]] = []
    sections.append(("config/k", np.array([net_cfg.k])))
    sections.append(("config/seed", np.array([net_cfg.seed])))
    sections.append(("config/full_res_channels", np.array([net_cfg.full_res_channels])))
    sections.append(("config/embed_channels", np.array(net_cfg.embed_channels)))
    sections.append(("config/head_channels", np.array(net_cfg.head_channels)))
    for name in sorted(params):
        sections.append((f"param/{name}", params[name]))
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<ii", 1, len(sections)))
        for name, arr in sections:
            _write_section(fh, name, arr)


def load_checkpoint(path):
    """Returns (params, NetConfig)."""
    from .net import NetConfig

    path = Path(path)
    data = path.read_bytes()
    if len(data) < 12 or data[:4] != CHECKPOINT_MAGIC:
        raise FileFormatError(f"{path}: not a checkpoint")
    version, count = struct.unpack("<ii", data[4:12])
    if version != 1:
        raise FileFormatError(f"{path}: unsupported checkpoint version {version}")
    off = 12
    sections: dict[str, np.ndarray] = {}
    for _ in range(count):
        if off + 2 > len(data):
            raise FileFormatError(f"{path}: truncated checkpoint")
        (nlen,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off : off + nlen].decode()
        off += nlen
        (ndim,) = struct.unpack_from("<i", data, off)
        off += 4
        shape = struct.unpack_from(f"<{ndim}i", data, off)
        off += 4 * ndim
        n = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=off).reshape(shape)
        off += 4 * n
        sections[name] = arr.astype(np.float64)
    cfg = NetConfig(
        embed_channels=tuple(int(v) for v in sections["config/embed_channels"]),
        full_res_channels=int(sections["config/full_res_channels"][0]),
        head_channels=tuple(int(v) for v in sections["config/head_channels"]),
        k=int(sections["config/k"][0]),
        seed=int(sections["config/seed"][0]),
    )
    params = {
        name.removeprefix("param/"): arr
        for name, arr in sections.items()
        if name.startswith("param/")
    }
    return params, cfg
