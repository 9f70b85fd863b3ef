"""The filter predictor: a small shared-weight convolutional network with a
minimal reverse-mode tape.

Each frame passes through the same weights twice per pair: an additive-skip
U-net (stride-2 mean pooling down, nearest-neighbor upsampling up) plus a
shallow full-resolution stream, summed into a per-pixel embedding. The two
embeddings are concatenated in (src, tgt) order -- direction is encoded
purely by that order -- and head convolutions emit k*k logits per pixel at
input resolution. One parameter set serves every pyramid scale.

All convolutions are 3x3, stride 1, replicate padded. The tape records
creation order, which is a valid topological order, so backward is a single
reverse sweep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import FilterFlowField
from .grid import patch_stack


@dataclass(frozen=True)
class NetConfig:
    embed_channels: tuple[int, ...] = (16, 32, 32, 16)
    full_res_channels: int = 8
    head_channels: tuple[int, ...] | None = None  # defaults to (32, k*k)
    k: int = 7
    seed: int = 0

    def __post_init__(self):
        if self.k < 1 or self.k % 2 == 0:
            raise ValueError(f"kernel size must be odd and >= 1, got {self.k}")
        if len(self.embed_channels) < 1 or any(c < 1 for c in self.embed_channels):
            raise ValueError("embed_channels must be a non-empty list of positive widths")
        head = self.head_channels
        if head is None:
            head = (32, self.k * self.k)
            object.__setattr__(self, "head_channels", head)
        if head[-1] != self.k * self.k:
            raise ValueError(
                f"final head width must be k*k = {self.k * self.k}, got {head[-1]}"
            )

    @property
    def depth(self) -> int:
        return len(self.embed_channels)

    @property
    def pad_multiple(self) -> int:
        return 2 ** (self.depth - 1)


def _conv_param_names(cfg: NetConfig, in_channels: int):
    """Yield (name, c_in, c_out, zero_init) for every convolution, in order."""
    chans = cfg.embed_channels
    prev = in_channels
    for i, c in enumerate(chans):
        yield f"enc{i}", prev, c, False
        prev = c
    for i in range(cfg.depth - 2, -1, -1):
        yield f"dec{i}", prev, chans[i], False
        prev = chans[i]
    yield "stream0", in_channels, cfg.full_res_channels, False
    yield "stream1", cfg.full_res_channels, chans[0], False
    prev = 2 * chans[0]
    for i, c in enumerate(cfg.head_channels):
        yield f"head{i}", prev, c, False
        prev = c


def init_params(cfg: NetConfig, in_channels: int = 1, dtype=np.float64) -> dict[str, np.ndarray]:
    """Fan-in-scaled uniform weights, zero biases; deterministic in the seed.

    Training uses float32 (pass dtype=np.float32); gradient checks keep the
    float64 default.
    """
    rng = np.random.default_rng(cfg.seed)
    params: dict[str, np.ndarray] = {}
    for name, c_in, c_out, _ in _conv_param_names(cfg, in_channels):
        bound = np.sqrt(6.0 / (9.0 * c_in))
        params[f"{name}_w"] = rng.uniform(-bound, bound, size=(c_out, c_in, 3, 3)).astype(dtype)
        params[f"{name}_b"] = np.zeros(c_out, dtype=dtype)
    return params


def param_in_channels(params: dict[str, np.ndarray]) -> int:
    return params["enc0_w"].shape[1]


class Var:
    """A node holding a value and, when taped, how to push gradients back."""

    __slots__ = ("value", "grad", "backward_fn")

    def __init__(self, value, backward_fn=None):
        self.value = value
        self.grad = None
        self.backward_fn = backward_fn

    def add_grad(self, g):
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g


class Tape:
    """Records Vars in creation order; backward() replays them reversed."""

    def __init__(self):
        self.nodes: list[Var] = []
        self.param_vars: dict[str, Var] = {}
        self.output: Var | None = None

    def record(self, value, backward_fn) -> Var:
        v = Var(value, backward_fn)
        self.nodes.append(v)
        return v

    def param(self, name: str, value: np.ndarray) -> Var:
        if name not in self.param_vars:
            self.param_vars[name] = Var(value)
        return self.param_vars[name]


def _op(tape: Tape | None, value, backward_fn):
    if tape is None:
        return Var(value)
    return tape.record(value, backward_fn)


def _fold_replicate_pad(dpad: np.ndarray, top: int, bottom: int, left: int, right: int) -> np.ndarray:
    """Collapse gradients on replicate padding back onto the edge pixels."""
    h = dpad.shape[0] - top - bottom
    w = dpad.shape[1] - left - right
    dx = dpad[top : top + h, left : left + w].copy()
    if top:
        dx[0] += dpad[:top, left : left + w].sum(axis=0)
    if bottom:
        dx[-1] += dpad[top + h :, left : left + w].sum(axis=0)
    if left:
        dx[:, 0] += dpad[top : top + h, :left].sum(axis=1)
    if right:
        dx[:, -1] += dpad[top : top + h, left + w :].sum(axis=1)
    if top and left:
        dx[0, 0] += dpad[:top, :left].sum(axis=(0, 1))
    if top and right:
        dx[0, -1] += dpad[:top, left + w :].sum(axis=(0, 1))
    if bottom and left:
        dx[-1, 0] += dpad[top + h :, :left].sum(axis=(0, 1))
    if bottom and right:
        dx[-1, -1] += dpad[top + h :, left + w :].sum(axis=(0, 1))
    return dx


def conv3(tape, x: Var, w: Var, b: Var) -> Var:
    """3x3 replicate-padded convolution via patch gathering + matmul."""
    h, wid, c_in = x.value.shape
    c_out = w.value.shape[0]
    patches = patch_stack(x.value, 3).reshape(h * wid, c_in * 9)
    wmat = w.value.reshape(c_out, c_in * 9).T
    out = (patches @ wmat + b.value).reshape(h, wid, c_out)

    def backward(dout):
        dflat = dout.reshape(h * wid, c_out)
        w.add_grad((patches.T @ dflat).T.reshape(w.value.shape))
        b.add_grad(dflat.sum(axis=0))
        dpatches = (dflat @ wmat.T).reshape(h, wid, c_in, 3, 3)
        dpad = np.zeros((h + 2, wid + 2, c_in), dtype=dpatches.dtype)
        for i in range(3):
            for j in range(3):
                dpad[i : i + h, j : j + wid] += dpatches[:, :, :, i, j]
        x.add_grad(_fold_replicate_pad(dpad, 1, 1, 1, 1))

    return _op(tape, out, backward)


def relu(tape, x: Var) -> Var:
    mask = x.value > 0

    def backward(dout):
        x.add_grad(dout * mask)

    return _op(tape, np.where(mask, x.value, 0.0), backward)


def pool2(tape, x: Var) -> Var:
    """Stride-2 mean pooling; dims must be even."""
    h, w = x.value.shape[:2]
    if h % 2 or w % 2:
        raise ValueError(f"pooling needs even dims, got {(h, w)}")
    a = x.value[0::2, 0::2] + x.value[0::2, 1::2]
    b = x.value[1::2, 0::2] + x.value[1::2, 1::2]
    out = (a + b) * 0.25

    def backward(dout):
        x.add_grad(np.repeat(np.repeat(dout, 2, axis=0), 2, axis=1) * 0.25)

    return _op(tape, out, backward)


def upsample2(tape, x: Var) -> Var:
    out = np.repeat(np.repeat(x.value, 2, axis=0), 2, axis=1)

    def backward(dout):
        h2, w2 = dout.shape[:2]
        folded = (
            dout[0::2, 0::2] + dout[0::2, 1::2] + dout[1::2, 0::2] + dout[1::2, 1::2]
        )
        x.add_grad(folded)

    return _op(tape, out, backward)


def add(tape, x: Var, y: Var) -> Var:
    def backward(dout):
        x.add_grad(dout)
        y.add_grad(dout)

    return _op(tape, x.value + y.value, backward)


def concat(tape, x: Var, y: Var) -> Var:
    cx = x.value.shape[2]

    def backward(dout):
        x.add_grad(dout[:, :, :cx])
        y.add_grad(dout[:, :, cx:])

    return _op(tape, np.concatenate([x.value, y.value], axis=2), backward)


def pad_rb(tape, x: Var, bottom: int, right: int) -> Var:
    """Replicate-pad bottom/right (used to hit the pooling alignment)."""
    if bottom == 0 and right == 0:
        return x
    out = np.pad(x.value, ((0, bottom), (0, right), (0, 0)), mode="edge")

    def backward(dout):
        x.add_grad(_fold_replicate_pad(dout, 0, bottom, 0, right))

    return _op(tape, out, backward)


def crop_lt(tape, x: Var, h: int, w: int) -> Var:
    if x.value.shape[0] == h and x.value.shape[1] == w:
        return x
    out = x.value[:h, :w]

    def backward(dout):
        dfull = np.zeros_like(x.value)
        dfull[:h, :w] = dout
        x.add_grad(dfull)

    return _op(tape, out, backward)


def _embed_frame(tape, params, cfg: NetConfig, x: Var) -> Var:
    """Shared per-frame pixel embedding: additive-skip U-net + full-res stream."""
    downs = []
    h = x
    for i in range(cfg.depth):
        if i > 0:
            h = pool2(tape, h)
        h = relu(tape, conv3(tape, h, _p(tape, params, f"enc{i}_w"),
                             _p(tape, params, f"enc{i}_b")))
        downs.append(h)
    g = downs[-1]
    for i in range(cfg.depth - 2, -1, -1):
        g = upsample2(tape, g)
        g = conv3(tape, g, _p(tape, params, f"dec{i}_w"),
                  _p(tape, params, f"dec{i}_b"))
        g = relu(tape, add(tape, g, downs[i]))
    s = relu(tape, conv3(tape, x, _p(tape, params, "stream0_w"),
                         _p(tape, params, "stream0_b")))
    s = conv3(tape, s, _p(tape, params, "stream1_w"),
              _p(tape, params, "stream1_b"))
    return add(tape, g, s)


def forward(
    params: dict[str, np.ndarray],
    src: np.ndarray,
    tgt: np.ndarray,
    cfg: NetConfig,
    tape: Tape | None = None,
    scale_index: int = 1,
) -> FilterFlowField:
    """Predict the filter field reconstructing tgt from src (direction tgt<-src)."""
    dtype = params["enc0_w"].dtype
    src = np.asarray(src, dtype=dtype)
    tgt = np.asarray(tgt, dtype=dtype)
    if src.ndim == 2:
        src = src[:, :, None]
    if tgt.ndim == 2:
        tgt = tgt[:, :, None]
    if src.shape != tgt.shape:
        raise ValueError(f"frame shapes differ: {src.shape} vs {tgt.shape}")
    if src.shape[2] != param_in_channels(params):
        raise ValueError(
            f"frames have {src.shape[2]} channels but params expect "
            f"{param_in_channels(params)}"
        )
    h, w = src.shape[:2]
    m = cfg.pad_multiple
    bottom = (-h) % m
    right = (-w) % m

    own_tape = tape if tape is not None else None
    xs = pad_rb(own_tape, Var(src), bottom, right)
    xt = pad_rb(own_tape, Var(tgt), bottom, right)
    emb_s = _embed_frame(own_tape, params, cfg, xs)
    emb_t = _embed_frame(own_tape, params, cfg, xt)
    z = concat(own_tape, emb_s, emb_t)
    n_head = len(cfg.head_channels)
    for i in range(n_head):
        z = conv3(own_tape, z, _p(own_tape, params, f"head{i}_w"),
                  _p(own_tape, params, f"head{i}_b"))
        if i < n_head - 1:
            z = relu(own_tape, z)
    z = crop_lt(own_tape, z, h, w)
    if tape is not None:
        tape.output = z
    return FilterFlowField(z.value, cfg.k, scale_index=scale_index)


def _p(tape, params, name):
    if tape is None:
        return Var(params[name])
    return tape.param(name, params[name])


def backward(tape: Tape, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Reverse sweep: gradients of the logits objective wrt every parameter."""
    if tape.output is None:
        raise ValueError("tape has no recorded forward pass")
    if dlogits.shape != tape.output.value.shape:
        raise ValueError(
            f"upstream gradient shape {dlogits.shape} does not match logits "
            f"{tape.output.value.shape}"
        )
    for v in tape.nodes:
        v.grad = None
    tape.output.add_grad(np.asarray(dlogits, dtype=tape.output.value.dtype))
    for v in reversed(tape.nodes):
        if v.grad is not None and v.backward_fn is not None:
            v.backward_fn(v.grad)
    return {
        name: (var.grad if var.grad is not None else np.zeros_like(var.value))
        for name, var in tape.param_vars.items()
    }
