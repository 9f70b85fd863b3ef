"""Coarse-to-fine orchestration: residual filter prediction per scale with
flow accumulation, plus a network-free direct solver for desk-scale pairs.

The full-resolution operator is never materialized. At each scale, working
coarsest to finest, the source pyramid level is warped by the accumulated
flow, residual filters are predicted between that warped source and the
target level, and the residual's coordinate flow is pull-composed in front
of the accumulated flow (the residual indexes positions in the already
warped source). Between scales the accumulated flow is upsampled 2x.
Both directions run side by side so the consistency term can couple them.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .fields import (
    FilterFlowField,
    compose_flows,
    filters_to_flow,
    upscale_flow_2x,
    warp_with_flow,
    zero_flow,
)
from .grid import build_pyramid, crop_to, ensure_image, pad_to_multiple
from .losses import LossBreakdown, LossWeights, total_loss, total_loss_and_grads
from .optim import AdamState, adam_step


@dataclass(frozen=True)
class PyramidConfig:
    """Scale count and per-scale kernel size (desk defaults 3 and 7)."""

    levels: int = 3
    k: int = 7

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")
        if self.k < 1 or self.k % 2 == 0:
            raise ValueError(f"kernel size must be odd and >= 1, got {self.k}")

    @property
    def radius(self) -> int:
        return (self.k - 1) // 2

    @property
    def capacity(self) -> int:
        """Largest full-resolution displacement the pyramid can represent:
        the per-scale reach r accumulated geometrically over levels."""
        return self.radius * (2**self.levels - 1)


@dataclass
class SolverOptions:
    iterations: int = 500
    lr: float = 0.05
    budget: int = 2_000_000  # max H*W*k^2 at full resolution


@dataclass
class MultigridResult:
    """Everything the coarse-to-fine pass produced, coarsest scale first."""

    fields: list[FilterFlowField]
    fields_reverse: list[FilterFlowField]
    flow: np.ndarray  # accumulated pull flow at padded full resolution
    scale_recons: list[np.ndarray]
    recon: np.ndarray  # final reconstruction, cropped to the original size
    losses: list[tuple[LossBreakdown, LossBreakdown]]
    orig_size: tuple[int, int]
    logit_grads: list[tuple[np.ndarray, np.ndarray]] | None = None

    @property
    def cropped_flow(self) -> np.ndarray:
        h, w = self.orig_size
        return self.flow[:h, :w]

    def recon_error(self, tgt: np.ndarray) -> float:
        from .losses import charbonnier

        tgt = ensure_image(tgt)
        return float(charbonnier(tgt - self.recon).mean())


def make_pair_predictor(predict_one):
    """Adapt a single-direction (src, tgt) -> FilterFlowField callable."""

    def predict_pair(src_fwd, tgt_fwd, src_bwd, tgt_bwd):
        return predict_one(src_fwd, tgt_fwd), predict_one(src_bwd, tgt_bwd)

    return predict_pair


def network_pair_predictor(params, net_cfg):
    """Pair predictor backed by the learned network (inference, no tape)."""
    from .net import forward

    def predict_pair(src_fwd, tgt_fwd, src_bwd, tgt_bwd):
        return (
            forward(params, src_fwd, tgt_fwd, net_cfg),
            forward(params, src_bwd, tgt_bwd, net_cfg),
        )

    return predict_pair


def coarse_to_fine(
    predict_pair,
    src: np.ndarray,
    tgt: np.ndarray,
    cfg: PyramidConfig = PyramidConfig(),
    weights: LossWeights = LossWeights(),
    want_grads: bool = False,
) -> MultigridResult:
    """Run the residual pyramid with any pair predictor.

    predict_pair(src_fwd, tgt_fwd, src_bwd, tgt_bwd) returns the two
    directions' filter fields for the (already warped) inputs at one scale;
    wrap a plain (src, tgt) predictor with make_pair_predictor.
    """
    src = ensure_image(src)
    tgt = ensure_image(tgt)
    if src.shape != tgt.shape:
        raise ValueError(f"frame shapes differ: {src.shape} vs {tgt.shape}")
    orig = src.shape[:2]
    mult = 2 ** (cfg.levels - 1)
    src_p, _ = pad_to_multiple(src, mult)
    tgt_p, _ = pad_to_multiple(tgt, mult)
    pyr_src = build_pyramid(src_p, cfg.levels)
    pyr_tgt = build_pyramid(tgt_p, cfg.levels)

    ch, cw = pyr_src[-1].shape[:2]
    flow_fwd = zero_flow(ch, cw)
    flow_bwd = zero_flow(ch, cw)

    fields: list[FilterFlowField] = []
    fields_rev: list[FilterFlowField] = []
    recons: list[np.ndarray] = []
    losses: list[tuple[LossBreakdown, LossBreakdown]] = []
    grads: list[tuple[np.ndarray, np.ndarray]] = []

    for level in range(cfg.levels, 0, -1):
        src_l = pyr_src[level - 1]
        tgt_l = pyr_tgt[level - 1]
        warped_src = warp_with_flow(src_l, flow_fwd)
        warped_tgt = warp_with_flow(tgt_l, flow_bwd)
        field_f, field_b = predict_pair(warped_src, tgt_l, warped_tgt, src_l)
        expect = src_l.shape[:2]
        for f in (field_f, field_b):
            if (f.height, f.width) != expect:
                raise ValueError(
                    f"predictor returned {f.height}x{f.width} field at a "
                    f"{expect[0]}x{expect[1]} scale"
                )
        field_f = dataclasses.replace(field_f, scale_index=level)
        field_b = dataclasses.replace(field_b, scale_index=level)
        if want_grads:
            (bd_f, bd_b), g = total_loss_and_grads(
                field_f, field_b, warped_src, tgt_l, weights,
                src_bwd=warped_tgt, tgt_bwd=src_l,
            )
        else:
            bd_f, bd_b = total_loss(
                field_f, field_b, warped_src, tgt_l, weights,
                src_bwd=warped_tgt, tgt_bwd=src_l,
            )
            g = None
        fields.append(field_f)
        fields_rev.append(field_b)
        losses.append((bd_f, bd_b))
        if g is not None:
            grads.append(g)

        flow_fwd = compose_flows(filters_to_flow(field_f), flow_fwd)
        flow_bwd = compose_flows(filters_to_flow(field_b), flow_bwd)
        recons.append(warp_with_flow(src_l, flow_fwd))
        if level > 1:
            flow_fwd = upscale_flow_2x(flow_fwd)
            flow_bwd = upscale_flow_2x(flow_bwd)

    recon = crop_to(warp_with_flow(src_p, flow_fwd), orig)
    return MultigridResult(
        fields=fields,
        fields_reverse=fields_rev,
        flow=flow_fwd,
        scale_recons=recons,
        recon=recon,
        losses=losses,
        orig_size=orig,
        logit_grads=grads if want_grads else None,
    )


def solve_direct(
    src: np.ndarray,
    tgt: np.ndarray,
    cfg: PyramidConfig = PyramidConfig(),
    opts: SolverOptions | None = None,
    weights: LossWeights = LossWeights(),
) -> MultigridResult:
    """Optimize per-pixel logits directly (no network) with ADAM per scale.

    Both directions start from uniform kernels (zero logits) and descend the
    same objective the trainer uses. Tractable at desk scale only, hence the
    coefficient budget guard.
    """
    opts = opts or SolverOptions()
    src = ensure_image(src)
    h, w = src.shape[:2]
    coeffs = h * w * cfg.k * cfg.k
    if coeffs > opts.budget:
        raise ValueError(
            f"direct solve needs {coeffs} coefficients at full resolution, "
            f"over the budget of {opts.budget}; reduce the resolution or k"
        )

    def predict_pair(src_fwd, tgt_fwd, src_bwd, tgt_bwd):
        hh, ww = src_fwd.shape[:2]
        logits = {
            "fwd": np.zeros((hh, ww, cfg.k * cfg.k)),
            "bwd": np.zeros((hh, ww, cfg.k * cfg.k)),
        }
        state = AdamState.for_params(logits)
        for _ in range(opts.iterations):
            f_f = FilterFlowField(logits["fwd"], cfg.k)
            f_b = FilterFlowField(logits["bwd"], cfg.k)
            _, (g_f, g_b) = total_loss_and_grads(
                f_f, f_b, src_fwd, tgt_fwd, weights,
                src_bwd=src_bwd, tgt_bwd=tgt_bwd,
            )
            adam_step(logits, {"fwd": g_f, "bwd": g_b}, state, lr=opts.lr)
        return (
            FilterFlowField(logits["fwd"], cfg.k),
            FilterFlowField(logits["bwd"], cfg.k),
        )

    return coarse_to_fine(predict_pair, src, tgt, cfg, weights)


def long_range_flow(frames, i: int, j: int, flow_fn) -> np.ndarray:
    """Pull flow mapping frame j's pixels back to frame i, by composing
    adjacent-pair flows; warp_with_flow(frames[i], result) reconstructs
    frame j. flow_fn(src, tgt) must return the accumulated pull flow for
    one pair at frame resolution."""
    n = len(frames)
    if not (0 <= i < j < n):
        raise IndexError(f"need 0 <= i < j < {n}, got i={i}, j={j}")
    total = flow_fn(frames[i], frames[i + 1])
    for t in range(i + 1, j):
        total = compose_flows(flow_fn(frames[t], frames[t + 1]), total)
    return total


def pyramid_coefficient_count(h: int, w: int, cfg: PyramidConfig) -> int:
    """Total predicted filter coefficients across the pyramid (padded dims)."""
    mult = 2 ** (cfg.levels - 1)
    hp = h + ((-h) % mult)
    wp = w + ((-w) % mult)
    total = 0
    for level in range(cfg.levels):
        total += (hp >> level) * (wp >> level) * cfg.k * cfg.k
    return total
