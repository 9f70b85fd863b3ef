"""Training objective: photometric terms, flow regularizers, and their
analytic gradients with respect to the filter logits.

All grid losses are means, not sums, so values are comparable across
pyramid scales. Every photometric residual goes through the Charbonnier
penalty phi(s) = sqrt(s^2 + 0.001^2), so those terms bottom out at 0.001.
L1 terms use subgradient 0 at exact zeros.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import (
    FilterFlowField,
    bilinear_gather,
    bilinear_gather_vjp,
    filters_to_flow,
    flow_vjp_to_probs,
    softmax_vjp,
    _sample_grid,
)
from .grid import ensure_image, patch_stack

CHARBONNIER_EPS = 0.001


@dataclass(frozen=True)
class LossWeights:
    """Coefficients of the regularizers added to the reconstruction term."""

    lambda_fl: float = 1.0
    lambda_fb: float = 0.1
    lambda_sm: float = 0.01
    lambda_sp: float = 0.001

    def __post_init__(self):
        for name in ("lambda_fl", "lambda_fb", "lambda_sm", "lambda_sp"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class LossBreakdown:
    """Raw term values for one direction; total folds in the weights."""

    rec: float
    fl: float
    fb: float
    sm: float
    sp: float
    total: float
    direction: str  # "src->tgt" or "tgt->src"


def charbonnier(s):
    """Elementwise sqrt(s^2 + 0.001^2)."""
    s = np.asarray(s)
    return np.sqrt(s * s + CHARBONNIER_EPS * CHARBONNIER_EPS)


def _charbonnier_deriv(s):
    return s / charbonnier(s)


def loss_rec(field: FilterFlowField, src: np.ndarray, tgt: np.ndarray) -> float:
    """Mean Charbonnier error of reconstructing tgt by filtering src."""
    from .fields import apply_filter_flow

    tgt = ensure_image(tgt)
    recon = apply_filter_flow(field, src)
    if recon.shape != tgt.shape:
        raise ValueError(f"target shape {tgt.shape} does not match {recon.shape}")
    return float(charbonnier(tgt - recon).mean())


def loss_flow_warp(field: FilterFlowField, src: np.ndarray, tgt: np.ndarray) -> float:
    """Mean Charbonnier error of warping src by the field's coordinate flow."""
    from .fields import warp_with_flow

    tgt = ensure_image(tgt)
    warped = warp_with_flow(src, filters_to_flow(field))
    if warped.shape != tgt.shape:
        raise ValueError(f"target shape {tgt.shape} does not match {warped.shape}")
    return float(charbonnier(tgt - warped).mean())


def _fb_residual(f: np.ndarray, b: np.ndarray) -> np.ndarray:
    base_r, base_c = _sample_grid(*f.shape[:2])
    b_at = bilinear_gather(b, base_r + f[:, :, 0], base_c + f[:, :, 1])
    return f + b_at


def loss_fb(f: np.ndarray, b: np.ndarray) -> float:
    """Forward-backward round-trip penalty, per-component Charbonnier mean.

    The residual at p is f(p) + b(p + f(p)) with b sampled bilinearly; an
    exact inverse pair leaves the loss at the 0.001 floor.
    """
    f = np.asarray(f)
    b = np.asarray(b)
    if f.shape != b.shape:
        raise ValueError(f"flow shapes differ: {f.shape} vs {b.shape}")
    return float(charbonnier(_fb_residual(f, b)).mean())


def loss_smooth(f: np.ndarray) -> float:
    """L1 norm of the flow gradient: forward differences along rows and
    columns, the per-edge vector L1 summed over components, averaged per
    orientation and then over the two orientations."""
    f = np.asarray(f)
    dv = f[1:, :, :] - f[:-1, :, :]
    dh = f[:, 1:, :] - f[:, :-1, :]
    terms = []
    for d in (dv, dh):
        terms.append(np.abs(d).sum(axis=2).mean() if d.size else 0.0)
    return float(sum(terms) / 2.0)


def loss_sparse(f: np.ndarray) -> float:
    """Per-component mean absolute displacement."""
    return float(np.abs(np.asarray(f)).mean())


def _total(rec, fl, fb, sm, sp, w: LossWeights) -> float:
    return rec + w.lambda_fl * fl + w.lambda_fb * fb + w.lambda_sm * sm + w.lambda_sp * sp


def total_loss(
    field_fwd: FilterFlowField,
    field_bwd: FilterFlowField,
    src: np.ndarray,
    tgt: np.ndarray,
    weights: LossWeights = LossWeights(),
    src_bwd: np.ndarray | None = None,
    tgt_bwd: np.ndarray | None = None,
) -> tuple[LossBreakdown, LossBreakdown]:
    """Both directional breakdowns of the full objective.

    field_fwd reconstructs tgt from src; field_bwd reconstructs src from
    tgt. The backward direction defaults to the swapped frame pair, but the
    multigrid trainer passes separately warped sources for each direction.
    """
    (bd_f, bd_b), _ = _total_loss_impl(
        field_fwd, field_bwd, src, tgt, weights, src_bwd, tgt_bwd, want_grads=False
    )
    return bd_f, bd_b


def grad_total_wrt_logits(
    field_fwd: FilterFlowField,
    field_bwd: FilterFlowField,
    src: np.ndarray,
    tgt: np.ndarray,
    weights: LossWeights = LossWeights(),
    src_bwd: np.ndarray | None = None,
    tgt_bwd: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the summed directional totals wrt both logit grids."""
    _, grads = _total_loss_impl(
        field_fwd, field_bwd, src, tgt, weights, src_bwd, tgt_bwd, want_grads=True
    )
    return grads


def total_loss_and_grads(
    field_fwd: FilterFlowField,
    field_bwd: FilterFlowField,
    src: np.ndarray,
    tgt: np.ndarray,
    weights: LossWeights = LossWeights(),
    src_bwd: np.ndarray | None = None,
    tgt_bwd: np.ndarray | None = None,
):
    """One-pass variant returning (breakdown pair, (dlogits_fwd, dlogits_bwd))."""
    return _total_loss_impl(
        field_fwd, field_bwd, src, tgt, weights, src_bwd, tgt_bwd, want_grads=True
    )


def _rec_term(probs, patches, tgt, dprobs=None):
    recon = np.einsum("hwk,hwck->hwc", probs, patches, optimize=True)
    resid = tgt - recon
    loss = float(charbonnier(resid).mean())
    if dprobs is not None:
        dresid = _charbonnier_deriv(resid) / resid.size
        dprobs -= np.einsum("hwc,hwck->hwk", dresid, patches, optimize=True)
    return loss


def _fl_term(src, tgt, flow, dflow=None, scale=1.0):
    base_r, base_c = _sample_grid(*flow.shape[:2])
    rows = base_r + flow[:, :, 0]
    cols = base_c + flow[:, :, 1]
    warped = bilinear_gather(src, rows, cols)
    resid = tgt - warped
    loss = float(charbonnier(resid).mean())
    if dflow is not None and scale != 0.0:
        dwarped = -_charbonnier_deriv(resid) / resid.size
        _, drows, dcols = bilinear_gather_vjp(src, rows, cols, dwarped, need_dimg=False)
        dflow[:, :, 0] += scale * drows
        dflow[:, :, 1] += scale * dcols
    return loss


def _fb_term(f, b, df=None, db=None, scale=1.0):
    base_r, base_c = _sample_grid(*f.shape[:2])
    rows = base_r + f[:, :, 0]
    cols = base_c + f[:, :, 1]
    b_at = bilinear_gather(b, rows, cols)
    resid = f + b_at
    loss = float(charbonnier(resid).mean())
    if df is not None and scale != 0.0:
        dresid = _charbonnier_deriv(resid) / resid.size
        dimg, drows, dcols = bilinear_gather_vjp(b, rows, cols, dresid, need_dimg=True)
        df += scale * dresid
        df[:, :, 0] += scale * drows
        df[:, :, 1] += scale * dcols
        db += scale * dimg
    return loss


def _sm_term(f, df=None, scale=1.0):
    dv = f[1:, :, :] - f[:-1, :, :]
    dh = f[:, 1:, :] - f[:, :-1, :]
    loss = 0.0
    for d in (dv, dh):
        if d.size:
            loss += np.abs(d).sum(axis=2).mean()
    loss = float(loss / 2.0)
    if df is not None and scale != 0.0:
        if dv.size:
            sv = np.sign(dv) / (2.0 * dv.shape[0] * dv.shape[1])
            df[1:, :, :] += scale * sv
            df[:-1, :, :] -= scale * sv
        if dh.size:
            sh = np.sign(dh) / (2.0 * dh.shape[0] * dh.shape[1])
            df[:, 1:, :] += scale * sh
            df[:, :-1, :] -= scale * sh
    return loss


def _sp_term(f, df=None, scale=1.0):
    loss = float(np.abs(f).mean())
    if df is not None and scale != 0.0:
        df += scale * np.sign(f) / f.size
    return loss


def _total_loss_impl(field_fwd, field_bwd, src, tgt, weights, src_bwd, tgt_bwd, want_grads):
    src = ensure_image(src)
    tgt = ensure_image(tgt)
    src_b = ensure_image(src_bwd) if src_bwd is not None else tgt
    tgt_b = ensure_image(tgt_bwd) if tgt_bwd is not None else src
    for img, fld, tag in ((src, field_fwd, "forward"), (src_b, field_bwd, "backward")):
        if img.shape[:2] != (fld.height, fld.width):
            raise ValueError(
                f"{tag} source shape {img.shape[:2]} does not match field "
                f"{(fld.height, fld.width)}"
            )
    if src.shape != tgt.shape or src_b.shape != tgt_b.shape:
        raise ValueError("source/target shapes do not match")

    probs_f = field_fwd.probabilities()
    probs_b = field_bwd.probabilities()
    patches_f = patch_stack(src, field_fwd.k)
    patches_b = patch_stack(src_b, field_bwd.k)
    flow_f = filters_to_flow(field_fwd)
    flow_b = filters_to_flow(field_bwd)

    dprobs_f = np.zeros_like(probs_f) if want_grads else None
    dprobs_b = np.zeros_like(probs_b) if want_grads else None
    dflow_f = np.zeros_like(flow_f) if want_grads else None
    dflow_b = np.zeros_like(flow_b) if want_grads else None

    w = weights
    rec_f = _rec_term(probs_f, patches_f, tgt, dprobs_f)
    rec_b = _rec_term(probs_b, patches_b, tgt_b, dprobs_b)
    fl_f = _fl_term(src, tgt, flow_f, dflow_f, w.lambda_fl)
    fl_b = _fl_term(src_b, tgt_b, flow_b, dflow_b, w.lambda_fl)
    fb_f = _fb_term(flow_f, flow_b, dflow_f, dflow_b, w.lambda_fb)
    fb_b = _fb_term(flow_b, flow_f, dflow_b, dflow_f, w.lambda_fb)
    sm_f = _sm_term(flow_f, dflow_f, w.lambda_sm)
    sm_b = _sm_term(flow_b, dflow_b, w.lambda_sm)
    sp_f = _sp_term(flow_f, dflow_f, w.lambda_sp)
    sp_b = _sp_term(flow_b, dflow_b, w.lambda_sp)

    bd_f = LossBreakdown(rec_f, fl_f, fb_f, sm_f, sp_f, _total(rec_f, fl_f, fb_f, sm_f, sp_f, w), "src->tgt")
    bd_b = LossBreakdown(rec_b, fl_b, fb_b, sm_b, sp_b, _total(rec_b, fl_b, fb_b, sm_b, sp_b, w), "tgt->src")

    grads = None
    if want_grads:
        dprobs_f += flow_vjp_to_probs(dflow_f, field_fwd.k)
        dprobs_b += flow_vjp_to_probs(dflow_b, field_bwd.k)
        grads = (softmax_vjp(probs_f, dprobs_f), softmax_vjp(probs_b, dprobs_b))
    return (bd_f, bd_b), grads


def finite_diff_check(loss_fn, analytic_grad: np.ndarray, logits: np.ndarray,
                      step: float = 1e-5, samples: int = 200, seed: int = 0) -> float:
    """Central-difference check of an analytic gradient on sampled entries.

    loss_fn maps a logits array to a scalar. Returns the max relative error
    with denominator max(|analytic|, |numeric|, 1e-8). Entries where both
    sides sit below the difference quotient's own rounding floor
    (eps * |loss| / step) are counted as agreeing: finite differences
    cannot resolve derivatives smaller than their cancellation noise.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    rng = np.random.default_rng(seed)
    flat = logits.reshape(-1)
    n = min(samples, flat.size) if samples else flat.size
    idx = rng.choice(flat.size, size=n, replace=False)
    base = abs(float(loss_fn(logits)))
    noise_floor = 100.0 * np.finfo(np.float64).eps * max(base, 1e-3) / step
    worst = 0.0
    for i in idx:
        orig = flat[i]
        flat[i] = orig + step
        lo_plus = loss_fn(logits)
        flat[i] = orig - step
        lo_minus = loss_fn(logits)
        flat[i] = orig
        numeric = (lo_plus - lo_minus) / (2.0 * step)
        analytic = analytic_grad.reshape(-1)[i]
        if max(abs(analytic), abs(numeric)) < noise_floor:
            continue
        denom = max(abs(analytic), abs(numeric), 1e-8)
        worst = max(worst, abs(analytic - numeric) / denom)
    return worst
