"""Unsupervised training loop: sample frame pairs from a corpus, run the
multigrid pipeline at every scale with shared weights, accumulate the dual
objective, and take one ADAM step per iteration.

Cross-scale coupling note: each scale's warped source is treated as data
(no gradient flows through the accumulated flow into coarser scales); the
per-scale logit gradients from the loss module are pushed through that
scale's two taped network passes only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .losses import LossBreakdown, LossWeights
from .multigrid import MultigridResult, PyramidConfig, coarse_to_fine
from .net import NetConfig, Tape, backward, forward, init_params
from .optim import AdamState, adam_step, clip_global_norm

LOG_HEADER = ["iteration", "scale", "direction", "rec", "fl", "fb", "sm", "sp", "total"]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.0005
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    iterations: int = 500
    pair_window: int = 5  # both frames within this many consecutive frames
    batch_size: int = 1
    augment_flip: bool = True
    augment_rot90: bool = True
    weights: LossWeights = dc_field(default_factory=LossWeights)
    seed: int = 0
    grad_clip: float = 10.0
    checkpoint_interval: int = 0  # 0 disables periodic checkpoints

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not (0.0 <= b < 1.0):
                raise ValueError(f"{name} must be in [0, 1), got {b}")
        if self.pair_window < 1:
            raise ValueError(f"pair_window must be >= 1, got {self.pair_window}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


def _normalize_corpus(corpus) -> list[list[np.ndarray]]:
    """Accept one video (list of frames) or several; validate uniform size."""
    if len(corpus) == 0:
        raise ValueError("corpus is empty")
    videos = corpus if isinstance(corpus[0], (list, tuple)) else [corpus]
    shape = None
    for vid in videos:
        if len(vid) < 2:
            raise ValueError("every video needs at least two frames")
        for frame in vid:
            f = np.asarray(frame)
            s = f.shape
            if shape is None:
                shape = s
            elif s != shape:
                raise ValueError(f"non-uniform frame sizes: {s} vs {shape}")
    return [list(v) for v in videos]


def sample_pair(videos, rng: np.random.Generator, window: int):
    """A frame pair with both indices inside a `window`-frame span."""
    vid = videos[rng.integers(len(videos))]
    i = int(rng.integers(len(vid) - 1))
    max_gap = min(max(window - 1, 1), len(vid) - 1 - i)
    gap = int(rng.integers(1, max_gap + 1))
    return vid[i], vid[i + gap]


def augment_pair(src, tgt, rng: np.random.Generator, flip: bool, rot90: bool):
    """Random flips / 90-degree rotations applied identically to both frames."""
    if flip:
        if rng.random() < 0.5:
            src, tgt = src[:, ::-1], tgt[:, ::-1]
        if rng.random() < 0.5:
            src, tgt = src[::-1], tgt[::-1]
    if rot90 and src.shape[0] == src.shape[1]:
        turns = int(rng.integers(4))
        if turns:
            src = np.rot90(src, turns, axes=(0, 1))
            tgt = np.rot90(tgt, turns, axes=(0, 1))
    return np.ascontiguousarray(src), np.ascontiguousarray(tgt)


def taped_pair_predictor(params, net_cfg: NetConfig, tapes: list):
    """Pair predictor that records one tape per direction per scale."""

    def predict_pair(src_fwd, tgt_fwd, src_bwd, tgt_bwd):
        tape_f, tape_b = Tape(), Tape()
        field_f = forward(params, src_fwd, tgt_fwd, net_cfg, tape_f)
        field_b = forward(params, src_bwd, tgt_bwd, net_cfg, tape_b)
        tapes.append((tape_f, tape_b))
        return field_f, field_b

    return predict_pair


def pipeline_grads(params, net_cfg, pyr_cfg, src, tgt, weights):
    """One pair's full multigrid pass: returns (result, parameter grads)."""
    tapes: list = []
    predict = taped_pair_predictor(params, net_cfg, tapes)
    result = coarse_to_fine(predict, src, tgt, pyr_cfg, weights, want_grads=True)
    grads = {name: np.zeros_like(p) for name, p in params.items()}
    for (tape_f, tape_b), (g_f, g_b) in zip(tapes, result.logit_grads):
        for tape, g in ((tape_f, g_f), (tape_b, g_b)):
            for name, grad in backward(tape, g).items():
                grads[name] += grad
    return result, grads


def breakdown_rows(iteration: int, result: MultigridResult):
    """CSV rows, one per (iteration, scale, direction)."""
    rows = []
    for field, (bd_f, bd_b) in zip(result.fields, result.losses):
        for bd in (bd_f, bd_b):
            rows.append(
                [iteration, field.scale_index, bd.direction,
                 bd.rec, bd.fl, bd.fb, bd.sm, bd.sp, bd.total]
            )
    return rows


def write_log(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_HEADER)
        writer.writerows(rows)


def train(
    corpus,
    net_cfg: NetConfig = NetConfig(),
    train_cfg: TrainConfig = TrainConfig(),
    pyr_cfg: PyramidConfig = PyramidConfig(),
    out_dir: str | Path | None = None,
    progress=None,
):
    """Run the optimization; returns (params, log rows).

    Deterministic given (seed, corpus order, config). If out_dir is set,
    writes train_log.csv plus periodic and final checkpoints.
    """
    videos = _normalize_corpus(corpus)
    in_channels = np.asarray(videos[0][0]).reshape(
        videos[0][0].shape[0], videos[0][0].shape[1], -1
    ).shape[2]
    # single precision for the optimization; checks run the float64 path
    params = init_params(net_cfg, in_channels=in_channels, dtype=np.float32)
    state = AdamState.for_params(params)
    rng = np.random.default_rng(train_cfg.seed)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    log_rows = []
    for it in range(1, train_cfg.iterations + 1):
        grads_acc = {name: np.zeros_like(p) for name, p in params.items()}
        for _ in range(train_cfg.batch_size):
            src, tgt = sample_pair(videos, rng, train_cfg.pair_window)
            src, tgt = augment_pair(
                src, tgt, rng, train_cfg.augment_flip, train_cfg.augment_rot90
            )
            result, grads = pipeline_grads(
                params, net_cfg, pyr_cfg, src, tgt, train_cfg.weights
            )
            for name in grads_acc:
                grads_acc[name] += grads[name]
            log_rows.extend(breakdown_rows(it, result))
        if train_cfg.batch_size > 1:
            for g in grads_acc.values():
                g /= train_cfg.batch_size
        clip_global_norm(grads_acc, train_cfg.grad_clip)
        adam_step(
            params, grads_acc, state,
            lr=train_cfg.learning_rate,
            beta1=train_cfg.beta1,
            beta2=train_cfg.beta2,
            epsilon=train_cfg.epsilon,
        )
        if progress is not None:
            progress(it, log_rows)
        if (
            out is not None
            and train_cfg.checkpoint_interval
            and it % train_cfg.checkpoint_interval == 0
        ):
            from .fileio import save_checkpoint

            save_checkpoint(out / f"checkpoint_{it:06d}.bin", params, net_cfg)
    if out is not None:
        from .fileio import save_checkpoint

        save_checkpoint(out / "checkpoint_final.bin", params, net_cfg)
        write_log(log_rows, out / "train_log.csv")
    return params, log_rows


def mean_total(log_rows, iterations: set[int]) -> float:
    """Mean of the per-row totals over the given iteration numbers."""
    vals = [row[-1] for row in log_rows if row[0] in iterations]
    if not vals:
        raise ValueError("no log rows in the requested iterations")
    return float(np.mean(vals))
