"""Multigrid per-pixel filter flow for unsupervised video correspondence."""

from .fields import (
    FilterFlowField,
    apply_filter_flow,
    compose_flows,
    filters_to_flow,
    softmax_filters,
    upscale_flow_2x,
    warp_with_flow,
)
from .grid import build_pyramid, downsample_half, im2col, pad_to_multiple, upsample_nn_2x
from .losses import LossBreakdown, LossWeights, charbonnier, total_loss

__version__ = "0.1.0"
