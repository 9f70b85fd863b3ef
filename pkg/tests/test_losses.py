import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from filterflow.fields import (
    FilterFlowField,
    apply_filter_flow,
    delta_logits,
    filters_to_flow,
    warp_with_flow,
    zero_flow,
)
from filterflow.losses import (
    LossBreakdown,
    LossWeights,
    charbonnier,
    loss_fb,
    loss_flow_warp,
    loss_rec,
    loss_smooth,
    loss_sparse,
    total_loss,
)


def random_image(h, w, c=1, seed=0):
    return np.random.default_rng(seed).random((h, w, c))


def random_field(h, w, k, seed=0):
    rng = np.random.default_rng(seed)
    return FilterFlowField(rng.normal(size=(h, w, k * k)), k)


class TestCharbonnier:
    def test_floor_at_zero(self):
        assert charbonnier(0.0) == pytest.approx(0.001, abs=1e-15)

    def test_even_function(self):
        s = np.linspace(-2, 2, 11)
        assert charbonnier(-s) == pytest.approx(charbonnier(s), abs=0)

    def test_hand_value(self):
        assert charbonnier(0.003) == pytest.approx(np.sqrt(9e-6 + 1e-6), abs=1e-12)
        assert charbonnier(0.003) == pytest.approx(0.0031623, abs=1e-7)


class TestLossRec:
    def test_identity_filters_floor(self):
        img = random_image(5, 5, seed=1)
        field = FilterFlowField(delta_logits(5, 5, 3, (0, 0)), 3)
        assert loss_rec(field, img, img) == pytest.approx(0.001, abs=1e-9)

    def test_exact_shift_residual_zero_on_interior(self):
        img = random_image(6, 8, seed=2)
        field = FilterFlowField(delta_logits(6, 8, 3, (0, 1)), 3)
        # target: one-column left shift with the border column clamped,
        # matching the replicate padding of the operator
        tgt = img[:, np.minimum(np.arange(8) + 1, 7)]
        recon = apply_filter_flow(field, img)
        assert np.abs(tgt[:, :-1] - recon[:, :-1]).max() < 1e-9
        assert loss_rec(field, img, tgt) == pytest.approx(0.001, abs=1e-9)

    def test_uniform_filters_brute_force_oracle(self):
        src = random_image(4, 4, seed=3)
        tgt = random_image(4, 4, seed=4)
        field = FilterFlowField(np.zeros((4, 4, 9)), 3)
        acc = 0.0
        for i in range(4):
            for j in range(4):
                box = 0.0
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        box += src[min(max(i + dr, 0), 3), min(max(j + dc, 0), 3), 0]
                resid = tgt[i, j, 0] - box / 9.0
                acc += np.sqrt(resid * resid + 1e-6)
        assert loss_rec(field, src, tgt) == pytest.approx(acc / 16.0, abs=1e-12)

    def test_dimension_mismatch(self):
        field = random_field(4, 4, 3)
        with pytest.raises(ValueError):
            loss_rec(field, random_image(4, 4), random_image(4, 5))


class TestLossFlowWarp:
    def test_identity_floor(self):
        img = random_image(5, 5, seed=5)
        field = FilterFlowField(delta_logits(5, 5, 3, (0, 0)), 3)
        assert loss_flow_warp(field, img, img) == pytest.approx(0.001, abs=1e-9)

    def test_exact_integer_shift_floor_interior(self):
        img = random_image(8, 8, seed=6)
        field = FilterFlowField(delta_logits(8, 8, 5, (0, 2)), 5)
        tgt = warp_with_flow(img, filters_to_flow(field))
        assert loss_flow_warp(field, img, tgt) == pytest.approx(0.001, abs=1e-9)

    def test_pipeline_oracle(self):
        src = random_image(8, 8, seed=7)
        tgt = random_image(8, 8, seed=8)
        field = random_field(8, 8, 3, seed=9)
        expected = charbonnier(tgt - warp_with_flow(src, filters_to_flow(field))).mean()
        assert loss_flow_warp(field, src, tgt) == pytest.approx(float(expected), abs=1e-12)


class TestLossFb:
    def test_zero_flows_floor(self):
        assert loss_fb(zero_flow(4, 4), zero_flow(4, 4)) == pytest.approx(0.001, abs=1e-12)

    def test_exact_inverses_floor(self):
        f = zero_flow(6, 6)
        f[:, :, 1] = 2.0
        b = zero_flow(6, 6)
        b[:, :, 1] = -2.0
        assert loss_fb(f, b) == pytest.approx(0.001, abs=1e-9)

    def test_one_sided_hand_value(self):
        f = zero_flow(4, 4)
        f[:, :, 1] = 2.0
        b = zero_flow(4, 4)
        # residual is (0, 2) everywhere: per-component mean of phi
        expected = (charbonnier(0.0) + charbonnier(2.0)) / 2.0
        assert loss_fb(f, b) == pytest.approx(float(expected), abs=1e-12)


class TestLossSmooth:
    def test_constant_flow_zero(self):
        f = np.full((5, 5, 2), 1.7)
        assert loss_smooth(f) == 0.0

    def test_single_column_step(self):
        h = w = 6
        f = zero_flow(h, w)
        f[:, 3:, 1] = 1.0
        # oracle: one step edge per row in the horizontal differences
        col_mean = h * 1.0 / (h * (w - 1))
        assert loss_smooth(f) == pytest.approx(0.5 * col_mean, abs=1e-12)

    def test_linear_ramp_half(self):
        f = zero_flow(7, 7)
        f[:, :, 1] = np.arange(7.0)[None, :]
        assert loss_smooth(f) == pytest.approx(0.5, abs=1e-12)


class TestLossSparse:
    def test_zero(self):
        assert loss_sparse(zero_flow(3, 3)) == 0.0

    def test_constant_unit(self):
        f = zero_flow(4, 4)
        f[:, :, 0] = 1.0
        f[:, :, 1] = -1.0
        assert loss_sparse(f) == pytest.approx(1.0, abs=1e-12)

    @given(st.integers(0, 50))
    @settings(max_examples=20, deadline=None)
    def test_matches_mean_abs_oracle(self, seed):
        f = np.random.default_rng(seed).normal(size=(5, 5, 2))
        assert loss_sparse(f) == pytest.approx(float(np.abs(f).mean()), abs=1e-12)


class TestTotalLoss:
    def test_identical_frames_identity_filters(self):
        img = random_image(6, 6, seed=10)
        field = FilterFlowField(delta_logits(6, 6, 3, (0, 0)), 3)
        bd_f, bd_b = total_loss(field, field, img, img)
        for bd in (bd_f, bd_b):
            assert bd.rec == pytest.approx(0.001, abs=1e-9)
            assert bd.fl == pytest.approx(0.001, abs=1e-9)
            assert bd.fb == pytest.approx(0.001, abs=1e-9)
            assert bd.sm == pytest.approx(0.0, abs=1e-9)
            assert bd.sp == pytest.approx(0.0, abs=1e-9)

    def test_translation_pair_hand_values(self):
        src = random_image(8, 8, seed=11)
        fwd = FilterFlowField(delta_logits(8, 8, 5, (0, 2)), 5)
        bwd = FilterFlowField(delta_logits(8, 8, 5, (0, -2)), 5)
        tgt = warp_with_flow(src, filters_to_flow(fwd))
        bd_f, bd_b = total_loss(fwd, bwd, src, tgt)
        assert bd_f.sm == pytest.approx(0.0, abs=1e-9)
        assert bd_f.fb == pytest.approx(0.001, abs=1e-9)
        assert bd_f.sp == pytest.approx(1.0, abs=1e-9)  # |(0, 2)| per-component mean
        assert bd_f.rec == pytest.approx(0.001, abs=1e-9)

    def test_zero_weights_degenerate_to_rec(self):
        src = random_image(6, 6, seed=12)
        tgt = random_image(6, 6, seed=13)
        f1 = random_field(6, 6, 3, seed=14)
        f2 = random_field(6, 6, 3, seed=15)
        w = LossWeights(0.0, 0.0, 0.0, 0.0)
        bd_f, bd_b = total_loss(f1, f2, src, tgt, w)
        assert bd_f.total == pytest.approx(bd_f.rec, abs=1e-15)
        assert bd_b.total == pytest.approx(bd_b.rec, abs=1e-15)

    def test_breakdown_identity(self):
        src = random_image(6, 6, seed=16)
        tgt = random_image(6, 6, seed=17)
        f1 = random_field(6, 6, 3, seed=18)
        f2 = random_field(6, 6, 3, seed=19)
        w = LossWeights(0.7, 0.3, 0.05, 0.002)
        for bd in total_loss(f1, f2, src, tgt, w):
            recomputed = (
                bd.rec
                + w.lambda_fl * bd.fl
                + w.lambda_fb * bd.fb
                + w.lambda_sm * bd.sm
                + w.lambda_sp * bd.sp
            )
            assert bd.total == pytest.approx(recomputed, abs=1e-9)

    def test_swap_symmetry(self):
        src = random_image(7, 7, seed=20)
        tgt = random_image(7, 7, seed=21)
        f1 = random_field(7, 7, 3, seed=22)
        f2 = random_field(7, 7, 3, seed=23)
        bd_f, bd_b = total_loss(f1, f2, src, tgt)
        sw_f, sw_b = total_loss(f2, f1, tgt, src)
        assert bd_f.total == pytest.approx(sw_b.total, abs=1e-12)
        assert bd_b.total == pytest.approx(sw_f.total, abs=1e-12)

    def test_terms_nonnegative_with_floors(self):
        src = random_image(6, 6, seed=24)
        tgt = random_image(6, 6, seed=25)
        f1 = random_field(6, 6, 3, seed=26)
        f2 = random_field(6, 6, 3, seed=27)
        for bd in total_loss(f1, f2, src, tgt):
            assert bd.rec >= 0.001 and bd.fl >= 0.001 and bd.fb >= 0.001
            assert bd.sm >= 0.0 and bd.sp >= 0.0

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError, match="lambda_sm"):
            LossWeights(lambda_sm=-0.1)
