import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from filterflow.fields import (
    FilterFlowField,
    apply_filter_flow,
    compose_flows,
    delta_logits,
    filters_to_flow,
    kernel_offsets,
    softmax_filters,
    upscale_flow_2x,
    warp_with_flow,
    zero_flow,
)


def random_field(h, w, k, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return FilterFlowField(scale * rng.normal(size=(h, w, k * k)), k)


def random_image(h, w, c=1, seed=0):
    return np.random.default_rng(seed).random((h, w, c))


class TestKernelOffsets:
    def test_row_major_enumeration(self):
        offs = kernel_offsets(3)
        assert offs.tolist() == [
            [-1, -1], [-1, 0], [-1, 1],
            [0, -1], [0, 0], [0, 1],
            [1, -1], [1, 0], [1, 1],
        ]


class TestSoftmax:
    def test_zero_logits_uniform(self):
        field = FilterFlowField(np.zeros((2, 2, 9)), 3)
        probs = softmax_filters(field)
        assert probs == pytest.approx(np.full((2, 2, 9), 1.0 / 9.0))

    def test_saturated_center(self):
        field = FilterFlowField(delta_logits(2, 3, 3, (0, 0)), 3)
        probs = softmax_filters(field)
        assert probs[:, :, 4] == pytest.approx(1.0, abs=1e-9)
        others = np.delete(probs, 4, axis=2)
        assert others == pytest.approx(np.zeros_like(others), abs=1e-9)

    def test_log_weights_oracle(self):
        # logits ln(1..9) must produce weights proportional to 1..9
        weights = np.arange(1.0, 10.0)
        field = FilterFlowField(np.log(weights)[None, None, :], 3)
        expected = weights / weights.sum()
        assert softmax_filters(field)[0, 0] == pytest.approx(expected, abs=1e-12)

    def test_nonfinite_rejected(self):
        logits = np.zeros((1, 1, 9))
        logits[0, 0, 0] = np.inf
        with pytest.raises(ValueError, match="finite"):
            FilterFlowField(logits, 3)

    @given(st.integers(1, 6), st.integers(1, 6), st.sampled_from([1, 3, 5]), st.integers(0, 50))
    @settings(max_examples=30, deadline=None)
    def test_simplex_invariant(self, h, w, k, seed):
        probs = softmax_filters(random_field(h, w, k, seed=seed, scale=4.0))
        assert (probs >= 0).all() and (probs <= 1).all()
        assert probs.sum(axis=2) == pytest.approx(np.ones((h, w)), abs=1e-6)


class TestApplyFilterFlow:
    def test_delta_center_is_identity(self):
        img = random_image(6, 5, c=3, seed=2)
        field = FilterFlowField(delta_logits(6, 5, 3, (0, 0)), 3)
        assert np.abs(apply_filter_flow(field, img) - img).max() < 1e-12

    def test_delta_offset_shifts_left(self):
        img = random_image(4, 6, seed=3)
        field = FilterFlowField(delta_logits(4, 6, 3, (0, 1)), 3)
        out = apply_filter_flow(field, img)
        assert out[:, :-1] == pytest.approx(img[:, 1:], abs=1e-12)
        # last column replicates the border
        assert out[:, -1] == pytest.approx(img[:, -1], abs=1e-12)

    def test_uniform_kernels_box_filter_oracle(self):
        img = random_image(5, 5, seed=4)
        field = FilterFlowField(np.zeros((5, 5, 9)), 3)
        out = apply_filter_flow(field, img)
        # direct two-loop box filter with clamped indices
        expected = np.zeros_like(img)
        for i in range(5):
            for j in range(5):
                acc = 0.0
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        acc += img[min(max(i + dr, 0), 4), min(max(j + dc, 0), 4), 0]
                expected[i, j, 0] = acc / 9.0
        assert out == pytest.approx(expected, abs=1e-12)

    def test_dimension_mismatch(self):
        field = random_field(4, 4, 3)
        with pytest.raises(ValueError, match="match"):
            apply_filter_flow(field, random_image(4, 5))

    @given(st.integers(0, 50))
    @settings(max_examples=20, deadline=None)
    def test_linearity(self, seed):
        rng = np.random.default_rng(seed)
        field = random_field(6, 6, 3, seed=seed)
        x, y = rng.random((6, 6, 1)), rng.random((6, 6, 1))
        a, b = rng.normal(), rng.normal()
        lhs = apply_filter_flow(field, a * x + b * y)
        rhs = a * apply_filter_flow(field, x) + b * apply_filter_flow(field, y)
        assert lhs == pytest.approx(rhs, abs=1e-6)

    @given(st.integers(0, 50))
    @settings(max_examples=20, deadline=None)
    def test_constant_preserved(self, seed):
        field = random_field(5, 7, 5, seed=seed, scale=3.0)
        const = np.full((5, 7, 1), 0.37)
        assert apply_filter_flow(field, const) == pytest.approx(const, abs=1e-6)


class TestFiltersToFlow:
    def test_delta_center_zero_flow(self):
        field = FilterFlowField(delta_logits(3, 3, 3, (0, 0)), 3)
        assert (filters_to_flow(field) == 0.0).all()

    def test_delta_offset_point_mass(self):
        field = FilterFlowField(delta_logits(2, 2, 5, (2, -1)), 5)
        flow = filters_to_flow(field)
        assert (flow[:, :, 0] == 2.0).all()
        assert (flow[:, :, 1] == -1.0).all()

    def test_uniform_exactly_zero(self):
        field = FilterFlowField(np.zeros((3, 3, 49)), 7)
        assert (filters_to_flow(field) == 0.0).all()

    @given(st.sampled_from([3, 5, 7]), st.integers(0, 50))
    @settings(max_examples=30, deadline=None)
    def test_flow_bound(self, k, seed):
        field = random_field(4, 4, k, seed=seed, scale=5.0)
        r = (k - 1) // 2
        assert np.abs(filters_to_flow(field)).max() <= r + 1e-12

    def test_matches_expectation_oracle(self):
        field = random_field(3, 3, 3, seed=11)
        probs = softmax_filters(field)
        expected = np.einsum("hwk,kd->hwd", probs, kernel_offsets(3))
        assert filters_to_flow(field) == pytest.approx(expected, abs=1e-12)


class TestWarpWithFlow:
    def test_zero_flow_identity(self):
        img = random_image(5, 6, c=2, seed=7)
        assert (warp_with_flow(img, zero_flow(5, 6)) == img).all()

    def test_integer_flow_shifts(self):
        img = np.tile(np.arange(10.0)[None, :, None], (10, 1, 1))
        flow = zero_flow(10, 10)
        flow[:, :, 1] = 3.0
        out = warp_with_flow(img, flow)
        assert out[:, :7] == pytest.approx(img[:, 3:], abs=1e-12)
        # clamped columns replicate the last column
        assert (out[:, 7:] == img[:, -1:, :]).all()

    def test_half_pixel_hand_value(self):
        img = np.array([[0.0, 1.0]])[:, :, None]
        flow = zero_flow(1, 2)
        flow[:, :, 1] = 0.5
        out = warp_with_flow(img, flow)
        assert out[0, 0, 0] == pytest.approx(0.5, abs=1e-12)  # between 0 and 1
        assert out[0, 1, 0] == pytest.approx(1.0, abs=1e-12)  # clamped at right edge

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="match"):
            warp_with_flow(random_image(4, 4), zero_flow(4, 5))


class TestComposeFlows:
    def test_zero_identity_elements(self):
        rng = np.random.default_rng(0)
        h = rng.normal(size=(5, 5, 2)) * 0.5
        z = zero_flow(5, 5)
        assert compose_flows(z, h) == pytest.approx(h, abs=1e-12)
        assert compose_flows(h, z) == pytest.approx(h, abs=1e-12)

    def test_constant_flows_add(self):
        g = zero_flow(6, 6)
        g[:, :, 0] = 1.0
        h = zero_flow(6, 6)
        h[:, :, 1] = 2.0
        out = compose_flows(g, h)
        interior = out[:4, :4]
        assert (interior[:, :, 0] == 1.0).all() and (interior[:, :, 1] == 2.0).all()

    def test_double_warp_oracle_piecewise_constant(self):
        # smooth sub-pixel flows; piecewise-constant image
        rr, cc = np.mgrid[0:16, 0:16].astype(np.float64)
        g = np.stack([0.4 * np.sin(cc / 5.0), 0.5 * np.cos(rr / 7.0)], axis=2)
        h = np.stack([0.3 * np.cos(cc / 6.0), 0.4 * np.sin(rr / 4.0)], axis=2)
        x = np.zeros((16, 16, 1))
        x[:8, :8] = 0.2
        x[:8, 8:] = 0.9
        x[8:, :8] = 0.5
        x[8:, 8:] = 0.1
        direct = warp_with_flow(warp_with_flow(x, h), g)
        composed = warp_with_flow(x, compose_flows(g, h))
        # compare away from the block discontinuities
        mask = np.ones((16, 16), dtype=bool)
        mask[5:11, :] = False
        mask[:, 5:11] = False
        assert np.abs(direct[mask] - composed[mask]).max() < 1e-6


class TestUpscaleFlow:
    def test_single_pixel(self):
        flow = np.array([[[1.0, -0.5]]])
        up = upscale_flow_2x(flow)
        assert up.shape == (2, 2, 2)
        assert (up[:, :, 0] == 2.0).all() and (up[:, :, 1] == -1.0).all()

    def test_zero_flow(self):
        up = upscale_flow_2x(zero_flow(3, 4))
        assert up.shape == (6, 8, 2)
        assert (up == 0.0).all()

    def test_coarse_shift_matches_fine_shift(self):
        # a 3-px shift at coarse scale equals a 6-px shift after upsampling
        rng = np.random.default_rng(4)
        fine = np.repeat(np.repeat(rng.random((16, 16, 1)), 2, 0), 2, 1)
        coarse = fine[::2, ::2]
        coarse_field = FilterFlowField(delta_logits(16, 16, 7, (0, -3)), 7)
        fine_flow = upscale_flow_2x(filters_to_flow(coarse_field))
        assert (fine_flow[:, :, 1] == -6.0).all()
        shifted = np.roll(fine, 6, axis=1)  # content moved right by 6
        recon = warp_with_flow(fine, fine_flow)
        assert recon[:, 6:] == pytest.approx(shifted[:, 6:], abs=1e-12)


class TestDeltaConsistency:
    @given(st.sampled_from([(0, 0), (1, 0), (0, -1), (2, 2), (-2, 1)]))
    @settings(max_examples=10, deadline=None)
    def test_apply_equals_warp_for_integer_delta(self, offset):
        img = random_image(9, 9, seed=13)
        field = FilterFlowField(delta_logits(9, 9, 5, offset), 5)
        by_filter = apply_filter_flow(field, img)
        flow = zero_flow(9, 9)
        flow[:, :, 0] = offset[0]
        flow[:, :, 1] = offset[1]
        by_warp = warp_with_flow(img, flow)
        r = 2
        assert by_filter[r:-r, r:-r] == pytest.approx(by_warp[r:-r, r:-r], abs=1e-12)
