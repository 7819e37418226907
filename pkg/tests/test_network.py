import numpy as np
import pytest

from pyrflow import tensor_ops
from pyrflow.errors import ConfigError, ShapeError
from pyrflow.network import (
    context_encode,
    convex_upsample,
    feature_encode,
    flow_head,
    gru_step,
    mask_head,
    motion_encode,
)
from pyrflow.weights import ModelConfig, ModelWeights, expected_entries, init_weights

from reference import convex_upsample_ref, gru_pixel_ref

SMALL = ModelConfig(feature_dim=8, hidden_dim=6, context_dim=2, levels=2, radius=1)


def zero_weights(config):
    entries = {
        name: np.zeros(shape, np.float32)
        for name, shape in expected_entries(config).items()
    }
    return ModelWeights(config, entries)


def oracle_trunk(image, w, prefix):
    """Straight-line composition of conv2d/relu, mirroring the encoder
    contract: three stride-2 stages, two convs each, tap after stage 2."""
    x = image
    taps = []
    for stage in (1, 2, 3):
        x = tensor_ops.relu(
            tensor_ops.conv2d(
                x,
                w.get(f"{prefix}.stage{stage}.conv1.weight"),
                w.get(f"{prefix}.stage{stage}.conv1.bias"),
                stride=2,
                padding=1,
            )
        )
        x = tensor_ops.relu(
            tensor_ops.conv2d(
                x,
                w.get(f"{prefix}.stage{stage}.conv2.weight"),
                w.get(f"{prefix}.stage{stage}.conv2.bias"),
                stride=1,
                padding=1,
            )
        )
        taps.append(x)
    return taps[1], taps[2]  # quarter, eighth


class TestFeatureEncode:
    def test_zero_weights_zero_output(self):
        w = zero_weights(SMALL)
        img = np.zeros((3, 32, 32), np.float32)
        feats = feature_encode(img, w)
        assert feats.eighth.shape == (8, 4, 4)
        assert feats.quarter.shape == (8, 8, 8)
        assert np.all(feats.eighth == 0.0) and np.all(feats.quarter == 0.0)

    def test_shape_contract(self):
        w = init_weights(SMALL, 1)
        rng = np.random.default_rng(30)
        img = rng.uniform(-1, 1, (3, 48, 64)).astype(np.float32)
        feats = feature_encode(img, w)
        assert feats.eighth.shape == (8, 6, 8)
        assert feats.quarter.shape == (8, 12, 16)

    def test_seeded_vs_composition_oracle(self):
        w = init_weights(SMALL, 2)
        rng = np.random.default_rng(31)
        img = rng.uniform(-1, 1, (3, 32, 32)).astype(np.float32)
        feats = feature_encode(img, w)
        quarter, eighth = oracle_trunk(img, w, "fnet")
        assert np.abs(feats.quarter - quarter).max() <= 1e-5
        assert np.abs(feats.eighth - eighth).max() <= 1e-5

    def test_dims_not_divisible_rejected(self):
        with pytest.raises(ShapeError):
            feature_encode(np.zeros((3, 30, 32), np.float32), init_weights(SMALL, 0))

    def test_wrong_channels_rejected(self):
        with pytest.raises(ShapeError):
            feature_encode(np.zeros((1, 32, 32), np.float32), init_weights(SMALL, 0))


class TestContextEncode:
    def test_zero_weights(self):
        w = zero_weights(SMALL)
        ctx = context_encode(np.zeros((3, 32, 32), np.float32), w)
        assert np.all(ctx.eighth.hidden == 0.0)  # tanh(0)
        assert np.all(ctx.eighth.context == 0.0)  # relu(0)
        assert ctx.eighth.hidden.shape == (6, 4, 4)
        assert ctx.eighth.context.shape == (2, 4, 4)
        assert ctx.quarter.hidden.shape == (6, 8, 8)

    def test_activation_ranges(self):
        w = init_weights(SMALL, 4)
        rng = np.random.default_rng(32)
        img = rng.uniform(-1, 1, (3, 32, 32)).astype(np.float32)
        ctx = context_encode(img, w)
        for lvl in (ctx.eighth, ctx.quarter):
            assert np.all(lvl.hidden > -1.0) and np.all(lvl.hidden < 1.0)
            assert np.all(lvl.context >= 0.0)

    def test_seeded_vs_composition_oracle(self):
        w = init_weights(SMALL, 5)
        rng = np.random.default_rng(33)
        img = rng.uniform(-1, 1, (3, 32, 32)).astype(np.float32)
        ctx = context_encode(img, w)
        quarter, eighth = oracle_trunk(img, w, "cnet")
        dh = SMALL.hidden_dim
        assert np.abs(ctx.eighth.hidden - np.tanh(eighth[:dh])).max() <= 1e-5
        assert np.abs(ctx.eighth.context - np.maximum(eighth[dh:], 0)).max() <= 1e-5
        assert np.abs(ctx.quarter.hidden - np.tanh(quarter[:dh])).max() <= 1e-5


class TestMotionEncode:
    def test_zero_everything(self):
        w = zero_weights(SMALL)
        corr = np.zeros((SMALL.lookup_channels, 4, 4), np.float32)
        flow = np.zeros((2, 4, 4), np.float32)
        out = motion_encode(corr, flow, w)
        assert out.shape == (SMALL.motion_dim, 4, 4)
        assert np.all(out == 0.0)

    @pytest.mark.parametrize("levels,radius", [(2, 1), (3, 2)])
    def test_channel_count_absorbs_lookup_size(self, levels, radius):
        cfg = ModelConfig(
            feature_dim=8, hidden_dim=6, context_dim=2, levels=levels, radius=radius
        )
        w = init_weights(cfg, 6)
        corr = np.ones((cfg.lookup_channels, 3, 5), np.float32)
        flow = np.ones((2, 3, 5), np.float32)
        assert motion_encode(corr, flow, w).shape == (cfg.motion_dim, 3, 5)

    def test_raw_flow_appended(self):
        w = init_weights(SMALL, 7)
        rng = np.random.default_rng(34)
        corr = rng.standard_normal((SMALL.lookup_channels, 3, 3)).astype(np.float32)
        flow = rng.uniform(-3, 3, (2, 3, 3)).astype(np.float32)
        out = motion_encode(corr, flow, w)
        assert np.array_equal(out[-2:], flow)

    def test_seeded_vs_composition_oracle(self):
        w = init_weights(SMALL, 8)
        rng = np.random.default_rng(35)
        corr = rng.standard_normal((SMALL.lookup_channels, 4, 5)).astype(np.float32)
        flow = rng.uniform(-2, 2, (2, 4, 5)).astype(np.float32)
        got = motion_encode(corr, flow, w)
        c = tensor_ops.relu(
            tensor_ops.conv2d(
                corr, w.get("update.motion.corr.weight"),
                w.get("update.motion.corr.bias"), padding=0,
            )
        )
        f = tensor_ops.relu(
            tensor_ops.conv2d(
                flow, w.get("update.motion.flow.weight"),
                w.get("update.motion.flow.bias"), padding=1,
            )
        )
        fused = tensor_ops.relu(
            tensor_ops.conv2d(
                np.concatenate([c, f]), w.get("update.motion.fuse.weight"),
                w.get("update.motion.fuse.bias"), padding=1,
            )
        )
        want = np.concatenate([fused, flow])
        assert np.abs(got - want).max() <= 1e-6

    def test_dims_mismatch(self):
        w = init_weights(SMALL, 0)
        with pytest.raises(ShapeError):
            motion_encode(
                np.zeros((SMALL.lookup_channels, 3, 3), np.float32),
                np.zeros((2, 4, 3), np.float32),
                w,
            )


class TestGruStep:
    def test_zero_weights_halves_hidden(self):
        w = zero_weights(SMALL)
        rng = np.random.default_rng(36)
        h = rng.uniform(-0.9, 0.9, (6, 3, 4)).astype(np.float32)
        x = rng.standard_normal((SMALL.gru_input, 3, 4)).astype(np.float32)
        out = gru_step(h, x, w)
        assert np.array_equal(out, np.float32(0.5) * h)

    def test_contraction_over_steps(self):
        w = zero_weights(SMALL)
        h = np.full((6, 2, 2), 0.8, np.float32)
        x = np.zeros((SMALL.gru_input, 2, 2), np.float32)
        for n in range(1, 6):
            h = gru_step(h, x, w)
            assert np.array_equal(h, np.full((6, 2, 2), 0.8, np.float32)
                                  * np.float32(0.5) ** n)

    def test_range_preserved(self):
        w = init_weights(SMALL, 9)
        rng = np.random.default_rng(37)
        h = rng.uniform(-0.9, 0.9, (6, 4, 4)).astype(np.float32)
        x = rng.standard_normal((SMALL.gru_input, 4, 4)).astype(np.float32)
        for _ in range(4):
            h = gru_step(h, x, w)
            assert np.all(h > -1.0) and np.all(h < 1.0)

    def test_range_closed_bound_under_saturation(self):
        # float32 tanh saturates to exactly +/-1, so extreme inputs reach
        # the closed interval but never leave it
        w = init_weights(SMALL, 9)
        rng = np.random.default_rng(37)
        h = rng.uniform(-0.999, 0.999, (6, 4, 4)).astype(np.float32)
        x = 50.0 * rng.standard_normal((SMALL.gru_input, 4, 4)).astype(np.float32)
        for _ in range(4):
            h = gru_step(h, x, w)
            assert np.all(np.abs(h) <= 1.0)

    def test_single_pixel_vs_scalar_oracle(self):
        w = init_weights(SMALL, 10)
        rng = np.random.default_rng(38)
        h = rng.uniform(-0.9, 0.9, (6, 1, 1)).astype(np.float32)
        x = rng.standard_normal((SMALL.gru_input, 1, 1)).astype(np.float32)
        got = gru_step(h, x, w)
        want = gru_pixel_ref(
            [float(v) for v in h[:, 0, 0]],
            [float(v) for v in x[:, 0, 0]],
            w.get("update.gru.convz.weight"), w.get("update.gru.convz.bias"),
            w.get("update.gru.convr.weight"), w.get("update.gru.convr.bias"),
            w.get("update.gru.convq.weight"), w.get("update.gru.convq.bias"),
        )
        assert np.abs(got[:, 0, 0] - np.array(want)).max() <= 1e-6


class TestHeads:
    def test_zero_weights_zero_flow_update(self):
        w = zero_weights(SMALL)
        h = np.ones((6, 3, 3), np.float32)
        assert np.all(flow_head(h, w) == 0.0)

    def test_flow_head_dims(self):
        w = init_weights(SMALL, 11)
        assert flow_head(np.zeros((6, 5, 7), np.float32), w).shape == (2, 5, 7)

    def test_mask_head_channels(self):
        w = init_weights(SMALL, 12)
        assert mask_head(np.zeros((6, 3, 4), np.float32), w).shape == (144, 3, 4)

    def test_flow_head_vs_composition_oracle(self):
        w = init_weights(SMALL, 13)
        rng = np.random.default_rng(39)
        h = rng.standard_normal((6, 4, 4)).astype(np.float32)
        got = flow_head(h, w)
        mid = tensor_ops.relu(
            tensor_ops.conv2d(
                h, w.get("update.flow.conv1.weight"),
                w.get("update.flow.conv1.bias"), padding=1,
            )
        )
        want = tensor_ops.conv2d(
            mid, w.get("update.flow.conv2.weight"),
            w.get("update.flow.conv2.bias"), padding=1,
        )
        assert np.array_equal(got, want)


class TestConvexUpsample:
    def test_constant_flow_any_logits(self):
        rng = np.random.default_rng(40)
        flow = np.stack([
            np.full((4, 4), 2.0, np.float32), np.full((4, 4), -3.0, np.float32)
        ])
        logits = rng.standard_normal((144, 4, 4)).astype(np.float32)
        up = convex_upsample(flow, logits, 4)
        assert np.abs(up[0] - 8.0).max() <= 1e-5
        assert np.abs(up[1] + 12.0).max() <= 1e-5

    def test_one_hot_center_is_nearest_neighbor(self):
        rng = np.random.default_rng(41)
        flow = rng.uniform(-3, 3, (2, 3, 3)).astype(np.float32)
        logits = np.zeros((144, 3, 3), np.float32)
        logits[4 * 16 : 5 * 16] = 60.0  # neighbor k=4 is the center tap
        up = convex_upsample(flow, logits, 4)
        want = 4.0 * np.repeat(np.repeat(flow, 4, axis=1), 4, axis=2)
        assert np.abs(up - want).max() <= 1e-5

    def test_uniform_logits_average_neighborhood(self):
        # zero weights in mask_head give all-equal logits -> each output is
        # the plain mean of its replicate-padded 3x3 neighborhood
        rng = np.random.default_rng(42)
        flow = rng.uniform(-2, 2, (2, 3, 4)).astype(np.float32)
        up = convex_upsample(flow, np.zeros((144, 3, 4), np.float32), 4)
        want = convex_upsample_ref(flow, np.zeros((144, 3, 4), np.float32), 4)
        assert np.abs(up - want).max() <= 1e-5

    def test_random_vs_scalar_oracle(self):
        rng = np.random.default_rng(43)
        flow = rng.uniform(-5, 5, (2, 3, 3)).astype(np.float32)
        logits = rng.standard_normal((144, 3, 3)).astype(np.float32)
        up = convex_upsample(flow, logits, 4)
        want = convex_upsample_ref(flow, logits, 4)
        assert np.abs(up - want).max() <= 1e-5

    def test_convexity_bounds(self):
        rng = np.random.default_rng(44)
        flow = rng.uniform(-10, 10, (2, 5, 5)).astype(np.float32)
        logits = rng.uniform(-4, 4, (144, 5, 5)).astype(np.float32)
        up = convex_upsample(flow, logits, 4)
        assert up.min() >= 4 * flow.min() - 1e-4
        assert up.max() <= 4 * flow.max() + 1e-4

    def test_channel_mismatch_is_config_error(self):
        with pytest.raises(ConfigError):
            convex_upsample(
                np.zeros((2, 3, 3), np.float32),
                np.zeros((100, 3, 3), np.float32),
                4,
            )

    def test_spatial_mismatch_is_shape_error(self):
        with pytest.raises(ShapeError):
            convex_upsample(
                np.zeros((2, 3, 3), np.float32),
                np.zeros((144, 4, 3), np.float32),
                4,
            )
