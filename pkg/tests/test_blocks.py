import numpy as np

from freqface.autograd import tensor
from freqface.blocks import (ChannelAttentionBlock, MultiKernelBlock, MultiKernelStack,
                             UpsampleStage)
from freqface.params import ParamStore


def _zero_projection(block: MultiKernelBlock):
    block.pw.data = np.zeros_like(block.pw.data)
    block.pb.data = np.zeros_like(block.pb.data)


class TestMultiKernelBlock:
    def test_residual_identity_with_zero_projection(self, rng):
        store = ParamStore()
        block = MultiKernelBlock(store, "b", 8, None, 0.2, np.random.default_rng(0))
        _zero_projection(block)
        x = tensor(rng.standard_normal((8, 6, 6)).astype(np.float32))
        np.testing.assert_array_equal(block(x).data, x.data)

    def test_preserves_spatial_dims(self, rng):
        store = ParamStore()
        block = MultiKernelBlock(store, "b", 6, None, 0.2, np.random.default_rng(0))
        for h, w in [(5, 5), (8, 12), (16, 16)]:
            x = tensor(rng.standard_normal((6, h, w)).astype(np.float32))
            assert block(x).shape == (6, h, w)

    def test_bottleneck_cuts_wide_kernel_parameters(self):
        # bottlenecked 5x5 branch vs a dense 5x5 conv at 64 channels
        c, bn = 64, 32
        branch = (c * bn + bn) + (bn * c * 25 + c)  # 1x1 reduce + 5x5 conv
        dense = c * c * 25 + c
        assert branch < dense

    def test_batched(self, rng):
        store = ParamStore()
        block = MultiKernelBlock(store, "b", 4, None, 0.2, np.random.default_rng(0))
        x = tensor(rng.standard_normal((2, 4, 6, 6)).astype(np.float32))
        assert block(x).shape == (2, 4, 6, 6)


class TestMultiKernelStack:
    def test_identity_when_all_terminal_projections_zero(self, rng):
        store = ParamStore()
        stack = MultiKernelStack(store, "m", 6, 5, None, 0.2, np.random.default_rng(0))
        for block in stack.blocks:
            _zero_projection(block)
        stack.tw.data = np.zeros_like(stack.tw.data)
        stack.tb.data = np.zeros_like(stack.tb.data)
        x = tensor(rng.standard_normal((6, 5, 5)).astype(np.float32))
        np.testing.assert_array_equal(stack(x).data, x.data)

    def test_shape_invariant_across_chain(self, rng):
        store = ParamStore()
        stack = MultiKernelStack(store, "m", 6, 5, None, 0.2, np.random.default_rng(0))
        x = tensor(rng.standard_normal((6, 7, 7)).astype(np.float32))
        assert stack(x).shape == (6, 7, 7)

    def test_gradient_reaches_first_block(self, rng):
        store = ParamStore()
        stack = MultiKernelStack(store, "m", 4, 3, None, 0.2, np.random.default_rng(0))
        x = tensor(rng.standard_normal((4, 5, 5)).astype(np.float32))
        stack(x).sum().backward()
        first = store["m.block0.k1.w"]
        assert first.grad is not None and np.abs(first.grad).max() > 0


class TestChannelAttention:
    def test_reference_shape_contract(self, rng):
        # 256 in / 64 out / expansion 3 / reduction 24 on an 8x8 map
        store = ParamStore()
        attn = ChannelAttentionBlock(store, "a", 256, 64, 3, 24, 0.2,
                                     np.random.default_rng(0))
        x = tensor(rng.standard_normal((256, 8, 8)).astype(np.float32))
        assert attn(x).shape == (64, 8, 8)

    def test_parameter_count_below_dense_path(self):
        store = ParamStore()
        ChannelAttentionBlock(store, "a", 256, 64, 3, 24, 0.2, np.random.default_rng(0))
        attention_params = store.num_values()
        dense_path = (256 * 768 * 9 + 768) + (768 * 64 * 9 + 64)  # 3x3 256->768->64
        assert attention_params < dense_path

    def test_small_channel_counts_survive_reduction(self, rng):
        # expanded width below the reduction factor still yields a >=1 bottleneck
        store = ParamStore()
        attn = ChannelAttentionBlock(store, "a", 4, 4, 3, 24, 0.2, np.random.default_rng(0))
        x = tensor(rng.standard_normal((4, 5, 5)).astype(np.float32))
        assert attn(x).shape == (4, 5, 5)
        assert store["a.se.fc1.w"].shape[0] == 1

    def test_spatial_dims_preserved(self, rng):
        store = ParamStore()
        attn = ChannelAttentionBlock(store, "a", 8, 4, 2, 4, 0.2, np.random.default_rng(0))
        x = tensor(rng.standard_normal((2, 8, 9, 11)).astype(np.float32))
        assert attn(x).shape == (2, 4, 9, 11)


class TestUpsampleStage:
    def test_doubles_spatial_dims(self, rng):
        store = ParamStore()
        up = UpsampleStage(store, "u", 64, 0.2, np.random.default_rng(0))
        x = tensor(rng.standard_normal((64, 16, 16)).astype(np.float32))
        assert up(x).shape == (64, 32, 32)

    def test_stage_chain_reaches_image_scale(self, rng):
        store = ParamStore()
        rng0 = np.random.default_rng(0)
        ups = [UpsampleStage(store, f"u{i}", 8, 0.2, rng0) for i in range(2)]
        x = tensor(rng.standard_normal((8, 32, 32)).astype(np.float32))
        for up in ups:
            x = up(x)
        assert x.shape == (8, 128, 128)
