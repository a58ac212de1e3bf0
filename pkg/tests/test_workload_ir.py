"""Tests for the quantized tensor and layer data model."""

from dataclasses import replace

import numpy as np
import pytest

from flexsim.core.errors import WorkloadError
from flexsim.core.workload_ir import (
    Activation,
    Dataflow,
    Layer,
    LayerDescriptor,
    LayerKind,
    QuantTensor,
    SparsityIndexMap,
    SvmModel,
    Workload,
    apply_block_sparsity,
    derive_loop_nest,
    random_tensor,
    requantize,
    validate_layer,
    validate_workload,
    wrap32,
)


def _conv(**overrides):
    fields = dict(kind=LayerKind.CONV2D, C=32, K=32, OX=16, OY=16, FX=3, FY=3, precision=8)
    fields.update(overrides)
    return LayerDescriptor(**fields)


class TestQuantTensor:
    def test_rejects_out_of_range_values(self):
        with pytest.raises(WorkloadError) as exc:
            QuantTensor.from_array([0, 8], precision=4)
        assert exc.value.code == "PRECISION_ERROR"

    def test_accepts_full_two_complement_range(self):
        tensor = QuantTensor.from_array([-2, -1, 0, 1], precision=2)
        assert tensor.size == 4
        assert tensor.nbytes == 1

    def test_rejects_unknown_precision(self):
        with pytest.raises(WorkloadError) as exc:
            QuantTensor.zeros((2, 2), precision=3)
        assert exc.value.code == "PRECISION_ERROR"

    def test_rejects_data_that_does_not_fill_shape(self):
        with pytest.raises(WorkloadError) as exc:
            QuantTensor(shape=(2, 3), precision=8, data=np.zeros(5))
        assert exc.value.code == "SHAPE_MISMATCH"

    def test_rejects_empty_extent(self):
        with pytest.raises(WorkloadError) as exc:
            QuantTensor.zeros((0, 4), precision=8)
        assert exc.value.code == "DIMENSION_ERROR"

    def test_data_is_read_only(self):
        tensor = QuantTensor.zeros((4,), precision=8)
        with pytest.raises(ValueError):
            tensor.data[0] = 1

    def test_equality_covers_precision(self):
        a = QuantTensor.from_array([1, 2], precision=8)
        b = QuantTensor.from_array([1, 2], precision=4)
        assert a != b
        assert a == QuantTensor.from_array([1, 2], precision=8)


class TestValidateLayer:
    def test_reference_conv_layer_is_valid(self):
        desc = _conv()
        assert validate_layer(desc) is desc

    def test_minimal_dense_layer_is_valid(self):
        desc = LayerDescriptor(kind=LayerKind.DENSE, C=1, K=1, batch=1)
        assert validate_layer(desc) is desc

    def test_sparsity_map_with_wrong_channel_count(self):
        desc = _conv(sparsity=SparsityIndexMap.dense(K=32, C=16))
        with pytest.raises(WorkloadError) as exc:
            validate_layer(desc)
        assert exc.value.code == "SPARSITY_SHAPE_ERROR"

    def test_sparsity_on_unsupported_kind(self):
        desc = LayerDescriptor(
            kind=LayerKind.DECONV2D, C=8, K=8, OX=8, OY=8, FX=4, FY=4, upsample=2,
            sparsity=SparsityIndexMap.dense(K=8, C=8),
        )
        with pytest.raises(WorkloadError) as exc:
            validate_layer(desc)
        assert exc.value.code == "SPARSITY_SHAPE_ERROR"

    @pytest.mark.parametrize("field", ["C", "K", "OX", "FX", "dilation", "batch"])
    def test_zero_extent_is_rejected(self, field):
        desc = replace(LayerDescriptor(kind=LayerKind.DENSE, C=4, K=4), **{field: 0})
        with pytest.raises(WorkloadError) as exc:
            validate_layer(desc)
        assert exc.value.code == "DIMENSION_ERROR"

    def test_precision_outside_operand_set(self):
        with pytest.raises(WorkloadError) as exc:
            validate_layer(_conv(precision=16))
        assert exc.value.code == "PRECISION_ERROR"

    def test_one_dimensional_conv_needs_unit_height(self):
        desc = LayerDescriptor(kind=LayerKind.CONV1D_DILATED, C=8, K=8, OX=16, OY=2, FX=3)
        with pytest.raises(WorkloadError) as exc:
            validate_layer(desc)
        assert exc.value.code == "DIMENSION_ERROR"

    def test_fractional_padding_is_rejected(self):
        # window of 18 over an input of 17 would need half a pixel per side
        with pytest.raises(WorkloadError):
            validate_layer(_conv(IX=17, IY=17))

    def test_same_padding_is_derived(self):
        assert _conv(IX=16, IY=16).padding == (1, 1)
        assert _conv().padding == (0, 0)
        assert _conv().input_shape == (32, 18, 18)

    def test_wide_dilation_with_same_padding_is_valid(self):
        desc = LayerDescriptor(
            kind=LayerKind.CONV1D_DILATED, C=64, K=64, OX=512, IX=512, FX=3, dilation=16
        )
        assert validate_layer(desc) is desc
        assert desc.padding == (0, 16)

    def test_padding_wider_than_instruction_field(self):
        desc = LayerDescriptor(
            kind=LayerKind.CONV1D_DILATED, C=4, K=4, OX=16, IX=16, FX=3, dilation=300
        )
        with pytest.raises(WorkloadError) as exc:
            validate_layer(desc)
        assert exc.value.code == "DIMENSION_ERROR"
        assert "pad=300" in exc.value.message

    def test_stride_wider_than_instruction_field(self):
        with pytest.raises(WorkloadError) as exc:
            validate_layer(_conv(stride=16))
        assert exc.value.code == "DIMENSION_ERROR"
        assert "stride=16" in exc.value.message


class TestLoopNest:
    def test_conv_uses_output_stationary_ox_k(self):
        nest = derive_loop_nest(_conv())
        assert nest.dataflow == Dataflow.OXK
        assert nest.spatial == (("OX", 8), ("K", 8))
        assert [name for name, _ in nest.temporal] == ["OY", "FY", "FX", "C", "ox-tiles", "k-tiles"]

    def test_dense_uses_c_k(self):
        nest = derive_loop_nest(LayerDescriptor(kind=LayerKind.DENSE, C=20, K=3, batch=4))
        assert nest.spatial == (("C", 8), ("K", 8))
        assert dict(nest.temporal) == {"c-tiles": 3, "k-tiles": 1, "batch": 4}

    def test_svm_norm_maps_dims_and_vectors(self):
        nest = derive_loop_nest(LayerDescriptor(kind=LayerKind.SVM_NORM, C=64, K=16))
        assert nest.spatial == (("D", 8), ("N", 8))

    def test_spatial_factors_do_not_depend_on_size(self):
        for desc in (_conv(C=3, K=5, OX=2, OY=2), _conv(C=64, K=64, OX=32, OY=32)):
            assert derive_loop_nest(desc).spatial_factors == (8, 8)

    def test_maxpool_has_no_loop_nest(self):
        desc = LayerDescriptor(kind=LayerKind.MAXPOOL, C=8, K=8, OX=4, OY=4, FX=2, FY=2, stride=2)
        with pytest.raises(WorkloadError) as exc:
            derive_loop_nest(desc)
        assert exc.value.code == "UNSUPPORTED_KIND"


class TestBlockSparsity:
    def setup_method(self):
        self.rng = np.random.default_rng(7)
        self.weights = random_tensor(self.rng, (8, 32, 3, 3), 8)

    def test_all_pruned_zeroes_everything(self):
        sparsity = SparsityIndexMap(bits=np.ones((1, 32), dtype=bool))
        assert not apply_block_sparsity(self.weights, sparsity).data.any()

    def test_nothing_pruned_is_identity(self):
        assert apply_block_sparsity(self.weights, SparsityIndexMap.dense(8, 32)) == self.weights

    def test_half_the_channels_zeroes_half_the_elements(self):
        weights = QuantTensor.from_array(np.ones((8, 32, 3, 3)), 8)
        sparsity = SparsityIndexMap.from_pruned_channels(8, 32, range(0, 32, 2))
        pruned = apply_block_sparsity(weights, sparsity)
        assert sparsity.pruned_fraction == 0.5
        assert int((pruned.data == 0).sum()) == weights.size // 2

    def test_idempotent_and_union_composes(self):
        a = SparsityIndexMap(bits=self.rng.random((1, 32)) < 0.3)
        b = SparsityIndexMap(bits=self.rng.random((1, 32)) < 0.3)
        once = apply_block_sparsity(self.weights, a)
        assert apply_block_sparsity(once, a) == once
        assert apply_block_sparsity(once, b) == apply_block_sparsity(self.weights, a.union(b))

    def test_blocks_prune_independently(self):
        weights = QuantTensor.from_array(np.ones((16, 4)), 8)
        bits = np.array([[True, False, False, False], [False, False, False, False]])
        pruned = apply_block_sparsity(weights, SparsityIndexMap(bits=bits))
        assert not pruned.data[:8, 0].any()
        assert pruned.data[8:, 0].all()

    def test_mismatched_map(self):
        with pytest.raises(WorkloadError) as exc:
            apply_block_sparsity(self.weights, SparsityIndexMap.dense(16, 32))
        assert exc.value.code == "SPARSITY_SHAPE_ERROR"


class TestRequantize:
    def test_plain_shift(self):
        assert requantize(512, 4, True, 8) == 32

    def test_relu_clamps_negatives(self):
        assert requantize(-100, 0, True, 8) == 0

    def test_saturates(self):
        assert requantize(70000, 8, False, 8) == 127
        assert requantize(-70000, 8, False, 8) == -128
        assert requantize(100, 0, False, 2) == 1

    def test_shift_floors_toward_negative_infinity(self):
        assert requantize(-3, 1, False, 8) == -2

    def test_matches_clip_of_shift_over_grid(self):
        for acc in range(-5000, 5001, 37):
            for shift in range(0, 12):
                assert requantize(acc, shift, False, 8) == min(max(acc >> shift, -128), 127)

    def test_monotone_in_accumulator(self):
        accs = np.arange(-40000, 40000, 113)
        for relu in (False, True):
            values = [requantize(int(a), 5, relu, 4) for a in accs]
            assert all(x <= y for x, y in zip(values, values[1:]))

    def test_wrap32(self):
        assert int(wrap32(2**31)) == -(2**31)
        assert int(wrap32(-(2**31) - 1)) == 2**31 - 1


class TestSerialisation:
    def test_descriptor_dict_roundtrip_keeps_sparsity(self):
        desc = _conv(name="c1", activation=Activation.RELU, requant_shift=6).with_sparsity(
            SparsityIndexMap.from_pruned_channels(32, 32, [1, 5, 9])
        )
        assert LayerDescriptor.from_dict(desc.to_dict()) == desc

    def test_unknown_field_is_a_schema_error(self):
        with pytest.raises(WorkloadError) as exc:
            LayerDescriptor.from_dict({"kind": "DENSE", "C": 1, "K": 1, "colour": "red"})
        assert exc.value.code == "SCHEMA_ERROR"

    def test_pruned_channel_record(self):
        desc = LayerDescriptor.from_dict(
            {"kind": "DENSE", "C": 16, "K": 8, "sparsity": {"pruned_channels": [0, 1, 2, 3]}}
        )
        assert desc.sparsity.pruned_fraction == 0.25


class TestWorkloadValidation:
    def test_chain_shapes_must_agree(self):
        rng = np.random.default_rng(0)
        dense = LayerDescriptor(kind=LayerKind.DENSE, C=16, K=8)
        workload = Workload(
            name="bad",
            input=random_tensor(rng, (1, 12), 8),
            layers=(Layer(dense, random_tensor(rng, (8, 16), 8)),),
        )
        with pytest.raises(WorkloadError) as exc:
            validate_workload(workload)
        assert exc.value.code == "SHAPE_MISMATCH"

    def test_svm_layer_needs_model(self):
        rng = np.random.default_rng(0)
        svm = SvmModel(random_tensor(rng, (4, 8), 8), alphas=(1, 1, 1, 1), sigma=2.0)
        workload = Workload(name="svm", input=random_tensor(rng, (1, 8), 8), layers=(Layer(svm.layer()),))
        with pytest.raises(WorkloadError):
            validate_workload(workload)
        ok = Workload(name="svm", input=workload.input, layers=(Layer(svm.layer(), svm=svm),))
        assert validate_workload(ok) is ok

    def test_svm_model_checks_sigma_and_alphas(self):
        vectors = QuantTensor.zeros((2, 3), 8)
        with pytest.raises(WorkloadError):
            SvmModel(vectors, alphas=(1.0,), sigma=1.0)
        with pytest.raises(WorkloadError):
            SvmModel(vectors, alphas=(1.0, 1.0), sigma=0.0)
