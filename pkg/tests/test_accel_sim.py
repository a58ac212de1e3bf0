"""Tests for the functional and cycle model of the accelerator."""

from dataclasses import replace

import numpy as np
import pytest

from flexsim.core import accel_sim
from flexsim.core.accel_sim import (
    CycleReport,
    L0Fifo,
    PeMode,
    PeState,
    SimKnobs,
    run,
    simulate_ck_tile,
    simulate_oxk_tile,
    skip_sparse_block,
    svm_pe_pass,
)
from flexsim.core.compiler import emit_ucode, link_program, tile
from flexsim.core.errors import ConfigError, SimulationError
from flexsim.core.oracle import svm_norm_ref
from flexsim.core.ucode import unpack_program
from flexsim.core.workload_ir import (
    Activation,
    Layer,
    LayerDescriptor,
    LayerKind,
    Norm,
    SparsityIndexMap,
    SvmModel,
    Workload,
    random_layer_operands,
    random_tensor,
)
from flexsim.core.workloads import cnn3x3, get_case, get_workload, simulate_case

RESIDENT = SimKnobs(l1_resident=True)


def _timing(workload, knobs=RESIDENT):
    image, _ = link_program(workload)
    return run(image, knobs, functional=False)[1]


def _single(desc, rng, svm=None):
    inputs, weights = random_layer_operands(rng, desc)
    return Workload(name=desc.label, input=inputs, layers=(Layer(desc, weights, svm),))


def _random_layer(rng, kind, precision):
    def pick(lo, hi):
        return int(rng.integers(lo, hi + 1))

    activation = Activation(rng.choice(["NONE", "RELU", "TANH", "SIGMOID"]))
    shift = pick(0, 10)
    common = dict(precision=precision, activation=activation, requant_shift=shift)
    sparsity = None
    if kind == LayerKind.CONV2D:
        fx, stride = int(rng.choice([1, 3])), pick(1, 2)
        ox, oy = pick(1, 9), pick(1, 9)
        same = stride == 1 and rng.random() < 0.5
        desc = LayerDescriptor(
            kind=kind, C=pick(1, 12), K=pick(1, 20), OX=ox, OY=oy, FX=fx, FY=fx, stride=stride,
            IX=ox if same else None, IY=oy if same else None, **common,
        )
    elif kind == LayerKind.CONV1D_DILATED:
        desc = LayerDescriptor(
            kind=kind, C=pick(1, 12), K=pick(1, 20), OX=pick(1, 40), FX=pick(1, 3),
            dilation=int(rng.choice([1, 2, 4])), **common,
        )
    elif kind == LayerKind.DECONV2D:
        upsample, extent = int(rng.choice([1, 2])), pick(1, 4)
        out = (extent - 1) * upsample + 1
        desc = LayerDescriptor(
            kind=kind, C=pick(1, 8), K=pick(1, 12), OX=out, OY=out, FX=3, FY=3,
            upsample=upsample, IX=extent, IY=extent, **common,
        )
    elif kind in (LayerKind.DENSE, LayerKind.RNN_STEP):
        batch = int(rng.choice([1, 16]))
        if kind == LayerKind.RNN_STEP:
            common["activation"] = Activation(rng.choice(["TANH", "SIGMOID"]))
            batch = pick(1, 5)
        desc = LayerDescriptor(kind=kind, C=pick(1, 40), K=pick(1, 20), batch=batch, **common)
    else:
        c, o = pick(1, 6), pick(1, 4)
        desc = LayerDescriptor(
            kind=kind, C=c, K=c, OX=o, OY=o, FX=2, FY=2, stride=2, precision=precision
        )
    if kind in (LayerKind.CONV2D, LayerKind.CONV1D_DILATED, LayerKind.DENSE) and rng.random() < 0.3:
        sparsity = SparsityIndexMap(bits=rng.random((-(-desc.K // 8), desc.C)) < 0.4)
        desc = desc.with_sparsity(sparsity)
    return desc


class TestBitExactness:
    KINDS = (
        LayerKind.CONV2D,
        LayerKind.CONV1D_DILATED,
        LayerKind.DECONV2D,
        LayerKind.DENSE,
        LayerKind.RNN_STEP,
        LayerKind.MAXPOOL,
    )

    INSTANCES = 200

    @pytest.mark.parametrize("kind", KINDS)
    @pytest.mark.parametrize("precision", [2, 4, 8])
    def test_random_layers_match_golden_model(self, kind, precision):
        rng = np.random.default_rng(10 * self.KINDS.index(kind) + precision)
        for _ in range(self.INSTANCES):
            workload = _single(_random_layer(rng, kind, precision), rng)
            image, bundle = link_program(workload)
            outputs, _ = run(image)
            assert outputs == bundle.expected_outputs

    @pytest.mark.parametrize("precision", [2, 4, 8])
    def test_random_svm_norms_match_golden_model(self, precision):
        rng = np.random.default_rng(precision)
        for _ in range(self.INSTANCES):
            n, d = int(rng.integers(1, 13)), int(rng.integers(1, 21))
            model = SvmModel(
                random_tensor(rng, (n, d), precision),
                alphas=tuple(rng.uniform(0.1, 1.0, n)),
                sigma=8.0,
                norm=Norm(rng.choice(["L1", "L2"])),
            )
            desc = model.layer(batch=int(rng.choice([1, 16])))
            workload = Workload("svm", random_tensor(rng, desc.input_shape, precision), (Layer(desc, svm=model),))
            image, bundle = link_program(workload)
            assert run(image)[0] == bundle.expected_outputs

    @pytest.mark.parametrize("name", ["cnn3x3", "deconv", "fc-batch16", "cae", "resnet8", "oc-svm"])
    def test_builtin_programs_match_golden_model(self, name):
        image, bundle = link_program(get_workload(name))
        assert run(image)[0] == bundle.expected_outputs

    def test_multi_tile_channel_split_matches(self):
        rng = np.random.default_rng(12)
        desc = LayerDescriptor(kind=LayerKind.DENSE, C=8192, K=8, requant_shift=12)
        image, bundle = link_program(_single(desc, rng))
        assert image.instruction_count == 2
        assert run(image)[0] == bundle.expected_outputs

    def test_naive_deconv_mode_gives_same_outputs(self):
        image, _ = link_program(get_workload("deconv"))
        skip, _ = run(image, SimKnobs(deconv_mode="skip"))
        naive, _ = run(image, SimKnobs(deconv_mode="naive"))
        assert skip == naive

    def test_empty_program(self):
        image, _ = link_program(Workload(name="empty", input=None))
        outputs, report = run(image)
        assert outputs == []
        assert report.total_cycles == 0


class TestPeakCycles:
    def test_reference_conv_cycles(self):
        report = _timing(cnn3x3(8))
        assert report.total_cycles == 39948
        assert 0.886 <= report.utilization <= 0.946

    def test_precision_scaling_is_exact(self):
        int8, int4, int2 = (_timing(cnn3x3(bits)) for bits in (8, 4, 2))
        assert int4.phases["compute"] * 2 == int8.phases["compute"]
        assert int2.phases["compute"] * 4 == int8.phases["compute"]
        assert (int4.total_cycles, int2.total_cycles) == (19980, 9996)

    def test_sparsity_speedups(self):
        dense = _timing(cnn3x3(8)).total_cycles
        assert 1.6 <= dense / _timing(cnn3x3(8, 16)).total_cycles <= 2.0
        assert 5.5 <= dense / _timing(cnn3x3(8, 28)).total_cycles <= 8.0

    def test_pruning_never_adds_compute(self):
        compute = [_timing(cnn3x3(8, pruned)).phases["compute"] for pruned in range(0, 33, 4)]
        assert all(a >= b for a, b in zip(compute, compute[1:]))
        assert compute[-1] == 0

    def test_all_false_map_changes_only_index_fetches(self):
        plain = cnn3x3(8)
        layer = plain.layers[0]
        masked = Workload(
            plain.name,
            plain.input,
            (Layer(layer.desc.with_sparsity(SparsityIndexMap.dense(32, 32)), layer.weights),),
        )
        image_a, _ = link_program(plain)
        image_b, _ = link_program(masked)
        out_a, report_a = run(image_a, RESIDENT)
        out_b, report_b = run(image_b, RESIDENT)
        assert out_a == out_b
        assert report_a.phases["compute"] == report_b.phases["compute"]
        assert report_b.phases["decode"] > report_a.phases["decode"]

    def test_deconv_zero_skipping(self):
        workload = get_workload("deconv")
        skip = _timing(workload)
        naive = _timing(workload, replace(RESIDENT, deconv_mode="naive"))
        assert naive.total_cycles / skip.total_cycles >= 1.8
        ratio = skip.mac_ops_nominal / skip.mac_ops_effective
        assert ratio == pytest.approx(5.78 / 2.49, rel=0.05)

    def test_unit_upsample_deconv_times_like_conv(self):
        common = dict(C=8, K=8, OX=6, OY=6, FX=3, FY=3, IX=6, IY=6)
        rng = np.random.default_rng(0)
        deconv = _timing(_single(LayerDescriptor(kind=LayerKind.DECONV2D, **common), rng))
        conv = _timing(_single(LayerDescriptor(kind=LayerKind.CONV2D, **common), rng))
        assert deconv.total_cycles == conv.total_cycles

    def test_dilation_does_not_change_cycles(self):
        rng = np.random.default_rng(1)
        base = dict(kind=LayerKind.CONV1D_DILATED, C=16, K=16, OX=64, FX=3)
        one = _timing(_single(LayerDescriptor(dilation=1, **base), rng))
        two = _timing(_single(LayerDescriptor(dilation=2, **base), rng))
        assert one.phases["compute"] == two.phases["compute"]

    def test_minimal_kernel_costs_one_cycle_per_output_tile(self):
        desc = LayerDescriptor(kind=LayerKind.CONV2D, C=1, K=8, OX=8, OY=1)
        (instr,) = emit_ucode(desc, tile(desc))
        report = simulate_oxk_tile(instr, SimKnobs(prologue_overlap=1.0), desc=desc)
        assert report.phases["compute"] == 1
        assert report.phases["writeback"] == 8


class TestDenseTiming:
    def test_resident_weights_fill_the_array(self):
        desc = LayerDescriptor(kind=LayerKind.DENSE, C=64, K=64)
        (instr,) = emit_ucode(desc, tile(desc))
        report = simulate_ck_tile(instr, SimKnobs())
        assert report.mac_ops_effective == 64 * 64
        assert report.phases["compute"] * 64 == report.mac_ops_effective

    def test_streamed_batch16_throughput(self):
        report = simulate_case(get_case("FC batch=16"))
        gops = 2 * report.mac_ops_effective / (report.total_cycles / 5e6) / 1e9
        assert gops == pytest.approx(0.116, rel=0.30)

    def test_resident_batch16_cycles(self):
        report = _timing(get_workload("fc-batch16"))
        assert report.total_cycles == 1284


class TestPrimitives:
    def test_sparse_block_lookup(self):
        words = [0x0000FFFF, 0x80000000]
        assert skip_sparse_block(words, 3, channels=32)
        assert not skip_sparse_block(words, 16, channels=32)
        assert skip_sparse_block(words, 31, channels=32, block=1)

    def test_sparse_block_underflow(self):
        with pytest.raises(SimulationError) as exc:
            skip_sparse_block([0], 0, channels=32, block=1)
        assert exc.value.code == "INDEX_UNDERFLOW"

    def test_svm_pass_is_zero_at_support_vector(self):
        sv = np.array([[1, -2, 3], [4, 5, -6]])
        assert svm_pe_pass(sv[1], sv, Norm.L2).tolist() == [[(4 - 1) ** 2 + 7**2 + 9**2, 0]]

    def test_svm_pass_absolute_unit(self):
        assert svm_pe_pass([0], [[3]], Norm.L1).tolist() == [[3]]

    def test_svm_pass_matches_reference(self):
        rng = np.random.default_rng(6)
        sv = random_tensor(rng, (8, 64), 8)
        x = random_tensor(rng, (64,), 8)
        for norm in (Norm.L1, Norm.L2):
            model = SvmModel(sv, alphas=(1.0,) * 8, sigma=1.0, norm=norm)
            assert svm_pe_pass(x.data, sv.data, norm)[0].tolist() == svm_norm_ref(x.data, model).tolist()


class TestReports:
    def test_phases_sum_to_total_and_effective_bounded(self):
        _, report = run(link_program(get_workload("cae"))[0], functional=False)
        assert report.total_cycles == sum(report.phases.values())
        assert report.mac_ops_effective <= report.mac_ops_nominal
        assert report.phases["dma_in"] > 0

    def test_runs_are_deterministic(self):
        image, _ = link_program(get_workload("resnet8"))
        assert run(image, functional=False)[1].to_dict() == run(image, functional=False)[1].to_dict()

    def test_dict_roundtrip(self):
        report = _timing(cnn3x3(4))
        assert CycleReport.from_dict(report.to_dict()).to_dict() == report.to_dict()

    def test_knob_validation(self):
        with pytest.raises(ConfigError):
            SimKnobs(deconv_mode="fast")
        with pytest.raises(ConfigError):
            SimKnobs.from_mapping({"prologue_overlap": 1.5})


class TestMalformedImages:
    def test_bad_opcode(self):
        image, _ = link_program(cnn3x3())
        image.instructions = b"\x00" * 32
        with pytest.raises(SimulationError) as exc:
            run(image)
        assert exc.value.code == "DECODE_ERROR"

    def test_missing_tile_origin(self):
        image, _ = link_program(cnn3x3())
        image.meta["tiles"] = []
        with pytest.raises(SimulationError) as exc:
            run(image)
        assert exc.value.code == "DECODE_ERROR"

    def test_truncated_l2(self):
        image, _ = link_program(cnn3x3())
        image.l2_init = image.l2_init[:16]
        with pytest.raises(SimulationError) as exc:
            run(image)
        assert exc.value.code == "ADDRESS_FAULT"


class TestPeArray:
    @pytest.mark.parametrize("precision, lanes", [(8, 1), (4, 2), (2, 4)])
    def test_macs_per_cycle_follow_precision(self, precision, lanes):
        pes = PeState.for_tile(8, 8, precision=precision)
        cycles = pes.mac(np.ones((8, 8)), np.ones((8, 8)))
        assert pes.lanes == lanes
        assert cycles == 8 // lanes
        assert pes.ops == 8 * 64 == pes.cycles * lanes * 64
        assert (pes.accumulator == 8).all()

    def test_accumulator_wraps_to_32_bits(self):
        pes = PeState.for_tile(1, 1)
        pes.mac([[1 << 16]], [[1 << 15]])
        assert pes.accumulator[0, 0] == -(1 << 31)
        pes.mac([[1]], [[-1]])
        assert pes.accumulator[0, 0] == (1 << 31) - 1

    def test_masked_pes_keep_their_accumulator(self):
        pes = PeState.for_tile(3, 5)
        pes.mac(np.ones((8, 4)), np.ones((8, 4)))
        assert (pes.accumulator[:3, :5] == 4).all()
        assert pes.accumulator.sum() == 4 * 15
        assert pes.ops == 4 * 15

    def test_unicast_spreads_channels_over_columns(self):
        pes = PeState.for_tile(2, 8, precision=4)
        cycles = pes.mac_unicast(np.ones((2, 20)), np.arange(20))
        assert cycles == 2
        assert pes.accumulator[0, 0] == 0 + 1 + 16 + 17
        assert pes.row_sums()[:2].tolist() == [190, 190]

    def test_distance_modes(self):
        x, sv = [1, -2, 3], [[4, 5, -6], [1, -2, 3]]
        l1 = PeState.for_tile(8, 2, mode=PeMode.SVM_L1)
        l2 = PeState.for_tile(8, 2, mode=PeMode.SVM_L2)
        assert l1.distance(x, sv) == l2.distance(x, sv) == 1
        assert l1.column_sums()[:2].tolist() == [3 + 7 + 9, 0]
        assert l2.column_sums()[:2].tolist() == [9 + 49 + 81, 0]

    def test_mode_guards_operations(self):
        with pytest.raises(SimulationError) as exc:
            PeState(mode=PeMode.SVM_L2).mac([[1]], [[1]])
        assert exc.value.code == "DECODE_ERROR"
        with pytest.raises(SimulationError):
            PeState().distance([1], [[1]])
        with pytest.raises(SimulationError):
            PeState.for_tile(9, 1)
        with pytest.raises(SimulationError):
            PeState(precision=16)


class TestL0Fifo:
    def test_capacity_is_never_exceeded(self):
        fifo = L0Fifo(np.arange(40))
        fifo.start(0)
        fifo.window(16, 1)
        assert len(fifo) == fifo.peak == 16
        with pytest.raises(SimulationError) as exc:
            fifo.push()
        assert exc.value.code == "FIFO_OVERFLOW"
        fifo.start(0)
        with pytest.raises(SimulationError):
            fifo.window(9, 2)

    def test_zero_shuffle_never_fetches_stuffed_zeros(self):
        fifo = L0Fifo(np.arange(1, 9), pad=2, upsample=2, zero_shuffle=True)
        fifo.start(0)
        window = fifo.window(16, 1)
        assert window[0].tolist() == [0, 0, 1, 0, 2, 0, 3, 0, 4, 0, 5, 0, 6, 0, 7, 0]
        assert fifo.fetched == [2, 4, 6, 8, 10, 12, 14]
        assert all(fifo.is_real(position) for position in fifo.fetched)
        assert fifo.inserted == 16 - 7

    def test_upsampling_needs_zero_shuffle(self):
        with pytest.raises(SimulationError) as exc:
            L0Fifo(np.arange(4), upsample=2)
        assert exc.value.code == "DECODE_ERROR"

    def test_shift_follows_dilation(self):
        fifo = L0Fifo(np.arange(10) * 10, shift=3)
        fifo.start(0)
        assert fifo.window(2, 1)[0].tolist() == [0, 10]
        fifo.advance()
        assert fifo.window(2, 1)[0].tolist() == [30, 40]
        assert fifo.fetched == [0, 1, 3, 4]

    def test_strided_window_picks_every_stride_word(self):
        fifo = L0Fifo(np.arange(20))
        fifo.start(1)
        assert fifo.window(4, 3)[0].tolist() == [1, 4, 7, 10]
        assert len(fifo) == 10


class TestDatapathInvariants:
    def _record(self, monkeypatch):
        fifos, arrays = [], []

        class RecordingFifo(L0Fifo):
            def __init__(self, *args, **kwargs):
                super().__init__(*args, **kwargs)
                fifos.append(self)

        class RecordingPes(PeState):
            def __post_init__(self):
                super().__post_init__()
                arrays.append(self)

        monkeypatch.setattr(accel_sim, "L0Fifo", RecordingFifo)
        monkeypatch.setattr(accel_sim, "PeState", RecordingPes)
        return fifos, arrays

    def test_deconv_feeds_the_array_through_the_fifo(self, monkeypatch):
        fifos, arrays = self._record(monkeypatch)
        desc = LayerDescriptor(
            kind=LayerKind.DECONV2D, C=4, K=10, OX=7, OY=7, FX=3, FY=3, upsample=2, IX=4, IY=4,
            precision=4, requant_shift=4,
        )
        image, bundle = link_program(_single(desc, np.random.default_rng(3)))
        assert run(image)[0] == bundle.expected_outputs
        assert fifos and arrays
        assert all(fifo.peak <= 16 for fifo in fifos)
        assert all(fifo.is_real(p) for fifo in fifos for p in fifo.fetched)
        assert sum(fifo.inserted for fifo in fifos) > 0
        assert all(pes.ops <= pes.cycles * pes.lanes * 64 for pes in arrays)

    def test_strided_conv_stays_within_fifo(self, monkeypatch):
        fifos, _ = self._record(monkeypatch)
        desc = LayerDescriptor(kind=LayerKind.CONV2D, C=3, K=9, OX=8, OY=3, FX=3, FY=3, stride=2)
        image, bundle = link_program(_single(desc, np.random.default_rng(4)))
        assert run(image)[0] == bundle.expected_outputs
        assert max(fifo.peak for fifo in fifos) <= 16

    def test_same_padded_wide_dilation_matches(self):
        desc = LayerDescriptor(
            kind=LayerKind.CONV1D_DILATED, C=64, K=64, OX=512, IX=512, FX=3, dilation=16,
            requant_shift=10,
        )
        assert desc.padding[1] == 16
        image, bundle = link_program(_single(desc, np.random.default_rng(16)))
        assert {instr.pad_x for instr in unpack_program(image.instructions)} == {16}
        assert run(image)[0] == bundle.expected_outputs
