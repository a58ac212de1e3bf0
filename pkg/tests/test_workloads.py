"""Tests for the built-in benchmark workloads."""

import pytest

from flexsim.core.errors import WorkloadError
from flexsim.core.workload_ir import LayerDescriptor, LayerKind, validate_workload
from flexsim.core.workloads import (
    CALIBRATION_ROWS,
    PREDICTION_ROWS,
    SUITE,
    WORKLOADS,
    calibration_targets,
    cnn3x3,
    deconv8,
    get_case,
    get_workload,
    requant_shift_for,
    simulate_case,
)


@pytest.mark.parametrize("name", sorted(WORKLOADS))
def test_builtin_workloads_are_valid(name):
    workload = get_workload(name)
    assert validate_workload(workload) is workload
    assert workload.input.shape == workload.layers[0].desc.input_shape


def test_builders_are_deterministic():
    assert get_workload("cae").input == get_workload("cae").input
    assert cnn3x3(seed=1).input != cnn3x3(seed=2).input


def test_reference_convolution_shape():
    desc = cnn3x3().layers[0].desc
    assert desc.output_shape == (32, 16, 16)
    assert desc.nominal_macs == 32 * 32 * 9 * 256


def test_sparse_variants_prune_a_fraction():
    assert cnn3x3(8, 16).layers[0].desc.sparsity.pruned_fraction == pytest.approx(0.5)
    assert cnn3x3(8, 28).layers[0].desc.sparsity.pruned_fraction == pytest.approx(0.875)


def test_deconvolution_upsamples():
    desc = deconv8().layers[0].desc
    assert desc.input_shape == (32, 3, 3)
    assert desc.output_shape == (32, 7, 7)


def test_unknown_names():
    with pytest.raises(WorkloadError) as exc:
        get_workload("mobilenet")
    assert exc.value.code == "UNKNOWN_WORKLOAD"
    with pytest.raises(WorkloadError):
        get_case("MobileNet")


def test_suite_rows_are_unique_and_referenced():
    names = [case.name for case in SUITE]
    assert len(names) == len(set(names))
    assert set(CALIBRATION_ROWS) | set(PREDICTION_ROWS) <= set(names)


def test_requant_shift_stays_in_range():
    small = LayerDescriptor(kind=LayerKind.DENSE, C=1, K=1, precision=2)
    large = LayerDescriptor(kind=LayerKind.DENSE, C=1 << 20, K=1)
    assert requant_shift_for(small) == 0
    assert 0 <= requant_shift_for(large) <= 31


@pytest.mark.parametrize(
    "name, gops",
    [("CNN@8b", 0.586), ("CNN@4b", 1.17), ("CNN@2b", 2.35)],
)
def test_peak_rows_reach_measured_throughput(name, gops):
    report = simulate_case(get_case(name))
    simulated = 2 * report.mac_ops_effective * 5e6 / report.total_cycles / 1e9
    assert simulated == pytest.approx(gops, rel=0.05)


@pytest.mark.parametrize("case", [c for c in SUITE if c.group == "real-time"], ids=lambda c: c.name)
def test_real_time_rows_stream_from_l2(case):
    report = simulate_case(case)
    assert not case.resident
    assert report.dma_bytes > 0
    assert report.mac_ops_effective > 0


def test_calibration_targets_carry_measured_power():
    targets = calibration_targets(("CNN@8b",))
    assert len(targets) == 1
    assert targets[0].power_w == pytest.approx(237e-6)
    assert targets[0].op_point.name == "efficiency"
