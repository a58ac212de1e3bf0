"""Tests for the piecewise-linear activation unit."""

import numpy as np
import pytest

from flexsim.core.errors import WorkloadError
from flexsim.core.nlfg import CODE_MAX, CODE_MIN, ONE, nlfg_eval, nlfg_eval_array, nlfg_exact, output_stage
from flexsim.core.workload_ir import Activation

FUNCTIONS = (Activation.TANH, Activation.SIGMOID)


@pytest.mark.parametrize("fn", FUNCTIONS)
def test_error_within_two_lsb_over_all_codes(fn):
    codes = np.arange(CODE_MIN, CODE_MAX + 1)
    approx = nlfg_eval_array(codes, fn)
    exact = np.array([nlfg_exact(int(c), fn) for c in codes])
    assert int(np.abs(approx - exact).max()) <= 2


def test_exact_reference_points():
    assert nlfg_exact(0, Activation.TANH) == 0
    assert nlfg_exact(0, Activation.SIGMOID) == ONE // 2
    assert nlfg_exact(CODE_MAX, Activation.TANH) == ONE
    assert nlfg_exact(CODE_MIN, Activation.TANH) == -ONE


def test_hardware_unit_hits_anchor_points():
    assert nlfg_eval(0, Activation.TANH) == 0
    assert nlfg_eval(0, Activation.SIGMOID) == ONE // 2


@pytest.mark.parametrize("fn", FUNCTIONS)
def test_out_of_range_inputs_saturate(fn):
    assert nlfg_eval(10_000, fn) == nlfg_eval(CODE_MAX, fn)
    assert nlfg_eval(-10_000, fn) == nlfg_eval(CODE_MIN, fn)


@pytest.mark.parametrize("fn", FUNCTIONS)
def test_monotone(fn):
    values = nlfg_eval_array(np.arange(CODE_MIN, CODE_MAX + 1), fn)
    assert (np.diff(values) >= 0).all()


@pytest.mark.parametrize("fn", [Activation.RELU, Activation.NONE, "SOFTMAX"])
def test_unsupported_function(fn):
    with pytest.raises(WorkloadError) as exc:
        nlfg_exact(0, fn)
    assert exc.value.code == "UNKNOWN_ACTIVATION"
    assert exc.value.exit_code == 4


def test_output_stage_relu_and_plain():
    acc = np.array([-64, 0, 64, 4096])
    assert output_stage(acc, Activation.RELU, 2, 8).tolist() == [0, 0, 16, 127]
    assert output_stage(acc, Activation.NONE, 2, 8).tolist() == [-16, 0, 16, 127]


def test_output_stage_lower_precision_keeps_top_bits():
    acc = np.array([0, 1 << 10])
    full = output_stage(acc, Activation.SIGMOID, 4, 8)
    assert output_stage(acc, Activation.SIGMOID, 4, 4).tolist() == (full >> 4).tolist()
