"""Non-linear function generator: table-driven piecewise-linear tanh / sigmoid.

Inputs and outputs are 8-bit Q4.4 codes (1.0 == 16). The input range [-8, 8)
splits into 16 uniform segments; each segment stores the chord between the
exact function values at its end points, in fixed point with ``FRAC_BITS``
extra fraction bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Dict

import numpy as np

from flexsim.core.errors import WorkloadError
from flexsim.core.workload_ir import Activation, LayerDescriptor, requantize_array

FRAC = 4
ONE = 1 << FRAC
SEGMENTS = 16
SEGMENT_WIDTH = 256 // SEGMENTS
FRAC_BITS = 8
CODE_MIN, CODE_MAX = -128, 127

_FUNCTIONS: Dict[Activation, Callable[[float], float]] = {
    Activation.TANH: math.tanh,
    Activation.SIGMOID: lambda x: 1.0 / (1.0 + math.exp(-x)),
}


@dataclass(frozen=True)
class SegmentTable:
    intercepts: np.ndarray
    slopes: np.ndarray


def _function(fn: Activation) -> Callable[[float], float]:
    try:
        return _FUNCTIONS[Activation(fn)]
    except (KeyError, ValueError) as exc:
        raise WorkloadError("UNKNOWN_ACTIVATION", f"NLFG supports TANH and SIGMOID, not {fn}") from exc


@lru_cache(maxsize=None)
def segment_table(fn: Activation) -> SegmentTable:
    func = _function(fn)
    scale = 1 << FRAC_BITS
    intercepts = np.zeros(SEGMENTS, dtype=np.int64)
    slopes = np.zeros(SEGMENTS, dtype=np.int64)
    for seg in range(SEGMENTS):
        x0 = CODE_MIN + seg * SEGMENT_WIDTH
        x1 = x0 + SEGMENT_WIDTH
        y0 = func(x0 / ONE) * ONE
        y1 = func(x1 / ONE) * ONE
        intercepts[seg] = math.floor(y0 * scale + 0.5)
        slopes[seg] = math.floor((y1 - y0) / SEGMENT_WIDTH * scale + 0.5)
    intercepts.setflags(write=False)
    slopes.setflags(write=False)
    return SegmentTable(intercepts=intercepts, slopes=slopes)


def nlfg_eval_array(codes: Any, fn: Activation) -> np.ndarray:
    """Vectorised hardware evaluation; out-of-range inputs saturate."""
    table = segment_table(Activation(fn))
    x = np.clip(np.asarray(codes, dtype=np.int64), CODE_MIN, CODE_MAX)
    seg = (x - CODE_MIN) >> 4
    offset = x - (CODE_MIN + seg * SEGMENT_WIDTH)
    rounding = 1 << (FRAC_BITS - 1)
    y = (table.intercepts[seg] + table.slopes[seg] * offset + rounding) >> FRAC_BITS
    return np.clip(y, CODE_MIN, CODE_MAX)


def nlfg_eval(x: int, fn: Activation) -> int:
    return int(nlfg_eval_array(x, fn))


def nlfg_exact(x: int, fn: Activation) -> int:
    """Exact function rounded to the Q4.4 output grid."""
    code = min(max(int(x), CODE_MIN), CODE_MAX)
    value = _function(fn)(code / ONE) * ONE
    return int(min(max(math.floor(value + 0.5), CODE_MIN), CODE_MAX))


def output_stage(acc: Any, activation: Activation, shift: int, precision: int) -> np.ndarray:
    """Requantize accumulators and apply an activation.

    Non-linear activations read the 8-bit requantized code as Q4.4; lower
    precisions keep the top bits of the Q4.4 result.
    """
    activation = Activation(activation)
    if activation in (Activation.TANH, Activation.SIGMOID):
        codes = requantize_array(acc, shift, False, 8)
        return nlfg_eval_array(codes, activation) >> (8 - precision)
    return requantize_array(acc, shift, activation == Activation.RELU, precision)


def apply_output_stage(acc: Any, desc: LayerDescriptor) -> np.ndarray:
    return output_stage(acc, desc.activation, desc.requant_shift, desc.precision)


__all__ = [
    "SegmentTable",
    "apply_output_stage",
    "nlfg_eval",
    "nlfg_eval_array",
    "nlfg_exact",
    "output_stage",
    "segment_table",
]
