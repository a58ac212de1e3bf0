"""Golden-model executors.

Straightforward loop-nest implementations with 64-bit numpy accumulation,
wrapped to 32 bits before the output stage. They favour clarity over speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from flexsim.core.errors import WorkloadError
from flexsim.core.nlfg import apply_output_stage, nlfg_exact  # noqa: F401
from flexsim.core.workload_ir import (
    Layer,
    LayerDescriptor,
    LayerKind,
    Norm,
    QuantTensor,
    SvmModel,
    Workload,
    layer_weights,
    validate_layer,
    validate_workload,
    wrap32,
)
from flexsim.utils.logger import logger


@dataclass(frozen=True)
class GoldenBundle:
    """Inputs, per-layer chain and the golden-model outputs of a program."""

    inputs: List[QuantTensor] = field(default_factory=list)
    expected_outputs: List[QuantTensor] = field(default_factory=list)
    layers: List[LayerDescriptor] = field(default_factory=list)


def _check_shape(tensor: QuantTensor, expected: Optional[Tuple[int, ...]], what: str, desc: LayerDescriptor) -> None:
    if expected is None or tensor.shape != tuple(expected):
        raise WorkloadError(
            "SHAPE_MISMATCH", f"{desc.label}: {what} shape {tensor.shape} does not match {expected}"
        )


def _finish(acc: np.ndarray, desc: LayerDescriptor) -> QuantTensor:
    out = apply_output_stage(wrap32(acc), desc)
    return QuantTensor.from_array(out.reshape(desc.output_shape), desc.precision)


def zero_stuff(data: np.ndarray, upsample: int, axes: Sequence[int]) -> np.ndarray:
    """Insert ``upsample - 1`` zeros between neighbours along ``axes``."""
    if upsample == 1:
        return np.asarray(data, dtype=np.int64)
    out_shape = list(data.shape)
    for axis in axes:
        out_shape[axis] = (data.shape[axis] - 1) * upsample + 1
    out = np.zeros(out_shape, dtype=np.int64)
    index = [slice(None)] * data.ndim
    for axis in axes:
        index[axis] = slice(None, None, upsample)
    out[tuple(index)] = data
    return out


def _padded(data: np.ndarray, pads: Sequence[int]) -> np.ndarray:
    """Zero-pad trailing spatial axes symmetrically."""
    width = [(0, 0)] * (data.ndim - len(pads)) + [(p, p) for p in pads]
    return np.pad(data, width)


def _conv_acc(x: np.ndarray, w: np.ndarray, desc: LayerDescriptor) -> np.ndarray:
    """Direct 2-D correlation over an already padded (C, Y, X) input."""
    K, C, FY, FX = w.shape
    acc = np.zeros((K, desc.OY, desc.OX), dtype=np.int64)
    s, d = desc.stride, desc.dilation
    for fy in range(FY):
        for fx in range(FX):
            y0, x0 = fy * d, fx * d
            window = x[:, y0 : y0 + (desc.OY - 1) * s + 1 : s, x0 : x0 + (desc.OX - 1) * s + 1 : s]
            acc += np.einsum("kc,cyx->kyx", w[:, :, fy, fx], window)
    return acc


# --------------------------------------------------------------------------- #
# Layer executors
# --------------------------------------------------------------------------- #


def conv2d_ref(inputs: QuantTensor, weights: QuantTensor, desc: LayerDescriptor) -> QuantTensor:
    validate_layer(desc)
    _check_shape(inputs, desc.input_shape, "input", desc)
    _check_shape(weights, desc.weight_shape, "weight", desc)
    pad_y, pad_x = desc.padding
    x = _padded(inputs.data.astype(np.int64), (pad_y, pad_x))
    return _finish(_conv_acc(x, weights.data.astype(np.int64), desc), desc)


def conv1d_dilated_ref(inputs: QuantTensor, weights: QuantTensor, desc: LayerDescriptor) -> QuantTensor:
    validate_layer(desc)
    _check_shape(inputs, desc.input_shape, "input", desc)
    _check_shape(weights, desc.weight_shape, "weight", desc)
    _, pad_x = desc.padding
    x = _padded(inputs.data.astype(np.int64), (pad_x,))[:, None, :]
    w = weights.data.astype(np.int64)[:, :, None, :]
    return _finish(_conv_acc(x, w, desc), desc)


def deconv2d_ref(inputs: QuantTensor, weights: QuantTensor, desc: LayerDescriptor) -> QuantTensor:
    """Zero-stuffed upsampling followed by a convolution."""
    validate_layer(desc)
    _check_shape(inputs, desc.input_shape, "input", desc)
    _check_shape(weights, desc.weight_shape, "weight", desc)
    stuffed = zero_stuff(inputs.data, desc.upsample, axes=(1, 2))
    pad_y, pad_x = desc.padding
    x = _padded(stuffed, (pad_y, pad_x))
    return _finish(_conv_acc(x, weights.data.astype(np.int64), desc), desc)


def dense_ref(inputs: QuantTensor, weights: QuantTensor, desc: LayerDescriptor) -> QuantTensor:
    """``out[b][k] = requant(sum_c in[b][c] * w[k][c])``; RNN steps add the NLFG."""
    validate_layer(desc)
    _check_shape(inputs, desc.input_shape, "input", desc)
    _check_shape(weights, desc.weight_shape, "weight", desc)
    acc = inputs.data.astype(np.int64) @ weights.data.astype(np.int64).T
    return _finish(acc, desc)


def maxpool_ref(inputs: QuantTensor, desc: LayerDescriptor) -> QuantTensor:
    validate_layer(desc)
    _check_shape(inputs, desc.input_shape, "input", desc)
    x = inputs.data
    s = desc.stride
    best: Optional[np.ndarray] = None
    for fy in range(desc.FY):
        for fx in range(desc.FX):
            window = x[:, fy : fy + (desc.OY - 1) * s + 1 : s, fx : fx + (desc.OX - 1) * s + 1 : s]
            best = window if best is None else np.maximum(best, window)
    return QuantTensor.from_array(best, desc.precision)


def svm_norm_ref(x: Sequence[int], model: SvmModel) -> np.ndarray:
    """Integer L1 / squared-L2 distances to each support vector (32-bit accumulators)."""
    vec = np.asarray(x, dtype=np.int64).ravel()
    if vec.size != model.dims:
        raise WorkloadError("SHAPE_MISMATCH", f"input of length {vec.size} for {model.dims}-D model")
    delta = vec[None, :] - model.support_vectors.data.astype(np.int64)
    if model.norm == Norm.L1:
        norms = np.abs(delta).sum(axis=1)
    else:
        norms = (delta * delta).sum(axis=1)
    return wrap32(norms)


def svm_norms_tensor(inputs: QuantTensor, model: SvmModel, desc: LayerDescriptor) -> QuantTensor:
    _check_shape(inputs, desc.input_shape, "input", desc)
    rows = [svm_norm_ref(inputs.data[b], model) for b in range(desc.batch)]
    return QuantTensor.from_array(np.stack(rows), 32)


def _exponent_norms(norms: Sequence[int], model: SvmModel, norm_squared: bool) -> np.ndarray:
    values = np.asarray(norms, dtype=np.float64).ravel()
    if values.size != model.n_vectors:
        raise WorkloadError("SHAPE_MISMATCH", f"{values.size} norms for {model.n_vectors} support vectors")
    if model.norm == Norm.L2 and not norm_squared:
        values = np.sqrt(values)
    return values


def svm_decision_ref(norms: Sequence[int], model: SvmModel, *, norm_squared: bool = False) -> float:
    """``sum_i alpha_i * exp(-||x - sv_i|| / (2 sigma^2)) - b`` in double precision.

    ``norms`` are the array outputs, so L2 entries are sums of squares. By default
    their square root enters the exponent (Euclidean distance); ``norm_squared``
    uses the sums as they are. L1 norms are always used as they are.
    """
    values = _exponent_norms(norms, model, norm_squared)
    denom = 2.0 * model.sigma * model.sigma
    return math.fsum(a * math.exp(-n / denom) for a, n in zip(model.alphas, values)) - model.bias


def svm_decision_exp2(norms: Sequence[int], model: SvmModel, *, norm_squared: bool = False) -> float:
    """Base-2 form of :func:`svm_decision_ref` for hosts without a fast ``exp``.

    Requires strictly positive alphas.
    """
    values = _exponent_norms(norms, model, norm_squared)
    if any(a <= 0 for a in model.alphas):
        raise WorkloadError("DIMENSION_ERROR", "base-2 evaluation needs positive alphas")
    scale = 1.0 / (2.0 * model.sigma * model.sigma * math.log(2.0))
    terms = (2.0 ** (math.log2(a) - n * scale) for a, n in zip(model.alphas, values))
    return math.fsum(terms) - model.bias


# --------------------------------------------------------------------------- #
# Chains
# --------------------------------------------------------------------------- #

Executor = Callable[[QuantTensor, Layer], QuantTensor]

_EXECUTORS: Dict[LayerKind, Executor] = {
    LayerKind.CONV2D: lambda x, layer: conv2d_ref(x, layer.weights, layer.desc),
    LayerKind.CONV1D_DILATED: lambda x, layer: conv1d_dilated_ref(x, layer.weights, layer.desc),
    LayerKind.DECONV2D: lambda x, layer: deconv2d_ref(x, layer.weights, layer.desc),
    LayerKind.DENSE: lambda x, layer: dense_ref(x, layer.weights, layer.desc),
    LayerKind.RNN_STEP: lambda x, layer: dense_ref(x, layer.weights, layer.desc),
    LayerKind.MAXPOOL: lambda x, layer: maxpool_ref(x, layer.desc),
    LayerKind.SVM_NORM: lambda x, layer: svm_norms_tensor(x, layer.svm, layer.desc),
}


def run_layer(inputs: QuantTensor, layer: Layer) -> QuantTensor:
    desc = layer.desc
    if inputs.shape != desc.input_shape and inputs.size == int(np.prod(desc.input_shape)):
        inputs = inputs.reshape(desc.input_shape)
    if layer_weights(layer) is None and desc.weight_shape is not None:
        raise WorkloadError("SHAPE_MISMATCH", f"{desc.label}: missing weights")
    return _EXECUTORS[desc.kind](inputs, layer)


def run_chain(workload: Workload) -> List[QuantTensor]:
    """Execute every layer; returns one output per layer."""
    validate_workload(workload)
    outputs: List[QuantTensor] = []
    current = workload.input
    for layer in workload.layers:
        current = run_layer(current, layer)
        outputs.append(current)
        logger.debug("golden %s -> %s", layer.desc.label, current.shape)
    return outputs


def golden_bundle(workload: Workload) -> GoldenBundle:
    if not workload.layers:
        return GoldenBundle()
    outputs = run_chain(workload)
    return GoldenBundle(
        inputs=[workload.input],
        expected_outputs=[outputs[-1]],
        layers=[layer.desc for layer in workload.layers],
    )


__all__ = [
    "GoldenBundle",
    "conv1d_dilated_ref",
    "conv2d_ref",
    "deconv2d_ref",
    "dense_ref",
    "golden_bundle",
    "maxpool_ref",
    "nlfg_exact",
    "run_chain",
    "run_layer",
    "svm_decision_exp2",
    "svm_decision_ref",
    "svm_norm_ref",
    "svm_norms_tensor",
    "zero_stuff",
]
