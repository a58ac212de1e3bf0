"""Quantized tensor and layer data model shared by the golden model, compiler and simulator."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from flexsim import config
from flexsim.core.errors import WorkloadError
from flexsim.utils.logger import logger

_INT32_MIN = -(1 << 31)
_INT32_SPAN = 1 << 32


class LayerKind(str, Enum):
    CONV2D = "CONV2D"
    CONV1D_DILATED = "CONV1D_DILATED"
    DECONV2D = "DECONV2D"
    DENSE = "DENSE"
    RNN_STEP = "RNN_STEP"
    SVM_NORM = "SVM_NORM"
    MAXPOOL = "MAXPOOL"


class Activation(str, Enum):
    NONE = "NONE"
    RELU = "RELU"
    TANH = "TANH"
    SIGMOID = "SIGMOID"


class Norm(str, Enum):
    L1 = "L1"
    L2 = "L2"


class Dataflow(str, Enum):
    OXK = "OXK"
    CK = "CK"


MMM_KINDS = (LayerKind.CONV2D, LayerKind.CONV1D_DILATED, LayerKind.DECONV2D)
MVM_KINDS = (LayerKind.DENSE, LayerKind.RNN_STEP, LayerKind.SVM_NORM)
SPARSE_KINDS = (LayerKind.CONV2D, LayerKind.CONV1D_DILATED, LayerKind.DENSE)
SPATIAL_KINDS = (LayerKind.CONV2D, LayerKind.DECONV2D, LayerKind.MAXPOOL)


def value_range(precision: int) -> Tuple[int, int]:
    """Two's-complement range of a signed integer with ``precision`` bits."""
    return -(1 << (precision - 1)), (1 << (precision - 1)) - 1


def wrap32(values: Union[int, np.ndarray]) -> np.ndarray:
    """Wrap 64-bit sums to the 32-bit accumulator register."""
    arr = np.asarray(values, dtype=np.int64)
    return ((arr - _INT32_MIN) % _INT32_SPAN) + _INT32_MIN


# --------------------------------------------------------------------------- #
# Tensors
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class QuantTensor:
    """Signed integer tensor in row-major order.

    Operands use 2, 4 or 8 bits. Precision 32 is reserved for raw accumulator
    results such as SVM norms.
    """

    shape: Tuple[int, ...]
    precision: int
    data: np.ndarray

    def __post_init__(self) -> None:
        shape = tuple(int(extent) for extent in self.shape)
        if not shape or any(extent < 1 for extent in shape):
            raise WorkloadError("DIMENSION_ERROR", f"tensor extents must be positive, got {shape}")
        if self.precision not in config.SUPPORTED_PRECISIONS + (config.ACC_PRECISION,):
            raise WorkloadError("PRECISION_ERROR", f"unsupported tensor precision {self.precision}")
        data = np.asarray(self.data, dtype=np.int64)
        expected = int(np.prod(shape))
        if data.size != expected:
            raise WorkloadError(
                "SHAPE_MISMATCH", f"tensor holds {data.size} values but shape {shape} needs {expected}"
            )
        lo, hi = value_range(self.precision)
        if data.size and (data.min() < lo or data.max() > hi):
            raise WorkloadError(
                "PRECISION_ERROR", f"values outside the {self.precision}-bit range [{lo}, {hi}]"
            )
        data = data.reshape(shape).copy()
        data.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, values: Any, precision: int) -> "QuantTensor":
        arr = np.asarray(values, dtype=np.int64)
        return cls(shape=arr.shape, precision=precision, data=arr)

    @classmethod
    def zeros(cls, shape: Sequence[int], precision: int) -> "QuantTensor":
        return cls(shape=tuple(shape), precision=precision, data=np.zeros(tuple(shape), dtype=np.int64))

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def nbytes(self) -> int:
        """Packed storage size (sub-byte values share bytes)."""
        return (self.size * self.precision + 7) // 8

    def reshape(self, shape: Sequence[int]) -> "QuantTensor":
        return QuantTensor(shape=tuple(shape), precision=self.precision, data=self.data.reshape(tuple(shape)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QuantTensor):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.precision == other.precision
            and bool(np.array_equal(self.data, other.data))
        )

    def __repr__(self) -> str:
        return f"QuantTensor(shape={self.shape}, precision={self.precision})"


# --------------------------------------------------------------------------- #
# Sparsity and SVM models
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class SparsityIndexMap:
    """Blockwise channel pruning: ``bits[b, c]`` prunes channel ``c`` for filters ``8b..8b+7``."""

    bits: np.ndarray
    block_size: int = config.SPARSITY_BLOCK

    def __post_init__(self) -> None:
        if self.block_size != config.SPARSITY_BLOCK:
            raise WorkloadError("SPARSITY_SHAPE_ERROR", f"block size must be {config.SPARSITY_BLOCK}")
        bits = np.asarray(self.bits, dtype=bool)
        if bits.ndim != 2 or bits.shape[0] < 1 or bits.shape[1] < 1:
            raise WorkloadError("SPARSITY_SHAPE_ERROR", "sparsity bits must be a non-empty 2-D matrix")
        bits = bits.copy()
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def dense(cls, K: int, C: int) -> "SparsityIndexMap":
        return cls(bits=np.zeros((blocks_for(K), C), dtype=bool))

    @classmethod
    def from_pruned_channels(cls, K: int, C: int, channels: Sequence[int]) -> "SparsityIndexMap":
        """Prune the same input channels in every filter block."""
        bits = np.zeros((blocks_for(K), C), dtype=bool)
        bits[:, list(channels)] = True
        return cls(bits=bits)

    @property
    def blocks(self) -> int:
        return int(self.bits.shape[0])

    @property
    def channels(self) -> int:
        return int(self.bits.shape[1])

    @property
    def pruned_fraction(self) -> float:
        return float(self.bits.sum()) / float(self.bits.size)

    def is_pruned(self, block: int, channel: int) -> bool:
        return bool(self.bits[block, channel])

    def union(self, other: "SparsityIndexMap") -> "SparsityIndexMap":
        if self.bits.shape != other.bits.shape:
            raise WorkloadError("SPARSITY_SHAPE_ERROR", "cannot combine maps of different shapes")
        return SparsityIndexMap(bits=self.bits | other.bits)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparsityIndexMap):
            return NotImplemented
        return bool(np.array_equal(self.bits, other.bits))


def blocks_for(K: int) -> int:
    return (K + config.SPARSITY_BLOCK - 1) // config.SPARSITY_BLOCK


@dataclass(frozen=True)
class SvmModel:
    """One-class SVM with RBF-style kernel evaluated on accelerator norms."""

    support_vectors: QuantTensor
    alphas: Tuple[float, ...]
    sigma: float
    bias: float = 0.0
    norm: Norm = Norm.L2

    def __post_init__(self) -> None:
        if len(self.support_vectors.shape) != 2:
            raise WorkloadError("SHAPE_MISMATCH", "support vectors must be an N x D matrix")
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "norm", Norm(self.norm))
        if len(self.alphas) != self.n_vectors:
            raise WorkloadError(
                "SHAPE_MISMATCH", f"{len(self.alphas)} alphas for {self.n_vectors} support vectors"
            )
        if not self.sigma > 0:
            raise WorkloadError("DIMENSION_ERROR", "sigma must be positive")

    @property
    def n_vectors(self) -> int:
        return self.support_vectors.shape[0]

    @property
    def dims(self) -> int:
        return self.support_vectors.shape[1]

    def layer(self, *, batch: int = 1, name: str = "svm") -> "LayerDescriptor":
        return LayerDescriptor(
            kind=LayerKind.SVM_NORM,
            C=self.dims,
            K=self.n_vectors,
            OX=1,
            batch=batch,
            precision=self.support_vectors.precision,
            norm=self.norm,
            name=name,
        )


# --------------------------------------------------------------------------- #
# Layers
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class LayerDescriptor:
    """Hyper-parameters of one kernel mapped onto the PE array.

    ``IX``/``IY`` default to the unpadded ("valid") input extent; explicit values
    imply symmetric zero padding derived from the output geometry.
    """

    kind: LayerKind
    C: int
    K: int
    OX: int = 1
    OY: int = 1
    FX: int = 1
    FY: int = 1
    stride: int = 1
    dilation: int = 1
    upsample: int = 1
    batch: int = 1
    activation: Activation = Activation.NONE
    requant_shift: int = 0
    precision: int = 8
    sparsity: Optional[SparsityIndexMap] = None
    norm: Norm = Norm.L2
    IX: Optional[int] = None
    IY: Optional[int] = None
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", LayerKind(self.kind))
        object.__setattr__(self, "activation", Activation(self.activation))
        object.__setattr__(self, "norm", Norm(self.norm))

    # geometry ---------------------------------------------------------------

    @property
    def dataflow(self) -> Optional[Dataflow]:
        if self.kind in MMM_KINDS:
            return Dataflow.OXK
        if self.kind in MVM_KINDS:
            return Dataflow.CK
        return None

    @property
    def is_2d(self) -> bool:
        return self.kind in SPATIAL_KINDS

    def _window(self, out: int, filt: int) -> int:
        return (out - 1) * self.stride + (filt - 1) * self.dilation + 1

    def _default_input(self, out: int, filt: int) -> int:
        window = self._window(out, filt)
        if self.kind == LayerKind.DECONV2D:
            return (window - 1) // self.upsample + 1
        return window

    @property
    def input_x(self) -> int:
        return self.IX if self.IX is not None else self._default_input(self.OX, self.FX)

    @property
    def input_y(self) -> int:
        if not self.is_2d:
            return 1
        return self.IY if self.IY is not None else self._default_input(self.OY, self.FY)

    def stuffed_extent(self, extent: int) -> int:
        """Extent of the upsampled input after zero insertion."""
        return (extent - 1) * self.upsample + 1

    def _pad(self, out: int, filt: int, extent: int, axis: str) -> int:
        span = self._window(out, filt) - self.stuffed_extent(extent)
        if span < 0 or span % 2:
            raise WorkloadError(
                "DIMENSION_ERROR",
                f"{self.label}: {axis} geometry needs padding {span / 2}, which is not a non-negative integer",
            )
        return span // 2

    @property
    def padding(self) -> Tuple[int, int]:
        """(pad_y, pad_x) zero padding on each side."""
        if self.kind not in MMM_KINDS and self.kind != LayerKind.MAXPOOL:
            return 0, 0
        pad_x = self._pad(self.OX, self.FX, self.input_x, "x")
        pad_y = self._pad(self.OY, self.FY, self.input_y, "y") if self.is_2d else 0
        return pad_y, pad_x

    @property
    def input_shape(self) -> Tuple[int, ...]:
        if self.is_2d:
            return (self.C, self.input_y, self.input_x)
        if self.kind == LayerKind.CONV1D_DILATED:
            return (self.C, self.input_x)
        return (self.batch, self.C)

    @property
    def weight_shape(self) -> Optional[Tuple[int, ...]]:
        if self.kind in (LayerKind.CONV2D, LayerKind.DECONV2D):
            return (self.K, self.C, self.FY, self.FX)
        if self.kind == LayerKind.CONV1D_DILATED:
            return (self.K, self.C, self.FX)
        if self.kind in MVM_KINDS:
            return (self.K, self.C)
        return None

    @property
    def output_shape(self) -> Tuple[int, ...]:
        if self.is_2d:
            return (self.K, self.OY, self.OX)
        if self.kind == LayerKind.CONV1D_DILATED:
            return (self.K, self.OX)
        return (self.batch, self.K)

    @property
    def output_precision(self) -> int:
        return config.ACC_PRECISION if self.kind == LayerKind.SVM_NORM else self.precision

    @property
    def nominal_macs(self) -> int:
        """MACs of the dense loop nest, zero-stuffed taps and pruned channels included."""
        if self.kind in MMM_KINDS:
            return self.K * self.OY * self.OX * self.C * self.FY * self.FX
        if self.kind in MVM_KINDS:
            return self.batch * self.K * self.C
        return 0

    @property
    def label(self) -> str:
        return self.name or self.kind.value

    def with_sparsity(self, sparsity: Optional[SparsityIndexMap]) -> "LayerDescriptor":
        return replace(self, sparsity=sparsity)

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "kind": self.kind.value,
            "C": self.C,
            "K": self.K,
            "OX": self.OX,
            "OY": self.OY,
            "FX": self.FX,
            "FY": self.FY,
            "stride": self.stride,
            "dilation": self.dilation,
            "upsample": self.upsample,
            "batch": self.batch,
            "activation": self.activation.value,
            "requant_shift": self.requant_shift,
            "precision": self.precision,
            "norm": self.norm.value,
        }
        if self.IX is not None:
            payload["IX"] = self.IX
        if self.IY is not None:
            payload["IY"] = self.IY
        if self.name:
            payload["name"] = self.name
        if self.sparsity is not None:
            payload["sparsity"] = self.sparsity.bits.astype(int).tolist()
        return payload

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "LayerDescriptor":
        known = set(cls.__dataclass_fields__)  # type: ignore[attr-defined]
        unknown = set(payload) - known - {"weights", "svm"}
        if unknown:
            raise WorkloadError("SCHEMA_ERROR", f"unknown layer field(s): {', '.join(sorted(unknown))}")
        fields_ = {key: value for key, value in payload.items() if key in known}
        raw_map = fields_.pop("sparsity", None)
        try:
            desc = cls(**fields_)
        except (TypeError, ValueError) as exc:
            raise WorkloadError("SCHEMA_ERROR", f"malformed layer record: {exc}") from exc
        if raw_map is not None:
            desc = desc.with_sparsity(_sparsity_from_record(raw_map, desc))
        return desc


def _sparsity_from_record(raw: Any, desc: LayerDescriptor) -> SparsityIndexMap:
    if isinstance(raw, dict):
        return SparsityIndexMap.from_pruned_channels(desc.K, desc.C, raw.get("pruned_channels", []))
    return SparsityIndexMap(bits=np.asarray(raw, dtype=bool))


# --------------------------------------------------------------------------- #
# Loop nests
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class LoopNest:
    dataflow: Dataflow
    spatial: Tuple[Tuple[str, int], Tuple[str, int]]
    temporal: Tuple[Tuple[str, int], ...]

    @property
    def spatial_factors(self) -> Tuple[int, int]:
        return self.spatial[0][1], self.spatial[1][1]


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


# --------------------------------------------------------------------------- #
# Operations
# --------------------------------------------------------------------------- #


def validate_layer(desc: LayerDescriptor) -> LayerDescriptor:
    """Return ``desc`` unchanged when every structural invariant holds."""

    extents = {
        "C": desc.C,
        "K": desc.K,
        "OX": desc.OX,
        "OY": desc.OY,
        "FX": desc.FX,
        "FY": desc.FY,
        "stride": desc.stride,
        "dilation": desc.dilation,
        "upsample": desc.upsample,
        "batch": desc.batch,
    }
    for key, value in extents.items():
        if not isinstance(value, (int, np.integer)) or value < 1:
            raise WorkloadError("DIMENSION_ERROR", f"{desc.label}: {key} must be >= 1, got {value!r}")
    for key in ("IX", "IY"):
        value = getattr(desc, key)
        if value is not None and value < 1:
            raise WorkloadError("DIMENSION_ERROR", f"{desc.label}: {key} must be >= 1, got {value!r}")
    if desc.precision not in config.SUPPORTED_PRECISIONS:
        raise WorkloadError("PRECISION_ERROR", f"{desc.label}: precision must be one of 2, 4, 8")
    if not 0 <= desc.requant_shift <= 31:
        raise WorkloadError("DIMENSION_ERROR", f"{desc.label}: requant_shift must lie in [0, 31]")

    if desc.kind == LayerKind.CONV1D_DILATED and (desc.FY != 1 or desc.OY != 1):
        raise WorkloadError("DIMENSION_ERROR", f"{desc.label}: 1-D convolution needs FY = OY = 1")
    if desc.upsample > 1 and desc.kind != LayerKind.DECONV2D:
        raise WorkloadError("DIMENSION_ERROR", f"{desc.label}: upsample applies to DECONV2D only")
    if desc.batch > 1 and desc.kind not in MVM_KINDS:
        raise WorkloadError("DIMENSION_ERROR", f"{desc.label}: batch applies to dense kernels only")
    if desc.kind in MVM_KINDS and (desc.OX, desc.OY, desc.FX, desc.FY) != (1, 1, 1, 1):
        raise WorkloadError("DIMENSION_ERROR", f"{desc.label}: dense kernels have unit spatial extents")
    if desc.kind == LayerKind.MAXPOOL:
        if desc.K != desc.C:
            raise WorkloadError("DIMENSION_ERROR", f"{desc.label}: pooling keeps the channel count")
        if desc.dilation != 1:
            raise WorkloadError("DIMENSION_ERROR", f"{desc.label}: pooling windows are not dilated")
        if desc.padding != (0, 0):
            raise WorkloadError("DIMENSION_ERROR", f"{desc.label}: pooling windows are not padded")
    if desc.kind == LayerKind.SVM_NORM and desc.activation != Activation.NONE:
        raise WorkloadError("DIMENSION_ERROR", f"{desc.label}: norm kernels have no activation")
    # raises on fractional or negative padding
    pad_y, pad_x = desc.padding
    limits = config.UCODE_LIMITS
    encoded = {key: extents[key] for key in ("OX", "FX", "FY", "stride", "dilation", "upsample")}
    encoded["pad"] = max(pad_x, pad_y)
    for key, value in encoded.items():
        if value > limits[key]:
            raise WorkloadError(
                "DIMENSION_ERROR",
                f"{desc.label}: {key}={value} exceeds the instruction field limit {limits[key]}",
            )

    if desc.sparsity is not None:
        if desc.kind not in SPARSE_KINDS:
            raise WorkloadError(
                "SPARSITY_SHAPE_ERROR", f"{desc.label}: sparsity is not supported for {desc.kind.value}"
            )
        expected = (blocks_for(desc.K), desc.C)
        if desc.sparsity.bits.shape != expected:
            raise WorkloadError(
                "SPARSITY_SHAPE_ERROR",
                f"{desc.label}: map shape {desc.sparsity.bits.shape} does not match {expected}",
            )
    return desc


def derive_loop_nest(desc: LayerDescriptor) -> LoopNest:
    """Spatial unrolling (8 x 8) plus the ordered temporal loops of a kernel."""

    validate_layer(desc)
    rows, cols = config.ARRAY_ROWS, config.ARRAY_COLS
    if desc.dataflow == Dataflow.OXK:
        temporal = (
            ("OY", desc.OY),
            ("FY", desc.FY),
            ("FX", desc.FX),
            ("C", desc.C),
            ("ox-tiles", ceil_div(desc.OX, cols)),
            ("k-tiles", ceil_div(desc.K, rows)),
        )
        return LoopNest(Dataflow.OXK, (("OX", cols), ("K", rows)), temporal)
    if desc.dataflow == Dataflow.CK:
        temporal = (
            ("c-tiles", ceil_div(desc.C, cols)),
            ("k-tiles", ceil_div(desc.K, rows)),
            ("batch", desc.batch),
        )
        if desc.kind == LayerKind.SVM_NORM:
            return LoopNest(Dataflow.CK, (("D", cols), ("N", rows)), temporal)
        return LoopNest(Dataflow.CK, (("C", cols), ("K", rows)), temporal)
    raise WorkloadError("UNSUPPORTED_KIND", f"{desc.label}: {desc.kind.value} runs on the pooling unit")


def apply_block_sparsity(weights: QuantTensor, sparsity: SparsityIndexMap) -> QuantTensor:
    """Zero every pruned (filter block, input channel) slice."""

    if len(weights.shape) not in (2, 3, 4):
        raise WorkloadError("SPARSITY_SHAPE_ERROR", f"cannot apply a channel map to shape {weights.shape}")
    K, C = weights.shape[0], weights.shape[1]
    if sparsity.bits.shape != (blocks_for(K), C):
        raise WorkloadError(
            "SPARSITY_SHAPE_ERROR",
            f"map shape {sparsity.bits.shape} does not match weights (K={K}, C={C})",
        )
    mask = np.repeat(sparsity.bits, config.SPARSITY_BLOCK, axis=0)[:K]
    mask = mask.reshape(mask.shape + (1,) * (len(weights.shape) - 2))
    data = np.where(mask, 0, weights.data)
    return QuantTensor(shape=weights.shape, precision=weights.precision, data=data)


def requantize_array(acc: Any, shift: int, relu: bool, precision: int) -> np.ndarray:
    """Vectorised :func:`requantize`."""
    values = wrap32(acc)
    if relu:
        values = np.maximum(values, 0)
    values = values >> shift
    lo, hi = value_range(precision)
    return np.clip(values, lo, hi)


def requantize(acc: int, shift: int, relu: bool, precision: int) -> int:
    """Shift-and-saturate requantization of a 32-bit accumulator.

    ReLU clamps before the arithmetic (floor) shift.
    """
    return int(requantize_array(acc, shift, relu, precision))


# --------------------------------------------------------------------------- #
# Workloads (layer chains)
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class Layer:
    desc: LayerDescriptor
    weights: Optional[QuantTensor] = None
    svm: Optional[SvmModel] = None


@dataclass(frozen=True)
class Workload:
    """An input tensor feeding an ordered chain of layers."""

    name: str
    input: Optional[QuantTensor]
    layers: Tuple[Layer, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def output_shape(self) -> Optional[Tuple[int, ...]]:
        return self.layers[-1].desc.output_shape if self.layers else None


def validate_workload(workload: Workload) -> Workload:
    """Check every layer and the tensor hand-off between consecutive layers."""

    if not workload.layers:
        return workload
    if workload.input is None:
        raise WorkloadError("SHAPE_MISMATCH", f"{workload.name}: a non-empty chain needs an input tensor")
    shape: Tuple[int, ...] = workload.input.shape
    precision = workload.input.precision
    for index, layer in enumerate(workload.layers):
        desc = validate_layer(layer.desc)
        if precision != desc.precision:
            raise WorkloadError(
                "PRECISION_ERROR",
                f"{desc.label}: receives {precision}-bit data but computes at {desc.precision} bits",
            )
        if int(np.prod(shape)) != int(np.prod(desc.input_shape)):
            raise WorkloadError(
                "SHAPE_MISMATCH", f"{desc.label}: expects input {desc.input_shape}, chain provides {shape}"
            )
        if desc.kind == LayerKind.SVM_NORM:
            if layer.svm is None:
                raise WorkloadError("SHAPE_MISMATCH", f"{desc.label}: norm layers need an SVM model")
            if index != len(workload.layers) - 1:
                raise WorkloadError("SHAPE_MISMATCH", f"{desc.label}: norm outputs end the chain")
            weights = layer.svm.support_vectors
        else:
            weights = layer.weights
        if desc.weight_shape is not None:
            if weights is None or weights.shape != desc.weight_shape:
                got = None if weights is None else weights.shape
                raise WorkloadError(
                    "SHAPE_MISMATCH", f"{desc.label}: weights {got} do not match {desc.weight_shape}"
                )
            if weights.precision != desc.precision:
                raise WorkloadError("PRECISION_ERROR", f"{desc.label}: weight precision differs from layer")
        shape = desc.output_shape
        precision = desc.output_precision
    logger.debug("Workload %s validated (%d layers)", workload.name, len(workload.layers))
    return workload


def layer_weights(layer: Layer) -> Optional[QuantTensor]:
    if layer.desc.kind == LayerKind.SVM_NORM and layer.svm is not None:
        return layer.svm.support_vectors
    return layer.weights


def random_tensor(rng: np.random.Generator, shape: Sequence[int], precision: int) -> QuantTensor:
    lo, hi = value_range(precision)
    return QuantTensor.from_array(rng.integers(lo, hi + 1, size=tuple(shape)), precision)


def random_layer_operands(
    rng: np.random.Generator, desc: LayerDescriptor
) -> Tuple[QuantTensor, Optional[QuantTensor]]:
    """Random input and weight tensors shaped for ``desc``."""
    inputs = random_tensor(rng, desc.input_shape, desc.precision)
    weights = random_tensor(rng, desc.weight_shape, desc.precision) if desc.weight_shape else None
    return inputs, weights


__all__ = [
    "Activation",
    "Dataflow",
    "Layer",
    "LayerDescriptor",
    "LayerKind",
    "LoopNest",
    "MMM_KINDS",
    "MVM_KINDS",
    "Norm",
    "QuantTensor",
    "SparsityIndexMap",
    "SvmModel",
    "Workload",
    "apply_block_sparsity",
    "blocks_for",
    "ceil_div",
    "derive_loop_nest",
    "layer_weights",
    "random_layer_operands",
    "random_tensor",
    "requantize",
    "requantize_array",
    "validate_layer",
    "validate_workload",
    "value_range",
    "wrap32",
]
