"""Binary tensor blobs and JSON workload documents."""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np

from flexsim import config
from flexsim.core.errors import TensorIOError, WorkloadError
from flexsim.core.workload_ir import (
    Layer,
    LayerDescriptor,
    LayerKind,
    QuantTensor,
    SvmModel,
    Workload,
    validate_workload,
)
from flexsim.utils.logger import logger

PathLike = Union[str, Path]


# --------------------------------------------------------------------------- #
# Value packing
# --------------------------------------------------------------------------- #


def pack_values(values: np.ndarray, precision: int) -> bytes:
    """Pack signed integers little-endian; 2/4-bit values share bytes, lowest bits first."""

    flat = np.asarray(values, dtype=np.int64).ravel()
    if precision == config.ACC_PRECISION:
        return flat.astype("<i4").tobytes()
    if precision == 8:
        return flat.astype(np.int8).tobytes()
    per_byte = 8 // precision
    mask = (1 << precision) - 1
    padded = np.zeros(-(-flat.size // per_byte) * per_byte, dtype=np.int64)
    padded[: flat.size] = flat & mask
    lanes = padded.reshape(-1, per_byte)
    shifts = np.arange(per_byte, dtype=np.int64) * precision
    return (lanes << shifts).sum(axis=1).astype(np.uint8).tobytes()


def unpack_values(payload: bytes, precision: int, count: int) -> np.ndarray:
    """Inverse of :func:`pack_values`."""

    if precision == config.ACC_PRECISION:
        arr = np.frombuffer(payload, dtype="<i4", count=count)
        return arr.astype(np.int64)
    if precision == 8:
        return np.frombuffer(payload, dtype=np.int8, count=count).astype(np.int64)
    per_byte = 8 // precision
    nbytes = -(-count // per_byte)
    raw = np.frombuffer(payload, dtype=np.uint8, count=nbytes).astype(np.int64)
    shifts = np.arange(per_byte, dtype=np.int64) * precision
    fields = ((raw[:, None] >> shifts) & ((1 << precision) - 1)).ravel()[:count]
    sign = 1 << (precision - 1)
    return np.where(fields >= sign, fields - (1 << precision), fields)


def packed_size(count: int, precision: int) -> int:
    return (count * precision + 7) // 8


# --------------------------------------------------------------------------- #
# Tensor files
# --------------------------------------------------------------------------- #


def tensor_to_bytes(tensor: QuantTensor) -> bytes:
    header = config.TENSOR_MAGIC + struct.pack("<BB", tensor.precision, len(tensor.shape))
    header += struct.pack(f"<{len(tensor.shape)}I", *tensor.shape)
    return header + pack_values(tensor.data, tensor.precision)


def tensor_from_bytes(blob: bytes, *, source: str = "<bytes>") -> Tuple[QuantTensor, int]:
    """Decode one tensor; returns the tensor and the number of bytes consumed."""

    magic = config.TENSOR_MAGIC
    if blob[: len(magic)] != magic:
        raise TensorIOError("FORMAT_ERROR", f"{source}: missing {magic.decode()} magic")
    offset = len(magic)
    try:
        precision, rank = struct.unpack_from("<BB", blob, offset)
        offset += 2
        shape = struct.unpack_from(f"<{rank}I", blob, offset)
        offset += 4 * rank
    except struct.error as exc:
        raise TensorIOError("FORMAT_ERROR", f"{source}: truncated header") from exc
    count = int(np.prod(shape)) if rank else 0
    size = packed_size(count, precision)
    if len(blob) < offset + size:
        raise TensorIOError("FORMAT_ERROR", f"{source}: truncated payload")
    try:
        data = unpack_values(blob[offset : offset + size], precision, count)
        tensor = QuantTensor(shape=tuple(shape), precision=precision, data=data)
    except (WorkloadError, ValueError) as exc:
        raise TensorIOError("FORMAT_ERROR", f"{source}: {exc}") from exc
    return tensor, offset + size


def save_tensor(tensor: QuantTensor, path: PathLike) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(tensor_to_bytes(tensor))
    except OSError as exc:
        raise TensorIOError("IO_ERROR", f"cannot write {target}: {exc}") from exc
    return target


def load_tensor(path: PathLike) -> QuantTensor:
    source = Path(path)
    try:
        blob = source.read_bytes()
    except OSError as exc:
        raise TensorIOError("IO_ERROR", f"cannot read {source}: {exc}") from exc
    tensor, consumed = tensor_from_bytes(blob, source=str(source))
    if consumed != len(blob):
        raise TensorIOError("FORMAT_ERROR", f"{source}: {len(blob) - consumed} trailing bytes")
    return tensor


# --------------------------------------------------------------------------- #
# Workload documents
# --------------------------------------------------------------------------- #


def _read_json(path: Path) -> Dict[str, Any]:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise TensorIOError("IO_ERROR", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise TensorIOError("FORMAT_ERROR", f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise TensorIOError("FORMAT_ERROR", f"{path}: top level must be an object")
    return payload


def load_workload(path: PathLike) -> Workload:
    """Read a workload document; tensor paths resolve relative to the document."""

    doc_path = Path(path)
    payload = _read_json(doc_path)
    base = doc_path.parent
    records = payload.get("layers", [])
    if not isinstance(records, list):
        raise TensorIOError("FORMAT_ERROR", f"{doc_path}: 'layers' must be a list")

    layers: List[Layer] = []
    for position, record in enumerate(records):
        if not isinstance(record, dict):
            raise TensorIOError("FORMAT_ERROR", f"{doc_path}: layer {position} is not an object")
        desc = LayerDescriptor.from_dict(record)
        if not desc.name:
            desc = LayerDescriptor.from_dict({**record, "name": f"layer{position}"})
        weights = load_tensor(base / record["weights"]) if record.get("weights") else None
        svm = None
        if desc.kind == LayerKind.SVM_NORM:
            svm_record = record.get("svm") or {}
            if weights is None:
                raise TensorIOError("FORMAT_ERROR", f"{desc.label}: support vectors file missing")
            svm = SvmModel(
                support_vectors=weights,
                alphas=tuple(svm_record.get("alphas", [])),
                sigma=float(svm_record.get("sigma", 1.0)),
                bias=float(svm_record.get("bias", 0.0)),
                norm=desc.norm,
            )
            weights = None
        layers.append(Layer(desc=desc, weights=weights, svm=svm))

    input_ref = payload.get("input")
    tensor = load_tensor(base / input_ref) if input_ref else None
    workload = Workload(name=str(payload.get("name", doc_path.stem)), input=tensor, layers=tuple(layers))
    logger.info("Loaded workload %s with %d layer(s)", workload.name, len(layers))
    return validate_workload(workload)


def save_workload(workload: Workload, path: PathLike) -> Path:
    """Write the JSON document plus one tensor blob per operand next to it."""

    doc_path = Path(path)
    base = doc_path.parent
    stem = doc_path.stem
    records: List[Dict[str, Any]] = []
    for index, layer in enumerate(workload.layers):
        record = layer.desc.to_dict()
        operand = layer.svm.support_vectors if layer.svm is not None else layer.weights
        if operand is not None:
            name = f"{stem}.w{index}.fxt"
            save_tensor(operand, base / name)
            record["weights"] = name
        if layer.svm is not None:
            record["svm"] = {
                "alphas": list(layer.svm.alphas),
                "sigma": layer.svm.sigma,
                "bias": layer.svm.bias,
            }
        records.append(record)
    payload: Dict[str, Any] = {"name": workload.name, "layers": records}
    if workload.input is not None:
        name = f"{stem}.input.fxt"
        save_tensor(workload.input, base / name)
        payload["input"] = name
    try:
        doc_path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise TensorIOError("IO_ERROR", f"cannot write {doc_path}: {exc}") from exc
    return doc_path


__all__ = [
    "load_tensor",
    "load_workload",
    "pack_values",
    "packed_size",
    "save_tensor",
    "save_workload",
    "tensor_from_bytes",
    "tensor_to_bytes",
    "unpack_values",
]
