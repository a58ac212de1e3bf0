"""Image (``.fxi``) and golden bundle (``.fxb``) files.

Both share one container: an 8-byte magic, a ``u32`` section count, a table of
``(tag[8], offset u32, length u32)`` entries, then the section payloads.
Everything is little-endian. Structured sections hold UTF-8 JSON.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np

from flexsim import config
from flexsim.core.compiler import DmaDescriptor, MemoryImage, Symbol
from flexsim.core.errors import FlexsimError, TensorIOError
from flexsim.core.oracle import GoldenBundle
from flexsim.core.tensor_io import tensor_from_bytes, tensor_to_bytes
from flexsim.core.workload_ir import LayerDescriptor, QuantTensor

PathLike = Union[str, Path]

_ENTRY = struct.Struct("<8sII")


# --------------------------------------------------------------------------- #
# Container
# --------------------------------------------------------------------------- #


def _pack_sections(magic: bytes, sections: List[Tuple[str, bytes]]) -> bytes:
    header_size = len(magic) + 4 + _ENTRY.size * len(sections)
    table = bytearray()
    offset = header_size
    for tag, payload in sections:
        table += _ENTRY.pack(tag.encode("ascii").ljust(8, b"\x00"), offset, len(payload))
        offset += len(payload)
    body = b"".join(payload for _, payload in sections)
    return magic + struct.pack("<I", len(sections)) + bytes(table) + body


def _unpack_sections(blob: bytes, magic: bytes, source: str) -> Dict[str, bytes]:
    if blob[: len(magic)] != magic:
        raise TensorIOError("FORMAT_ERROR", f"{source}: missing {magic.decode()} magic")
    try:
        (count,) = struct.unpack_from("<I", blob, len(magic))
        sections: Dict[str, bytes] = {}
        for index in range(count):
            raw_tag, offset, length = _ENTRY.unpack_from(blob, len(magic) + 4 + index * _ENTRY.size)
            if offset + length > len(blob):
                raise TensorIOError("FORMAT_ERROR", f"{source}: section {index} runs past the end of file")
            sections[raw_tag.rstrip(b"\x00").decode("ascii")] = blob[offset : offset + length]
    except (struct.error, UnicodeDecodeError) as exc:
        raise TensorIOError("FORMAT_ERROR", f"{source}: corrupt section table") from exc
    return sections


def _json_section(sections: Dict[str, bytes], tag: str, source: str) -> Any:
    if tag not in sections:
        raise TensorIOError("FORMAT_ERROR", f"{source}: missing section {tag}")
    try:
        return json.loads(sections[tag].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TensorIOError("FORMAT_ERROR", f"{source}: section {tag} is not valid JSON") from exc


def _dump(payload: Any) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _write(path: PathLike, blob: bytes) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(blob)
    except OSError as exc:
        raise TensorIOError("IO_ERROR", f"cannot write {target}: {exc}") from exc
    return target


def _read(path: PathLike) -> bytes:
    source = Path(path)
    try:
        return source.read_bytes()
    except OSError as exc:
        raise TensorIOError("IO_ERROR", f"cannot read {source}: {exc}") from exc


# --------------------------------------------------------------------------- #
# Memory images
# --------------------------------------------------------------------------- #


def image_to_bytes(image: MemoryImage) -> bytes:
    sections = [
        ("INSTR", image.instructions),
        ("INDEX", np.asarray(image.index_words, dtype="<u4").tobytes()),
        ("L2", image.l2_init),
        ("SYMBOLS", _dump([symbol.to_dict() for symbol in image.symbols.values()])),
        ("DMA", _dump([descriptor.to_dict() for descriptor in image.dma])),
        ("META", _dump(image.meta)),
    ]
    return _pack_sections(config.IMAGE_MAGIC, sections)


def image_from_bytes(blob: bytes, *, source: str = "<bytes>") -> MemoryImage:
    sections = _unpack_sections(blob, config.IMAGE_MAGIC, source)
    for tag in ("INSTR", "INDEX", "L2"):
        if tag not in sections:
            raise TensorIOError("FORMAT_ERROR", f"{source}: missing section {tag}")
    if len(sections["INDEX"]) % 4 or len(sections["INSTR"]) % config.UCODE_BYTES:
        raise TensorIOError("FORMAT_ERROR", f"{source}: truncated instruction or index section")
    try:
        symbols = [Symbol.from_dict(item) for item in _json_section(sections, "SYMBOLS", source)]
        dma = [DmaDescriptor.from_dict(item) for item in _json_section(sections, "DMA", source)]
    except (KeyError, TypeError, ValueError) as exc:
        raise TensorIOError("FORMAT_ERROR", f"{source}: malformed symbol or DMA record ({exc})") from exc
    return MemoryImage(
        instructions=sections["INSTR"],
        index_words=[int(word) for word in np.frombuffer(sections["INDEX"], dtype="<u4")],
        l2_init=sections["L2"],
        symbols={symbol.name: symbol for symbol in symbols},
        dma=dma,
        meta=_json_section(sections, "META", source),
    )


def save_image(image: MemoryImage, path: PathLike) -> Path:
    return _write(path, image_to_bytes(image))


def load_image(path: PathLike) -> MemoryImage:
    return image_from_bytes(_read(path), source=str(path))


# --------------------------------------------------------------------------- #
# Golden bundles
# --------------------------------------------------------------------------- #


def _tensors_blob(tensors: List[QuantTensor]) -> bytes:
    return b"".join(tensor_to_bytes(tensor) for tensor in tensors)


def _tensors_from_blob(blob: bytes, source: str) -> List[QuantTensor]:
    tensors: List[QuantTensor] = []
    offset = 0
    while offset < len(blob):
        tensor, consumed = tensor_from_bytes(blob[offset:], source=source)
        tensors.append(tensor)
        offset += consumed
    return tensors


def bundle_to_bytes(bundle: GoldenBundle) -> bytes:
    sections = [
        ("INPUTS", _tensors_blob(bundle.inputs)),
        ("OUTPUTS", _tensors_blob(bundle.expected_outputs)),
        ("LAYERS", _dump([desc.to_dict() for desc in bundle.layers])),
    ]
    return _pack_sections(config.BUNDLE_MAGIC, sections)


def bundle_from_bytes(blob: bytes, *, source: str = "<bytes>") -> GoldenBundle:
    sections = _unpack_sections(blob, config.BUNDLE_MAGIC, source)
    try:
        layers = [LayerDescriptor.from_dict(item) for item in _json_section(sections, "LAYERS", source)]
    except FlexsimError as exc:
        raise TensorIOError("FORMAT_ERROR", f"{source}: {exc.message}") from exc
    return GoldenBundle(
        inputs=_tensors_from_blob(sections.get("INPUTS", b""), source),
        expected_outputs=_tensors_from_blob(sections.get("OUTPUTS", b""), source),
        layers=layers,
    )


def save_bundle(bundle: GoldenBundle, path: PathLike) -> Path:
    return _write(path, bundle_to_bytes(bundle))


def load_bundle(path: PathLike) -> GoldenBundle:
    return bundle_from_bytes(_read(path), source=str(path))


__all__ = [
    "bundle_from_bytes",
    "bundle_to_bytes",
    "image_from_bytes",
    "image_to_bytes",
    "load_bundle",
    "load_image",
    "save_bundle",
    "save_image",
]
