"""FNV-1a digests used to fingerprint tensors and input files in reports."""

from __future__ import annotations

from pathlib import Path
from typing import Union

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    value = FNV64_OFFSET
    for byte in data:
        value ^= byte
        value = (value * FNV64_PRIME) & _MASK64
    return value


def fnv1a64_hex(data: bytes) -> str:
    return f"{fnv1a64(data):016x}"


def file_digest(path: Union[str, Path]) -> str:
    return fnv1a64_hex(Path(path).read_bytes())


__all__ = ["fnv1a64", "fnv1a64_hex", "file_digest", "FNV64_OFFSET", "FNV64_PRIME"]
