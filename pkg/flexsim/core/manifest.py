"""Run manifests embedded in every JSON report."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Union

from flexsim import get_version
from flexsim.core.errors import TensorIOError
from flexsim.core.workload_ir import QuantTensor
from flexsim.utils.digest import file_digest, fnv1a64_hex

PathLike = Union[str, Path]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """What produced a report: tool version, inputs, knobs, operating point and wall-clock span."""

    tool_version: str
    input_digests: Dict[str, str]
    knobs: Dict[str, Any]
    op_point: Dict[str, Any]
    started_at: str = field(default_factory=_now)
    finished_at: Optional[str] = None

    @classmethod
    def start(
        cls,
        *,
        inputs: Optional[Mapping[str, Union[PathLike, bytes]]] = None,
        knobs: Optional[Mapping[str, Any]] = None,
        op_point: Optional[Mapping[str, Any]] = None,
    ) -> "RunManifest":
        digests: Dict[str, str] = {}
        for name, source in (inputs or {}).items():
            if isinstance(source, bytes):
                digests[name] = fnv1a64_hex(source)
                continue
            try:
                digests[name] = file_digest(source)
            except OSError as exc:
                raise TensorIOError("IO_ERROR", f"cannot read {source}: {exc}") from exc
        return cls(
            tool_version=get_version(),
            input_digests=digests,
            knobs=dict(knobs or {}),
            op_point=dict(op_point or {}),
        )

    def finish(self) -> "RunManifest":
        self.finished_at = _now()
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tool_version": self.tool_version,
            "input_digests": dict(sorted(self.input_digests.items())),
            "knobs": dict(sorted(self.knobs.items())),
            "op_point": dict(self.op_point),
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }

    def identity(self) -> Dict[str, Any]:
        """Manifest fields that determine functional results (timestamps dropped)."""
        payload = self.to_dict()
        payload.pop("started_at")
        payload.pop("finished_at")
        return payload


def tensors_digest(tensors: Sequence[QuantTensor]) -> str:
    """Digest over shapes, precisions and values of ``tensors``."""
    blob = bytearray()
    for tensor in tensors:
        blob.extend(json.dumps([list(tensor.shape), tensor.precision]).encode("utf-8"))
        blob.extend(tensor.data.astype("<i8").tobytes())
    return fnv1a64_hex(bytes(blob))


def embed(report: Mapping[str, Any], manifest: RunManifest) -> Dict[str, Any]:
    if manifest.finished_at is None:
        manifest.finish()
    return {"manifest": manifest.to_dict(), **report}


def dump_report(payload: Mapping[str, Any]) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, default=str)


def write_report(payload: Mapping[str, Any], path: PathLike) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(dump_report(payload) + "\n", encoding="utf-8")
    except OSError as exc:
        raise TensorIOError("IO_ERROR", f"cannot write {target}: {exc}") from exc
    return target


__all__ = ["RunManifest", "dump_report", "embed", "tensors_digest", "write_report"]
