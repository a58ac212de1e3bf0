"""256-bit layer-wise instruction word.

Field layout (bit offsets, little-endian word)::

      0-3   kind code           4-5   dataflow (0 OXK, 1 CK, 2 pool)
      8-9   precision code     10-12  activation
     13     sparsity enable    14-15  upsample - 1
     16-20  requant shift      21     zero-shuffle
     22     accumulator clear  23     accumulator final
     24     L2 norm            25     layer start
     26-31  batch - 1
     32-127 C, K, OX, OY, FX, FY (16 bits each)
    128-131 stride            132-143 dilation
    144-223 weight / act-in / act-out / index base addresses (20 bits each)
    224-231 pad x             232-239 pad y
    240-255 tile id
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Dict, List, Tuple

from flexsim import config
from flexsim.core.errors import CompileError, SimulationError
from flexsim.core.workload_ir import Activation, LayerKind

KIND_CODES: Dict[LayerKind, int] = {
    LayerKind.CONV2D: 1,
    LayerKind.CONV1D_DILATED: 2,
    LayerKind.DECONV2D: 3,
    LayerKind.DENSE: 4,
    LayerKind.RNN_STEP: 5,
    LayerKind.SVM_NORM: 6,
    LayerKind.MAXPOOL: 7,
}
KINDS_BY_CODE = {code: kind for kind, code in KIND_CODES.items()}

DATAFLOW_OXK = 0
DATAFLOW_CK = 1
DATAFLOW_POOL = 2

PRECISION_CODES = {8: 0, 4: 1, 2: 2}
PRECISIONS_BY_CODE = {code: bits for bits, code in PRECISION_CODES.items()}

ACTIVATION_CODES = {
    Activation.NONE: 0,
    Activation.RELU: 1,
    Activation.TANH: 2,
    Activation.SIGMOID: 3,
}
ACTIVATIONS_BY_CODE = {code: act for act, code in ACTIVATION_CODES.items()}

# name -> (offset, width)
FIELDS: Dict[str, Tuple[int, int]] = {
    "kind": (0, 4),
    "dataflow": (4, 2),
    "precision": (8, 2),
    "activation": (10, 3),
    "sparsity": (13, 1),
    "upsample": (14, 2),
    "requant_shift": (16, 5),
    "zero_shuffle": (21, 1),
    "acc_clear": (22, 1),
    "acc_final": (23, 1),
    "norm_l2": (24, 1),
    "layer_start": (25, 1),
    "batch": (26, 6),
    "C": (32, 16),
    "K": (48, 16),
    "OX": (64, 16),
    "OY": (80, 16),
    "FX": (96, 16),
    "FY": (112, 16),
    "stride": (128, 4),
    "dilation": (132, 12),
    "addr_weights": (144, 20),
    "addr_act_in": (164, 20),
    "addr_act_out": (184, 20),
    "addr_index": (204, 20),
    "pad_x": (224, 8),
    "pad_y": (232, 8),
    "tile_id": (240, 16),
}
ADDRESS_FIELDS = ("addr_weights", "addr_act_in", "addr_act_out", "addr_index")
# stored as value - 1
MINUS_ONE_FIELDS = ("upsample", "batch")
FLAG_FIELDS = ("sparsity", "zero_shuffle", "acc_clear", "acc_final", "norm_l2", "layer_start")


@dataclass(frozen=True)
class UcodeInstruction:
    kind: LayerKind
    dataflow: int
    precision: int
    activation: Activation
    C: int
    K: int
    OX: int
    OY: int
    FX: int
    FY: int
    stride: int = 1
    dilation: int = 1
    upsample: int = 1
    batch: int = 1
    pad_x: int = 0
    pad_y: int = 0
    sparsity: bool = False
    requant_shift: int = 0
    zero_shuffle: bool = False
    acc_clear: bool = True
    acc_final: bool = True
    norm_l2: bool = False
    layer_start: bool = False
    addr_weights: int = 0
    addr_act_in: int = 0
    addr_act_out: int = 0
    addr_index: int = 0
    tile_id: int = 0

    def field_values(self) -> Dict[str, int]:
        values = asdict(self)
        values["kind"] = KIND_CODES[LayerKind(self.kind)]
        values["precision"] = PRECISION_CODES.get(self.precision, -1)
        values["activation"] = ACTIVATION_CODES[Activation(self.activation)]
        for name in MINUS_ONE_FIELDS:
            values[name] -= 1
        return {name: int(values[name]) for name in FIELDS}


def pack(instr: UcodeInstruction) -> int:
    """Encode ``instr`` into a 256-bit integer; out-of-range fields are rejected."""

    word = 0
    for name, value in instr.field_values().items():
        offset, width = FIELDS[name]
        if not 0 <= value < (1 << width):
            code = "ADDRESS_OVERFLOW" if name in ADDRESS_FIELDS else "FIELD_OVERFLOW"
            raise CompileError(code, f"ucode field {name}={value} does not fit {width} bits")
        word |= value << offset
    return word


def unpack(word: int) -> UcodeInstruction:
    """Decode a 256-bit word; unknown codes raise ``DECODE_ERROR``."""

    if not 0 <= word < (1 << config.UCODE_BITS):
        raise SimulationError("DECODE_ERROR", "instruction word exceeds 256 bits")
    raw = {name: (word >> offset) & ((1 << width) - 1) for name, (offset, width) in FIELDS.items()}
    try:
        kind = KINDS_BY_CODE[raw["kind"]]
        precision = PRECISIONS_BY_CODE[raw["precision"]]
        activation = ACTIVATIONS_BY_CODE[raw["activation"]]
    except KeyError as exc:
        raise SimulationError("DECODE_ERROR", f"invalid opcode field in word {word:#066x}") from exc
    if raw["dataflow"] > DATAFLOW_POOL:
        raise SimulationError("DECODE_ERROR", f"invalid dataflow code {raw['dataflow']}")
    for name in MINUS_ONE_FIELDS:
        raw[name] += 1
    for name in FLAG_FIELDS:
        raw[name] = bool(raw[name])
    raw.update(kind=kind, precision=precision, activation=activation)
    return UcodeInstruction(**raw)


def to_bytes(word: int) -> bytes:
    return word.to_bytes(config.UCODE_BYTES, "little")


def from_bytes(blob: bytes) -> int:
    if len(blob) != config.UCODE_BYTES:
        raise SimulationError("DECODE_ERROR", f"instruction must be {config.UCODE_BYTES} bytes")
    return int.from_bytes(blob, "little")


def pack_program(instructions: List[UcodeInstruction]) -> bytes:
    return b"".join(to_bytes(pack(instr)) for instr in instructions)


def unpack_program(blob: bytes) -> List[UcodeInstruction]:
    size = config.UCODE_BYTES
    if len(blob) % size:
        raise SimulationError("DECODE_ERROR", "instruction memory is not a whole number of words")
    return [unpack(from_bytes(blob[i : i + size])) for i in range(0, len(blob), size)]


__all__ = [
    "ACTIVATION_CODES",
    "DATAFLOW_CK",
    "DATAFLOW_OXK",
    "DATAFLOW_POOL",
    "FIELDS",
    "KIND_CODES",
    "PRECISION_CODES",
    "UcodeInstruction",
    "from_bytes",
    "pack",
    "pack_program",
    "to_bytes",
    "unpack",
    "unpack_program",
]
