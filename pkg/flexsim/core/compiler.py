"""Layer-to-ucode compiler: dataflow selection, L1 tiling, DMA planning and image linking."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from flexsim import config
from flexsim.core.errors import CompileError
from flexsim.core.oracle import GoldenBundle, golden_bundle
from flexsim.core.tensor_io import pack_values, packed_size
from flexsim.core.ucode import (
    DATAFLOW_CK,
    DATAFLOW_OXK,
    DATAFLOW_POOL,
    UcodeInstruction,
    pack,
    pack_program,
)
from flexsim.core.workload_ir import (
    Dataflow,
    Layer,
    LayerDescriptor,
    LayerKind,
    Norm,
    QuantTensor,
    SparsityIndexMap,
    Workload,
    apply_block_sparsity,
    blocks_for,
    ceil_div,
    layer_weights,
    validate_layer,
    validate_workload,
)
from flexsim.utils.logger import logger

Box = Tuple[Tuple[int, int], ...]

SPACE_WEIGHT = "weight"
SPACE_ACT = "act"
DIR_IN = "in"
DIR_OUT = "out"

L2_ALIGN = 8
L1_ALIGN = 4
BATCH_FIELD_MAX = 64


@dataclass(frozen=True)
class MemConfig:
    l1_bank_bytes: int = config.L1_BANK_BYTES
    l2_bytes: int = config.L2_BYTES
    instr_mem_bytes: int = config.DEFAULT_INSTR_MEM_BYTES
    index_mem_words: int = 1024


@dataclass(frozen=True)
class DmaDescriptor:
    """One L2 <-> L1 transfer of an N-D box of a named tensor."""

    symbol: str
    box: Box
    space: str
    bank: int
    l1_offset: int
    direction: str
    nbytes: int
    tile_id: int = 0

    @property
    def l1_address(self) -> int:
        return self.bank * config.L1_BANK_BYTES + self.l1_offset

    def to_dict(self) -> Dict[str, Any]:
        return {
            "symbol": self.symbol,
            "box": [list(axis) for axis in self.box],
            "space": self.space,
            "bank": self.bank,
            "l1_offset": self.l1_offset,
            "direction": self.direction,
            "nbytes": self.nbytes,
            "tile_id": self.tile_id,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "DmaDescriptor":
        return cls(
            symbol=payload["symbol"],
            box=tuple((int(a), int(b)) for a, b in payload["box"]),
            space=payload["space"],
            bank=int(payload["bank"]),
            l1_offset=int(payload["l1_offset"]),
            direction=payload["direction"],
            nbytes=int(payload["nbytes"]),
            tile_id=int(payload.get("tile_id", 0)),
        )


@dataclass(frozen=True)
class Tile:
    """Operand sub-ranges of one instruction; ranges are half-open."""

    index: int
    k: Tuple[int, int]
    c: Tuple[int, int]
    oy: Tuple[int, int] = (0, 1)
    b: Tuple[int, int] = (0, 1)
    bank: int = 0
    acc_clear: bool = True
    acc_final: bool = True
    weight_bytes: int = 0
    input_bytes: int = 0
    output_bytes: int = 0
    dma: Tuple[DmaDescriptor, ...] = ()

    @property
    def origin(self) -> Dict[str, int]:
        return {"k0": self.k[0], "c0": self.c[0], "oy0": self.oy[0], "b0": self.b[0]}


@dataclass(frozen=True)
class TileSchedule:
    desc: LayerDescriptor
    tiles: Tuple[Tile, ...]
    ox_par: int = config.ARRAY_COLS
    tap_split: bool = False


@dataclass(frozen=True)
class TileSymbols:
    weights: str = "weights"
    input: str = "input"
    output: str = "output"


# --------------------------------------------------------------------------- #
# Dataflow and FIFO
# --------------------------------------------------------------------------- #


def select_dataflow(desc: LayerDescriptor) -> Dataflow:
    if desc.dataflow is None:
        raise CompileError("UNSUPPORTED_KIND", f"{desc.label}: {desc.kind.value} runs on the pooling unit")
    return desc.dataflow


def fifo_span(stride: int, dilation: int, taps: int, ox_par: int = config.ARRAY_COLS) -> int:
    """Input words the L0 FIFO must hold for ``ox_par`` neighbouring outputs."""
    return (ox_par - 1) * stride + (taps - 1) * dilation + 1


def check_fifo_feasible(desc: LayerDescriptor) -> bool:
    return fifo_span(desc.stride, desc.dilation, desc.FX) <= config.FIFO_ENTRIES


def plan_fifo(stride: int, dilation: int, FX: int) -> Tuple[int, bool]:
    """(OX parallelism, tap split) for a filter row; tap split feeds one tap per FIFO pass."""
    for taps, split in ((FX, False), (1, True)):
        for ox_par in range(config.ARRAY_COLS, 0, -1):
            if fifo_span(stride, dilation, taps, ox_par) <= config.FIFO_ENTRIES:
                return ox_par, split
    raise CompileError("UNTILEABLE", f"stride {stride} exceeds the FIFO")


def fifo_plan(desc: LayerDescriptor) -> Tuple[int, bool]:
    return plan_fifo(desc.stride, desc.dilation, desc.FX)


# --------------------------------------------------------------------------- #
# Tiling
# --------------------------------------------------------------------------- #


def input_rows(desc: LayerDescriptor, oy0: int, oy1: int) -> Tuple[int, int]:
    """Input rows (un-stuffed, un-padded) read by output rows ``[oy0, oy1)``."""
    if not desc.is_2d:
        return 0, 1
    pad_y = desc.padding[0]
    u = desc.upsample
    first = oy0 * desc.stride - pad_y
    last = (oy1 - 1) * desc.stride + (desc.FY - 1) * desc.dilation - pad_y
    first = max(first, 0)
    last = min(last, desc.stuffed_extent(desc.input_y) - 1)
    if last < first:
        return 0, 0
    r0 = ceil_div(first, u)
    r1 = last // u + 1
    return (r0, r1) if r1 > r0 else (r0, r0)


def _shrink_k(kt: int) -> int:
    block = config.SPARSITY_BLOCK
    smaller = max(block, ceil_div(ceil_div(kt, 2), block) * block)
    return smaller if smaller < kt else kt - block


def _split(total: int, step: int) -> List[Tuple[int, int]]:
    return [(start, min(start + step, total)) for start in range(0, total, step)]


def _align(value: int, alignment: int) -> int:
    return ceil_div(value, alignment) * alignment


class _Tiler:
    def __init__(self, desc: LayerDescriptor, mem: MemConfig) -> None:
        self.desc = desc
        self.mem = mem
        self.bank = mem.l1_bank_bytes

    def weight_bytes(self, kt: int, ct: int) -> int:
        d = self.desc
        if d.weight_shape is None:
            return 0
        return packed_size(kt * ct * d.FY * d.FX, d.precision)

    def out_bits(self, c_split: bool) -> int:
        d = self.desc
        return config.ACC_PRECISION if c_split or d.kind == LayerKind.SVM_NORM else d.precision

    def act_bytes(self, kt: int, ct: int, yt: int, c_split: bool) -> int:
        d = self.desc
        out_bits = self.out_bits(c_split)
        if d.dataflow == Dataflow.CK:
            return _align(packed_size(yt * ct, d.precision), L1_ALIGN) + packed_size(yt * kt, out_bits)
        worst_rows = max(
            (r1 - r0 for r0, r1 in (input_rows(d, a, b) for a, b in _split(d.OY, yt))), default=0
        )
        channels_out = ct if d.kind == LayerKind.MAXPOOL else kt
        inp = packed_size(ct * worst_rows * d.input_x, d.precision)
        out = packed_size(channels_out * yt * d.OX, out_bits)
        return _align(inp, L1_ALIGN) + out

    def plan(self) -> Tuple[int, int, int]:
        """Tile extents (kt, ct, yt); ``yt`` tiles OY (OXK, pool) or batch (CK)."""
        d = self.desc
        pooling = d.kind == LayerKind.MAXPOOL
        kt = d.K
        ct = d.C
        yt = min(d.batch, BATCH_FIELD_MAX) if d.dataflow == Dataflow.CK else d.OY

        while self.weight_bytes(kt, ct) > self.bank:
            if kt > config.SPARSITY_BLOCK:
                kt = _shrink_k(kt)
            elif ct > 1:
                ct = ceil_div(ct, 2)
            else:
                raise CompileError("UNTILEABLE", f"{d.label}: a single filter row exceeds a weight bank")

        while self.act_bytes(kt, ct, yt, ct < d.C) > self.bank:
            if yt > 1:
                yt = ceil_div(yt, 2)
            elif ct > 1:
                ct = ceil_div(ct, 2)
                if pooling:
                    kt = ct
            elif kt > config.SPARSITY_BLOCK and not pooling:
                kt = _shrink_k(kt)
            else:
                raise CompileError("UNTILEABLE", f"{d.label}: activations exceed an L1 bank")
        if pooling:
            kt = ct
        return kt, ct, yt


def tile(
    desc: LayerDescriptor,
    mem_config: Optional[MemConfig] = None,
    *,
    symbols: TileSymbols = TileSymbols(),
    first_index: int = 0,
    resident: Optional[Dict[Tuple[str, int], Tuple[str, Box]]] = None,
) -> TileSchedule:
    """Partition a layer into bank-sized tiles, K outer and C inner, with ping-pong banks.

    ``resident`` maps (space, bank) to the (symbol, box) currently held and is
    updated in place; weight transfers already resident are omitted.
    """

    validate_layer(desc)
    mem = mem_config or MemConfig()
    tiler = _Tiler(desc, mem)
    kt, ct, yt = tiler.plan()
    c_split = ct < desc.C
    resident = resident if resident is not None else {}
    pooling = desc.kind == LayerKind.MAXPOOL
    ck = desc.dataflow == Dataflow.CK

    k_ranges = _split(desc.C if pooling else desc.K, kt)
    y_ranges = _split(desc.batch if ck else desc.OY, yt)

    tiles: List[Tile] = []
    index = first_index
    for k_range in k_ranges:
        c_ranges = [k_range] if pooling else _split(desc.C, ct)
        for y_range in y_ranges:
            for position, c_range in enumerate(c_ranges):
                bank = index % 2
                final = position == len(c_ranges) - 1
                dma: List[DmaDescriptor] = []

                w_bytes = 0
                if desc.weight_shape is not None:
                    w_box: Box = (k_range, c_range) + tuple((0, e) for e in desc.weight_shape[2:])
                    w_bytes = tiler.weight_bytes(k_range[1] - k_range[0], c_range[1] - c_range[0])
                    key = (SPACE_WEIGHT, bank)
                    if resident.get(key) != (symbols.weights, w_box):
                        dma.append(
                            DmaDescriptor(
                                symbols.weights, w_box, SPACE_WEIGHT, bank, 0, DIR_IN, w_bytes, index
                            )
                        )
                        resident[key] = (symbols.weights, w_box)
                    else:
                        logger.debug(
                            "%s tile %d: weights already resident in bank %d", desc.label, index, bank
                        )

                in_box, in_count = _input_box(desc, c_range, y_range)
                in_bytes = packed_size(in_count, desc.precision)
                dma.append(
                    DmaDescriptor(symbols.input, in_box, SPACE_ACT, bank, 0, DIR_IN, in_bytes, index)
                )
                resident[(SPACE_ACT, bank)] = (symbols.input, in_box)

                out_box, out_count = _output_box(desc, k_range, y_range)
                out_offset = _align(in_bytes, L1_ALIGN)
                if final:
                    final_bytes = packed_size(out_count, desc.output_precision)
                    dma.append(
                        DmaDescriptor(
                            symbols.output, out_box, SPACE_ACT, bank, out_offset, DIR_OUT, final_bytes, index
                        )
                    )
                tiles.append(
                    Tile(
                        index=index,
                        k=k_range,
                        c=c_range,
                        oy=(0, 1) if ck else y_range,
                        b=y_range if ck else (0, 1),
                        bank=bank,
                        acc_clear=position == 0,
                        acc_final=final,
                        weight_bytes=w_bytes,
                        input_bytes=in_bytes,
                        output_bytes=packed_size(out_count, tiler.out_bits(c_split)),
                        dma=tuple(dma),
                    )
                )
                index += 1

    ox_par, tap_split = fifo_plan(desc) if desc.dataflow == Dataflow.OXK else (config.ARRAY_COLS, False)
    logger.debug(
        "%s: %d tile(s) kt=%d ct=%d yt=%d ox_par=%d tap_split=%s",
        desc.label,
        len(tiles),
        kt,
        ct,
        yt,
        ox_par,
        tap_split,
    )
    return TileSchedule(desc=desc, tiles=tuple(tiles), ox_par=ox_par, tap_split=tap_split)


def _input_box(desc: LayerDescriptor, c_range: Tuple[int, int], y_range: Tuple[int, int]) -> Tuple[Box, int]:
    if desc.dataflow == Dataflow.CK:
        box: Box = (y_range, c_range)
    elif desc.kind == LayerKind.CONV1D_DILATED:
        box = (c_range, (0, desc.input_x))
    else:
        box = (c_range, input_rows(desc, *y_range), (0, desc.input_x))
    return box, int(np.prod([b - a for a, b in box]))


def _output_box(desc: LayerDescriptor, k_range: Tuple[int, int], y_range: Tuple[int, int]) -> Tuple[Box, int]:
    if desc.dataflow == Dataflow.CK:
        box: Box = (y_range, k_range)
    elif desc.kind == LayerKind.CONV1D_DILATED:
        box = (k_range, (0, desc.OX))
    else:
        box = (k_range, y_range, (0, desc.OX))
    return box, int(np.prod([b - a for a, b in box]))


# --------------------------------------------------------------------------- #
# Instructions and index memory
# --------------------------------------------------------------------------- #


def _dataflow_code(desc: LayerDescriptor) -> int:
    if desc.kind == LayerKind.MAXPOOL:
        return DATAFLOW_POOL
    return DATAFLOW_OXK if desc.dataflow == Dataflow.OXK else DATAFLOW_CK


def emit_ucode(
    desc: LayerDescriptor, schedule: TileSchedule, *, index_base: int = 0
) -> List[UcodeInstruction]:
    """One instruction per tile, in schedule order."""

    pad_y, pad_x = desc.padding
    instructions: List[UcodeInstruction] = []
    for position, t in enumerate(schedule.tiles):
        out_dma = [d for d in t.dma if d.direction == DIR_OUT]
        out_offset = out_dma[0].l1_offset if out_dma else _align(t.input_bytes, L1_ALIGN)
        act_base = t.bank * config.L1_BANK_BYTES
        instr = UcodeInstruction(
            kind=desc.kind,
            dataflow=_dataflow_code(desc),
            precision=desc.precision,
            activation=desc.activation,
            C=t.c[1] - t.c[0],
            K=t.k[1] - t.k[0],
            OX=desc.OX,
            OY=t.oy[1] - t.oy[0],
            FX=desc.FX,
            FY=desc.FY,
            stride=desc.stride,
            dilation=desc.dilation,
            upsample=desc.upsample,
            batch=t.b[1] - t.b[0],
            pad_x=pad_x,
            pad_y=pad_y,
            sparsity=desc.sparsity is not None,
            requant_shift=desc.requant_shift,
            zero_shuffle=desc.kind == LayerKind.DECONV2D and desc.upsample > 1,
            acc_clear=t.acc_clear,
            acc_final=t.acc_final,
            norm_l2=desc.kind == LayerKind.SVM_NORM and desc.norm == Norm.L2,
            layer_start=position == 0,
            addr_weights=t.bank * config.L1_BANK_BYTES,
            addr_act_in=act_base,
            addr_act_out=act_base + out_offset,
            addr_index=index_base if desc.sparsity is not None else 0,
            tile_id=t.index,
        )
        pack(instr)  # field range check
        instructions.append(instr)
    return instructions


def index_words_per_block(C: int) -> int:
    return ceil_div(C, config.INDEX_WORD_BITS)


def pack_sparsity_indices(sparsity: SparsityIndexMap) -> List[int]:
    """Per filter block, C bits little-endian in 32-bit words (bit c%32 of word c//32)."""
    per_block = index_words_per_block(sparsity.channels)
    words = [0] * (sparsity.blocks * per_block)
    for block in range(sparsity.blocks):
        for channel in np.flatnonzero(sparsity.bits[block]):
            word = block * per_block + int(channel) // config.INDEX_WORD_BITS
            words[word] |= 1 << (int(channel) % config.INDEX_WORD_BITS)
    return words


def unpack_sparsity_indices(words: Sequence[int], K: int, C: int) -> SparsityIndexMap:
    per_block = index_words_per_block(C)
    blocks = blocks_for(K)
    if len(words) < blocks * per_block:
        raise CompileError("INDEX_UNDERFLOW", f"{len(words)} index words for {blocks} block(s) of {C} channels")
    bits = np.zeros((blocks, C), dtype=bool)
    for block in range(blocks):
        for channel in range(C):
            word = words[block * per_block + channel // config.INDEX_WORD_BITS]
            bits[block, channel] = bool((word >> (channel % config.INDEX_WORD_BITS)) & 1)
    return SparsityIndexMap(bits=bits)


# --------------------------------------------------------------------------- #
# Linking
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class Symbol:
    name: str
    offset: int
    nbytes: int
    shape: Tuple[int, ...]
    precision: int
    alias_of: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "offset": self.offset,
            "nbytes": self.nbytes,
            "shape": list(self.shape),
            "precision": self.precision,
            "alias_of": self.alias_of,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "Symbol":
        return cls(
            name=payload["name"],
            offset=int(payload["offset"]),
            nbytes=int(payload["nbytes"]),
            shape=tuple(int(e) for e in payload["shape"]),
            precision=int(payload["precision"]),
            alias_of=payload.get("alias_of"),
        )


@dataclass
class MemoryImage:
    """Compiled program: instruction, index and L2 memory contents plus the symbol table."""

    instructions: bytes = b""
    index_words: List[int] = field(default_factory=list)
    l2_init: bytes = b""
    symbols: Dict[str, Symbol] = field(default_factory=dict)
    dma: List[DmaDescriptor] = field(default_factory=list)
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def instruction_count(self) -> int:
        return len(self.instructions) // config.UCODE_BYTES

    @property
    def l2_used(self) -> int:
        return len(self.l2_init)


class _L2Allocator:
    def __init__(self, capacity: int) -> None:
        self.capacity = capacity
        self.cursor = 0
        self.buffer = bytearray()
        self.symbols: Dict[str, Symbol] = {}

    def place(
        self, name: str, shape: Tuple[int, ...], precision: int, data: Optional[np.ndarray] = None
    ) -> Symbol:
        nbytes = packed_size(int(np.prod(shape)), precision)
        offset = _align(self.cursor, L2_ALIGN)
        if offset + nbytes > self.capacity:
            raise CompileError(
                "L2_OVERFLOW",
                f"tensor {name} ({nbytes} B) does not fit: {offset} of {self.capacity} B already used",
            )
        self.buffer.extend(b"\x00" * (offset + nbytes - len(self.buffer)))
        if data is not None:
            self.buffer[offset : offset + nbytes] = pack_values(data, precision)
        self.cursor = offset + nbytes
        symbol = Symbol(name, offset, nbytes, tuple(shape), precision)
        self.symbols[name] = symbol
        return symbol

    def alias(self, name: str, target: Symbol, shape: Tuple[int, ...]) -> Symbol:
        symbol = Symbol(name, target.offset, target.nbytes, tuple(shape), target.precision, target.name)
        self.symbols[name] = symbol
        return symbol


def sparsify_workload(workload: Workload) -> Workload:
    """Zero pruned weight slices so skipped channels contribute nothing in the golden model too."""
    layers = []
    for layer in workload.layers:
        if layer.desc.sparsity is not None and layer.weights is not None:
            weights = apply_block_sparsity(layer.weights, layer.desc.sparsity)
            layer = Layer(desc=layer.desc, weights=weights, svm=layer.svm)
        layers.append(layer)
    return Workload(name=workload.name, input=workload.input, layers=tuple(layers))


def link_program(
    workload: Workload, mem_config: Optional[MemConfig] = None
) -> Tuple[MemoryImage, GoldenBundle]:
    """Compile a layer chain into a memory image and its golden bundle."""

    mem = mem_config or MemConfig()
    validate_workload(workload)
    if not workload.layers:
        return MemoryImage(meta={"name": workload.name, "layers": [], "tiles": []}), GoldenBundle()

    workload = sparsify_workload(workload)
    l2 = _L2Allocator(mem.l2_bytes)
    assert workload.input is not None
    current = l2.place("input", workload.input.shape, workload.input.precision, workload.input.data)

    instructions: List[UcodeInstruction] = []
    dma: List[DmaDescriptor] = []
    index_words: List[int] = []
    tiles_meta: List[Dict[str, Any]] = []
    layers_meta: List[Dict[str, Any]] = []
    resident: Dict[Tuple[str, int], Tuple[str, Box]] = {}

    for position, layer in enumerate(workload.layers):
        desc = layer.desc
        label = desc.name or f"layer{position}"
        if current.shape != desc.input_shape:
            current = l2.alias(f"{label}.in", current, desc.input_shape)
        weights = layer_weights(layer)
        w_name = f"{label}.weights"
        if weights is not None:
            l2.place(w_name, weights.shape, weights.precision, weights.data)
        out = l2.place(f"{label}.out", desc.output_shape, desc.output_precision)

        index_base = len(index_words)
        if desc.sparsity is not None:
            index_words.extend(pack_sparsity_indices(desc.sparsity))
            if len(index_words) > mem.index_mem_words:
                raise CompileError("INDEX_OVERFLOW", f"{label}: sparsity indices exceed the index memory")

        schedule = tile(
            desc,
            mem,
            symbols=TileSymbols(weights=w_name, input=current.name, output=out.name),
            first_index=len(instructions),
            resident=resident,
        )
        layer_instrs = emit_ucode(desc, schedule, index_base=index_base)
        instructions.extend(layer_instrs)
        for t in schedule.tiles:
            dma.extend(t.dma)
            tiles_meta.append({"layer": position, **t.origin})
        record: Dict[str, Any] = {
            "name": label,
            "desc": desc.to_dict(),
            "input": current.name,
            "weights": w_name if weights is not None else None,
            "output": out.name,
            "ox_par": schedule.ox_par,
            "tap_split": schedule.tap_split,
        }
        if layer.svm is not None:
            record["svm"] = {
                "alphas": list(layer.svm.alphas),
                "sigma": layer.svm.sigma,
                "bias": layer.svm.bias,
                "norm": layer.svm.norm.value,
            }
        layers_meta.append(record)
        current = out

    program_bytes = len(instructions) * config.UCODE_BYTES
    if program_bytes > mem.instr_mem_bytes:
        raise CompileError(
            "INSTR_MEM_OVERFLOW",
            f"{len(instructions)} instructions need {program_bytes} B, "
            f"instruction memory holds {mem.instr_mem_bytes} B",
        )

    image = MemoryImage(
        instructions=pack_program(instructions),
        index_words=index_words,
        l2_init=bytes(l2.buffer),
        symbols=dict(l2.symbols),
        dma=dma,
        meta={
            "name": workload.name,
            "layers": layers_meta,
            "tiles": tiles_meta,
            "output": current.name,
        },
    )
    bundle = golden_bundle(workload)
    logger.info(
        "Compiled %s: %d instruction(s), %d DMA transfer(s), %d B of L2",
        workload.name,
        len(instructions),
        len(dma),
        image.l2_used,
    )
    return image, bundle


def compile_layer(
    layer: Layer, inputs: QuantTensor, mem_config: Optional[MemConfig] = None, name: str = "layer"
) -> Tuple[MemoryImage, GoldenBundle]:
    """Single-layer convenience wrapper around :func:`link_program`."""
    return link_program(Workload(name=name, input=inputs, layers=(layer,)), mem_config)


__all__ = [
    "Box",
    "DmaDescriptor",
    "MemConfig",
    "MemoryImage",
    "Symbol",
    "Tile",
    "TileSchedule",
    "TileSymbols",
    "check_fifo_feasible",
    "compile_layer",
    "emit_ucode",
    "fifo_plan",
    "fifo_span",
    "index_words_per_block",
    "plan_fifo",
    "input_rows",
    "link_program",
    "pack_sparsity_indices",
    "select_dataflow",
    "sparsify_workload",
    "tile",
    "unpack_sparsity_indices",
]
