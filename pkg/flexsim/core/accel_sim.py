"""Bit-exact functional and cycle-approximate model of the accelerator.

The simulator walks the instruction stream of a :class:`MemoryImage`. Each
instruction moves its operand boxes from L2 into a ping-pong L1 bank, runs
one tile on the 8 x 8 array and, when its accumulators are final, drains the
outputs back to L2. Timing is event counted per phase; a small timeline
overlaps DMA with compute across the two banks.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Any, Deque, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from flexsim import config
from flexsim.core.compiler import (
    DIR_IN,
    DIR_OUT,
    SPACE_ACT,
    SPACE_WEIGHT,
    DmaDescriptor,
    MemoryImage,
    Symbol,
    index_words_per_block,
    plan_fifo,
)
from flexsim.core.errors import ConfigError, SimulationError
from flexsim.core.nlfg import output_stage
from flexsim.core.tensor_io import unpack_values
from flexsim.core.ucode import DATAFLOW_CK, DATAFLOW_OXK, UcodeInstruction, unpack_program
from flexsim.core.workload_ir import LayerDescriptor, LayerKind, Norm, QuantTensor, ceil_div, wrap32
from flexsim.utils.logger import logger

PHASES = ("dma_in", "compute", "writeback", "decode", "dma_out", "stall")
COMPONENTS = ("L2", "L1_weight", "L1_act", "L0", "index_mem", "instr_mem")
ROWS = config.ARRAY_ROWS
COLS = config.ARRAY_COLS
PE_COUNT = ROWS * COLS
INSTR_FETCH_ACCESSES = config.UCODE_BYTES // 4


# --------------------------------------------------------------------------- #
# Knobs and reports
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class SimKnobs:
    """Timing calibration knobs; see ``config.DEFAULT_KNOBS``."""

    prologue_cycles: int = 1
    prologue_overlap: float = 0.75
    writeback_overlap: bool = True
    decode_cycles: int = 4
    dma_bytes_per_cycle: int = 8
    index_fetch_cycles: int = 1
    l1_resident: bool = False
    deconv_mode: str = "skip"

    def __post_init__(self) -> None:
        if self.deconv_mode not in config.DECONV_MODES:
            raise ConfigError(f"deconv_mode must be one of {', '.join(config.DECONV_MODES)}")
        if not 0.0 <= self.prologue_overlap <= 1.0:
            raise ConfigError("prologue_overlap must lie in [0, 1]")
        if self.dma_bytes_per_cycle < 1:
            raise ConfigError("dma_bytes_per_cycle must be positive")

    @classmethod
    def from_mapping(cls, values: Optional[Mapping[str, Any]] = None) -> "SimKnobs":
        merged = dict(config.DEFAULT_KNOBS)
        merged.update(values or {})
        known = {f.name for f in fields(cls)}
        return cls(**{key: value for key, value in merged.items() if key in known})

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _zero_counts(keys: Sequence[str]) -> Dict[str, int]:
    return {key: 0 for key in keys}


@dataclass
class CycleReport:
    """Cycles per phase, MAC counts and memory access counts of a run (or part of one)."""

    phases: Dict[str, int] = field(default_factory=lambda: _zero_counts(PHASES))
    mac_ops_nominal: int = 0
    mac_ops_effective: int = 0
    macs_by_precision: Dict[int, int] = field(default_factory=dict)
    accesses: Dict[str, int] = field(default_factory=lambda: _zero_counts(COMPONENTS))
    dma_bytes: int = 0
    instructions: int = 0
    layers: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def total_cycles(self) -> int:
        return int(sum(self.phases.values()))

    @property
    def busy_cycles(self) -> int:
        return self.phases["compute"] + self.phases["writeback"] + self.phases["decode"]

    @property
    def utilization(self) -> float:
        """Fraction of PE slots doing useful MACs (a PE offers 1/2/4 slots at 8/4/2 bits)."""
        total = self.total_cycles
        if not total:
            return 0.0
        lanes = config.LANES_BY_PRECISION
        used = sum(count / lanes[bits] for bits, count in self.macs_by_precision.items())
        return used / (total * PE_COUNT)

    def add(self, other: "CycleReport") -> None:
        for key, value in other.phases.items():
            self.phases[key] += value
        for key, value in other.accesses.items():
            self.accesses[key] += value
        for bits, count in other.macs_by_precision.items():
            self.macs_by_precision[bits] = self.macs_by_precision.get(bits, 0) + count
        self.mac_ops_nominal += other.mac_ops_nominal
        self.mac_ops_effective += other.mac_ops_effective
        self.dma_bytes += other.dma_bytes
        self.instructions += other.instructions

    def count_macs(self, precision: int, nominal: int, effective: int) -> None:
        self.mac_ops_nominal += nominal
        self.mac_ops_effective += effective
        self.macs_by_precision[precision] = self.macs_by_precision.get(precision, 0) + effective

    def to_dict(self) -> Dict[str, Any]:
        return {
            "total_cycles": self.total_cycles,
            "phases": dict(self.phases),
            "mac_ops_nominal": self.mac_ops_nominal,
            "mac_ops_effective": self.mac_ops_effective,
            "macs_by_precision": {str(bits): count for bits, count in sorted(self.macs_by_precision.items())},
            "accesses": dict(self.accesses),
            "dma_bytes": self.dma_bytes,
            "instructions": self.instructions,
            "utilization": self.utilization,
            "layers": list(self.layers),
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "CycleReport":
        report = cls()
        report.phases.update({key: int(value) for key, value in payload.get("phases", {}).items()})
        report.accesses.update({key: int(value) for key, value in payload.get("accesses", {}).items()})
        report.macs_by_precision = {int(k): int(v) for k, v in payload.get("macs_by_precision", {}).items()}
        report.mac_ops_nominal = int(payload.get("mac_ops_nominal", 0))
        report.mac_ops_effective = int(payload.get("mac_ops_effective", 0))
        report.dma_bytes = int(payload.get("dma_bytes", 0))
        report.instructions = int(payload.get("instructions", 0))
        report.layers = list(payload.get("layers", []))
        return report


# --------------------------------------------------------------------------- #
# Datapath primitives
# --------------------------------------------------------------------------- #


def skip_sparse_block(
    index_words: Sequence[int], channel: int, *, channels: int, block: int = 0, base: int = 0
) -> bool:
    """True when ``channel`` is pruned for filter block ``block`` of a layer with ``channels`` inputs."""
    word = base + block * index_words_per_block(channels) + channel // config.INDEX_WORD_BITS
    if word >= len(index_words):
        raise SimulationError(
            "INDEX_UNDERFLOW", f"index word {word} requested, memory holds {len(index_words)}"
        )
    return bool((index_words[word] >> (channel % config.INDEX_WORD_BITS)) & 1)


class PeMode(str, Enum):
    MAC = "MAC"
    SVM_L1 = "SVM_L1"
    SVM_L2 = "SVM_L2"


def _grid(dtype: Any = np.int64) -> np.ndarray:
    return np.zeros((ROWS, COLS), dtype=dtype)


@dataclass
class PeState:
    """Accumulators, mode and enable mask of the 8 x 8 PE array.

    Every PE holds a 32-bit signed accumulator. In MAC mode a PE retires 1, 2 or
    4 multiply-accumulates per cycle at 8, 4 or 2 bits. The SVM modes subtract,
    then take the absolute value or the square, one element per cycle. Masked
    PEs keep their accumulator untouched.
    """

    mode: PeMode = PeMode.MAC
    precision: int = 8
    accumulator: np.ndarray = field(default_factory=_grid)
    mask: np.ndarray = field(default_factory=lambda: ~_grid(bool))
    cycles: int = 0
    ops: int = 0

    def __post_init__(self) -> None:
        self.mode = PeMode(self.mode)
        if self.precision not in config.LANES_BY_PRECISION:
            raise SimulationError("DECODE_ERROR", f"PE array cannot run at {self.precision} bits")

    @classmethod
    def for_tile(
        cls, rows: int, cols: int, *, mode: PeMode = PeMode.MAC, precision: int = 8
    ) -> "PeState":
        """Array with only the top-left ``rows`` x ``cols`` PEs enabled."""
        if not (0 < rows <= ROWS and 0 < cols <= COLS):
            raise SimulationError("DECODE_ERROR", f"a {rows} x {cols} tile does not fit the PE array")
        mask = _grid(bool)
        mask[:rows, :cols] = True
        return cls(mode=mode, precision=precision, mask=mask)

    @property
    def lanes(self) -> int:
        """Operations one PE retires per cycle."""
        if self.mode != PeMode.MAC:
            return 1
        return config.LANES_BY_PRECISION[self.precision]

    def _require(self, *modes: PeMode) -> None:
        if self.mode not in modes:
            raise SimulationError("DECODE_ERROR", f"PE array is in {self.mode.value} mode")

    def _accumulate(self, partial: np.ndarray, cycles: int) -> int:
        """Add ``partial`` into the enabled PEs; returns how many PEs took part."""
        rows, cols = partial.shape
        enabled = self.mask[:rows, :cols]
        region = self.accumulator[:rows, :cols]
        self.accumulator[:rows, :cols] = wrap32(region + np.where(enabled, partial, 0))
        self.cycles += cycles
        return int(enabled.sum())

    def mac(self, weights: Any, activations: Any) -> int:
        """Multicast burst: PE (r, c) accumulates ``weights[r] . activations[c]``.

        ``weights`` is (rows, n), ``activations`` is (cols, n); returns the cycles spent.
        """
        self._require(PeMode.MAC)
        w = np.asarray(weights, dtype=np.int64)
        a = np.asarray(activations, dtype=np.int64)
        n = w.shape[1]
        cycles = ceil_div(n, self.lanes)
        self.ops += n * self._accumulate(w @ a.T, cycles)
        return cycles

    def mac_unicast(self, weights: Any, activations: Any) -> int:
        """Channels spread over the columns: channel ``i`` lands on column ``(i // lanes) % 8``.

        ``weights`` is (rows, n), ``activations`` is (n,); returns the cycles spent.
        """
        self._require(PeMode.MAC)
        w = np.asarray(weights, dtype=np.int64)
        a = np.asarray(activations, dtype=np.int64)
        rows, n = w.shape
        lanes = self.lanes
        cycles = ceil_div(n, COLS * lanes)
        extra = cycles * COLS * lanes - n
        products = np.pad(w, ((0, 0), (0, extra))) * np.pad(a, (0, extra))
        partial = products.reshape(rows, cycles, COLS, lanes).sum(axis=(1, 3))
        self._accumulate(partial, cycles)
        self.ops += n * int(self.mask[:rows].any(axis=1).sum())
        return cycles

    def distance(self, x: Any, vectors: Any) -> int:
        """Element ``i`` of the difference lands on row ``i % 8``; column ``c`` holds vector ``c``."""
        self._require(PeMode.SVM_L1, PeMode.SVM_L2)
        sv = np.asarray(vectors, dtype=np.int64)
        cols, n = sv.shape
        cycles = ceil_div(n, ROWS)
        extra = cycles * ROWS - n
        padded = np.pad(np.asarray(x, dtype=np.int64), (0, extra))
        delta = padded[None, :] - np.pad(sv, ((0, 0), (0, extra)))
        delta = np.abs(delta) if self.mode == PeMode.SVM_L1 else delta * delta
        partial = delta.reshape(cols, cycles, ROWS).sum(axis=1).T
        self._accumulate(partial, cycles)
        self.ops += n * int(self.mask[:, :cols].any(axis=0).sum())
        return cycles

    def row_sums(self) -> np.ndarray:
        return wrap32(self.accumulator.sum(axis=1))

    def column_sums(self) -> np.ndarray:
        return wrap32(self.accumulator.sum(axis=0))


class L0Fifo:
    """Sliding window of input words between L1 and the PE columns.

    Positions count along one zero-shuffled, padded input row. A push fetches
    the word from L1 when the position holds real data and inserts a zero for
    padding or for a position the zero-shuffle stuffs. Each entry carries the
    word of every channel in the tile. ``advance`` moves the head by the
    programmed shift.
    """

    def __init__(
        self,
        row: Any,
        *,
        pad: int = 0,
        upsample: int = 1,
        shift: int = 1,
        zero_shuffle: bool = False,
        depth: int = config.FIFO_ENTRIES,
    ) -> None:
        data = np.asarray(row, dtype=np.int64)
        self.row = data[None, :] if data.ndim == 1 else data
        if upsample > 1 and not zero_shuffle:
            raise SimulationError("DECODE_ERROR", "upsampling needs the zero-shuffle flag")
        if shift < 1 or upsample < 1:
            raise SimulationError("DECODE_ERROR", f"bad FIFO shift {shift} or upsample {upsample}")
        self.pad = pad
        self.upsample = upsample
        self.shift = shift
        self.zero_shuffle = zero_shuffle
        self.depth = depth
        self.width = (self.row.shape[1] - 1) * upsample + 1
        self.entries: Deque[np.ndarray] = deque()
        self.head = 0
        self.tail = 0
        self.fetched: List[int] = []
        self.inserted = 0
        self.peak = 0

    def __len__(self) -> int:
        return len(self.entries)

    def is_real(self, position: int) -> bool:
        p = position - self.pad
        return 0 <= p < self.width and p % self.upsample == 0

    def start(self, position: int) -> None:
        self.entries.clear()
        self.head = self.tail = position

    def push(self) -> None:
        if len(self.entries) >= self.depth:
            raise SimulationError("FIFO_OVERFLOW", f"L0 FIFO holds {self.depth} words")
        position = self.tail
        if self.is_real(position):
            word = self.row[:, (position - self.pad) // self.upsample]
            self.fetched.append(position)
        else:
            word = np.zeros(self.row.shape[0], dtype=np.int64)
            self.inserted += 1
        self.entries.append(word)
        self.tail += 1
        self.peak = max(self.peak, len(self.entries))

    def window(self, count: int, stride: int) -> np.ndarray:
        """Words at head, head + stride, ... for ``count`` columns, as (channels, count)."""
        last = self.head + (count - 1) * stride
        while self.tail <= last:
            self.push()
        return np.stack([self.entries[j * stride] for j in range(count)], axis=1)

    def advance(self) -> None:
        for _ in range(min(self.shift, len(self.entries))):
            self.entries.popleft()
        self.head += self.shift
        self.tail = max(self.tail, self.head)


def _kept(pruned: Optional[np.ndarray], block: int) -> Optional[np.ndarray]:
    """Channels a filter block still reads, or None when the layer is dense."""
    if pruned is None:
        return None
    return np.flatnonzero(~pruned[block])


def svm_pe_pass(x_tile: Any, sv_tile: Any, norm: Norm) -> np.ndarray:
    """Subtract, then absolute value (L1) or square (L2), reduced over D by the adder tree.

    ``x_tile`` is (batch, D) or (D,), ``sv_tile`` is (N, D); returns (batch, N) accumulators.
    """
    x = np.atleast_2d(np.asarray(x_tile, dtype=np.int64))
    sv = np.atleast_2d(np.asarray(sv_tile, dtype=np.int64))
    mode = PeMode.SVM_L1 if Norm(norm) == Norm.L1 else PeMode.SVM_L2
    out = np.zeros((x.shape[0], sv.shape[0]), dtype=np.int64)
    for n0 in range(0, sv.shape[0], COLS):
        cols = min(COLS, sv.shape[0] - n0)
        for b in range(x.shape[0]):
            pes = PeState.for_tile(ROWS, cols, mode=mode)
            pes.distance(x[b], sv[n0 : n0 + cols])
            out[b, n0 : n0 + cols] = pes.column_sums()[:cols]
    return out


def _active_taps_y(instr: UcodeInstruction, desc: LayerDescriptor, oy: int, skip_zero_rows: bool) -> int:
    """Filter rows that meet a real input row; stuffed zeros and padding are skipped."""
    if not (skip_zero_rows and instr.zero_shuffle):
        return instr.FY
    stuffed = desc.stuffed_extent(desc.input_y)
    active = 0
    for fy in range(instr.FY):
        q = oy * instr.stride + fy * instr.dilation - instr.pad_y
        if 0 <= q < stuffed and q % instr.upsample == 0:
            active += 1
    return active


def _writeback_visible(compute: np.ndarray, knobs: SimKnobs) -> int:
    """Output write-back hides behind the next output tile's compute, except after the last one."""
    wb = config.WRITEBACK_CYCLES
    if compute.size == 0:
        return 0
    if not knobs.writeback_overlap:
        return wb * int(compute.size)
    return int(np.maximum(0, wb - compute[1:]).sum()) + wb


def _active_channels(pruned: Optional[np.ndarray], blocks: int, channels: int) -> np.ndarray:
    if pruned is None:
        return np.full(blocks, channels, dtype=np.int64)
    return channels - pruned.sum(axis=1).astype(np.int64)


def simulate_oxk_tile(
    instr: UcodeInstruction,
    knobs: SimKnobs,
    *,
    desc: LayerDescriptor,
    oy0: int = 0,
    pruned: Optional[np.ndarray] = None,
    skip_zero_rows: Optional[bool] = None,
) -> CycleReport:
    """Cycles of one OX|K instruction.

    Output tiles run K-tile outer, OY, then OX-tile. Each (c, fy) row costs FX
    compute cycles after a FIFO prologue, of which ``1 - prologue_overlap`` is
    exposed. ``pruned`` is the (K-block, channel) skip matrix of this tile.
    """

    report = CycleReport()
    lanes = config.LANES_BY_PRECISION[instr.precision]
    ox_par, tap_split = plan_fifo(instr.stride, instr.dilation, instr.FX)
    k_tiles = ceil_div(instr.K, config.ARRAY_ROWS)
    ox_tiles = ceil_div(instr.OX, ox_par)
    if skip_zero_rows is None:
        skip_zero_rows = knobs.deconv_mode == "skip"

    c_active = _active_channels(pruned, k_tiles, instr.C)
    fy_active = np.array(
        [_active_taps_y(instr, desc, oy0 + oy, skip_zero_rows) for oy in range(instr.OY)], dtype=np.int64
    )
    # rows[k-tile, oy]
    rows = np.outer(-(-c_active // lanes), fy_active)
    passes = rows * instr.FX if tap_split else rows
    exposed = passes * knobs.prologue_cycles * (1.0 - knobs.prologue_overlap)
    prologue = np.ceil(exposed - 1e-9).astype(np.int64)
    per_tile = rows * instr.FX + prologue
    compute = np.repeat(per_tile.ravel(), ox_tiles)

    report.phases["compute"] = int(compute.sum())
    report.phases["writeback"] = _writeback_visible(compute, knobs)
    report.phases["decode"] = knobs.decode_cycles
    output_tiles = int(compute.size)
    if instr.sparsity:
        words = output_tiles * ceil_div(instr.C, config.INDEX_WORD_BITS)
        report.phases["decode"] += words * knobs.index_fetch_cycles
        report.accesses["index_mem"] += words

    real_k = np.minimum(config.ARRAY_ROWS, instr.K - config.ARRAY_ROWS * np.arange(k_tiles))
    effective = int((real_k * c_active).sum()) * int(fy_active.sum()) * instr.FX * instr.OX
    nominal = instr.K * instr.C * instr.OY * instr.OX * instr.FY * instr.FX
    report.count_macs(instr.precision, nominal, effective)

    taps = 1 if tap_split else instr.FX
    span = (ox_par - 1) * instr.stride + (taps - 1) * instr.dilation + 1
    fifo_loads = int(passes.sum()) * ox_tiles
    report.accesses["L1_weight"] += 2 * int((rows * instr.FX).sum()) * ox_tiles
    report.accesses["L1_act"] += fifo_loads * (1 + max(0, span - config.ARRAY_COLS))
    report.accesses["L1_act"] += config.WRITEBACK_CYCLES * output_tiles
    report.accesses["L0"] += fifo_loads * span
    report.accesses["instr_mem"] += INSTR_FETCH_ACCESSES
    report.instructions = 1
    return report


def simulate_deconv(
    instr: UcodeInstruction,
    knobs: SimKnobs,
    *,
    desc: LayerDescriptor,
    oy0: int = 0,
    pruned: Optional[np.ndarray] = None,
    naive: Optional[bool] = None,
) -> CycleReport:
    """Deconvolution timing: zero-shuffled rows that only meet stuffed zeros are skipped.

    ``naive`` times the plain zero-stuffed convolution instead.
    """
    if naive is None:
        naive = knobs.deconv_mode == "naive"
    return simulate_oxk_tile(instr, knobs, desc=desc, oy0=oy0, pruned=pruned, skip_zero_rows=not naive)


def simulate_ck_tile(
    instr: UcodeInstruction, knobs: SimKnobs, *, pruned: Optional[np.ndarray] = None
) -> CycleReport:
    """Cycles of one C|K (dense, RNN or SVM norm) instruction.

    Per batch element and K-tile the array consumes 8 x lanes channels per
    column per cycle, then shifts one adder-tree output per row out.
    """
    report = CycleReport()
    lanes = config.LANES_BY_PRECISION[instr.precision]
    k_tiles = ceil_div(instr.K, config.ARRAY_ROWS)
    c_active = _active_channels(pruned, k_tiles, instr.C)
    per_k = -(-c_active // (config.ARRAY_COLS * lanes))
    compute = int(per_k.sum()) * instr.batch
    report.phases["compute"] = compute
    report.phases["writeback"] = config.WRITEBACK_CYCLES * k_tiles * instr.batch
    report.phases["decode"] = knobs.decode_cycles
    if instr.sparsity:
        words = k_tiles * ceil_div(instr.C, config.INDEX_WORD_BITS)
        report.phases["decode"] += words * knobs.index_fetch_cycles
        report.accesses["index_mem"] += words

    real_k = np.minimum(config.ARRAY_ROWS, instr.K - config.ARRAY_ROWS * np.arange(k_tiles))
    effective = int((real_k * c_active).sum()) * instr.batch
    report.count_macs(instr.precision, instr.batch * instr.K * instr.C, effective)

    report.accesses["L1_weight"] += config.ARRAY_ROWS * compute
    report.accesses["L1_act"] += compute + config.WRITEBACK_CYCLES * k_tiles * instr.batch
    report.accesses["instr_mem"] += INSTR_FETCH_ACCESSES
    report.instructions = 1
    return report


def simulate_pool_tile(instr: UcodeInstruction, knobs: SimKnobs) -> CycleReport:
    """Max pooling on the dedicated unit: one comparison per cycle."""
    report = CycleReport()
    compute = instr.C * instr.OY * instr.OX * instr.FY * instr.FX
    report.phases["compute"] = compute
    report.phases["decode"] = knobs.decode_cycles
    report.accesses["L1_act"] += compute + ceil_div(instr.C * instr.OY * instr.OX, config.ARRAY_COLS)
    report.accesses["instr_mem"] += INSTR_FETCH_ACCESSES
    report.instructions = 1
    return report


def nlfg_stage(acc: Any, instr: UcodeInstruction) -> np.ndarray:
    """Requantizer, ReLU and NLFG applied to final accumulators."""
    return output_stage(acc, instr.activation, instr.requant_shift, instr.precision)


# --------------------------------------------------------------------------- #
# Machine state
# --------------------------------------------------------------------------- #


def _box_slices(box: Sequence[Tuple[int, int]]) -> Tuple[slice, ...]:
    return tuple(slice(start, stop) for start, stop in box)


class _L2Memory:
    """Decoded L2 tensors; aliases share their base array."""

    def __init__(self, image: MemoryImage) -> None:
        self.symbols = image.symbols
        self.arrays: Dict[str, np.ndarray] = {}
        for symbol in image.symbols.values():
            if symbol.alias_of is not None:
                continue
            end = symbol.offset + symbol.nbytes
            if end > len(image.l2_init):
                raise SimulationError("ADDRESS_FAULT", f"symbol {symbol.name} ends past initialised L2")
            count = int(np.prod(symbol.shape))
            raw = image.l2_init[symbol.offset : end]
            self.arrays[symbol.name] = unpack_values(raw, symbol.precision, count).reshape(symbol.shape)

    def _resolve(self, name: str) -> Tuple[Symbol, np.ndarray]:
        symbol = self.symbols.get(name)
        if symbol is None:
            raise SimulationError("ADDRESS_FAULT", f"unknown L2 symbol {name}")
        base = self.arrays[symbol.alias_of or symbol.name]
        return symbol, base.reshape(symbol.shape)

    def view(self, name: str, box: Optional[Sequence[Tuple[int, int]]] = None) -> np.ndarray:
        symbol, array = self._resolve(name)
        if box is None:
            return array
        if len(box) != array.ndim or any(
            not 0 <= a <= b <= extent for (a, b), extent in zip(box, array.shape)
        ):
            raise SimulationError("ADDRESS_FAULT", f"box {list(box)} outside {symbol.name}{symbol.shape}")
        return array[_box_slices(box)]

    def tensor(self, name: str) -> QuantTensor:
        symbol, array = self._resolve(name)
        return QuantTensor.from_array(array, symbol.precision)


@dataclass
class _L1Entry:
    symbol: str
    box: Tuple[Tuple[int, int], ...]
    data: np.ndarray


@dataclass
class _TileTiming:
    layer: int
    bank: int
    busy: int
    load: int
    store: int


class AcceleratorSim:
    """Executes one memory image; create a new instance per run."""

    def __init__(
        self, image: MemoryImage, knobs: Optional[SimKnobs] = None, *, functional: bool = True
    ) -> None:
        self.image = image
        self.knobs = knobs or SimKnobs()
        self.functional = functional
        self.program = unpack_program(image.instructions)
        tiles_meta = image.meta.get("tiles", [])
        if len(tiles_meta) != len(self.program):
            raise SimulationError(
                "DECODE_ERROR", f"{len(self.program)} instruction(s) but {len(tiles_meta)} tile origin(s)"
            )
        self.origins: List[Dict[str, int]] = tiles_meta
        self.layer_records: List[Dict[str, Any]] = image.meta.get("layers", [])
        self.layer_descs = [LayerDescriptor.from_dict(record["desc"]) for record in self.layer_records]
        self.dma_by_tile: Dict[int, List[DmaDescriptor]] = {}
        for descriptor in image.dma:
            self.dma_by_tile.setdefault(descriptor.tile_id, []).append(descriptor)
        self.l2 = _L2Memory(image) if functional else None
        self.l1: Dict[Tuple[str, int, int], _L1Entry] = {}
        self.accumulators: Dict[Tuple[int, int, int, int], np.ndarray] = {}

    # -- DMA ------------------------------------------------------------------

    def _dma_cost(self, descriptor: DmaDescriptor, report: CycleReport) -> int:
        if self.knobs.l1_resident:
            return 0
        beats = ceil_div(descriptor.nbytes, 8)
        report.accesses["L2"] += beats
        report.accesses["L1_weight" if descriptor.space == SPACE_WEIGHT else "L1_act"] += beats
        report.dma_bytes += descriptor.nbytes
        return ceil_div(descriptor.nbytes, self.knobs.dma_bytes_per_cycle)

    def _load(self, descriptor: DmaDescriptor) -> None:
        assert self.l2 is not None
        data = self.l2.view(descriptor.symbol, descriptor.box).copy()
        key = (descriptor.space, descriptor.bank, descriptor.l1_offset)
        self.l1[key] = _L1Entry(descriptor.symbol, descriptor.box, data)

    def _store(self, descriptor: DmaDescriptor) -> None:
        assert self.l2 is not None
        entry = self._l1(descriptor.space, descriptor.bank * config.L1_BANK_BYTES + descriptor.l1_offset)
        target = self.l2.view(descriptor.symbol, descriptor.box)
        if target.shape != entry.data.shape:
            raise SimulationError(
                "ADDRESS_FAULT", f"L1 block {entry.data.shape} does not match L2 box {target.shape}"
            )
        target[...] = entry.data

    def _l1(self, space: str, address: int) -> _L1Entry:
        bank, offset = divmod(address, config.L1_BANK_BYTES)
        entry = self.l1.get((space, bank, offset))
        if bank > 1 or entry is None:
            raise SimulationError("ADDRESS_FAULT", f"nothing loaded at {space} L1 address {address:#x}")
        return entry

    # -- compute ----------------------------------------------------------------

    def _pruned(
        self, instr: UcodeInstruction, desc: LayerDescriptor, origin: Dict[str, int]
    ) -> Optional[np.ndarray]:
        if not instr.sparsity:
            return None
        k0, c0 = origin["k0"], origin["c0"]
        first_block = k0 // config.SPARSITY_BLOCK
        blocks = ceil_div(instr.K, config.ARRAY_ROWS)
        pruned = np.zeros((blocks, instr.C), dtype=bool)
        for local in range(blocks):
            for channel in range(instr.C):
                pruned[local, channel] = skip_sparse_block(
                    self.image.index_words,
                    c0 + channel,
                    channels=desc.C,
                    block=first_block + local,
                    base=instr.addr_index,
                )
        return pruned

    def _timing(
        self,
        instr: UcodeInstruction,
        desc: LayerDescriptor,
        origin: Dict[str, int],
        pruned: Optional[np.ndarray],
    ) -> CycleReport:
        if instr.dataflow == DATAFLOW_OXK:
            if instr.zero_shuffle:
                return simulate_deconv(instr, self.knobs, desc=desc, oy0=origin["oy0"], pruned=pruned)
            return simulate_oxk_tile(instr, self.knobs, desc=desc, oy0=origin["oy0"], pruned=pruned)
        if instr.dataflow == DATAFLOW_CK:
            return simulate_ck_tile(instr, self.knobs, pruned=pruned)
        return simulate_pool_tile(instr, self.knobs)

    def _execute(
        self,
        instr: UcodeInstruction,
        desc: LayerDescriptor,
        origin: Dict[str, int],
        pruned: Optional[np.ndarray],
    ) -> None:
        act = self._l1(SPACE_ACT, instr.addr_act_in)
        x = act.data.astype(np.int64)
        if instr.kind == LayerKind.MAXPOOL:
            result = self._pool(instr, x, act.box, origin["oy0"])
            self._write_output(instr, result)
            return

        w = self._l1(SPACE_WEIGHT, instr.addr_weights).data.astype(np.int64)
        if instr.kind == LayerKind.SVM_NORM:
            partial = svm_pe_pass(x, w, Norm.L2 if instr.norm_l2 else Norm.L1)
        elif instr.dataflow == DATAFLOW_CK:
            partial = self._matvec(instr, x, w, pruned)
        else:
            partial = self._convolve(instr, desc, x, w, act.box, origin["oy0"], pruned)

        key = (origin["layer"], origin["k0"], origin["oy0"], origin["b0"])
        if instr.acc_clear or key not in self.accumulators:
            acc = wrap32(partial)
        else:
            acc = wrap32(self.accumulators[key] + partial)
        if not instr.acc_final:
            self.accumulators[key] = acc
            return
        self.accumulators.pop(key, None)
        result = acc if instr.kind == LayerKind.SVM_NORM else nlfg_stage(acc, instr)
        self._write_output(instr, result)

    def _write_output(self, instr: UcodeInstruction, result: np.ndarray) -> None:
        bank, offset = divmod(instr.addr_act_out, config.L1_BANK_BYTES)
        self.l1[(SPACE_ACT, bank, offset)] = _L1Entry("", (), np.asarray(result, dtype=np.int64))

    def _matvec(
        self, instr: UcodeInstruction, x: np.ndarray, w: np.ndarray, pruned: Optional[np.ndarray]
    ) -> np.ndarray:
        """C|K tile: filters on the PE rows, channels over the columns, one adder-tree output per row."""
        out = np.zeros((x.shape[0], instr.K), dtype=np.int64)
        for k0 in range(0, instr.K, ROWS):
            rows = min(ROWS, instr.K - k0)
            kept = _kept(pruned, k0 // config.SPARSITY_BLOCK)
            weights = w[k0 : k0 + rows] if kept is None else w[k0 : k0 + rows][:, kept]
            for b in range(x.shape[0]):
                pes = PeState.for_tile(rows, COLS, precision=instr.precision)
                pes.mac_unicast(weights, x[b] if kept is None else x[b, kept])
                out[b, k0 : k0 + rows] = pes.row_sums()[:rows]
        return out

    def _convolve(
        self,
        instr: UcodeInstruction,
        desc: LayerDescriptor,
        x: np.ndarray,
        w: np.ndarray,
        box: Tuple[Tuple[int, int], ...],
        oy0: int,
        pruned: Optional[np.ndarray],
    ) -> np.ndarray:
        """O|K tile: output pixels on the PE columns, filters on the rows, fed by the L0 FIFO.

        Filter rows that land on padding or on a stuffed zero row read nothing.
        """
        one_d = instr.kind == LayerKind.CONV1D_DILATED
        if one_d:
            x = x[:, None, :]
            w = w[:, :, None, :]
            row0 = 0
        else:
            row0 = box[1][0]
        u, s, d = instr.upsample, instr.stride, instr.dilation
        stuffed_h = desc.stuffed_extent(desc.input_y) if desc.is_2d else 1
        ox_par, _ = plan_fifo(s, d, instr.FX)
        k_tiles = [
            (k0, min(ROWS, instr.K - k0), _kept(pruned, k0 // config.SPARSITY_BLOCK))
            for k0 in range(0, instr.K, ROWS)
        ]
        out = np.zeros((instr.K, instr.OY, instr.OX), dtype=np.int64)
        for oy in range(instr.OY):
            taps_y = []
            for fy in range(instr.FY):
                q = (oy0 + oy) * s + fy * d - instr.pad_y
                if not (0 <= q < stuffed_h and q % u == 0):
                    continue
                r = q // u - row0
                if not 0 <= r < x.shape[1]:
                    raise SimulationError(
                        "ADDRESS_FAULT", f"tile {instr.tile_id} reads input row {q // u} outside L1"
                    )
                taps_y.append((fy, x[:, r, :]))

            for ox0 in range(0, instr.OX, ox_par):
                n = min(ox_par, instr.OX - ox0)
                arrays = [PeState.for_tile(rows, n, precision=instr.precision) for _, rows, _ in k_tiles]
                for fy, row in taps_y:
                    fifo = L0Fifo(
                        row, pad=instr.pad_x, upsample=u, shift=d, zero_shuffle=bool(instr.zero_shuffle)
                    )
                    fifo.start(ox0 * s)
                    for fx in range(instr.FX):
                        window = fifo.window(n, s)
                        for (k0, rows, kept), pes in zip(k_tiles, arrays):
                            weights = w[k0 : k0 + rows, :, fy, fx]
                            if kept is None:
                                pes.mac(weights, window.T)
                            else:
                                pes.mac(weights[:, kept], window[kept].T)
                        fifo.advance()
                for (k0, rows, _), pes in zip(k_tiles, arrays):
                    out[k0 : k0 + rows, oy, ox0 : ox0 + n] = pes.accumulator[:rows, :n]
        return out[:, 0, :] if one_d else out

    def _pool(
        self, instr: UcodeInstruction, x: np.ndarray, box: Tuple[Tuple[int, int], ...], oy0: int
    ) -> np.ndarray:
        s = instr.stride
        row0 = box[1][0]
        best: Optional[np.ndarray] = None
        for fy in range(instr.FY):
            for fx in range(instr.FX):
                start = oy0 * s + fy - row0
                rows = slice(start, start + (instr.OY - 1) * s + 1, s)
                window = x[:, rows, fx : fx + (instr.OX - 1) * s + 1 : s]
                best = window if best is None else np.maximum(best, window)
        assert best is not None
        return best

    # -- driver -----------------------------------------------------------------

    def run(self) -> Tuple[List[QuantTensor], CycleReport]:
        report = CycleReport()
        if not self.program:
            return [], report

        timings: List[_TileTiming] = []
        per_layer: Dict[int, CycleReport] = {}
        for instr, origin in zip(self.program, self.origins):
            layer = int(origin["layer"])
            if not 0 <= layer < len(self.layer_descs):
                raise SimulationError("DECODE_ERROR", f"tile {instr.tile_id} names unknown layer {layer}")
            desc = self.layer_descs[layer]
            transfers = self.dma_by_tile.get(instr.tile_id, [])
            pruned = self._pruned(instr, desc, origin)

            tile_report = self._timing(instr, desc, origin, pruned)
            load = sum(self._dma_cost(t, tile_report) for t in transfers if t.direction == DIR_IN)
            store = sum(self._dma_cost(t, tile_report) for t in transfers if t.direction == DIR_OUT)

            if self.functional:
                for transfer in transfers:
                    if transfer.direction == DIR_IN:
                        self._load(transfer)
                self._execute(instr, desc, origin, pruned)
                for transfer in transfers:
                    if transfer.direction == DIR_OUT:
                        self._store(transfer)

            bank = instr.addr_act_in // config.L1_BANK_BYTES
            timings.append(_TileTiming(layer, bank, tile_report.busy_cycles, load, store))
            per_layer.setdefault(layer, CycleReport()).add(tile_report)
            logger.debug(
                "tile %d (%s): busy=%d load=%d store=%d",
                instr.tile_id,
                desc.label,
                tile_report.busy_cycles,
                load,
                store,
            )

        for layer_report in per_layer.values():
            report.add(layer_report)
        report.phases.update(_timeline(timings))
        report.layers = [
            {
                "name": self.layer_descs[index].label,
                "kind": self.layer_descs[index].kind.value,
                "instructions": part.instructions,
                "compute": part.phases["compute"],
                "writeback": part.phases["writeback"],
                "decode": part.phases["decode"],
                "mac_ops_nominal": part.mac_ops_nominal,
                "mac_ops_effective": part.mac_ops_effective,
            }
            for index, part in sorted(per_layer.items())
        ]

        outputs: List[QuantTensor] = []
        if self.functional and self.l2 is not None:
            outputs.append(self.l2.tensor(self.image.meta["output"]))
        logger.info(
            "Simulated %s: %d cycles, %d effective MACs",
            self.image.meta.get("name", "image"),
            report.total_cycles,
            report.mac_ops_effective,
        )
        return outputs, report


def _timeline(timings: Sequence[_TileTiming]) -> Dict[str, int]:
    """Exposed DMA phases of a single-engine, two-bank double-buffered schedule."""

    dma_free = 0
    bank_ready = [0, 0]
    barrier = 0
    compute_end = 0
    exposed = {"dma_in": 0, "stall": 0, "dma_out": 0}
    pending: Optional[Tuple[int, int, int]] = None  # (store cycles, ready at, bank)
    layer: Optional[int] = None

    def drain() -> int:
        nonlocal dma_free, pending
        assert pending is not None
        cost, ready, bank = pending
        end = max(dma_free, ready) + cost
        dma_free = end
        bank_ready[bank] = end
        pending = None
        return end

    for tile in timings:
        first_of_layer = tile.layer != layer
        if first_of_layer and pending is not None:
            barrier = drain()
        layer = tile.layer
        load_end = max(dma_free, bank_ready[tile.bank], barrier) + tile.load
        dma_free = load_end
        if pending is not None:
            drain()
        start = max(compute_end, load_end)
        exposed["dma_in" if first_of_layer else "stall"] += start - compute_end
        compute_end = start + tile.busy
        pending = (tile.store, compute_end, tile.bank)

    end = drain() if pending is not None else compute_end
    exposed["dma_out"] += max(0, end - compute_end)
    return exposed


def run(
    image: MemoryImage,
    knobs: Optional[SimKnobs] = None,
    *,
    functional: bool = True,
) -> Tuple[List[QuantTensor], CycleReport]:
    """Simulate ``image``; returns the output tensors (empty when timing only) and the cycle report."""
    return AcceleratorSim(image, knobs, functional=functional).run()


__all__ = [
    "AcceleratorSim",
    "COMPONENTS",
    "CycleReport",
    "L0Fifo",
    "PHASES",
    "PeMode",
    "PeState",
    "SimKnobs",
    "nlfg_stage",
    "run",
    "simulate_ck_tile",
    "simulate_deconv",
    "simulate_oxk_tile",
    "simulate_pool_tile",
    "skip_sparse_block",
    "svm_pe_pass",
]
