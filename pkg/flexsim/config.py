"""Global constants and internal defaults for flexsim."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Tuple

# Project metadata ---------------------------------------------------------

VERSION = "0.4.0"
APP_NAME = "flexsim"

# Paths --------------------------------------------------------------------

HOME_DIR = Path.home()
CONFIG_DIR = HOME_DIR / ".config" / "flexsim"
DEFAULT_OUTPUT_DIR = Path("flexsim-out")

# PE array -----------------------------------------------------------------

ARRAY_ROWS = 8
ARRAY_COLS = 8
SUPPORTED_PRECISIONS: Tuple[int, ...] = (8, 4, 2)
ACC_PRECISION = 32
# MACs per PE per cycle, keyed by operand precision
LANES_BY_PRECISION: Dict[int, int] = {8: 1, 4: 2, 2: 4}

# Memories -----------------------------------------------------------------

KB = 1024
L2_BYTES = 512 * KB
L2_RETENTIVE_BYTES = 64 * KB
L2_MAIN_BYTES = L2_BYTES - L2_RETENTIVE_BYTES
L1_WEIGHT_BYTES = 64 * KB
L1_ACT_BYTES = 64 * KB
L1_BANK_BYTES = 32 * KB
FIFO_ENTRIES = 16
SPARSITY_BLOCK = 8
INDEX_WORD_BITS = 32
DEFAULT_INSTR_MEM_BYTES = 4 * KB
UCODE_BITS = 256
UCODE_BYTES = UCODE_BITS // 8
# largest layer-wide values the instruction word can carry
UCODE_LIMITS: Dict[str, int] = {
    "OX": 0xFFFF,
    "FX": 0xFFFF,
    "FY": 0xFFFF,
    "stride": 15,
    "dilation": 4095,
    "upsample": 4,
    "pad": 255,
}
MRAM_BYTES = 512 * KB

# Simulator knobs (defaults) -----------------------------------------------

DEFAULT_KNOBS: Dict[str, object] = {
    "prologue_cycles": 1,
    "prologue_overlap": 0.75,
    "writeback_overlap": True,
    "decode_cycles": 4,
    "dma_bytes_per_cycle": 8,
    "index_fetch_cycles": 1,
    "l1_resident": False,
    "deconv_mode": "skip",
}
WRITEBACK_CYCLES = 8
DECONV_MODES = ("skip", "naive")

# Operating points ---------------------------------------------------------

REFERENCE_VOLTAGE = 0.8
DEFAULT_OP_POINT = "efficiency"
OPS_PER_MAC = 2

# Wake-up controller -------------------------------------------------------

WAKE_CYCLES = 26
AON_FREQ_LOW = 33_000.0
AON_FREQ_HIGH = 40_000_000.0

# File formats -------------------------------------------------------------

TENSOR_MAGIC = b"FLEXTNSR"
IMAGE_MAGIC = b"FLEXIMG1"
BUNDLE_MAGIC = b"FLEXGLD1"

# Exit codes ---------------------------------------------------------------

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_IO = 2
EXIT_CONFIG = 3
EXIT_CAPACITY = 4

# Ensure the config directory exists (best-effort; ignore permission errors) --
try:
    CONFIG_DIR.mkdir(parents=True, exist_ok=True)
except OSError:
    # Read-only homes still need imports to succeed.
    pass

# Convenience re-exports ----------------------------------------------------
# Imported lazily to avoid circular imports during module initialization.
from flexsim.core.config_loader import ConfigLoader, ResolvedConfig, UserConfig  # noqa: E402,F401
from flexsim.core.errors import ConfigError  # noqa: E402,F401

__all__ = [
    "ConfigLoader",
    "ConfigError",
    "ResolvedConfig",
    "UserConfig",
    "VERSION",
    "APP_NAME",
    "HOME_DIR",
    "CONFIG_DIR",
    "DEFAULT_OUTPUT_DIR",
    "ARRAY_ROWS",
    "ARRAY_COLS",
    "SUPPORTED_PRECISIONS",
    "ACC_PRECISION",
    "LANES_BY_PRECISION",
    "KB",
    "L2_BYTES",
    "L2_RETENTIVE_BYTES",
    "L2_MAIN_BYTES",
    "L1_WEIGHT_BYTES",
    "L1_ACT_BYTES",
    "L1_BANK_BYTES",
    "FIFO_ENTRIES",
    "SPARSITY_BLOCK",
    "INDEX_WORD_BITS",
    "DEFAULT_INSTR_MEM_BYTES",
    "UCODE_BITS",
    "UCODE_BYTES",
    "UCODE_LIMITS",
    "MRAM_BYTES",
    "DEFAULT_KNOBS",
    "WRITEBACK_CYCLES",
    "DECONV_MODES",
    "REFERENCE_VOLTAGE",
    "DEFAULT_OP_POINT",
    "OPS_PER_MAC",
    "WAKE_CYCLES",
    "AON_FREQ_LOW",
    "AON_FREQ_HIGH",
    "TENSOR_MAGIC",
    "IMAGE_MAGIC",
    "BUNDLE_MAGIC",
    "EXIT_OK",
    "EXIT_MISMATCH",
    "EXIT_IO",
    "EXIT_CONFIG",
    "EXIT_CAPACITY",
]
