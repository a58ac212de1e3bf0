"""Power and energy estimation from simulator event counts.

Dynamic energy is charged per event at the 0.8 V reference and scaled by
``(V / 0.8) ** voltage_exponent``; logic events follow the logic rail and
memory events the memory rail. Leakage is a per-component table per named
operating point, interpolated log-linearly in logic voltage in between.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import least_squares

from flexsim import config
from flexsim.core.accel_sim import CycleReport
from flexsim.core.errors import EnergyModelError
from flexsim.utils.logger import logger

PathLike = Union[str, Path]

LOGIC = "logic"
MEM = "mem"

# event -> (supply rail, breakdown component)
EVENTS: Dict[str, Tuple[str, str]] = {
    "cycle": (LOGIC, "Logic"),
    "mac8": (LOGIC, "Logic"),
    "mac4": (LOGIC, "Logic"),
    "mac2": (LOGIC, "Logic"),
    "l0": (LOGIC, "Logic"),
    "index": (MEM, "Logic"),
    "instr": (MEM, "Logic"),
    "l1_weight": (MEM, "L1"),
    "l1_act": (MEM, "L1"),
    "l2": (MEM, "L2"),
    "dma_byte": (LOGIC, "DMA"),
    "mram_read": (MEM, "MRAM_A"),
    "mram_write": (MEM, "MRAM_A"),
}

LEAKAGE_COMPONENTS = ("WuC", "L2", "L2uDMA", "L1", "Logic", "DMA", "MRAM_P", "MRAM_A")

DEFAULT_DYNAMIC_PJ: Dict[str, float] = {
    "cycle": 4.0,
    "mac8": 1.55,
    "mac4": 0.5,
    "mac2": 0.25,
    "l0": 0.5,
    "index": 4.0,
    "instr": 4.0,
    "l1_weight": 4.0,
    "l1_act": 4.0,
    "l2": 8.0,
    "dma_byte": 1.0,
    "mram_read": 2.5,
    "mram_write": 25.0,
}

_EFFICIENCY_LEAKAGE_UW = {
    "WuC": 1.0,
    "L2": 40.0,
    "L2uDMA": 3.0,
    "L1": 18.0,
    "Logic": 28.0,
    "DMA": 4.0,
    "MRAM_P": 0.0,
    "MRAM_A": 0.0,
}
DEFAULT_LEAKAGE_UW: Dict[str, Dict[str, float]] = {
    "efficiency": dict(_EFFICIENCY_LEAKAGE_UW),
    "throughput": {
        name: value if name == "WuC" else value * 60.0 for name, value in _EFFICIENCY_LEAKAGE_UW.items()
    },
}


# --------------------------------------------------------------------------- #
# Operating points
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class OperatingPoint:
    name: str
    core_freq: float
    v_logic: float
    v_mem: float
    aon_freq: float = config.AON_FREQ_LOW

    def __post_init__(self) -> None:
        for key in ("core_freq", "v_logic", "v_mem", "aon_freq"):
            if not getattr(self, key) > 0:
                raise EnergyModelError("INVALID_OP_POINT", f"{self.name}: {key} must be positive")

    def with_overrides(self, overrides: Optional[Mapping[str, float]]) -> "OperatingPoint":
        if not overrides:
            return self
        values = {k: float(v) for k, v in overrides.items() if k in ("core_freq", "v_logic", "v_mem", "aon_freq")}
        name = self.name
        if "v_logic" in values or "v_mem" in values:
            # leakage tables belong to the named supply voltages
            name = f"{self.name}-custom"
        return replace(self, name=str(overrides.get("name", name)), **values)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "core_freq": self.core_freq,
            "v_logic": self.v_logic,
            "v_mem": self.v_mem,
            "aon_freq": self.aon_freq,
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "OperatingPoint":
        try:
            return cls(
                name=str(payload.get("name", "custom")),
                core_freq=float(payload["core_freq"]),
                v_logic=float(payload["v_logic"]),
                v_mem=float(payload["v_mem"]),
                aon_freq=float(payload.get("aon_freq", config.AON_FREQ_LOW)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise EnergyModelError("INVALID_OP_POINT", f"malformed operating point: {exc}") from exc


OPERATING_POINTS: Dict[str, OperatingPoint] = {
    "efficiency": OperatingPoint("efficiency", 5e6, 0.4, 0.5, config.AON_FREQ_LOW),
    "throughput": OperatingPoint("throughput", 150e6, 0.8, 0.8, config.AON_FREQ_LOW),
}

SWEEP_POINTS: Tuple[OperatingPoint, ...] = (
    OPERATING_POINTS["efficiency"],
    OperatingPoint("25MHz", 25e6, 0.5, 0.55),
    OperatingPoint("50MHz", 50e6, 0.6, 0.6),
    OperatingPoint("100MHz", 100e6, 0.7, 0.7),
    OPERATING_POINTS["throughput"],
)


def resolve_op_point(name: str, overrides: Optional[Mapping[str, float]] = None) -> OperatingPoint:
    """Named operating point with optional field overrides."""
    try:
        point = OPERATING_POINTS[name]
    except KeyError as exc:
        known = ", ".join(sorted(OPERATING_POINTS))
        raise EnergyModelError("INVALID_OP_POINT", f"unknown operating point '{name}' (known: {known})") from exc
    return point.with_overrides(overrides)


# --------------------------------------------------------------------------- #
# Parameters
# --------------------------------------------------------------------------- #


@dataclass
class EnergyParams:
    """Per-event dynamic energy (pJ at 0.8 V) and per-point leakage (uW)."""

    dynamic_pj: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_DYNAMIC_PJ))
    leakage_uw: Dict[str, Dict[str, float]] = field(
        default_factory=lambda: {point: dict(table) for point, table in DEFAULT_LEAKAGE_UW.items()}
    )
    voltage_exponent: float = 2.0

    def __post_init__(self) -> None:
        for event, value in self.dynamic_pj.items():
            if event not in EVENTS:
                raise EnergyModelError("INVALID_PARAM", f"unknown energy event '{event}'")
            if value < 0:
                raise EnergyModelError("INVALID_PARAM", f"energy of '{event}' must be >= 0")
        for point, table in self.leakage_uw.items():
            for component, value in table.items():
                if component not in LEAKAGE_COMPONENTS:
                    raise EnergyModelError("INVALID_PARAM", f"unknown leakage component '{component}'")
                if value < 0:
                    raise EnergyModelError("INVALID_PARAM", f"{point}.{component} leakage must be >= 0")

    def copy(self) -> "EnergyParams":
        return EnergyParams(
            dynamic_pj=dict(self.dynamic_pj),
            leakage_uw={point: dict(table) for point, table in self.leakage_uw.items()},
            voltage_exponent=self.voltage_exponent,
        )

    def event_energy(self, event: str, op_point: OperatingPoint) -> float:
        """Joules per event at ``op_point``."""
        if event not in self.dynamic_pj:
            raise EnergyModelError("MISSING_PARAM", f"no energy given for event '{event}'")
        rail = EVENTS[event][0]
        volts = op_point.v_logic if rail == LOGIC else op_point.v_mem
        scale = (volts / config.REFERENCE_VOLTAGE) ** self.voltage_exponent
        return self.dynamic_pj[event] * 1e-12 * scale

    def leakage(self, op_point: OperatingPoint) -> Dict[str, float]:
        """Leakage power per component in watts."""
        if op_point.name in self.leakage_uw:
            return {name: value * 1e-6 for name, value in self._table(op_point.name).items()}
        low, high = OPERATING_POINTS["efficiency"], OPERATING_POINTS["throughput"]
        if "efficiency" not in self.leakage_uw or "throughput" not in self.leakage_uw:
            raise EnergyModelError("MISSING_PARAM", f"no leakage table for operating point '{op_point.name}'")
        t = (op_point.v_logic - low.v_logic) / (high.v_logic - low.v_logic)
        lo_table, hi_table = self._table("efficiency"), self._table("throughput")
        result: Dict[str, float] = {}
        for name in LEAKAGE_COMPONENTS:
            a, b = lo_table.get(name, 0.0), hi_table.get(name, 0.0)
            if a > 0 and b > 0:
                value = a * (b / a) ** t
            else:
                value = a + (b - a) * t
            result[name] = max(value, 0.0) * 1e-6
        return result

    def _table(self, point: str) -> Dict[str, float]:
        table = self.leakage_uw[point]
        return {name: float(table.get(name, 0.0)) for name in LEAKAGE_COMPONENTS}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dynamic_pj": dict(self.dynamic_pj),
            "leakage_uw": {point: dict(table) for point, table in self.leakage_uw.items()},
            "voltage_exponent": self.voltage_exponent,
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "EnergyParams":
        unknown = set(payload) - {"dynamic_pj", "leakage_uw", "voltage_exponent"}
        if unknown:
            raise EnergyModelError("INVALID_PARAM", f"unknown parameter section(s): {', '.join(sorted(unknown))}")
        base = cls()
        dynamic = dict(base.dynamic_pj)
        dynamic.update({k: float(v) for k, v in (payload.get("dynamic_pj") or {}).items()})
        leakage = {point: dict(table) for point, table in base.leakage_uw.items()}
        for point, table in (payload.get("leakage_uw") or {}).items():
            leakage.setdefault(point, {}).update({k: float(v) for k, v in table.items()})
        return cls(
            dynamic_pj=dynamic,
            leakage_uw=leakage,
            voltage_exponent=float(payload.get("voltage_exponent", base.voltage_exponent)),
        )

    @classmethod
    def load(cls, path: PathLike) -> "EnergyParams":
        source = Path(path)
        try:
            payload = json.loads(source.read_text(encoding="utf-8"))
        except OSError as exc:
            raise EnergyModelError("PARAM_FILE_ERROR", f"cannot read {source}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise EnergyModelError("PARAM_FILE_ERROR", f"{source}: invalid JSON ({exc})") from exc
        if not isinstance(payload, dict):
            raise EnergyModelError("PARAM_FILE_ERROR", f"{source}: top level must be an object")
        return cls.from_dict(payload)

    def save(self, path: PathLike) -> Path:
        target = Path(path)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        except OSError as exc:
            raise EnergyModelError("PARAM_FILE_ERROR", f"cannot write {target}: {exc}") from exc
        return target


# --------------------------------------------------------------------------- #
# Estimation
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class EnergyReport:
    op_point: OperatingPoint
    cycles: int
    time_s: float
    dynamic_w: float
    leakage_w: float
    breakdown_w: Dict[str, float]
    gops: float
    gops_nominal: float

    @property
    def power_w(self) -> float:
        return self.dynamic_w + self.leakage_w

    @property
    def energy_j(self) -> float:
        """Energy of one program run (one inference)."""
        return self.power_w * self.time_s

    @property
    def tops_per_w(self) -> float:
        """Effective (executed, non-zero) operations per joule, in TOPS/W."""
        return self.gops / self.power_w / 1e3 if self.power_w else 0.0

    @property
    def tops_per_w_nominal(self) -> float:
        return self.gops_nominal / self.power_w / 1e3 if self.power_w else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "op_point": self.op_point.to_dict(),
            "cycles": self.cycles,
            "time_s": self.time_s,
            "power_w": self.power_w,
            "dynamic_w": self.dynamic_w,
            "leakage_w": self.leakage_w,
            "energy_j": self.energy_j,
            "breakdown_w": dict(self.breakdown_w),
            "gops": self.gops,
            "gops_nominal": self.gops_nominal,
            "tops_per_w": self.tops_per_w,
            "tops_per_w_nominal": self.tops_per_w_nominal,
        }


def event_counts(report: CycleReport) -> Dict[str, int]:
    counts = {
        "cycle": report.total_cycles,
        "l0": report.accesses.get("L0", 0),
        "index": report.accesses.get("index_mem", 0),
        "instr": report.accesses.get("instr_mem", 0),
        "l1_weight": report.accesses.get("L1_weight", 0),
        "l1_act": report.accesses.get("L1_act", 0),
        "l2": report.accesses.get("L2", 0),
        "dma_byte": report.dma_bytes,
    }
    for bits, macs in report.macs_by_precision.items():
        counts[f"mac{bits}"] = counts.get(f"mac{bits}", 0) + macs
    return counts


def estimate(report: CycleReport, op_point: OperatingPoint, params: Optional[EnergyParams] = None) -> EnergyReport:
    """Average power over one run of ``report`` at ``op_point``."""

    params = params or EnergyParams()
    cycles = report.total_cycles
    time_s = cycles / op_point.core_freq
    leakage = params.leakage(op_point)
    breakdown = dict(leakage)
    dynamic_w = 0.0
    if cycles:
        for event, count in event_counts(report).items():
            if not count:
                continue
            watts = count * params.event_energy(event, op_point) / time_s
            dynamic_w += watts
            component = EVENTS[event][1]
            breakdown[component] = breakdown.get(component, 0.0) + watts
    ops_rate = config.OPS_PER_MAC * op_point.core_freq / cycles if cycles else 0.0
    return EnergyReport(
        op_point=op_point,
        cycles=cycles,
        time_s=time_s,
        dynamic_w=dynamic_w,
        leakage_w=sum(leakage.values()),
        breakdown_w=breakdown,
        gops=report.mac_ops_effective * ops_rate / 1e9,
        gops_nominal=report.mac_ops_nominal * ops_rate / 1e9,
    )


# --------------------------------------------------------------------------- #
# Calibration
# --------------------------------------------------------------------------- #

LEAK_PREFIX = "leak:"
DEFAULT_FREE_PARAMS = ("mac8", "mac4", "mac2", "leak:efficiency")


@dataclass(frozen=True)
class CalibrationTarget:
    """A simulated run and the power measured for it."""

    name: str
    report: CycleReport
    op_point: OperatingPoint
    power_w: float


@dataclass
class CalibrationResult:
    params: EnergyParams
    fitted: Dict[str, float]
    residuals: Dict[str, float]
    predictions_w: Dict[str, float]

    @property
    def rms_log_error(self) -> float:
        values = list(self.residuals.values())
        return math.sqrt(sum(v * v for v in values) / len(values)) if values else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "params": self.params.to_dict(),
            "fitted": dict(self.fitted),
            "residuals": dict(self.residuals),
            "predictions_w": dict(self.predictions_w),
            "rms_log_error": self.rms_log_error,
        }


def _apply(base: EnergyParams, free: Sequence[str], values: Sequence[float]) -> EnergyParams:
    params = base.copy()
    for name, value in zip(free, values):
        if name.startswith(LEAK_PREFIX):
            point = name[len(LEAK_PREFIX) :]
            params.leakage_uw[point] = {k: v * value for k, v in base.leakage_uw[point].items()}
        else:
            params.dynamic_pj[name] = value
    return params


def calibrate(
    targets: Sequence[CalibrationTarget],
    free_params: Sequence[str] = DEFAULT_FREE_PARAMS,
    base: Optional[EnergyParams] = None,
) -> CalibrationResult:
    """Fit ``free_params`` to measured powers by least squares on log power.

    Dynamic names refer to ``dynamic_pj`` entries; ``leak:<point>`` scales a
    whole leakage table by a fitted factor.
    """

    base = base or EnergyParams()
    free = list(dict.fromkeys(free_params))
    if not free:
        raise EnergyModelError("UNDERDETERMINED", "no free parameters given")
    if len(targets) < len(free):
        raise EnergyModelError(
            "UNDERDETERMINED", f"{len(targets)} target(s) cannot determine {len(free)} free parameter(s)"
        )
    for name in free:
        if name.startswith(LEAK_PREFIX):
            if name[len(LEAK_PREFIX) :] not in base.leakage_uw:
                raise EnergyModelError("MISSING_PARAM", f"no leakage table to scale for '{name}'")
        elif name not in EVENTS:
            raise EnergyModelError("MISSING_PARAM", f"unknown free parameter '{name}'")

    start = [1.0 if name.startswith(LEAK_PREFIX) else base.dynamic_pj.get(name, 1.0) for name in free]
    x0 = np.log(np.maximum(start, 1e-6))
    measured = np.log([target.power_w for target in targets])

    def residuals(x: np.ndarray) -> np.ndarray:
        params = _apply(base, free, np.exp(x))
        predicted = [estimate(t.report, t.op_point, params).power_w for t in targets]
        return np.log(predicted) - measured

    solution = least_squares(residuals, x0, method="trf", xtol=1e-12, ftol=1e-12)
    fitted_values = np.exp(solution.x)
    params = _apply(base, free, fitted_values)
    final = residuals(solution.x)
    predictions = {t.name: estimate(t.report, t.op_point, params).power_w for t in targets}
    result = CalibrationResult(
        params=params,
        fitted={name: float(value) for name, value in zip(free, fitted_values)},
        residuals={t.name: float(r) for t, r in zip(targets, final)},
        predictions_w=predictions,
    )
    logger.debug("Calibration fitted %s (rms log error %.4f)", result.fitted, result.rms_log_error)
    return result


# --------------------------------------------------------------------------- #
# Sweeps
# --------------------------------------------------------------------------- #

SWEEP_COLUMNS = ("name", "core_freq_hz", "v_logic", "v_mem", "power_w", "gops", "tops_per_w", "energy_j")


def sweep(
    report: CycleReport,
    op_points: Sequence[OperatingPoint] = SWEEP_POINTS,
    params: Optional[EnergyParams] = None,
) -> List[EnergyReport]:
    """Efficiency/throughput trade-off of one run across operating points, in the given order."""
    params = params or EnergyParams()
    return [estimate(report, point, params) for point in op_points]


def load_op_points(path: PathLike) -> List[OperatingPoint]:
    source = Path(path)
    try:
        payload = json.loads(source.read_text(encoding="utf-8"))
    except OSError as exc:
        raise EnergyModelError("PARAM_FILE_ERROR", f"cannot read {source}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise EnergyModelError("PARAM_FILE_ERROR", f"{source}: invalid JSON ({exc})") from exc
    records = payload.get("points", payload) if isinstance(payload, dict) else payload
    if not isinstance(records, list) or not records:
        raise EnergyModelError("PARAM_FILE_ERROR", f"{source}: expected a non-empty list of points")
    return [OperatingPoint.from_dict(record) for record in records]


def sweep_row(row: EnergyReport) -> List[str]:
    point = row.op_point
    return [
        point.name,
        f"{point.core_freq:.6g}",
        f"{point.v_logic:.3f}",
        f"{point.v_mem:.3f}",
        f"{row.power_w:.6e}",
        f"{row.gops:.6f}",
        f"{row.tops_per_w:.6f}",
        f"{row.energy_j:.6e}",
    ]


def write_sweep_csv(rows: Sequence[EnergyReport], path: PathLike) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(SWEEP_COLUMNS)
            writer.writerows(sweep_row(row) for row in rows)
    except OSError as exc:
        raise EnergyModelError(
            "IO_ERROR", f"cannot write {target}: {exc}", exit_code=config.EXIT_IO
        ) from exc
    return target


__all__ = [
    "CalibrationResult",
    "CalibrationTarget",
    "DEFAULT_FREE_PARAMS",
    "EVENTS",
    "EnergyParams",
    "EnergyReport",
    "LEAKAGE_COMPONENTS",
    "OPERATING_POINTS",
    "OperatingPoint",
    "SWEEP_POINTS",
    "calibrate",
    "estimate",
    "event_counts",
    "load_op_points",
    "resolve_op_point",
    "sweep",
    "sweep_row",
    "write_sweep_csv",
]
