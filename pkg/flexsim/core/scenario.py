"""Timed application scenarios: sensing, host compute, inference and sleep.

A script is an ordered list of phases repeated ``repeat`` times. The engine
walks it with a :class:`~flexsim.core.wuc.Wuc`, turning each phase into
piecewise-constant power segments, and reports the trace plus its average.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

from flexsim import config
from flexsim.core.accel_sim import SimKnobs
from flexsim.core.accel_sim import run as simulate
from flexsim.core.compiler import MemConfig, MemoryImage, link_program
from flexsim.core.energy_model import EnergyParams, EnergyReport, estimate, resolve_op_point
from flexsim.core.errors import EnergyModelError, FlexsimError, ScenarioError
from flexsim.core.image_io import load_image
from flexsim.core.oracle import svm_decision_ref
from flexsim.core.tensor_io import unpack_values
from flexsim.core.wuc import (
    SENSING_REFERENCE_FS,
    PowerMode,
    Wuc,
    WucParams,
    canonical_mode,
    mode_rank,
    sensing_power,
    sleep_power,
    wake_latency,
    write_events_csv,
)
from flexsim.core.workload_ir import Norm, QuantTensor, SvmModel
from flexsim.core.workloads import WORKLOADS
from flexsim.utils.logger import logger

PathLike = Union[str, Path]

# MRAM writes one byte per core cycle
MRAM_WRITE_BYTES_PER_CYCLE = 1
SENSE_MODES = (PowerMode.DATA_ACQ, PowerMode.LP_DATA_ACQ)
SLEEP_MODES = (PowerMode.DATA_ACQ, PowerMode.LP_DATA_ACQ, PowerMode.DEEP_SLEEP)


class PhaseKind(str, Enum):
    SENSE = "SENSE"
    HOST_COMPUTE = "HOST_COMPUTE"
    ACCEL_INFER = "ACCEL_INFER"
    SLEEP = "SLEEP"
    STORE_MRAM = "STORE_MRAM"


# --------------------------------------------------------------------------- #
# Phases
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class SensePhase:
    """Windowed acquisition through the uDMA into L2.

    ``concurrent`` acquisition keeps running under the phases that follow;
    whatever is left of the window afterwards is spent in ``mode``.
    """

    mode: PowerMode = PowerMode.LP_DATA_ACQ
    sample_rate: float = 44_100.0
    window: float = 2.0
    bytes_per_sample: int = 2
    batches: int = 1
    concurrent: bool = False
    label: str = "sense"
    kind: PhaseKind = field(default=PhaseKind.SENSE, init=False)

    @property
    def batch_bytes(self) -> int:
        return int(round(self.sample_rate * self.window * self.bytes_per_sample / self.batches))


@dataclass(frozen=True)
class HostComputePhase:
    """Host-core work modelled as a fixed power level over a duration.

    ``task="svm_decision"`` also evaluates the one-class SVM decision on the
    norms the preceding inference phase left in L2.
    """

    label: str
    power_w: float
    seconds: Optional[float] = None
    cycles: Optional[int] = None
    core_freq: float = 5e6
    task: Optional[str] = None
    kind: PhaseKind = field(default=PhaseKind.HOST_COMPUTE, init=False)

    @property
    def duration(self) -> float:
        if self.seconds is not None:
            return float(self.seconds)
        return float(self.cycles or 0) / self.core_freq


@dataclass(frozen=True)
class AccelInferPhase:
    """``repeat`` back-to-back runs of a program: a built-in workload name or an ``.fxi`` path."""

    program: str
    op_point: str = config.DEFAULT_OP_POINT
    repeat: int = 1
    label: str = ""
    kind: PhaseKind = field(default=PhaseKind.ACCEL_INFER, init=False)


@dataclass(frozen=True)
class SleepPhase:
    """Idle in a low-power mode for ``duration`` s, until the iteration lasts
    ``period`` s (RTC wake), or long enough that active time is ``duty`` of the iteration."""

    mode: PowerMode = PowerMode.DEEP_SLEEP
    duration: Optional[float] = None
    period: Optional[float] = None
    duty: Optional[float] = None
    label: str = "sleep"
    kind: PhaseKind = field(default=PhaseKind.SLEEP, init=False)


@dataclass(frozen=True)
class StoreMramPhase:
    """Write ``nbytes`` to MRAM; ``None`` stores the outputs of the preceding inference phase."""

    nbytes: Optional[int] = None
    label: str = "store_mram"
    kind: PhaseKind = field(default=PhaseKind.STORE_MRAM, init=False)


Phase = Union[SensePhase, HostComputePhase, AccelInferPhase, SleepPhase, StoreMramPhase]


@dataclass(frozen=True)
class ScenarioScript:
    name: str
    phases: Tuple[Phase, ...]
    repeat: int = 1

    def to_dict(self) -> Dict[str, Any]:
        phases = []
        for phase in self.phases:
            record = {key: value for key, value in asdict(phase).items() if value is not None}
            record["kind"] = phase.kind.value
            if "mode" in record:
                record["mode"] = PowerMode(record["mode"]).value
            phases.append(record)
        return {"name": self.name, "repeat": self.repeat, "phases": phases}


# --------------------------------------------------------------------------- #
# Trace
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class TraceSegment:
    start: float
    duration: float
    power_w: float
    mode: str
    label: str
    sleeping: bool = False

    @property
    def energy_j(self) -> float:
        return self.power_w * self.duration


@dataclass
class PowerTrace:
    name: str
    segments: List[TraceSegment] = field(default_factory=list)
    decisions: List[float] = field(default_factory=list)

    @property
    def total_time(self) -> float:
        return sum(s.duration for s in self.segments)

    @property
    def energy_j(self) -> float:
        return sum(s.energy_j for s in self.segments)

    @property
    def average_power_w(self) -> float:
        total = self.total_time
        return self.energy_j / total if total > 0 else 0.0

    @property
    def duty_cycle(self) -> float:
        """Fraction of time spent outside sleep segments."""
        total = self.total_time
        if total <= 0:
            return 0.0
        awake = sum(s.duration for s in self.segments if not s.sleeping)
        return awake / total

    def points(self) -> List[Tuple[float, float, str]]:
        """(time s, power W, mode) at each segment start."""
        return [(s.start, s.power_w, s.mode) for s in self.segments]

    def phase_energy(self) -> Dict[str, float]:
        energy: Dict[str, float] = {}
        for segment in self.segments:
            energy[segment.label] = energy.get(segment.label, 0.0) + segment.energy_j
        return energy

    def summary(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "total_time_s": self.total_time,
            "energy_j": self.energy_j,
            "average_power_w": self.average_power_w,
            "duty_cycle": self.duty_cycle,
            "phase_energy_j": self.phase_energy(),
            "svm_decisions": list(self.decisions),
        }


def write_trace_csv(trace: PowerTrace, path: PathLike) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["t_seconds", "power_watts", "mode"])
            for start, power, mode in trace.points():
                writer.writerow([f"{start:.9f}", f"{power:.9e}", mode])
            if trace.segments:
                last = trace.segments[-1]
                writer.writerow([f"{last.start + last.duration:.9f}", f"{last.power_w:.9e}", last.mode])
    except OSError as exc:
        raise ScenarioError("IO_ERROR", f"cannot write {target}: {exc}", exit_code=config.EXIT_IO) from exc
    return target


# --------------------------------------------------------------------------- #
# Closed forms
# --------------------------------------------------------------------------- #


def duty_cycle_average(p_active: float, p_sleep: float, duty: float) -> float:
    if not 0.0 <= duty <= 1.0:
        raise ScenarioError("RANGE_ERROR", f"duty cycle {duty} outside [0, 1]")
    return p_active * duty + p_sleep * (1.0 - duty)


# --------------------------------------------------------------------------- #
# Engine
# --------------------------------------------------------------------------- #


class ScenarioEngine:
    """Runs one script at a time; keeps the WuC event log of the last run."""

    def __init__(
        self,
        params: Optional[EnergyParams] = None,
        wuc_params: Optional[WucParams] = None,
        *,
        knobs: Optional[SimKnobs] = None,
        mem_config: Optional[MemConfig] = None,
        aon_freq: float = config.AON_FREQ_LOW,
        wake_energy_j: float = 0.0,
        base_dir: Optional[Path] = None,
    ) -> None:
        self.params = params or EnergyParams()
        self.wuc_params = wuc_params or WucParams()
        self.knobs = knobs or SimKnobs()
        self.mem_config = mem_config
        self.aon_freq = aon_freq
        self.wake_energy_j = wake_energy_j
        self.base_dir = base_dir or Path.cwd()
        self.wuc = Wuc(aon_freq=aon_freq)
        self._images: Dict[str, MemoryImage] = {}
        self._cache: Dict[Tuple[str, str], Tuple[EnergyReport, int]] = {}

    # -- helpers ---------------------------------------------------------------

    def _image(self, program: str) -> MemoryImage:
        if program in self._images:
            return self._images[program]
        if program in WORKLOADS:
            image, _ = link_program(WORKLOADS[program](), self.mem_config)
            self._images[program] = image
            return image
        path = Path(program)
        if not path.is_absolute():
            path = self.base_dir / path
        if not path.exists():
            raise ScenarioError("UNKNOWN_PROGRAM", f"'{program}' is neither a built-in workload nor a file")
        self._images[program] = load_image(path)
        return self._images[program]

    def inference(self, program: str, op_point: str) -> Tuple[EnergyReport, int]:
        """Energy report of one run plus the bytes of its final output."""
        key = (program, op_point)
        if key not in self._cache:
            image = self._image(program)
            _, report = simulate(image, self.knobs, functional=False)
            try:
                energy = estimate(report, resolve_op_point(op_point), self.params)
            except EnergyModelError as exc:
                raise ScenarioError("UNCALIBRATED", f"{program} at {op_point}: {exc.message}") from exc
            output = image.symbols.get(str(image.meta.get("output", "")))
            out_bytes = output.nbytes if output is not None else 0
            self._cache[key] = (energy, out_bytes)
        return self._cache[key]

    def _mode_power(self, mode: PowerMode, fs: float = SENSING_REFERENCE_FS) -> float:
        return sleep_power(mode, self.wuc_params, fs=fs, aon_freq=self.aon_freq)

    def _active_floor(self, op_point: str) -> float:
        """Leakage of the active SoC at ``op_point``."""
        return sum(self.params.leakage(resolve_op_point(op_point)).values())

    # -- run -------------------------------------------------------------------

    def run(self, script: ScenarioScript) -> PowerTrace:
        if script.repeat < 1:
            raise ScenarioError("SCRIPT_ERROR", "repeat must be >= 1")
        trace = PowerTrace(name=script.name)
        self.wuc = Wuc(aon_freq=self.aon_freq)
        state = _RunState(now=0.0, mode=PowerMode.FULL_ACTIVE, power=0.0)

        for iteration in range(script.repeat):
            state.iteration_start = state.now
            state.sleep_time = 0.0
            for phase in script.phases:
                self._phase(phase, state, trace)
            self._finish_window(state, trace)
            logger.debug("%s iteration %d ends at %.6f s", script.name, iteration, state.now)

        logger.info(
            "Scenario %s: %.3f s, average %.2f uW", script.name, trace.total_time, trace.average_power_w * 1e6
        )
        return trace

    def _emit(
        self,
        state: "_RunState",
        trace: PowerTrace,
        duration: float,
        power: float,
        label: str,
        *,
        sleeping: bool = False,
    ) -> None:
        if duration <= 0:
            return
        trace.segments.append(TraceSegment(state.now, duration, power, state.mode.value, label, sleeping))
        state.now += duration
        self.wuc.advance(duration)

    def _enter(self, state: "_RunState", trace: PowerTrace, target: PowerMode) -> None:
        """Switch modes, routing through FULL_ACTIVE when there is no direct edge."""
        current = canonical_mode(state.mode)
        wanted = canonical_mode(target)
        if current == wanted:
            return
        if current != PowerMode.FULL_ACTIVE and wanted != PowerMode.FULL_ACTIVE:
            self._enter(state, trace, PowerMode.FULL_ACTIVE)
            current = PowerMode.FULL_ACTIVE
        waking = mode_rank(wanted) > mode_rank(current)
        self.wuc.request_mode(target)
        if waking:
            # the controller has already counted the wake cycles
            latency = wake_latency(self.aon_freq)
            power = state.power + self.wake_energy_j / latency
            trace.segments.append(TraceSegment(state.now, latency, power, state.mode.value, "wake"))
            state.now += latency
        state.mode = target

    def _finish_window(self, state: "_RunState", trace: PowerTrace) -> None:
        if state.window_end is None or state.sense is None:
            return
        remainder = state.window_end - state.now
        sense = state.sense
        state.window_end = None
        state.sense = None
        if remainder > 0:
            self._enter(state, trace, sense.mode)
            state.power = self._mode_power(sense.mode, sense.sample_rate)
            self._emit(state, trace, remainder, state.power, sense.label)

    def _phase(self, phase: Phase, state: "_RunState", trace: PowerTrace) -> None:
        extra = sensing_power(state.sense.sample_rate, self.wuc_params) if state.sense else 0.0

        if isinstance(phase, SensePhase):
            self._check_sense(phase)
            self._finish_window(state, trace)
            if phase.concurrent:
                state.sense = phase
                state.window_end = state.now + phase.window
                return
            self._enter(state, trace, phase.mode)
            state.power = self._mode_power(phase.mode, phase.sample_rate)
            self._emit(state, trace, phase.window, state.power, phase.label)

        elif isinstance(phase, HostComputePhase):
            if phase.power_w < 0 or phase.duration < 0:
                raise ScenarioError("SCRIPT_ERROR", f"{phase.label}: power and duration must be >= 0")
            self._enter(state, trace, PowerMode.FULL_ACTIVE)
            state.power = phase.power_w + extra
            self._emit(state, trace, phase.duration, state.power, phase.label)
            if phase.task is not None:
                trace.decisions.extend(self._host_task(phase.task, state))

        elif isinstance(phase, AccelInferPhase):
            if phase.repeat < 1:
                raise ScenarioError("SCRIPT_ERROR", f"{phase.program}: repeat must be >= 1")
            energy, out_bytes = self.inference(phase.program, phase.op_point)
            self._enter(state, trace, PowerMode.FULL_ACTIVE)
            state.power = energy.power_w + extra
            state.last_output_bytes = out_bytes * phase.repeat
            state.last_program = phase.program
            state.op_point = phase.op_point
            self._emit(state, trace, energy.time_s * phase.repeat, state.power, phase.label or phase.program)

        elif isinstance(phase, StoreMramPhase):
            nbytes = state.last_output_bytes if phase.nbytes is None else phase.nbytes
            if nbytes < 0:
                raise ScenarioError("SCRIPT_ERROR", "cannot store a negative byte count")
            if nbytes > config.MRAM_BYTES:
                raise ScenarioError("CAPACITY_ERROR", f"{nbytes} B exceed the {config.MRAM_BYTES} B MRAM")
            point = resolve_op_point(state.op_point)
            duration = nbytes / (MRAM_WRITE_BYTES_PER_CYCLE * point.core_freq)
            if duration <= 0:
                return
            self._enter(state, trace, PowerMode.FULL_ACTIVE)
            write_j = nbytes * self.params.event_energy("mram_write", point)
            state.power = self._active_floor(state.op_point) + write_j / duration + extra
            self._emit(state, trace, duration, state.power, phase.label)

        elif isinstance(phase, SleepPhase):
            if PowerMode(phase.mode) not in SLEEP_MODES:
                raise ScenarioError("SCRIPT_ERROR", f"cannot sleep in {PowerMode(phase.mode).value}")
            self._finish_window(state, trace)
            duration = self._sleep_duration(phase, state)
            self._enter(state, trace, phase.mode)
            state.power = self._mode_power(phase.mode)
            self._emit(state, trace, duration, state.power, phase.label, sleeping=True)
            state.sleep_time += duration

        else:  # pragma: no cover - exhaustive over Phase
            raise ScenarioError("SCRIPT_ERROR", f"unknown phase {phase!r}")

    def _host_task(self, task: str, state: "_RunState") -> List[float]:
        if task != "svm_decision":
            raise ScenarioError("SCRIPT_ERROR", f"unknown host task '{task}'")
        if state.last_program is None:
            raise ScenarioError("SCRIPT_ERROR", "svm_decision needs a preceding ACCEL_INFER phase")
        return svm_decisions(self._image(state.last_program), self.knobs)

    @staticmethod
    def _check_sense(phase: SensePhase) -> None:
        if PowerMode(phase.mode) not in SENSE_MODES:
            raise ScenarioError("SCRIPT_ERROR", f"sensing runs in DATA_ACQ or LP_DATA_ACQ, not {phase.mode}")
        if phase.sample_rate <= 0 or phase.window <= 0 or phase.batches < 1 or phase.bytes_per_sample < 1:
            raise ScenarioError("SCRIPT_ERROR", f"{phase.label}: rate, window, batches and sample size must be positive")
        capacity = config.L2_RETENTIVE_BYTES if phase.mode == PowerMode.LP_DATA_ACQ else config.L2_BYTES
        if phase.batch_bytes > capacity:
            raise ScenarioError(
                "CAPACITY_ERROR",
                f"{phase.label}: {phase.batch_bytes} B per batch exceed the {capacity} B kept in {phase.mode.value}",
            )

    @staticmethod
    def _sleep_duration(phase: SleepPhase, state: "_RunState") -> float:
        given = [v for v in (phase.duration, phase.period, phase.duty) if v is not None]
        if len(given) != 1:
            raise ScenarioError("SCRIPT_ERROR", "a sleep phase takes exactly one of duration, period, duty")
        elapsed = state.now - state.iteration_start
        if phase.duration is not None:
            if phase.duration < 0:
                raise ScenarioError("RANGE_ERROR", "sleep duration must be >= 0")
            return float(phase.duration)
        if phase.period is not None:
            return max(0.0, float(phase.period) - elapsed)
        duty = float(phase.duty)  # type: ignore[arg-type]
        if not 0.0 < duty <= 1.0:
            raise ScenarioError("RANGE_ERROR", f"duty cycle {duty} outside (0, 1]")
        active = elapsed - state.sleep_time
        return active / duty - elapsed


@dataclass
class _RunState:
    now: float
    mode: PowerMode
    power: float
    iteration_start: float = 0.0
    sleep_time: float = 0.0
    sense: Optional[SensePhase] = None
    window_end: Optional[float] = None
    last_output_bytes: int = 0
    last_program: Optional[str] = None
    op_point: str = config.DEFAULT_OP_POINT


def svm_model_from_image(image: MemoryImage) -> SvmModel:
    """Rebuild the SVM of the last SVM_NORM layer from the image meta and its L2 support vectors."""
    records = [layer for layer in image.meta.get("layers", []) if layer.get("svm")]
    if not records:
        raise ScenarioError("SCRIPT_ERROR", f"{image.meta.get('name', 'image')} has no SVM layer")
    record = records[-1]
    symbol = image.symbols[record["weights"]]
    raw = image.l2_init[symbol.offset : symbol.offset + symbol.nbytes]
    count = symbol.shape[0] * symbol.shape[1]
    support = unpack_values(raw, symbol.precision, count).reshape(symbol.shape)
    params = record["svm"]
    return SvmModel(
        support_vectors=QuantTensor.from_array(support, symbol.precision),
        alphas=tuple(params["alphas"]),
        sigma=float(params["sigma"]),
        bias=float(params["bias"]),
        norm=Norm(params["norm"]),
    )


def svm_decisions(image: MemoryImage, knobs: Optional[SimKnobs] = None) -> List[float]:
    """Host post-processing: one decision value per query row of the simulated norms."""
    model = svm_model_from_image(image)
    outputs, _ = simulate(image, knobs, functional=True)
    norms = outputs[-1].data.reshape(-1, model.n_vectors)
    return [svm_decision_ref(row, model) for row in norms]


def run_scenario(script: ScenarioScript, engine: Optional[ScenarioEngine] = None) -> PowerTrace:
    return (engine or ScenarioEngine()).run(script)


# --------------------------------------------------------------------------- #
# Presets
# --------------------------------------------------------------------------- #


def preset_kws(*, window: float = 2.0, duty: Optional[float] = None, repeat: int = 1) -> ScenarioScript:
    """Keyword spotting: continuous LP acquisition while the TCN processes 16 batches."""
    phases: List[Phase] = [
        SensePhase(
            mode=PowerMode.LP_DATA_ACQ,
            sample_rate=44_100.0,
            window=window,
            bytes_per_sample=2,
            batches=16,
            concurrent=True,
            label="i2s",
        ),
        AccelInferPhase(program="tcn-kws", repeat=16, label="tcn"),
        StoreMramPhase(),
    ]
    if duty is not None:
        phases.append(SleepPhase(mode=PowerMode.DEEP_SLEEP, duty=duty))
    return ScenarioScript(name="kws", phases=tuple(phases), repeat=repeat)


def preset_machine_monitoring(
    *,
    window: float = 1.0,
    duty: Optional[float] = 0.05,
    mfec_seconds: float = 4.0,
    mfec_power_w: float = 185e-6,
    repeat: int = 1,
) -> ScenarioScript:
    """Machine monitoring: LP acquisition, MFEC features on the host, CAE, then deep sleep."""
    phases: List[Phase] = [
        SensePhase(
            mode=PowerMode.LP_DATA_ACQ, sample_rate=16_000.0, window=window, bytes_per_sample=2, label="sense"
        ),
        HostComputePhase(label="mfec", power_w=mfec_power_w, seconds=mfec_seconds),
        AccelInferPhase(program="cae", label="cae"),
    ]
    if duty is not None:
        phases.append(SleepPhase(mode=PowerMode.DEEP_SLEEP, duty=duty))
    return ScenarioScript(name="machine-monitoring", phases=tuple(phases), repeat=repeat)


PRESETS = {"kws": preset_kws, "machine-monitoring": preset_machine_monitoring}


# --------------------------------------------------------------------------- #
# Script files
# --------------------------------------------------------------------------- #

_PHASE_TYPES = {
    PhaseKind.SENSE: SensePhase,
    PhaseKind.HOST_COMPUTE: HostComputePhase,
    PhaseKind.ACCEL_INFER: AccelInferPhase,
    PhaseKind.SLEEP: SleepPhase,
    PhaseKind.STORE_MRAM: StoreMramPhase,
}


def phase_from_dict(payload: Mapping[str, Any]) -> Phase:
    record = dict(payload)
    try:
        kind = PhaseKind(str(record.pop("kind")).upper())
    except (KeyError, ValueError) as exc:
        raise ScenarioError("SCRIPT_ERROR", f"phase needs a valid 'kind' ({exc})") from exc
    if "mode" in record:
        try:
            record["mode"] = PowerMode(str(record["mode"]).upper())
        except ValueError as exc:
            raise ScenarioError("SCRIPT_ERROR", f"unknown power mode {record['mode']!r}") from exc
    try:
        return _PHASE_TYPES[kind](**record)  # type: ignore[arg-type]
    except TypeError as exc:
        raise ScenarioError("SCRIPT_ERROR", f"{kind.value}: {exc}") from exc


def script_from_dict(payload: Mapping[str, Any]) -> ScenarioScript:
    """Build a script from ``{"preset": ...}`` or ``{"name", "repeat", "phases"}``."""
    if "preset" in payload:
        options = {k: v for k, v in payload.items() if k != "preset"}
        try:
            return PRESETS[str(payload["preset"])](**options)
        except KeyError as exc:
            raise ScenarioError("SCRIPT_ERROR", f"unknown preset {payload['preset']!r}") from exc
        except TypeError as exc:
            raise ScenarioError("SCRIPT_ERROR", f"preset options: {exc}") from exc
    phases = payload.get("phases")
    if not isinstance(phases, list) or not phases:
        raise ScenarioError("SCRIPT_ERROR", "a script needs a non-empty 'phases' list")
    return ScenarioScript(
        name=str(payload.get("name", "scenario")),
        phases=tuple(phase_from_dict(item) for item in phases),
        repeat=int(payload.get("repeat", 1)),
    )


def load_script(path: PathLike) -> ScenarioScript:
    source = Path(path)
    try:
        payload = json.loads(source.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ScenarioError("IO_ERROR", f"cannot read {source}: {exc}", exit_code=config.EXIT_IO) from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError("SCRIPT_ERROR", f"{source}: invalid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise ScenarioError("SCRIPT_ERROR", f"{source}: top level must be an object")
    return script_from_dict(payload)


def write_wuc_log(engine: ScenarioEngine, path: PathLike) -> Path:
    try:
        return write_events_csv(engine.wuc.events, path)
    except FlexsimError as exc:
        raise ScenarioError(exc.code, exc.message, exit_code=exc.exit_code) from exc


__all__ = [
    "AccelInferPhase",
    "HostComputePhase",
    "PRESETS",
    "Phase",
    "PhaseKind",
    "PowerTrace",
    "ScenarioEngine",
    "ScenarioScript",
    "SensePhase",
    "SleepPhase",
    "StoreMramPhase",
    "TraceSegment",
    "duty_cycle_average",
    "load_script",
    "phase_from_dict",
    "preset_kws",
    "preset_machine_monitoring",
    "run_scenario",
    "script_from_dict",
    "svm_decisions",
    "svm_model_from_image",
    "write_trace_csv",
    "write_wuc_log",
]
