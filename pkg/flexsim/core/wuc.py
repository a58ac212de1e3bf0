"""Always-on wake-up controller: power modes, domain sequencing and sleep power.

A top-level FSM picks the domains a mode needs; a per-domain FSM switches each
one, enabling isolation before gating power off and releasing isolation only
after power is back. Time is counted in AON clock cycles.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple, Union

from flexsim import config
from flexsim.core.errors import WucError
from flexsim.utils.logger import logger

PathLike = Union[str, Path]


class PowerMode(str, Enum):
    FULL_ACTIVE = "FULL_ACTIVE"
    DATA_ACQ = "DATA_ACQ"
    LP_DATA_ACQ = "LP_DATA_ACQ"
    DEEP_SLEEP = "DEEP_SLEEP"
    # unidentified fifth mode; behaves as FULL_ACTIVE
    RESERVED = "RESERVED"


class Domain(str, Enum):
    LOGIC = "Logic"
    L1 = "Accel-L1"
    L2_MAIN = "L2-main"
    L2_RETENTIVE = "L2-retentive"
    UDMA = "uDMA"
    MRAM = "MRAM"
    AON = "AON"


SWITCHABLE: Tuple[Domain, ...] = (
    Domain.LOGIC,
    Domain.L1,
    Domain.MRAM,
    Domain.L2_MAIN,
    Domain.UDMA,
    Domain.L2_RETENTIVE,
)

MODE_DOMAINS: Dict[PowerMode, FrozenSet[Domain]] = {
    PowerMode.FULL_ACTIVE: frozenset(SWITCHABLE),
    PowerMode.DATA_ACQ: frozenset({Domain.UDMA, Domain.L2_MAIN, Domain.L2_RETENTIVE}),
    PowerMode.LP_DATA_ACQ: frozenset({Domain.UDMA, Domain.L2_RETENTIVE}),
    PowerMode.DEEP_SLEEP: frozenset(),
}

_ACQUISITION = (PowerMode.DATA_ACQ, PowerMode.LP_DATA_ACQ)
TRANSITIONS: Dict[PowerMode, FrozenSet[PowerMode]] = {
    PowerMode.FULL_ACTIVE: frozenset({PowerMode.DATA_ACQ, PowerMode.LP_DATA_ACQ, PowerMode.DEEP_SLEEP}),
    PowerMode.DATA_ACQ: frozenset({PowerMode.FULL_ACTIVE}),
    PowerMode.LP_DATA_ACQ: frozenset({PowerMode.FULL_ACTIVE}),
    PowerMode.DEEP_SLEEP: frozenset({PowerMode.FULL_ACTIVE}),
}

EVENT_KINDS = ("mode_request", "domain_iso", "domain_gate", "wake_complete", "rtc_expire")
SENSING_REFERENCE_FS = 44_100.0


def canonical_mode(mode: Union[PowerMode, str]) -> PowerMode:
    mode = PowerMode(mode)
    return PowerMode.FULL_ACTIVE if mode == PowerMode.RESERVED else mode


def mode_rank(mode: Union[PowerMode, str]) -> int:
    """Ordering by power draw; higher means more domains on."""
    return {
        PowerMode.DEEP_SLEEP: 0,
        PowerMode.LP_DATA_ACQ: 1,
        PowerMode.DATA_ACQ: 2,
        PowerMode.FULL_ACTIVE: 3,
    }[canonical_mode(mode)]


# --------------------------------------------------------------------------- #
# Records
# --------------------------------------------------------------------------- #


@dataclass
class DomainState:
    domain: Domain
    power_gate: bool = True
    isolation: bool = False
    clock_hz: float = 0.0

    @property
    def powered(self) -> bool:
        return self.power_gate


@dataclass(frozen=True)
class WucEvent:
    timestamp: int
    kind: str
    domain: str = ""
    detail: str = ""

    def as_row(self) -> List[Any]:
        return [self.timestamp, self.kind, self.domain, self.detail]


@dataclass(frozen=True)
class WucParams:
    """Sleep-mode power contributions in watts, measured at a 33 kHz AON clock."""

    deep_sleep_w: float = 1.7e-6
    aon_high_w: float = 22.8e-6
    l2_retentive_w: float = 6.2e-6
    udma_w: float = 4.0e-6
    sensing_w: float = 11.7e-6
    l2_main_w: float = 43.4e-6

    def __post_init__(self) -> None:
        for key, value in self.to_dict().items():
            if value < 0:
                raise WucError("MISSING_PARAM", f"{key} must be >= 0")

    def to_dict(self) -> Dict[str, float]:
        return {
            "deep_sleep_w": self.deep_sleep_w,
            "aon_high_w": self.aon_high_w,
            "l2_retentive_w": self.l2_retentive_w,
            "udma_w": self.udma_w,
            "sensing_w": self.sensing_w,
            "l2_main_w": self.l2_main_w,
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "WucParams":
        unknown = set(payload) - set(cls().to_dict())
        if unknown:
            raise WucError("MISSING_PARAM", f"unknown WuC parameter(s): {', '.join(sorted(unknown))}")
        return cls(**{key: float(value) for key, value in payload.items()})


# --------------------------------------------------------------------------- #
# Power and latency
# --------------------------------------------------------------------------- #


def wake_latency(aon_freq: float) -> float:
    """Seconds from wake request to a running core; the sequence takes a fixed 26 AON cycles."""
    if not aon_freq > 0:
        raise WucError("OUT_OF_RANGE", "AON frequency must be positive")
    return config.WAKE_CYCLES / aon_freq


def aon_power(aon_freq: float, params: Optional[WucParams] = None) -> float:
    """AON domain power: leakage plus a dynamic term linear in the AON clock."""
    params = params or WucParams()
    slope = (params.aon_high_w - params.deep_sleep_w) / (config.AON_FREQ_HIGH - config.AON_FREQ_LOW)
    leak = params.deep_sleep_w - slope * config.AON_FREQ_LOW
    return leak + slope * aon_freq


def aon_power_tradeoff(aon_freq: float, params: Optional[WucParams] = None) -> Tuple[float, float]:
    """(deep-sleep power, wake latency) for an AON clock in [33 kHz, 40 MHz]."""
    if not config.AON_FREQ_LOW <= aon_freq <= config.AON_FREQ_HIGH:
        raise WucError(
            "OUT_OF_RANGE",
            f"AON frequency {aon_freq:g} Hz outside [{config.AON_FREQ_LOW:g}, {config.AON_FREQ_HIGH:g}]",
        )
    return aon_power(aon_freq, params), wake_latency(aon_freq)


def sensing_power(fs: float, params: Optional[WucParams] = None) -> float:
    """Dynamic power of sensor acquisition through the uDMA, linear in the sample rate."""
    params = params or WucParams()
    return params.sensing_w * fs / SENSING_REFERENCE_FS


def sleep_power(
    mode: Union[PowerMode, str],
    params: Optional[WucParams] = None,
    *,
    fs: float = SENSING_REFERENCE_FS,
    aon_freq: float = config.AON_FREQ_LOW,
) -> float:
    """Power of a sleep or acquisition mode: powered-domain leakage plus AON and sensing dynamics."""
    params = params or WucParams()
    mode = canonical_mode(mode)
    if mode == PowerMode.FULL_ACTIVE:
        raise WucError("MISSING_PARAM", "active power depends on the workload; estimate it with the energy model")
    power = aon_power(aon_freq, params)
    if mode in _ACQUISITION:
        power += params.l2_retentive_w + params.udma_w + sensing_power(fs, params)
    if mode == PowerMode.DATA_ACQ:
        power += params.l2_main_w
    return power


# --------------------------------------------------------------------------- #
# Controller
# --------------------------------------------------------------------------- #


class Wuc:
    """Two-level power-mode controller with an event log."""

    def __init__(
        self,
        mode: Union[PowerMode, str] = PowerMode.FULL_ACTIVE,
        *,
        aon_freq: float = config.AON_FREQ_LOW,
        core_freq: float = 5e6,
        mode_domains: Optional[Mapping[PowerMode, Iterable[Domain]]] = None,
    ) -> None:
        if not aon_freq > 0:
            raise WucError("OUT_OF_RANGE", "AON frequency must be positive")
        self.mode_domains: Dict[PowerMode, FrozenSet[Domain]] = dict(MODE_DOMAINS)
        for key, domains in (mode_domains or {}).items():
            chosen = frozenset(Domain(d) for d in domains)
            if Domain.AON in chosen:
                raise WucError("ILLEGAL_TRANSITION", "the AON domain is never switched")
            self.mode_domains[canonical_mode(key)] = chosen
        self.mode = PowerMode(mode)
        self.aon_freq = aon_freq
        self.core_freq = core_freq
        self.time = 0
        self.events: List[WucEvent] = []
        on = self.mode_domains[canonical_mode(self.mode)]
        self.domains: Dict[Domain, DomainState] = {
            domain: DomainState(domain, domain in on, domain not in on, core_freq if domain in on else 0.0)
            for domain in SWITCHABLE
        }
        self.domains[Domain.AON] = DomainState(Domain.AON, True, False, aon_freq)

    def powered_domains(self) -> FrozenSet[Domain]:
        return frozenset(d for d, state in self.domains.items() if state.power_gate and d != Domain.AON)

    def advance(self, seconds: float) -> None:
        """Let ``seconds`` of wall time pass in the current mode."""
        if seconds < 0:
            raise WucError("OUT_OF_RANGE", "time cannot run backwards")
        self.time += int(round(seconds * self.aon_freq))

    def _emit(self, kind: str, domain: str = "", detail: str = "", *, offset: int = 0) -> WucEvent:
        event = WucEvent(self.time + offset, kind, domain, detail)
        self.events.append(event)
        return event

    def request_mode(
        self, target: Union[PowerMode, str], rtc_deadline_ms: Optional[float] = None
    ) -> List[WucEvent]:
        """Switch to ``target``; returns the events emitted.

        With ``rtc_deadline_ms`` the RTC fires after that delay and wakes the
        SoC back to FULL_ACTIVE.
        """
        target = PowerMode(target)
        start = len(self.events)
        current = canonical_mode(self.mode)
        wanted = canonical_mode(target)
        if wanted == current:
            self.mode = target
            return []
        if wanted not in TRANSITIONS[current]:
            raise WucError("ILLEGAL_TRANSITION", f"{self.mode.value} cannot switch to {target.value}")

        self._emit("mode_request", detail=f"{self.mode.value}->{target.value}")
        needed = self.mode_domains[wanted]
        step = 0
        for domain in SWITCHABLE:
            state = self.domains[domain]
            if state.power_gate and domain not in needed:
                step += 1
                self._emit("domain_iso", domain.value, "enable", offset=step)
                state.isolation = True
                step += 1
                self._emit("domain_gate", domain.value, "off", offset=step)
                state.power_gate = False
                state.clock_hz = 0.0
        for domain in reversed(SWITCHABLE):
            state = self.domains[domain]
            if not state.power_gate and domain in needed:
                step += 1
                self._emit("domain_gate", domain.value, "on", offset=step)
                state.power_gate = True
                step += 1
                self._emit("domain_iso", domain.value, "disable", offset=step)
                state.isolation = False
                state.clock_hz = self.core_freq
        waking = mode_rank(wanted) > mode_rank(current)
        if waking:
            self._emit("wake_complete", detail=target.value, offset=config.WAKE_CYCLES)
            self.time += config.WAKE_CYCLES
        else:
            self.time += step
        logger.debug("WuC %s -> %s at AON cycle %d", self.mode.value, target.value, self.time)
        self.mode = target

        if rtc_deadline_ms is not None:
            if rtc_deadline_ms < 0:
                raise WucError("OUT_OF_RANGE", "RTC deadline must be >= 0")
            self.advance(rtc_deadline_ms / 1e3)
            self._emit("rtc_expire", detail=f"{rtc_deadline_ms:g} ms")
            self.request_mode(PowerMode.FULL_ACTIVE)
        return self.events[start:]


def check_sequence(events: Iterable[WucEvent]) -> None:
    """Raise ``SEQUENCE_ERROR`` unless timestamps are ordered and every gate change is isolated."""
    last = -1
    isolated: Dict[str, bool] = {}
    powered: Dict[str, bool] = {}
    for event in events:
        if event.kind not in EVENT_KINDS:
            raise WucError("SEQUENCE_ERROR", f"unknown event kind {event.kind}")
        if event.timestamp < last:
            raise WucError("SEQUENCE_ERROR", f"timestamp {event.timestamp} after {last}")
        last = event.timestamp
        if event.domain == Domain.AON.value and event.kind in ("domain_iso", "domain_gate"):
            raise WucError("SEQUENCE_ERROR", "the AON domain never switches")
        if event.kind == "domain_iso":
            if event.detail == "disable" and not powered.get(event.domain, True):
                raise WucError("SEQUENCE_ERROR", f"{event.domain}: isolation released while unpowered")
            isolated[event.domain] = event.detail == "enable"
        elif event.kind == "domain_gate":
            if event.detail == "off" and not isolated.get(event.domain, False):
                raise WucError("SEQUENCE_ERROR", f"{event.domain}: gated off without isolation")
            powered[event.domain] = event.detail == "on"


def write_events_csv(events: Iterable[WucEvent], path: PathLike) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["timestamp_cycles", "kind", "domain", "detail"])
            for event in events:
                writer.writerow(event.as_row())
    except OSError as exc:
        raise WucError("IO_ERROR", f"cannot write {target}: {exc}", exit_code=config.EXIT_IO) from exc
    return target


__all__ = [
    "Domain",
    "DomainState",
    "MODE_DOMAINS",
    "PowerMode",
    "SENSING_REFERENCE_FS",
    "SWITCHABLE",
    "TRANSITIONS",
    "Wuc",
    "WucEvent",
    "WucParams",
    "aon_power",
    "aon_power_tradeoff",
    "canonical_mode",
    "check_sequence",
    "mode_rank",
    "sensing_power",
    "sleep_power",
    "wake_latency",
    "write_events_csv",
]
