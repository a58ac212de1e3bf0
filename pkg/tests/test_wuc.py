"""Tests for the wake-up controller."""

import csv

import numpy as np

import pytest

from flexsim.core.errors import WucError
from flexsim.core.wuc import (
    SWITCHABLE,
    Domain,
    PowerMode,
    Wuc,
    WucEvent,
    WucParams,
    aon_power,
    aon_power_tradeoff,
    canonical_mode,
    check_sequence,
    sleep_power,
    wake_latency,
    write_events_csv,
)


class TestSleepPower:
    @pytest.mark.parametrize(
        "mode, expected",
        [
            (PowerMode.DEEP_SLEEP, 1.7e-6),
            (PowerMode.LP_DATA_ACQ, 23.6e-6),
            (PowerMode.DATA_ACQ, 67.0e-6),
        ],
    )
    def test_mode_power_at_low_aon_clock(self, mode, expected):
        assert sleep_power(mode) == pytest.approx(expected)

    def test_sensing_scales_with_sample_rate(self):
        full = sleep_power(PowerMode.LP_DATA_ACQ)
        half = sleep_power(PowerMode.LP_DATA_ACQ, fs=22_050.0)
        assert full - half == pytest.approx(11.7e-6 / 2)

    def test_active_mode_is_not_a_sleep_mode(self):
        with pytest.raises(WucError):
            sleep_power(PowerMode.FULL_ACTIVE)

    def test_reserved_mode_behaves_as_active(self):
        with pytest.raises(WucError):
            sleep_power("RESERVED")

    def test_negative_parameter(self):
        with pytest.raises(WucError):
            WucParams(udma_w=-1.0)
        with pytest.raises(WucError):
            WucParams.from_dict({"radio_w": 1.0})


class TestAonClock:
    def test_wake_latency_endpoints(self):
        assert wake_latency(33_000.0) == pytest.approx(788e-6, rel=1e-3)
        assert wake_latency(40e6) == pytest.approx(650e-9)

    def test_power_endpoints(self):
        assert aon_power(33_000.0) == pytest.approx(1.7e-6)
        assert aon_power(40e6) == pytest.approx(22.8e-6)

    def test_tradeoff_is_monotone(self):
        low = aon_power_tradeoff(1e5)
        high = aon_power_tradeoff(1e7)
        assert high[0] > low[0]
        assert high[1] < low[1]

    def test_out_of_range(self):
        with pytest.raises(WucError) as exc:
            aon_power_tradeoff(1e3)
        assert exc.value.code == "OUT_OF_RANGE"


class TestController:
    def test_deep_sleep_gates_every_switchable_domain(self):
        wuc = Wuc()
        events = wuc.request_mode(PowerMode.DEEP_SLEEP)
        assert wuc.powered_domains() == frozenset()
        assert wuc.domains[Domain.AON].power_gate
        gates = [e for e in events if e.kind == "domain_gate"]
        assert {e.domain for e in gates} == {d.value for d in SWITCHABLE}
        check_sequence(events)

    def test_isolation_precedes_gating_and_follows_power_up(self):
        wuc = Wuc()
        wuc.request_mode(PowerMode.DEEP_SLEEP)
        wuc.request_mode(PowerMode.FULL_ACTIVE)
        for domain in SWITCHABLE:
            mine = [(e.kind, e.detail) for e in wuc.events if e.domain == domain.value]
            assert mine == [
                ("domain_iso", "enable"),
                ("domain_gate", "off"),
                ("domain_gate", "on"),
                ("domain_iso", "disable"),
            ]
        check_sequence(wuc.events)

    def test_wake_takes_fixed_cycle_count(self):
        wuc = Wuc()
        wuc.request_mode(PowerMode.DEEP_SLEEP)
        asleep = wuc.time
        events = wuc.request_mode(PowerMode.FULL_ACTIVE)
        assert events[-1].kind == "wake_complete"
        assert wuc.time - asleep == 26

    def test_acquisition_keeps_retentive_memory(self):
        wuc = Wuc()
        wuc.request_mode(PowerMode.LP_DATA_ACQ)
        assert wuc.powered_domains() == {Domain.UDMA, Domain.L2_RETENTIVE}
        assert wuc.domains[Domain.L2_RETENTIVE].isolation is False

    def test_sleep_modes_only_return_to_active(self):
        wuc = Wuc(PowerMode.DEEP_SLEEP)
        with pytest.raises(WucError) as exc:
            wuc.request_mode(PowerMode.LP_DATA_ACQ)
        assert exc.value.code == "ILLEGAL_TRANSITION"

    def test_same_mode_request_is_silent(self):
        wuc = Wuc()
        assert wuc.request_mode(PowerMode.FULL_ACTIVE) == []
        assert wuc.request_mode(PowerMode.RESERVED) == []
        assert wuc.powered_domains() == frozenset(SWITCHABLE)

    def test_rtc_deadline_wakes_the_soc(self):
        wuc = Wuc()
        events = wuc.request_mode(PowerMode.DEEP_SLEEP, rtc_deadline_ms=10.0)
        kinds = [e.kind for e in events]
        assert "rtc_expire" in kinds
        assert kinds[-1] == "wake_complete"
        assert wuc.mode == PowerMode.FULL_ACTIVE
        # 10 ms at 33 kHz
        assert wuc.time >= 330

    def test_domain_override(self):
        wuc = Wuc(mode_domains={PowerMode.DEEP_SLEEP: [Domain.MRAM]})
        wuc.request_mode(PowerMode.DEEP_SLEEP)
        assert wuc.powered_domains() == {Domain.MRAM}

    def test_aon_cannot_be_overridden(self):
        with pytest.raises(WucError):
            Wuc(mode_domains={PowerMode.DEEP_SLEEP: [Domain.AON]})

    def test_negative_time(self):
        with pytest.raises(WucError):
            Wuc().advance(-1.0)


class TestSequenceCheck:
    def test_gate_without_isolation(self):
        events = [WucEvent(0, "domain_gate", "Logic", "off")]
        with pytest.raises(WucError) as exc:
            check_sequence(events)
        assert exc.value.code == "SEQUENCE_ERROR"

    def test_timestamps_must_not_decrease(self):
        events = [WucEvent(5, "mode_request"), WucEvent(4, "wake_complete")]
        with pytest.raises(WucError):
            check_sequence(events)

    def test_aon_never_switches(self):
        with pytest.raises(WucError):
            check_sequence([WucEvent(0, "domain_iso", "AON", "enable")])

    def test_random_mode_sequences_keep_the_protocol(self):
        rng = np.random.default_rng(99)
        modes = list(PowerMode)
        for _ in range(1000):
            wuc = Wuc(modes[rng.integers(len(modes))])
            for _ in range(12):
                before = (wuc.mode, len(wuc.events))
                target = modes[rng.integers(len(modes))]
                deadline = float(rng.uniform(0, 5)) if rng.random() < 0.2 else None
                try:
                    wuc.request_mode(target, rtc_deadline_ms=deadline)
                except WucError as exc:
                    assert exc.code == "ILLEGAL_TRANSITION"
                    assert (wuc.mode, len(wuc.events)) == before
                wuc.advance(float(rng.uniform(0, 1e-3)))
                assert wuc.powered_domains() == wuc.mode_domains[canonical_mode(wuc.mode)]
            check_sequence(wuc.events)


def test_event_log_csv(tmp_path):
    wuc = Wuc()
    wuc.request_mode(PowerMode.DATA_ACQ)
    path = write_events_csv(wuc.events, tmp_path / "events.csv")
    with path.open(newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["timestamp_cycles", "kind", "domain", "detail"]
    assert len(rows) == len(wuc.events) + 1
