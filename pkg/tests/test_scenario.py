"""Tests for timed application scenarios and power traces."""

import csv
import json

import pytest

from flexsim.core.compiler import link_program
from flexsim.core.errors import ScenarioError
from flexsim.core.oracle import svm_decision_ref
from flexsim.core.scenario import (
    AccelInferPhase,
    HostComputePhase,
    ScenarioEngine,
    ScenarioScript,
    SensePhase,
    SleepPhase,
    StoreMramPhase,
    duty_cycle_average,
    load_script,
    phase_from_dict,
    preset_kws,
    preset_machine_monitoring,
    run_scenario,
    script_from_dict,
    svm_model_from_image,
    write_trace_csv,
)
from flexsim.core.wuc import PowerMode
from flexsim.core.workloads import get_workload


def _script(*phases, repeat=1):
    return ScenarioScript(name="test", phases=tuple(phases), repeat=repeat)


class TestPresets:
    def test_preset_fields(self):
        kws = preset_kws()
        sense = kws.phases[0]
        assert (sense.window, sense.sample_rate, sense.batches) == (2.0, 44_100.0, 16)
        assert isinstance(kws.phases[-1], StoreMramPhase)
        monitoring = preset_machine_monitoring()
        assert (monitoring.phases[0].window, monitoring.phases[0].sample_rate) == (1.0, 16_000.0)
        assert monitoring.phases[-1].duty == 0.05

    def test_keyword_spotting_average(self):
        trace = run_scenario(preset_kws())
        assert trace.average_power_w == pytest.approx(173e-6, rel=0.15)
        modes = {segment.mode for segment in trace.segments}
        assert {"LP_DATA_ACQ", "FULL_ACTIVE"} <= modes

    def test_keyword_spotting_window_is_continuous(self):
        trace = run_scenario(preset_kws())
        assert trace.total_time == pytest.approx(2.0, rel=0.01)

    def test_machine_monitoring_average(self):
        trace = run_scenario(preset_machine_monitoring())
        assert trace.average_power_w == pytest.approx(9.5e-6, rel=0.15)
        assert trace.duty_cycle == pytest.approx(0.05, rel=0.02)

    def test_deep_sleep_lowers_keyword_spotting_power(self):
        continuous = run_scenario(preset_kws()).average_power_w
        assert run_scenario(preset_kws(duty=0.1)).average_power_w < continuous


class TestClosedForm:
    def test_duty_cycle_average(self):
        assert duty_cycle_average(164e-6, 1.7e-6, 0.05) == pytest.approx(9.815e-6)
        with pytest.raises(ScenarioError) as exc:
            duty_cycle_average(1.0, 0.0, 1.5)
        assert exc.value.code == "RANGE_ERROR"

    def test_two_phase_script_matches_closed_form(self):
        trace = run_scenario(
            _script(
                HostComputePhase(label="work", power_w=164e-6, seconds=0.05),
                SleepPhase(mode=PowerMode.DEEP_SLEEP, duty=0.05),
            )
        )
        assert trace.total_time == pytest.approx(1.0)
        assert trace.average_power_w == pytest.approx(duty_cycle_average(164e-6, 1.7e-6, 0.05), rel=1e-9)

    def test_rtc_period(self):
        trace = run_scenario(
            _script(HostComputePhase(label="work", power_w=1e-4, seconds=0.2), SleepPhase(period=1.0))
        )
        assert trace.total_time == pytest.approx(1.0)


class TestTrace:
    def test_wake_segment_after_sensing(self):
        trace = run_scenario(
            _script(SensePhase(window=0.5, sample_rate=8_000.0), HostComputePhase(label="work", power_w=1e-4, seconds=0.1))
        )
        labels = [segment.label for segment in trace.segments]
        assert labels == ["sense", "wake", "work"]
        assert trace.segments[1].duration == pytest.approx(26 / 33_000.0)

    def test_repeat_is_periodic(self):
        phases = (HostComputePhase(label="work", power_w=1e-4, seconds=0.1), SleepPhase(duration=0.9))
        once = run_scenario(_script(*phases))
        thrice = run_scenario(_script(*phases, repeat=3))
        # later iterations also pay the wake from deep sleep
        assert thrice.total_time == pytest.approx(3.0 + 2 * 26 / 33_000.0)
        assert thrice.average_power_w == pytest.approx(once.average_power_w, rel=0.01)

    def test_segments_are_contiguous(self):
        trace = run_scenario(preset_machine_monitoring())
        for prev, segment in zip(trace.segments, trace.segments[1:]):
            assert segment.start == pytest.approx(prev.start + prev.duration)

    def test_csv_ends_at_total_time(self, tmp_path):
        trace = run_scenario(preset_machine_monitoring())
        path = write_trace_csv(trace, tmp_path / "trace.csv")
        with path.open(newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["t_seconds", "power_watts", "mode"]
        assert float(rows[-1][0]) == pytest.approx(trace.total_time)

    def test_engine_keeps_wuc_log(self):
        engine = ScenarioEngine()
        engine.run(preset_machine_monitoring())
        kinds = {event.kind for event in engine.wuc.events}
        assert {"mode_request", "domain_gate", "wake_complete"} <= kinds


class TestHostSvm:
    def test_decisions_follow_golden_norms(self):
        trace = run_scenario(
            _script(
                AccelInferPhase(program="oc-svm"),
                HostComputePhase(label="decide", power_w=50e-6, cycles=5_000, task="svm_decision"),
            )
        )
        image, bundle = link_program(get_workload("oc-svm"))
        model = svm_model_from_image(image)
        norms = bundle.expected_outputs[-1].data.reshape(-1, model.n_vectors)
        assert trace.decisions == pytest.approx([svm_decision_ref(row, model) for row in norms])

    def test_model_is_rebuilt_from_l2(self):
        workload = get_workload("oc-svm")
        image, _ = link_program(workload)
        original = workload.layers[0].svm
        model = svm_model_from_image(image)
        assert model.support_vectors == original.support_vectors
        assert model.alphas == pytest.approx(original.alphas)

    def test_task_needs_an_inference(self):
        with pytest.raises(ScenarioError):
            run_scenario(_script(HostComputePhase(label="decide", power_w=1e-5, seconds=0.1, task="svm_decision")))


class TestScriptErrors:
    def test_batch_larger_than_retentive_l2(self):
        with pytest.raises(ScenarioError) as exc:
            run_scenario(_script(SensePhase(window=2.0, sample_rate=44_100.0, batches=1)))
        assert exc.value.code == "CAPACITY_ERROR"
        assert exc.value.exit_code == 4

    def test_full_l2_holds_the_same_batch(self):
        trace = run_scenario(_script(SensePhase(mode=PowerMode.DATA_ACQ, window=2.0, batches=1)))
        assert trace.total_time == pytest.approx(2.0)

    def test_mram_capacity(self):
        with pytest.raises(ScenarioError) as exc:
            run_scenario(_script(StoreMramPhase(nbytes=600 * 1024)))
        assert exc.value.code == "CAPACITY_ERROR"

    def test_sensing_needs_an_acquisition_mode(self):
        with pytest.raises(ScenarioError):
            run_scenario(_script(SensePhase(mode=PowerMode.DEEP_SLEEP)))

    def test_sleep_takes_one_length(self):
        with pytest.raises(ScenarioError):
            run_scenario(_script(SleepPhase(duration=1.0, duty=0.5)))

    def test_unknown_program(self):
        with pytest.raises(ScenarioError) as exc:
            run_scenario(_script(AccelInferPhase(program="missing.fxi")))
        assert exc.value.code == "UNKNOWN_PROGRAM"

    def test_repeat_must_be_positive(self):
        with pytest.raises(ScenarioError):
            run_scenario(_script(SleepPhase(duration=1.0), repeat=0))


class TestScriptFiles:
    def test_phase_names_are_case_insensitive(self):
        phase = phase_from_dict({"kind": "sleep", "mode": "lp_data_acq", "duration": 1.0})
        assert phase == SleepPhase(mode=PowerMode.LP_DATA_ACQ, duration=1.0)

    def test_unknown_phase_field(self):
        with pytest.raises(ScenarioError):
            phase_from_dict({"kind": "SLEEP", "length": 1.0})

    def test_script_roundtrips_through_dict(self):
        script = preset_machine_monitoring()
        assert script_from_dict(script.to_dict()) == script

    def test_preset_reference(self):
        assert script_from_dict({"preset": "kws", "duty": 0.2}) == preset_kws(duty=0.2)
        with pytest.raises(ScenarioError):
            script_from_dict({"preset": "radar"})

    def test_load_script(self, tmp_path):
        path = tmp_path / "script.json"
        path.write_text(json.dumps(preset_kws().to_dict()))
        assert load_script(path) == preset_kws()
        path.write_text("[1, 2")
        with pytest.raises(ScenarioError) as exc:
            load_script(path)
        assert exc.value.code == "SCRIPT_ERROR"
