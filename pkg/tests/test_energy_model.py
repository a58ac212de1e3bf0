"""Tests for power estimation, calibration and operating-point sweeps."""

import csv

import pytest

from flexsim.core.accel_sim import CycleReport
from flexsim.core.energy_model import (
    OPERATING_POINTS,
    CalibrationTarget,
    EnergyParams,
    OperatingPoint,
    calibrate,
    estimate,
    event_counts,
    load_op_points,
    resolve_op_point,
    sweep,
    write_sweep_csv,
)
from flexsim.core.errors import EnergyModelError
from flexsim.core.workloads import PREDICTION_ROWS, calibration_targets, get_case, simulate_case

EFFICIENCY = OPERATING_POINTS["efficiency"]
THROUGHPUT = OPERATING_POINTS["throughput"]


def _report(cycles=1000, macs=64_000, precision=8):
    report = CycleReport()
    report.phases["compute"] = cycles
    report.count_macs(precision, macs, macs)
    return report


class TestEstimate:
    def test_hand_computed_power(self):
        result = estimate(_report(), EFFICIENCY)
        # (1000 cycles x 4 pJ + 64000 MACs x 1.55 pJ) x (0.4 / 0.8)^2 over 200 us
        assert result.time_s == pytest.approx(2e-4)
        assert result.dynamic_w == pytest.approx(129e-6)
        assert result.leakage_w == pytest.approx(94e-6)
        assert result.power_w == pytest.approx(223e-6)
        assert result.gops == pytest.approx(0.64)
        assert result.energy_j == pytest.approx(223e-6 * 2e-4)

    def test_breakdown_sums_to_power(self):
        result = estimate(simulate_case(get_case("CAE")), EFFICIENCY)
        assert sum(result.breakdown_w.values()) == pytest.approx(result.power_w)
        assert result.breakdown_w["L2"] > 0

    def test_event_energy_scales_with_rail_voltage(self):
        params = EnergyParams()
        assert params.event_energy("mac8", THROUGHPUT) == pytest.approx(1.55e-12)
        assert params.event_energy("mac8", EFFICIENCY) == pytest.approx(1.55e-12 / 4)
        # memory events follow the 0.5 V memory rail
        assert params.event_energy("l2", EFFICIENCY) == pytest.approx(8e-12 * (0.5 / 0.8) ** 2)

    def test_lower_precision_costs_less_per_mac(self):
        int8 = estimate(_report(precision=8), EFFICIENCY)
        int2 = estimate(_report(precision=2), EFFICIENCY)
        assert int2.dynamic_w < int8.dynamic_w
        assert int2.tops_per_w > int8.tops_per_w

    def test_zero_cycle_run_is_pure_leakage(self):
        result = estimate(CycleReport(), EFFICIENCY)
        assert result.dynamic_w == 0.0
        assert result.gops == 0.0
        assert result.power_w == pytest.approx(94e-6)

    def test_event_counts_follow_report(self):
        report = _report()
        report.accesses["L1_act"] = 7
        report.dma_bytes = 128
        counts = event_counts(report)
        assert (counts["cycle"], counts["mac8"], counts["l1_act"], counts["dma_byte"]) == (1000, 64_000, 7, 128)


class TestLeakage:
    def test_named_points_use_their_tables(self):
        params = EnergyParams()
        assert params.leakage(EFFICIENCY)["L2"] == pytest.approx(40e-6)
        assert params.leakage(THROUGHPUT)["L2"] == pytest.approx(2400e-6)

    def test_intermediate_voltage_is_log_interpolated(self):
        leakage = EnergyParams().leakage(OperatingPoint("mid", 50e6, 0.6, 0.6))
        assert leakage["L2"] == pytest.approx(40e-6 * 60**0.5)
        assert leakage["WuC"] == pytest.approx(1e-6)

    def test_interpolation_needs_both_tables(self):
        params = EnergyParams(leakage_uw={"efficiency": {"L2": 1.0}})
        with pytest.raises(EnergyModelError) as exc:
            params.leakage(OperatingPoint("mid", 50e6, 0.6, 0.6))
        assert exc.value.code == "MISSING_PARAM"


class TestParams:
    def test_rejects_unknown_event_and_negative_energy(self):
        with pytest.raises(EnergyModelError):
            EnergyParams(dynamic_pj={"flux": 1.0})
        with pytest.raises(EnergyModelError):
            EnergyParams(dynamic_pj={"mac8": -1.0})

    def test_missing_event_energy(self):
        params = EnergyParams(dynamic_pj={"cycle": 1.0})
        with pytest.raises(EnergyModelError) as exc:
            params.event_energy("mac8", EFFICIENCY)
        assert exc.value.code == "MISSING_PARAM"
        assert exc.value.exit_code == 3

    def test_partial_file_overrides_defaults(self, tmp_path):
        path = tmp_path / "params.json"
        path.write_text('{"dynamic_pj": {"mac8": 2.0}, "leakage_uw": {"efficiency": {"L2": 10}}}')
        params = EnergyParams.load(path)
        assert params.dynamic_pj["mac8"] == 2.0
        assert params.dynamic_pj["mac4"] == 0.5
        assert params.leakage_uw["efficiency"]["L2"] == 10.0
        assert params.leakage_uw["efficiency"]["L1"] == 18.0

    def test_save_and_load(self, tmp_path):
        params = EnergyParams(voltage_exponent=1.5)
        params.dynamic_pj["l2"] = 12.0
        assert EnergyParams.load(params.save(tmp_path / "p.json")).to_dict() == params.to_dict()

    def test_unknown_section_and_bad_file(self, tmp_path):
        with pytest.raises(EnergyModelError):
            EnergyParams.from_dict({"dynamic": {}})
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(EnergyModelError) as exc:
            EnergyParams.load(bad)
        assert exc.value.code == "PARAM_FILE_ERROR"


class TestOperatingPoints:
    def test_resolve_and_override(self):
        point = resolve_op_point("efficiency", {"core_freq": 10e6})
        assert point.name == "efficiency"
        assert point.core_freq == 10e6
        assert resolve_op_point("efficiency", {"v_logic": 0.45}).name == "efficiency-custom"

    def test_unknown_point(self):
        with pytest.raises(EnergyModelError) as exc:
            resolve_op_point("turbo")
        assert exc.value.code == "INVALID_OP_POINT"

    def test_non_positive_fields(self):
        with pytest.raises(EnergyModelError):
            OperatingPoint("bad", 0.0, 0.4, 0.5)

    def test_load_points_file(self, tmp_path):
        path = tmp_path / "points.json"
        path.write_text('{"points": [{"name": "a", "core_freq": 1e6, "v_logic": 0.4, "v_mem": 0.5}]}')
        (point,) = load_op_points(path)
        assert point.name == "a" and point.aon_freq == 33_000.0


class TestCalibration:
    @pytest.fixture(scope="class")
    def targets(self):
        return calibration_targets()

    def test_recovers_known_parameters(self, targets):
        truth = EnergyParams()
        truth.dynamic_pj.update({"mac8": 2.0, "mac4": 0.8, "mac2": 0.3})
        synthetic = [
            CalibrationTarget(t.name, t.report, t.op_point, estimate(t.report, t.op_point, truth).power_w)
            for t in targets
        ]
        result = calibrate(synthetic)
        assert result.rms_log_error < 1e-6
        for target in synthetic:
            assert result.predictions_w[target.name] == pytest.approx(target.power_w, rel=1e-4)

    def test_measured_rows_predict_application_rows(self, targets):
        result = calibrate(targets)
        for name in PREDICTION_ROWS:
            case = get_case(name)
            predicted = estimate(simulate_case(case), EFFICIENCY, result.params).power_w
            assert predicted == pytest.approx(case.power_uw * 1e-6, rel=0.25)

    def test_underdetermined(self, targets):
        with pytest.raises(EnergyModelError) as exc:
            calibrate(targets[:2])
        assert exc.value.code == "UNDERDETERMINED"

    def test_unknown_free_parameter(self, targets):
        with pytest.raises(EnergyModelError) as exc:
            calibrate(targets, free_params=("mac16",))
        assert exc.value.code == "MISSING_PARAM"


class TestSweep:
    def test_higher_points_trade_efficiency_for_throughput(self):
        rows = sweep(simulate_case(get_case("CNN@8b")))
        gops = [row.gops for row in rows]
        assert gops == sorted(gops)
        assert rows[0].tops_per_w > rows[-1].tops_per_w

    def test_csv_columns(self, tmp_path):
        rows = sweep(_report())
        path = write_sweep_csv(rows, tmp_path / "sweep.csv")
        with path.open(newline="") as handle:
            table = list(csv.reader(handle))
        assert table[0][:4] == ["name", "core_freq_hz", "v_logic", "v_mem"]
        assert [line[0] for line in table[1:]] == ["efficiency", "25MHz", "50MHz", "100MHz", "throughput"]
