"""Error budget, run reports, and sweeps.

The two *_recovers_budget_term tests are the dual-route checks: with all
but one error mechanism disabled, the Monte Carlo QBER must land on the
corresponding analytic budget term within statistics.
"""

import json
import math

import pytest

from conftest import ideal_system, sealed_switch
from cfqkd.adversary import AdversaryKind, AdversarySpec
from cfqkd.analysis import (
    ErrorBudget,
    RunReport,
    build_report,
    error_budget,
    report_from_result,
    sweep,
)
from cfqkd.devices import DetectorSpec
from cfqkd.errors import ParameterError
from cfqkd.optics import InterferenceSpec
from cfqkd.protocol import SystemParams, run_experiment


def test_budget_pins_at_stock_parameters():
    params = SystemParams.desktop()
    budget = error_budget(params, d1_rate_per_s=70.0)
    # (1-V)/2 against the R*T signal path: 0.01 / 0.26
    assert abs(budget.e_visibility - 0.01 / 0.26) < 1e-12
    assert abs(budget.e_visibility - 0.03846) < 1e-5
    # 0.5 * 1/s dark rate over 70/s of real counts
    assert abs(budget.e_dark - 0.5 / 70.0) < 1e-12
    assert abs(budget.e_dark - 0.0071) < 5e-5
    assert budget.e_afterpulse == 0.5 * params.detector.afterpulse_prob
    # blocking-state leak, 17 dB dynamic extinction
    assert abs(budget.e_extinction - 10.0 ** -1.7) < 1e-12
    total = (
        budget.e_dark + budget.e_afterpulse + budget.e_extinction + budget.e_visibility
    )
    assert budget.e_total == total


def test_budget_perfect_system_is_zero():
    budget = error_budget(ideal_system(), d1_rate_per_s=100.0)
    assert budget == ErrorBudget(0.0, 0.0, 0.0, 0.0, 0.0)


def test_budget_dark_term_caps_at_one():
    budget = error_budget(SystemParams.desktop(), d1_rate_per_s=1e-9)
    assert budget.e_dark == 1.0


def test_budget_rejects_nonpositive_rate():
    for rate in (0.0, -70.0):
        with pytest.raises(ParameterError):
            error_budget(SystemParams.desktop(), rate)


def test_budget_as_dict():
    d = error_budget(SystemParams.desktop(), 70.0).as_dict()
    assert set(d) == {"e_dark", "e_afterpulse", "e_extinction", "e_visibility", "e_total"}


def test_report_internal_consistency():
    params = SystemParams.desktop()
    result = run_experiment(params, 200_000, seed=13)
    report = report_from_result(result)
    assert report.n_slots == 200_000
    assert sum(report.classification_counts.values()) == 200_000
    assert report.session_seconds == 200_000 / params.rep_rate_hz
    assert report.key_rate_bits_per_s == report.sifted_bits / report.session_seconds
    if report.sifted_bits:
        assert report.qber == report.sifted_errors / report.sifted_bits
    assert set(report.total_counts) == {"D1H", "D1V", "D2", "D3H", "D3V"}
    assert report.scenario == params.scenario.value
    assert report.mu == params.mu


def test_build_report_empty_log():
    params = SystemParams.desktop()
    report = build_report([], params, session_seconds=1.0)
    assert report.sifted_bits == 0
    assert report.qber is None
    assert report.budget is None
    assert report.key_rate_bits_per_s == 0.0
    assert all(v == 0 for v in report.total_counts.values())
    with pytest.raises(ParameterError):
        build_report([], params, session_seconds=0.0)


def test_build_report_agrees_with_engine_tally():
    params = SystemParams.desktop()
    result = run_experiment(params, 40_000, seed=14, record_trials=True)
    rebuilt = build_report(result.records, params, result.session_seconds)
    direct = report_from_result(result)
    assert rebuilt.sifted_bits == direct.sifted_bits
    assert rebuilt.qber == direct.qber
    assert rebuilt.total_counts == direct.total_counts
    assert rebuilt.d2_counts_same == direct.d2_counts_same
    assert rebuilt.d3_error_rate == direct.d3_error_rate


def test_report_json_round_trip():
    result = run_experiment(SystemParams.desktop(), 50_000, seed=15)
    report = report_from_result(result)
    clone = RunReport.from_json(report.to_json())
    assert clone.as_dict() == report.as_dict()
    assert isinstance(clone.budget, ErrorBudget)
    assert clone.determinism_digest() == report.determinism_digest()
    # json output is stable under key order
    assert json.loads(report.to_json()) == report.as_dict()


def test_digest_excludes_timestamp_only():
    result = run_experiment(SystemParams.desktop(), 50_000, seed=15)
    report = report_from_result(result)
    digest = report.determinism_digest()
    report.timestamp = "1970-01-01T00:00:00+00:00"
    assert report.determinism_digest() == digest
    report.sifted_bits += 1
    assert report.determinism_digest() != digest


def test_report_carries_run_metadata():
    spec = AdversarySpec(AdversaryKind.INTERCEPT_RESEND, 0.5)
    result = run_experiment(
        SystemParams.desktop(), 30_000, seed=7, adversary=spec
    )
    report = report_from_result(result)
    assert report.seed == 7
    assert report.feedback_mode == result.feedback.mode.value
    assert report.adversary == {
        "kind": AdversaryKind.INTERCEPT_RESEND.value,
        "fraction": 0.5,
    }
    assert report.lock_summary is None


def test_sweep_visibility_drives_qber(tmp_path):
    params = SystemParams.desktop()
    result = sweep(params, "visibility", [0.90, 0.95, 0.98], 1_500_000, seed=11)
    qbers = [report.qber for report in result.reports]
    assert all(q is not None for q in qbers)
    assert qbers[0] > qbers[1] > qbers[2]
    rows = result.rows()
    assert [row["visibility"] for row in rows] == [0.90, 0.95, 0.98]
    assert all(row["sifted_bits"] > 0 for row in rows)

    path = tmp_path / "sweep.csv"
    result.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# seed policy:")
    assert lines[1].split(",")[0] == "visibility"
    assert len(lines) == 2 + len(rows)


def test_sweep_perfect_visibility_row():
    result = sweep(SystemParams.desktop(), "visibility", [1.0], 50_000, seed=3)
    budget = result.reports[0].budget
    assert budget is not None and budget.e_visibility == 0.0


def test_sweep_alias_matches_dotted_path():
    by_alias = sweep(SystemParams.desktop(), "efficiency", [0.1], 50_000, seed=4)
    by_path = sweep(
        SystemParams.desktop(), "detector.efficiency", [0.1], 50_000, seed=4
    )
    assert (
        by_alias.reports[0].determinism_digest()
        == by_path.reports[0].determinism_digest()
    )


def test_sweep_channel_loss_reduces_yield():
    result = sweep(
        SystemParams.desktop(), "losses.channel_oneway_db", [0.0, 3.0], 300_000, seed=5
    )
    a, b = result.reports
    assert a.sifted_bits > b.sifted_bits


def test_sweep_rejects_bad_axes():
    params = SystemParams.desktop()
    with pytest.raises(ParameterError):
        sweep(params, "nonsense", [1.0], 100)
    with pytest.raises(ParameterError):
        sweep(params, "detector.nope", [1.0], 100)
    with pytest.raises(ParameterError):
        sweep(params, "scenario", [1.0], 100)
    with pytest.raises(ParameterError):
        sweep(params, "visibility", [], 100)


def test_dark_only_run_recovers_budget_term():
    # visibility and afterpulse switched off: every key error is a dark
    # count landing in a differing-choice slot, the e_dark mechanism
    params = SystemParams.desktop(
        detector=DetectorSpec(
            efficiency=0.06, dark_prob_per_gate=1e-5, afterpulse_prob=0.0
        ),
        interference=InterferenceSpec(static_visibility=1.0, phase_error_rad=0.0),
    )
    report = report_from_result(run_experiment(params, 8_000_000, seed=21))
    assert report.budget is not None
    assert report.budget.e_afterpulse == 0.0
    assert report.budget.e_visibility == 0.0
    sigma = math.sqrt(report.qber * (1.0 - report.qber) / report.sifted_bits)
    assert abs(report.qber - report.budget.e_dark) < 3.0 * sigma, (
        report.qber,
        report.budget.e_dark,
    )


def test_visibility_only_run_recovers_budget_term():
    params = SystemParams.desktop(
        detector=DetectorSpec(
            efficiency=0.06, dark_prob_per_gate=0.0, afterpulse_prob=0.0
        ),
        switch=sealed_switch(),
    )
    report = report_from_result(run_experiment(params, 3_000_000, seed=22))
    budget = report.budget
    assert budget.e_total == budget.e_visibility
    sigma = math.sqrt(report.qber * (1.0 - report.qber) / report.sifted_bits)
    assert abs(report.qber - budget.e_visibility) < 3.0 * sigma, (
        report.qber,
        budget.e_visibility,
    )
