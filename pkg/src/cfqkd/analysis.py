"""Analytic error budget, aggregate run reports, and parameter sweeps.

The budget decomposes the expected QBER into four device contributions:

    e_dark       = 0.5 * (dark_prob_per_gate * rep_rate) / d1_rate
    e_afterpulse = 0.5 * afterpulse_prob
    e_extinction = 10^(-dynamic_extinction_dB / 10)
    e_visibility = ((1-V)/2) / ((1-V)/2 + R*T)

The halving factors encode that a spurious click agrees with the key bit
half the time. These are the device-sheet attributions; the Monte Carlo
resolves the same mechanisms microscopically and does not land exactly
on their sum (see the README for the measured gaps). Reports carry both
numbers side by side rather than forcing agreement.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Optional, Sequence

from .devices import CHANNEL_ORDER, DetectorChannel
from .errors import ParameterError
from .protocol import (
    BlockTally,
    ExperimentResult,
    MonitorStats,
    SystemParams,
    TrialRecord,
    run_experiment,
    tally_from_records,
)


@dataclass(frozen=True)
class ErrorBudget:
    e_dark: float
    e_afterpulse: float
    e_extinction: float
    e_visibility: float
    e_total: float

    def as_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


def error_budget(params: SystemParams, d1_rate_per_s: float) -> ErrorBudget:
    """Device-level QBER attribution at a given D1 count rate.

    The dark-count term depends on how many real counts dilute the dark
    clicks, hence the rate argument; the other terms are pure device
    constants. e_dark is capped at 1 (a rate low enough to exceed that
    means D1 sees nothing but noise).
    """
    if d1_rate_per_s <= 0.0:
        raise ParameterError("d1 rate must be > 0 counts/s")
    e_dark = min(
        1.0,
        0.5 * params.detector.dark_prob_per_gate * params.rep_rate_hz / d1_rate_per_s,
    )
    e_afterpulse = 0.5 * params.detector.afterpulse_prob
    e_extinction = params.switch.leak_probability
    v = params.interference.static_visibility
    half_fringe = 0.5 * (1.0 - v)
    r = params.splitter.reflectivity
    t = params.splitter.transmissivity
    denom = half_fringe + r * t
    e_visibility = half_fringe / denom if denom > 0.0 else 0.0
    return ErrorBudget(
        e_dark=e_dark,
        e_afterpulse=e_afterpulse,
        e_extinction=e_extinction,
        e_visibility=e_visibility,
        e_total=e_dark + e_afterpulse + e_extinction + e_visibility,
    )


@dataclass
class RunReport:
    """Serializable summary of one session."""

    n_slots: int
    session_seconds: float
    sifted_bits: int
    sifted_errors: int
    key_rate_bits_per_s: float
    qber: Optional[float]
    total_counts: dict[str, int]
    classification_counts: dict[str, int]
    d2_counts_same: int
    d2_counts_diff: int
    d3_counts_same: int
    d3_counts_diff: int
    d3_error_rate: Optional[float]
    multiple: int
    sifted_via_channel: int
    budget: Optional[ErrorBudget]
    scenario: str
    mu: float
    seed: Optional[int] = None
    feedback_mode: Optional[str] = None
    adversary: Optional[dict] = None
    lock_summary: Optional[dict] = None
    timestamp: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat()
    )

    def as_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["budget"] = self.budget.as_dict() if self.budget is not None else None
        return data

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.as_dict(), indent=indent, sort_keys=True)

    def determinism_digest(self) -> str:
        """Hash of the report content, excluding the timestamp."""
        data = self.as_dict()
        data.pop("timestamp")
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        data = json.loads(text)
        budget = data.get("budget")
        if budget is not None:
            data["budget"] = ErrorBudget(**budget)
        return cls(**data)


def _assemble_report(
    tally: BlockTally,
    params: SystemParams,
    session_seconds: float,
    seed: Optional[int] = None,
    feedback_mode: Optional[str] = None,
    adversary: Optional[dict] = None,
    lock_summary: Optional[dict] = None,
) -> RunReport:
    if session_seconds <= 0.0:
        raise ParameterError("session duration must be > 0 seconds")
    monitor = MonitorStats.from_tally(tally)
    d1_counts = (
        tally.channel_clicks[DetectorChannel.D1H.value]
        + tally.channel_clicks[DetectorChannel.D1V.value]
    )
    d1_rate = d1_counts / session_seconds
    budget = error_budget(params, d1_rate) if d1_rate > 0.0 else None
    qber = tally.sifted_errors / tally.sifted if tally.sifted else None
    return RunReport(
        n_slots=tally.n_slots,
        session_seconds=session_seconds,
        sifted_bits=tally.sifted,
        sifted_errors=tally.sifted_errors,
        key_rate_bits_per_s=tally.sifted / session_seconds,
        qber=qber,
        total_counts=dict(tally.channel_clicks),
        classification_counts=tally.classification_counts(),
        d2_counts_same=monitor.d2_counts_same,
        d2_counts_diff=monitor.d2_counts_diff,
        d3_counts_same=monitor.d3_counts_same,
        d3_counts_diff=monitor.d3_counts_diff,
        d3_error_rate=monitor.d3_error_rate,
        multiple=monitor.multiple,
        sifted_via_channel=tally.sifted_via_channel,
        budget=budget,
        scenario=params.scenario.value,
        mu=params.mu,
        seed=seed,
        feedback_mode=feedback_mode,
        adversary=adversary,
        lock_summary=lock_summary,
    )


def build_report(
    records: Sequence[TrialRecord],
    params: SystemParams,
    session_seconds: float,
) -> RunReport:
    """Aggregate a per-slot trial log into a RunReport."""
    return _assemble_report(tally_from_records(records), params, session_seconds)


def report_from_result(result: ExperimentResult) -> RunReport:
    """Render an engine run into the serializable report form."""
    adversary = None
    if result.adversary is not None:
        adversary = {
            "kind": result.adversary.kind.value,
            "fraction": result.adversary.fraction,
        }
    return _assemble_report(
        result.tally,
        result.params,
        result.session_seconds,
        seed=result.seed,
        feedback_mode=result.feedback.mode.value,
        adversary=adversary,
        lock_summary=result.lock_summary,
    )


_AXIS_ALIASES = {
    "visibility": "interference.static_visibility",
    "efficiency": "detector.efficiency",
    "dark": "detector.dark_prob_per_gate",
    "afterpulse": "detector.afterpulse_prob",
}

#: Every sweep row reuses the same root seed, so rows are paired samples
#: (common random numbers), not independent replicates.
SEED_POLICY = "shared-root-seed; rows are paired, not independent"


def _set_axis(params: SystemParams, axis: str, value: float) -> SystemParams:
    path = _AXIS_ALIASES.get(axis, axis).split(".")
    target = params
    for name in path[:-1]:
        if not hasattr(target, name):
            raise ParameterError(f"unknown sweep axis {axis!r}")
        target = getattr(target, name)
    leaf = path[-1]
    if not hasattr(target, leaf):
        raise ParameterError(f"unknown sweep axis {axis!r}")
    current = getattr(target, leaf)
    if not isinstance(current, (int, float)) or isinstance(current, bool):
        raise ParameterError(f"sweep axis {axis!r} is not numeric")
    patched = replace(target, **{leaf: value})
    for name in reversed(path[:-1]):
        # rebuild the chain of frozen dataclasses from the leaf outward
        parent_path = path[: path.index(name)]
        parent = params
        for step in parent_path:
            parent = getattr(parent, step)
        patched = replace(parent, **{name: patched})
    return patched


@dataclass
class SweepResult:
    axis: str
    values: list[float]
    reports: list[RunReport]
    seed: int
    seed_policy: str = SEED_POLICY

    def rows(self) -> list[dict]:
        out = []
        for value, report in zip(self.values, self.reports):
            out.append(
                {
                    self.axis: value,
                    "sifted_bits": report.sifted_bits,
                    "key_rate_bits_per_s": report.key_rate_bits_per_s,
                    "qber": report.qber,
                    "e_total": report.budget.e_total if report.budget else None,
                    "d2_counts_same": report.d2_counts_same,
                    "d2_counts_diff": report.d2_counts_diff,
                }
            )
        return out

    def to_csv(self, path) -> None:
        rows = self.rows()
        with open(path, "w", newline="") as fh:
            # comment line written raw; csv.writer would quote the commas
            fh.write("# seed policy: " + self.seed_policy + "\n")
            writer = csv.writer(fh)
            writer.writerow(list(rows[0].keys()) if rows else [self.axis])
            for row in rows:
                writer.writerow(list(row.values()))


def sweep(
    params: SystemParams,
    axis: str,
    values: Sequence[float],
    n_slots: int,
    seed: int = 0,
    **run_kwargs,
) -> SweepResult:
    """One report per axis value, all runs sharing the root seed."""
    if not values:
        raise ParameterError("sweep needs at least one value")
    reports = []
    for value in values:
        point = _set_axis(params, axis, value)
        result = run_experiment(point, n_slots, seed=seed, **run_kwargs)
        reports.append(report_from_result(result))
    return SweepResult(
        axis=axis, values=[float(v) for v in values], reports=reports, seed=seed
    )
