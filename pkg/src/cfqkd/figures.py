"""Matplotlib renderings of reports, lock traces, and sweeps.

Figures are drawn straight onto Figure objects (no pyplot, no global
state), so rendering works headless and callers never inherit an open
figure registry.
"""

from __future__ import annotations

from matplotlib.figure import Figure

from .analysis import RunReport, SweepResult
from .feedback import LockResult

_CLASS_LABELS = {
    "sifted_key": "sifted",
    "discard": "discard",
    "monitor_d2": "D2 mon.",
    "monitor_d3": "D3 mon.",
    "multiple": "multiple",
    "no_click": "no click",
}


def run_figure(report: RunReport, path) -> None:
    """Classification counts and the measured QBER against the budget."""
    fig = Figure(figsize=(9, 4))
    ax_counts, ax_budget = fig.subplots(1, 2)

    labels = [_CLASS_LABELS[k] for k in report.classification_counts]
    counts = list(report.classification_counts.values())
    ax_counts.bar(range(len(counts)), counts, color="#4878a8")
    ax_counts.set_xticks(range(len(counts)))
    ax_counts.set_xticklabels(labels, rotation=30, ha="right")
    ax_counts.set_yscale("log")
    ax_counts.set_ylabel("slots")
    ax_counts.set_title(f"{report.scenario}, mu={report.mu:g}, {report.n_slots:,} slots")

    if report.budget is not None:
        names = ["dark", "afterpulse", "extinction", "visibility"]
        parts = [
            report.budget.e_dark,
            report.budget.e_afterpulse,
            report.budget.e_extinction,
            report.budget.e_visibility,
        ]
        bottom = 0.0
        for name, part in zip(names, parts):
            ax_budget.bar(0, part, bottom=bottom, label=name, width=0.5)
            bottom += part
    if report.qber is not None:
        ax_budget.bar(1, report.qber, width=0.5, color="#404040", label="simulated")
    ax_budget.set_xticks([0, 1])
    ax_budget.set_xticklabels(["analytic budget", "Monte Carlo"])
    ax_budget.set_ylabel("error fraction")
    ax_budget.set_title("QBER vs. budget")
    if report.budget is not None or report.qber is not None:
        ax_budget.legend(fontsize=8)

    fig.tight_layout()
    fig.savefig(path, dpi=130)


def lock_figure(trace: LockResult, path, max_points: int = 20_000) -> None:
    """Phase error and controller output over the run."""
    stride = max(1, trace.times_s.size // max_points)
    t = trace.times_s[::stride]
    fig = Figure(figsize=(9, 5))
    ax_delta, ax_volts = fig.subplots(2, 1, sharex=True)

    ax_delta.plot(t, trace.delta_rad[::stride], lw=0.5, color="#4878a8")
    ax_delta.set_ylabel("delta (rad)")
    state = "on" if trace.feedback_on else "off"
    ax_delta.set_title(
        f"feedback {state}: effective visibility "
        f"{trace.effective_visibility:.4f}"
    )

    ax_volts.plot(t, trace.output_volts[::stride], lw=0.5, color="#a85448")
    ax_volts.set_ylabel("output (V)")
    ax_volts.set_xlabel("time (s)")
    ax_volts.set_ylim(-10.5, 10.5)

    fig.tight_layout()
    fig.savefig(path, dpi=130)


def sweep_figure(result: SweepResult, path) -> None:
    """QBER and the analytic total against the swept parameter."""
    fig = Figure(figsize=(6, 4))
    ax = fig.subplots()
    qber = [r.qber for r in result.reports]
    totals = [r.budget.e_total if r.budget else None for r in result.reports]
    ax.plot(result.values, qber, "o-", label="Monte Carlo qber", color="#4878a8")
    if all(t is not None for t in totals):
        ax.plot(result.values, totals, "s--", label="analytic e_total", color="#a85448")
    ax.set_xlabel(result.axis)
    ax.set_ylabel("error fraction")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
