"""Per-photon routing model: analytic tables, samplers, enumeration oracle."""

import math

import numpy as np
import pytest

from conftest import binomial_sigma, fresh_rng, lossless
from cfqkd.errors import ParameterError
from cfqkd.optics import (
    ArmLosses,
    InterferenceSpec,
    SplitterSpec,
    Terminal,
    attacked_diff_probs,
    db_to_transmittance,
    diff_choice_probs,
    outcome_distribution,
    route_diff_choice,
    route_same_choice,
    same_choice_probs,
    sample_outcome_counts,
    sample_photon_number,
)


# ---------------------------------------------------------------- validation


def test_splitter_must_sum_to_one():
    SplitterSpec(0.3, 0.7)
    with pytest.raises(ParameterError):
        SplitterSpec(0.3, 0.6)
    with pytest.raises(ParameterError):
        SplitterSpec(-0.1, 1.1)


def test_arm_losses_reject_negative_db():
    with pytest.raises(ParameterError):
        ArmLosses(arm_b_roundtrip_db=-1.0)
    with pytest.raises(ParameterError):
        ArmLosses(arm_b_roundtrip_db=10.5, channel_oneway_db=-0.5)


def test_visibility_range_enforced():
    InterferenceSpec(static_visibility=0.0)
    InterferenceSpec(static_visibility=1.0)
    with pytest.raises(ParameterError):
        InterferenceSpec(static_visibility=1.01)
    with pytest.raises(ParameterError):
        InterferenceSpec(static_visibility=-0.01)


def test_db_to_transmittance():
    assert db_to_transmittance(0.0) == 1.0
    assert db_to_transmittance(10.0) == pytest.approx(0.1)
    assert db_to_transmittance(3.0) == pytest.approx(0.501187, abs=1e-6)
    assert db_to_transmittance(math.inf) == 0.0
    with pytest.raises(ParameterError):
        db_to_transmittance(-1.0)


# ------------------------------------------------------------ photon number


def test_photon_number_zero_mu_is_always_zero(rng):
    assert all(sample_photon_number(0.0, rng) == 0 for _ in range(100))


def test_photon_number_rejects_negative(rng):
    with pytest.raises(ParameterError):
        sample_photon_number(-0.1, rng)


def test_photon_vacuum_mass_mu_half():
    # P(n=0) at mu=0.5 is e^-0.5; 1e6 draws pin it to +-0.002
    rng = fresh_rng(7)
    draws = rng.poisson(0.5, size=1_000_000)
    p0 = np.mean(draws == 0)
    assert abs(p0 - math.exp(-0.5)) < 0.002


def test_photon_mean_mu_one():
    rng = fresh_rng(8)
    draws = np.array([sample_photon_number(1.0, rng) for _ in range(100_000)])
    # mean = mu with sd sqrt(mu/n); 100k scalar draws keep this test quick
    assert abs(draws.mean() - 1.0) < 4.0 * math.sqrt(1.0 / len(draws))


# ----------------------------------------------------------- routing tables


def test_same_choice_ideal_quarters():
    probs = same_choice_probs(SplitterSpec(), lossless(), leak=0.0)
    assert probs.d3 == pytest.approx(0.5)
    assert probs.d1_total == pytest.approx(0.25)
    assert probs.d2_total == pytest.approx(0.25)
    assert probs.lost == pytest.approx(0.0, abs=1e-12)


def test_same_choice_fully_transmitting_splitter():
    probs = same_choice_probs(SplitterSpec(0.0, 1.0), lossless(), leak=0.0)
    assert probs.d3 == pytest.approx(1.0)
    assert probs.d1_total == 0.0
    assert probs.d2_total == 0.0


def test_same_choice_leak_adds_via_b_path():
    # leaked light passes the blockade, reflects, and splits R/T on return
    probs = same_choice_probs(SplitterSpec(), lossless(), leak=0.02)
    assert probs.d1_via_b == pytest.approx(0.5 * 0.02 * 0.5)
    assert probs.d1_total == pytest.approx(0.255)
    # the enumeration oracle must agree on the n=1 marginal
    dist = outcome_distribution(
        1, True, SplitterSpec(), lossless(), leak=0.02
    )
    d1_marginal = sum(p for (_, k1, _, _), p in dist.items() if k1 == 1)
    assert d1_marginal == pytest.approx(probs.d1_total, abs=1e-12)


def test_diff_choice_perfect_interference():
    probs = diff_choice_probs(InterferenceSpec(1.0), SplitterSpec(), lossless())
    assert probs.d1_interf == pytest.approx(0.0, abs=1e-12)
    assert probs.d2_interf == pytest.approx(1.0)


def test_diff_choice_dark_port_leakage_98():
    probs = diff_choice_probs(InterferenceSpec(0.98), SplitterSpec(), lossless())
    assert probs.d1_interf == pytest.approx(0.01)
    assert probs.d2_interf == pytest.approx(0.99)


def test_diff_choice_bright_port_at_pi():
    probs = diff_choice_probs(
        InterferenceSpec(0.98), SplitterSpec(), lossless(), delta=math.pi
    )
    assert probs.d1_interf == pytest.approx(0.99)
    assert probs.d2_interf == pytest.approx(0.01)


@pytest.mark.parametrize("v", [0.0, 0.5, 0.9, 0.98, 1.0])
@pytest.mark.parametrize("delta", [0.0, 0.3, math.pi / 2, 2.0, math.pi])
def test_diff_choice_dark_fraction_formula(v, delta):
    interf = InterferenceSpec(v)
    probs = diff_choice_probs(interf, SplitterSpec(), lossless(), delta=delta)
    survived = probs.d1_interf + probs.d2_interf
    expected = (1.0 - v * math.cos(delta)) / 2.0
    assert probs.d1_interf / survived == pytest.approx(expected, abs=1e-12)


def test_dark_fraction_monotone_in_v_and_delta():
    deltas = np.linspace(0.0, math.pi, 20)
    fractions = [InterferenceSpec(0.9).d1_fraction(d) for d in deltas]
    assert all(b >= a - 1e-15 for a, b in zip(fractions, fractions[1:]))
    vs = np.linspace(0.0, 1.0, 20)
    at_zero = [InterferenceSpec(v).d1_fraction(0.0) for v in vs]
    assert all(b <= a + 1e-15 for a, b in zip(at_zero, at_zero[1:]))


@pytest.mark.parametrize("kind", ["same", "diff", "attacked"])
@pytest.mark.parametrize(
    "r,arm_b_db,chan_db,leak",
    [
        (0.5, 10.5, 0.0, 0.0),
        (0.5, 10.5, 1.0, 0.02),
        (0.3, 6.0, 0.5, 0.1),
        (0.9, 0.0, 0.0, 1.0),
    ],
)
def test_terminal_probabilities_sum_to_one(kind, r, arm_b_db, chan_db, leak):
    splitter = SplitterSpec(r, 1.0 - r)
    losses = ArmLosses(arm_b_roundtrip_db=arm_b_db, channel_oneway_db=chan_db)
    if kind == "same":
        probs = same_choice_probs(splitter, losses, leak)
    elif kind == "diff":
        probs = diff_choice_probs(InterferenceSpec(0.98), splitter, losses)
    else:
        probs = attacked_diff_probs(splitter, losses)
    cols = probs.as_columns()
    assert all(c >= 0.0 for c in cols)
    assert sum(cols) + probs.lost == pytest.approx(1.0, abs=1e-12)
    assert probs.lost >= -1e-12


def test_attacked_diff_is_fifty_fifty_at_balanced_splitter():
    # resent light cannot interfere; both return paths split R/T, so a
    # detected photon lands on D1 with probability 1/2 at R=T=0.5
    probs = attacked_diff_probs(SplitterSpec(), ArmLosses(10.5, 1.0))
    detected = probs.d1_total + probs.d2_total
    assert probs.d1_total / detected == pytest.approx(0.5, abs=1e-12)


# --------------------------------------------------------- scalar samplers


def test_route_same_choice_frequencies():
    rng = fresh_rng(21)
    n = 200_000
    terminals = [
        route_same_choice(SplitterSpec(), lossless(), 0.0, rng).terminal
        for _ in range(n)
    ]
    freq_d3 = sum(t is Terminal.D3 for t in terminals) / n
    freq_d1 = sum(t is Terminal.D1 for t in terminals) / n
    assert abs(freq_d3 - 0.5) < 4.0 * binomial_sigma(0.5, n)
    assert abs(freq_d1 - 0.25) < 4.0 * binomial_sigma(0.25, n)


@pytest.mark.parametrize(
    "v,delta", [(0.98, 0.0), (0.9, 1.0), (1.0, math.pi / 2), (0.5, math.pi)]
)
def test_route_diff_choice_frequencies(v, delta):
    rng = fresh_rng(22)
    interf = InterferenceSpec(v, phase_error_rad=delta)
    n = 100_000
    terminals = [
        route_diff_choice(interf, SplitterSpec(), lossless(), rng).terminal
        for _ in range(n)
    ]
    p = (1.0 - v * math.cos(delta)) / 2.0
    freq = sum(t is Terminal.D1 for t in terminals) / n
    assert abs(freq - p) < 4.0 * binomial_sigma(p, n) + 1e-9


def test_route_traces_mark_channel_traversal():
    rng = fresh_rng(23)
    # without leakage nothing that reaches a detector crossed the channel
    for _ in range(2_000):
        photon = route_same_choice(SplitterSpec(), lossless(), 0.0, rng)
        assert not photon.via_arm_b
    # with full leakage the blockade passes everything: D3 never fires and
    # half the D1 arrivals are returned channel light
    probs = same_choice_probs(SplitterSpec(), lossless(), leak=1.0)
    assert probs.d3 == pytest.approx(0.0, abs=1e-12)
    assert probs.d1_via_b == pytest.approx(0.25)
    n = 20_000
    routed = [
        route_same_choice(SplitterSpec(), lossless(), 1.0, rng) for _ in range(n)
    ]
    d1 = [p for p in routed if p.terminal is Terminal.D1]
    via_frac = sum(p.via_arm_b for p in d1) / len(d1)
    assert abs(via_frac - 0.5) < 4.0 * binomial_sigma(0.5, len(d1))


# -------------------------------------------------------- enumeration oracle


def test_oracle_vacuum():
    dist = outcome_distribution(0, True, SplitterSpec(), lossless())
    assert dist == {(0, 0, 0, 0): 1.0}


def test_oracle_single_photon_ideal_same():
    dist = outcome_distribution(1, True, SplitterSpec(), lossless())
    assert dist[(1, 0, 0, 0)] == pytest.approx(0.5)
    assert dist[(0, 1, 0, 0)] == pytest.approx(0.25)
    assert dist[(0, 0, 1, 0)] == pytest.approx(0.25)


def test_oracle_two_photon_diff_both_bright_port():
    dist = outcome_distribution(
        2,
        False,
        SplitterSpec(),
        lossless(),
        interference=InterferenceSpec(0.98),
    )
    assert dist[(0, 0, 2, 0)] == pytest.approx(0.9801)


@pytest.mark.parametrize("n", [0, 1, 2, 3, 4])
def test_oracle_normalizes(n):
    dist = outcome_distribution(
        n,
        False,
        SplitterSpec(0.3, 0.7),
        ArmLosses(6.0, 1.0),
        interference=InterferenceSpec(0.9, 0.4),
    )
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)
    assert all((sum(k) == n) for k in dist)


def test_oracle_rejects_beyond_enumeration_bound():
    with pytest.raises(ParameterError):
        outcome_distribution(5, True, SplitterSpec(), lossless())
    with pytest.raises(ParameterError):
        outcome_distribution(-1, True, SplitterSpec(), lossless())


def test_oracle_marginal_mean_is_n_times_p():
    losses = ArmLosses(10.5, 1.0)
    probs = same_choice_probs(SplitterSpec(), losses, leak=0.02)
    dist = outcome_distribution(3, True, SplitterSpec(), losses, leak=0.02)
    mean_d1 = sum(k[1] * p for k, p in dist.items())
    assert mean_d1 == pytest.approx(3.0 * probs.d1_total, abs=1e-12)


# ------------------------------------------------------- vectorized sampler


def test_sample_outcome_counts_shape_and_budget():
    rng = fresh_rng(31)
    probs = same_choice_probs(SplitterSpec(), ArmLosses(10.5, 0.0), leak=0.02)
    n = rng.poisson(1.5, size=10_000)
    counts = sample_outcome_counts(probs, n, rng)
    assert counts.shape == (7, 10_000)
    assert (counts >= 0).all()
    assert (counts.sum(axis=0) <= n).all()


def test_sample_outcome_counts_zero_photons():
    rng = fresh_rng(32)
    probs = same_choice_probs(SplitterSpec(), lossless(), leak=0.0)
    counts = sample_outcome_counts(probs, np.zeros(100, dtype=np.int64), rng)
    assert counts.sum() == 0


def test_sample_outcome_counts_deterministic():
    probs = diff_choice_probs(InterferenceSpec(0.98), SplitterSpec(), lossless())
    n = np.arange(0, 50)
    a = sample_outcome_counts(probs, n, fresh_rng(33))
    b = sample_outcome_counts(probs, n, fresh_rng(33))
    assert (a == b).all()


def test_sample_outcome_counts_validation():
    rng = fresh_rng(34)
    n = np.ones(4, dtype=np.int64)
    with pytest.raises(ParameterError):
        sample_outcome_counts(np.full(7, 0.2), n, rng)  # sums to 1.4
    with pytest.raises(ParameterError):
        sample_outcome_counts(np.array([-0.1, 0, 0, 0, 0, 0, 0]), n, rng)
    with pytest.raises(ParameterError):
        sample_outcome_counts(np.zeros(7), np.array([-1]), rng)


def test_sampler_matches_oracle_small_tv():
    # per-n total variation against the exact law; the acceptance suite
    # runs the full grid, this is the quick regression version
    rng = fresh_rng(35)
    splitter = SplitterSpec()
    losses = ArmLosses(10.5, 0.0)
    probs = same_choice_probs(splitter, losses, leak=0.02)
    n_samples = 200_000
    for n in (1, 2, 3):
        counts = sample_outcome_counts(
            probs, np.full(n_samples, n, dtype=np.int64), rng
        )
        lost = n - counts.sum(axis=0)
        d3 = counts[0]
        d1 = counts[1] + counts[3] + counts[5]
        d2 = counts[2] + counts[4] + counts[6]
        patterns, freq = np.unique(
            np.stack([d3, d1, d2, lost], axis=1), axis=0, return_counts=True
        )
        empirical = {tuple(int(x) for x in row): c / n_samples
                     for row, c in zip(patterns, freq)}
        exact = outcome_distribution(n, True, splitter, losses, leak=0.02)
        keys = set(empirical) | set(exact)
        tv = 0.5 * sum(
            abs(empirical.get(k, 0.0) - exact.get(k, 0.0)) for k in keys
        )
        assert tv < 0.005
