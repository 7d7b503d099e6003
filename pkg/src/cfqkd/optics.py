"""Per-pulse optical event model for the counterfactual-QKD interferometer.

The optical layout is a Michelson-type interferometer. A weak coherent
pulse enters through a circulator and hits a beam splitter with power
reflectivity R and transmissivity T. The reflected part stays on the
sender's table (arm a, terminated by a mirror behind an attenuator), the
transmitted part travels over the public channel to the receiver (arm b),
where a fast switch either blocks it into a local detector (D3) or lets
it reflect back off a mirror.

Two event classes follow from the receiver's choice:

* blocking ("same choice"): no interference happens. Each photon is a
  classical particle: it either ends at D3, or returns through arm a and
  splits at the recombining beam splitter toward the D1 port (through the
  circulator) or the D2 port. A photon that should have been blocked can
  leak past the switch with a small probability, return along arm b, and
  split at the beam splitter without interference.
* reflecting ("diff choice"): both arms return and interfere. The setup
  is stabilised so the D1 port is the dark fringe; with fringe visibility
  V and residual phase error delta the surviving photon exits toward D1
  with probability (1 - V*cos(delta))/2 and toward D2 otherwise.

Port convention, fixed by the contract of `route_same_choice`: a photon
returning along arm a leaves toward D1 with probability T and toward D2
with probability R; a photon returning along arm b takes the complementary
split (D1 with probability R, D2 with probability T), as required by
unitarity of the splitter.

All routing here is per photon and loss is a Bernoulli survival draw, so
an n-photon pulse is n independent trials. `outcome_distribution` gives
the exact joint law of the per-slot terminal occupancy for small n and is
the ground-truth oracle against which the samplers are tested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from itertools import product
from typing import Optional

import numpy as np

from .errors import ParameterError

#: Largest photon number handled by the exact enumeration oracle.
ENUMERATION_LIMIT = 4


class Polarization(Enum):
    """Pulse polarization; H encodes bit 0 and V encodes bit 1."""

    H = 0
    V = 1

    @property
    def bit(self) -> int:
        return self.value


class Terminal(Enum):
    """Where a photon ends up after a full pass through the optics."""

    D3 = "D3"
    D1 = "D1"
    D2 = "D2"
    LOST = "LOST"


@dataclass(frozen=True)
class RoutedPhoton:
    """Terminal of one photon plus its route trace.

    via_arm_b is True only when the photon deterministically traversed
    the public channel and still reached the sender's detectors (switch
    leakage, or an eavesdropper's resent photon). Interfering photons
    have no defined path and carry False.
    """

    terminal: Terminal
    via_arm_b: bool = False


@dataclass(frozen=True)
class SplitterSpec:
    """Beam splitter power coefficients. R + T must equal 1."""

    reflectivity: float = 0.5
    transmissivity: float = 0.5

    def __post_init__(self) -> None:
        if not (0.0 <= self.reflectivity <= 1.0):
            raise ParameterError(
                f"splitter reflectivity must be in [0, 1], got {self.reflectivity}"
            )
        if not (0.0 <= self.transmissivity <= 1.0):
            raise ParameterError(
                f"splitter transmissivity must be in [0, 1], got {self.transmissivity}"
            )
        if abs(self.reflectivity + self.transmissivity - 1.0) > 1e-9:
            raise ParameterError(
                "splitter coefficients must sum to 1, got "
                f"R={self.reflectivity} T={self.transmissivity}"
            )


def db_to_transmittance(loss_db: float) -> float:
    """Convert an attenuation in dB to a power transmittance 10^(-dB/10)."""
    if loss_db < 0.0:
        raise ParameterError(f"attenuation must be >= 0 dB, got {loss_db}")
    return 10.0 ** (-loss_db / 10.0)


@dataclass(frozen=True)
class ArmLosses:
    """Round-trip attenuation budget of the two interferometer arms.

    arm_b_roundtrip_db covers the receiver-side path (switch, delay line,
    mirror) out and back, excluding the transmission channel itself, whose
    one-way attenuation is channel_oneway_db and is charged once per pass.
    arm_a_roundtrip_db is the local arm including its balancing attenuator;
    None means "balanced", i.e. equal to the full arm-b round trip.
    """

    arm_b_roundtrip_db: float = 10.5
    channel_oneway_db: float = 0.0
    arm_a_roundtrip_db: Optional[float] = None

    def __post_init__(self) -> None:
        if self.arm_b_roundtrip_db < 0.0:
            raise ParameterError("arm_b_roundtrip_db must be >= 0")
        if self.channel_oneway_db < 0.0:
            raise ParameterError("channel_oneway_db must be >= 0")
        if self.arm_a_roundtrip_db is not None and self.arm_a_roundtrip_db < 0.0:
            raise ParameterError("arm_a_roundtrip_db must be >= 0 or None")

    @property
    def arm_b_full_roundtrip_db(self) -> float:
        """Total dB for a full arm-b round trip including two channel passes."""
        return self.arm_b_roundtrip_db + 2.0 * self.channel_oneway_db

    @property
    def arm_a_effective_db(self) -> float:
        if self.arm_a_roundtrip_db is None:
            return self.arm_b_full_roundtrip_db
        return self.arm_a_roundtrip_db

    @property
    def eta_arm_a_roundtrip(self) -> float:
        return db_to_transmittance(self.arm_a_effective_db)

    @property
    def eta_arm_b_roundtrip(self) -> float:
        return db_to_transmittance(self.arm_b_full_roundtrip_db)

    @property
    def eta_to_receiver(self) -> float:
        """One-way survival from the splitter to the receiver's switch.

        The receiver-side budget is split evenly between the outbound and
        return halves; the channel is charged one pass.
        """
        return db_to_transmittance(
            self.arm_b_roundtrip_db / 2.0 + self.channel_oneway_db
        )

    @property
    def eta_return_from_receiver(self) -> float:
        """Survival of the return half of arm b (mirror back to splitter)."""
        return db_to_transmittance(
            self.arm_b_roundtrip_db / 2.0 + self.channel_oneway_db
        )


@dataclass(frozen=True)
class InterferenceSpec:
    """Static fringe visibility and residual phase error of the dark port."""

    static_visibility: float = 0.98
    phase_error_rad: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.static_visibility <= 1.0):
            raise ParameterError(
                f"visibility must be in [0, 1], got {self.static_visibility}"
            )

    def d1_fraction(self, delta=None):
        """Dark-port emission probability (1 - V cos delta) / 2.

        delta may be a scalar or an ndarray of per-slot phase errors.
        """
        d = self.phase_error_rad if delta is None else delta
        return 0.5 * (1.0 - self.static_visibility * np.cos(d))


def sample_photon_number(mu: float, rng: np.random.Generator) -> int:
    """Draw the photon number of one weak coherent pulse, Poisson(mu)."""
    if mu < 0.0:
        raise ParameterError(f"mean photon number must be >= 0, got {mu}")
    return int(rng.poisson(mu))


@dataclass(frozen=True)
class PerPhotonProbs:
    """Terminal probabilities for a single photon, origin-resolved.

    The *_via_a entries are photons that returned through the local arm,
    *_via_b entries traversed the public channel and came back (switch
    leakage or an attacked slot), and the *_interf entries are photons in
    the interfering configuration, which have no defined arm.
    """

    d3: float = 0.0
    d1_via_a: float = 0.0
    d2_via_a: float = 0.0
    d1_via_b: float = 0.0
    d2_via_b: float = 0.0
    d1_interf: float = 0.0
    d2_interf: float = 0.0

    @property
    def lost(self) -> float:
        return 1.0 - (
            self.d3
            + self.d1_via_a
            + self.d2_via_a
            + self.d1_via_b
            + self.d2_via_b
            + self.d1_interf
            + self.d2_interf
        )

    @property
    def d1_total(self) -> float:
        return self.d1_via_a + self.d1_via_b + self.d1_interf

    @property
    def d2_total(self) -> float:
        return self.d2_via_a + self.d2_via_b + self.d2_interf

    def as_columns(self) -> tuple[float, ...]:
        """Fixed draw order used by the samplers: D3, D1a, D2a, D1b, D2b,
        D1i, D2i. The implicit remainder is LOST."""
        return (
            self.d3,
            self.d1_via_a,
            self.d2_via_a,
            self.d1_via_b,
            self.d2_via_b,
            self.d1_interf,
            self.d2_interf,
        )


def same_choice_probs(
    splitter: SplitterSpec, losses: ArmLosses, leak: float
) -> PerPhotonProbs:
    """Per-photon terminal law when the receiver blocks (no interference).

    Path tree: transmit into arm b (prob T), survive the one-way trip,
    then either stop at D3 (prob 1 - leak) or slip past the switch,
    survive the return trip, and split at the beam splitter as an arm-b
    returner (D1 with probability R, D2 with probability T). Reflect into
    arm a (prob R), survive the round trip, then exit toward D1 with
    probability T or D2 with probability R.
    """
    if not (0.0 <= leak <= 1.0):
        raise ParameterError(f"leak probability must be in [0, 1], got {leak}")
    r, t = splitter.reflectivity, splitter.transmissivity
    eta_a = losses.eta_arm_a_roundtrip
    eta_out = losses.eta_to_receiver
    eta_back = losses.eta_return_from_receiver
    leaked = t * eta_out * leak * eta_back
    return PerPhotonProbs(
        d3=t * eta_out * (1.0 - leak),
        d1_via_a=r * eta_a * t,
        d2_via_a=r * eta_a * r,
        d1_via_b=leaked * r,
        d2_via_b=leaked * t,
    )


def diff_choice_probs(
    interference: InterferenceSpec,
    splitter: SplitterSpec,
    losses: ArmLosses,
    delta: Optional[float] = None,
) -> PerPhotonProbs:
    """Per-photon terminal law when the arms interfere.

    Survival is the balanced round-trip transmittance (geometric mean of
    the two arm round trips; they are equal in a balanced setup). The
    splitter argument is kept for interface symmetry: the dark-port
    fraction is governed entirely by the visibility, which absorbs any
    splitting-ratio imbalance.
    """
    del splitter
    eta = math.sqrt(losses.eta_arm_a_roundtrip * losses.eta_arm_b_roundtrip)
    p_d1 = interference.d1_fraction(delta)
    return PerPhotonProbs(
        d1_interf=eta * p_d1,
        d2_interf=eta * (1.0 - p_d1),
    )


def attacked_diff_probs(
    splitter: SplitterSpec, losses: ArmLosses
) -> PerPhotonProbs:
    """Per-photon law for a reflecting slot whose channel photon was
    intercepted and resent: interference is destroyed, so each photon
    takes a definite arm and splits incoherently on the way out."""
    r, t = splitter.reflectivity, splitter.transmissivity
    eta_a = losses.eta_arm_a_roundtrip
    eta_b = losses.eta_arm_b_roundtrip
    return PerPhotonProbs(
        d1_via_a=r * eta_a * t,
        d2_via_a=r * eta_a * r,
        d1_via_b=t * eta_b * r,
        d2_via_b=t * eta_b * t,
    )


def _route_one(probs: PerPhotonProbs, rng: np.random.Generator) -> RoutedPhoton:
    u = rng.random()
    edges = (
        (probs.d3, Terminal.D3, False),
        (probs.d1_via_a, Terminal.D1, False),
        (probs.d2_via_a, Terminal.D2, False),
        (probs.d1_via_b, Terminal.D1, True),
        (probs.d2_via_b, Terminal.D2, True),
        (probs.d1_interf, Terminal.D1, False),
        (probs.d2_interf, Terminal.D2, False),
    )
    acc = 0.0
    for p, terminal, via_b in edges:
        acc += p
        if u < acc:
            return RoutedPhoton(terminal, via_b)
    return RoutedPhoton(Terminal.LOST, False)


def route_same_choice(
    splitter: SplitterSpec,
    losses: ArmLosses,
    leak: float,
    rng: np.random.Generator,
) -> RoutedPhoton:
    """Route one photon through a blocking slot. See `same_choice_probs`."""
    return _route_one(same_choice_probs(splitter, losses, leak), rng)


def route_diff_choice(
    interference: InterferenceSpec,
    splitter: SplitterSpec,
    losses: ArmLosses,
    rng: np.random.Generator,
    delta: Optional[float] = None,
) -> RoutedPhoton:
    """Route one photon through a reflecting (interfering) slot."""
    return _route_one(diff_choice_probs(interference, splitter, losses, delta), rng)


def outcome_distribution(
    n: int,
    same_choice: bool,
    splitter: SplitterSpec,
    losses: ArmLosses,
    interference: Optional[InterferenceSpec] = None,
    leak: float = 0.0,
    delta: Optional[float] = None,
    attacked: bool = False,
) -> dict[tuple[int, int, int, int], float]:
    """Exact joint law of the terminal occupancy of an n-photon pulse.

    Returns a map from (n_D3, n_D1, n_D2, n_lost) to probability. Photons
    are independent, so the law is multinomial over the per-photon
    terminal probabilities. Exact enumeration is intentionally capped at
    small n; the factorially growing pattern space is pointless beyond
    that and a request above the cap raises ParameterError.
    """
    if n < 0:
        raise ParameterError(f"photon number must be >= 0, got {n}")
    if n > ENUMERATION_LIMIT:
        raise ParameterError(
            f"exact enumeration supports n <= {ENUMERATION_LIMIT}, got {n}"
        )
    if same_choice:
        probs = same_choice_probs(splitter, losses, leak)
    elif attacked:
        probs = attacked_diff_probs(splitter, losses)
    else:
        if interference is None:
            raise ParameterError("interference spec required for a reflecting slot")
        probs = diff_choice_probs(interference, splitter, losses, delta)

    p = (probs.d3, probs.d1_total, probs.d2_total, probs.lost)
    dist: dict[tuple[int, int, int, int], float] = {}
    for counts in product(range(n + 1), repeat=3):
        k3, k1, k2 = counts
        klost = n - k3 - k1 - k2
        if klost < 0:
            continue
        coeff = math.factorial(n) // (
            math.factorial(k3)
            * math.factorial(k1)
            * math.factorial(k2)
            * math.factorial(klost)
        )
        prob = coeff * (p[0] ** k3) * (p[1] ** k1) * (p[2] ** k2) * (p[3] ** klost)
        if prob > 0.0:
            dist[(k3, k1, k2, klost)] = prob
    return dist


def sample_outcome_counts(
    probs,
    n: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Sample terminal occupancies for many pulses at once.

    probs is a PerPhotonProbs, or an array of shape (7,) or (7, N) giving
    per-photon column probabilities in as_columns() order (columns may
    vary per pulse). n is an integer array of photon numbers per pulse.
    Returns an int64 array of shape (7, N); photons not captured by any
    column are lost.

    The multinomial is drawn as a chain of conditional binomials in the
    fixed column order, which keeps the random-stream layout identical
    for constant and per-pulse probability tables.
    """
    if isinstance(probs, PerPhotonProbs):
        cols = np.asarray(probs.as_columns(), dtype=float).reshape(7, 1)
    else:
        cols = np.asarray(probs, dtype=float)
        if cols.ndim == 1:
            cols = cols.reshape(7, 1)
        if cols.ndim != 2 or cols.shape[0] != 7:
            raise ParameterError("probability table must have 7 columns")
    if np.any(cols < 0.0) or np.any(cols.sum(axis=0) > 1.0 + 1e-9):
        raise ParameterError("column probabilities must be >= 0 and sum to <= 1")

    n = np.asarray(n)
    if n.ndim != 1:
        raise ParameterError("photon numbers must be a 1-d array")
    if np.any(n < 0):
        raise ParameterError("photon numbers must be >= 0")

    remaining = n.astype(np.int64).copy()
    counts = np.empty((7, n.shape[0]), dtype=np.int64)
    cum = np.zeros(cols.shape[1], dtype=float)
    for i in range(7):
        denom = 1.0 - cum
        cond = np.where(denom > 1e-12, cols[i] / np.maximum(denom, 1e-12), 0.0)
        cond = np.clip(cond, 0.0, 1.0)
        drawn = rng.binomial(remaining, cond)
        counts[i] = drawn
        remaining -= drawn
        cum = cum + cols[i]
    return counts
