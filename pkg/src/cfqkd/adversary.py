"""Intercept-resend eavesdropper acting on the transmission channel.

Eve sits in channel b and, on attacked slots, measures any photon headed
for the receiver in the polarization basis and re-sends one with the
measured polarization. The measurement destroys the arm-a/arm-b
superposition, so a reflecting (different-choice) slot loses its
interference and the returned light splits incoherently at the
recombining beamsplitter. Blocked (same-choice) slots are unaffected:
the photon was going to be absorbed at the receiver either way, and the
re-sent copy is absorbed in its place.

The attack mask is drawn from its own random stream so that enabling an
adversary with fraction 0 leaves the physics stream untouched slot for
slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from .errors import ParameterError

if TYPE_CHECKING:
    from .protocol import BlockTally


class AdversaryKind(Enum):
    NONE = "none"
    INTERCEPT_RESEND = "intercept_resend"


@dataclass(frozen=True)
class AdversarySpec:
    """Which attack runs and on what fraction of slots."""

    kind: AdversaryKind = AdversaryKind.NONE
    fraction: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.fraction <= 1.0):
            raise ParameterError(f"attack fraction must be in [0, 1], got {self.fraction}")

    @property
    def active(self) -> bool:
        return self.kind is AdversaryKind.INTERCEPT_RESEND and self.fraction > 0.0


def attack_mask(spec: AdversarySpec, n_slots: int, rng: np.random.Generator) -> np.ndarray:
    """Per-slot attack indicator. kind=none never attacks."""
    if n_slots < 0:
        raise ParameterError("n_slots must be >= 0")
    if not spec.active:
        return np.zeros(n_slots, dtype=bool)
    return rng.random(n_slots) < spec.fraction


def click_rate_z(k_obs: int, n_obs: int, k_ref: int, n_ref: int) -> float:
    """Two-sample binomial z-score for a monitored click rate.

    Pooled-variance normal approximation; returns 0 when either sample
    is empty or the pooled rate is degenerate.
    """
    if min(k_obs, k_ref) < 0 or k_obs > n_obs or k_ref > n_ref:
        raise ParameterError("counts must satisfy 0 <= k <= n")
    if n_obs == 0 or n_ref == 0:
        return 0.0
    pooled = (k_obs + k_ref) / (n_obs + n_ref)
    var = pooled * (1.0 - pooled) * (1.0 / n_obs + 1.0 / n_ref)
    if var <= 0.0:
        return 0.0
    return (k_obs / n_obs - k_ref / n_ref) / math.sqrt(var)


def monitoring_anomaly(observed: "BlockTally", reference: "BlockTally") -> dict[str, float]:
    """z-scores of the diff-choice monitoring channels against a baseline.

    An intercept-resend attack pushes D1 clicks up and D2 clicks down in
    reflecting slots; both signs are reported along with the largest
    absolute excursion, which is the alarm statistic.
    """
    z_d1 = click_rate_z(
        observed.d1_clicks_diff, observed.diff_slots,
        reference.d1_clicks_diff, reference.diff_slots,
    )
    z_d2 = click_rate_z(
        observed.d2_clicks_diff, observed.diff_slots,
        reference.d2_clicks_diff, reference.diff_slots,
    )
    return {
        "z_d1_diff": z_d1,
        "z_d2_diff": z_d2,
        "max_abs_z": max(abs(z_d1), abs(z_d2)),
        # both channels read together; under the null this is the square
        # root of a chi-square with 2 degrees of freedom
        "joint_z": math.hypot(z_d1, z_d2),
    }
