"""Detector and switch models.

Detectors are gated threshold single-photon counters. A gate either
clicks or it does not; the three click causes (photon absorption, dark
count, afterpulse) are independent, so the gate click probability is
their union:

    p = 1 - (1 - p_photo) * (1 - p_dark) * (1 - p_after * prior)

with p_photo = 1 - (1 - eta)^n for n incident photons and prior = 1 if
the same channel clicked in the immediately preceding gate. Afterpulse
memory spans exactly that one gate; there is no dead time.

The fiber switch is characterised by its extinction ratios. The dynamic
(while-switching) figure is the operative one: light sent into the
blocking state still passes with probability 10^(-dynamic_dB/10). The
response and switching times are carried as data for timing budgets but
do not gate the per-slot model, which treats one slot as one settled
switch state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ParameterError
from .optics import db_to_transmittance


class DetectorChannel(Enum):
    """The five gated channels: polarization-resolved key and block
    detectors plus the bright monitoring port."""

    D1H = "D1H"
    D1V = "D1V"
    D2 = "D2"
    D3H = "D3H"
    D3V = "D3V"


#: Canonical channel ordering used for draws, reports, and CSV columns.
CHANNEL_ORDER = (
    DetectorChannel.D1H,
    DetectorChannel.D1V,
    DetectorChannel.D2,
    DetectorChannel.D3H,
    DetectorChannel.D3V,
)


@dataclass(frozen=True)
class DetectorSpec:
    """Gated detector figures of merit.

    The quantum efficiency is a calibration parameter: it is never pinned
    by the monitoring statistics alone and must be chosen to match the
    observed count rates of a given setup.
    """

    efficiency: float = 0.10
    dark_prob_per_gate: float = 1e-5
    afterpulse_prob: float = 0.01

    def __post_init__(self) -> None:
        for name in ("efficiency", "dark_prob_per_gate", "afterpulse_prob"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ParameterError(f"{name} must be in [0, 1], got {value}")

    def photo_click_prob(self, incident_photons: int) -> float:
        if incident_photons < 0:
            raise ParameterError("incident photon count must be >= 0")
        if incident_photons == 0:
            return 0.0
        return 1.0 - (1.0 - self.efficiency) ** incident_photons


@dataclass
class DetectorState:
    """Per-channel afterpulse memory: did the channel click last gate."""

    clicked_last_gate: dict[DetectorChannel, bool] = field(
        default_factory=lambda: {ch: False for ch in CHANNEL_ORDER}
    )

    def reset(self) -> None:
        for ch in self.clicked_last_gate:
            self.clicked_last_gate[ch] = False


def gate_detector(
    spec: DetectorSpec,
    state: DetectorState,
    channel: DetectorChannel,
    incident_photons: int,
    rng: np.random.Generator,
) -> bool:
    """Gate one channel once and update its afterpulse memory.

    Two uniforms are drawn: one against the photon/dark union, one
    against the afterpulse probability (consumed whether or not the
    prior gate clicked, which keeps the draw count state-independent).
    """
    p_base = 1.0 - (1.0 - spec.photo_click_prob(incident_photons)) * (
        1.0 - spec.dark_prob_per_gate
    )
    base = rng.random() < p_base
    after = rng.random() < spec.afterpulse_prob
    clicked = base or (after and state.clicked_last_gate[channel])
    state.clicked_last_gate[channel] = clicked
    return clicked


class SwitchAction(Enum):
    ROUTED_TO_DETECTOR = "routed_to_detector"
    LEAKED_TO_MIRROR = "leaked_to_mirror"


@dataclass(frozen=True)
class SwitchSpec:
    """Fiber switch extinction and timing figures."""

    static_extinction_db: float = 20.0
    dynamic_extinction_db: float = 17.0
    response_time_s: float = 100e-9
    switching_time_s: float = 300e-9

    def __post_init__(self) -> None:
        if self.static_extinction_db < 0.0 or self.dynamic_extinction_db < 0.0:
            raise ParameterError("extinction ratios must be >= 0 dB")
        if self.dynamic_extinction_db > self.static_extinction_db:
            raise ParameterError(
                "dynamic extinction cannot exceed the static extinction "
                f"({self.dynamic_extinction_db} > {self.static_extinction_db} dB)"
            )
        if self.response_time_s < 0.0 or self.switching_time_s < 0.0:
            raise ParameterError("switch times must be >= 0")

    @property
    def leak_probability(self) -> float:
        """Blocking-state transmission 10^(-dynamic_dB/10)."""
        if math.isinf(self.dynamic_extinction_db):
            return 0.0
        return db_to_transmittance(self.dynamic_extinction_db)


def switch_block(spec: SwitchSpec, rng: np.random.Generator) -> SwitchAction:
    """One photon meets the switch in its blocking state."""
    if rng.random() < spec.leak_probability:
        return SwitchAction.LEAKED_TO_MIRROR
    return SwitchAction.ROUTED_TO_DETECTOR


def apply_loss(eta: float, n: int, rng: np.random.Generator) -> int:
    """Thin n photons through a transmittance eta: Binomial(n, eta)."""
    if not (0.0 <= eta <= 1.0):
        raise ParameterError(f"transmittance must be in [0, 1], got {eta}")
    if n < 0:
        raise ParameterError(f"photon count must be >= 0, got {n}")
    return int(rng.binomial(n, eta))
