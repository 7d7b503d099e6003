"""Interferometer path-length drift and the PI stabilisation loop.

The path difference between the two arms is tracked as a physical length
x = n*dL (refractive index folded in). Both working wavelengths read the
same length, which is the whole point of the two-wavelength method:

    x = lambda_r * (m_r + phi_r / 2pi) = lambda_s * (m_s + phi_s / 2pi)

holds identically because m and phi are just the integer and fractional
parts of x in units of the respective wavelength. The reference laser is
detected on an analog photodiode whose fringe is

    I = I0 * cos^2(k_r * x / 2)

and the controller holds that intensity at the mid-fringe setpoint I0/2,
where the slope is maximal. The signal-wavelength phase error delta is
reported relative to the lock point, which calibration defines as
delta = 0.

Drift is a Wiener process. The configured rate is the mean absolute
signal-phase change per millisecond; for a zero-mean Gaussian increment
E|X| = sigma * sqrt(2/pi), so the per-sqrt(ms) sigma is rate*sqrt(pi/2).

The actuator is a fiber stretcher driven by the controller output times
a voltage amplifier: phase authority = span * gain * rad_per_volt. The
loop runs on a fixed period with the output held between updates (the
compute time occupies most of the period, so a measurement taken in one
period can only act on the next one). The integrator is frozen while the
output is railed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ParameterError

TWO_PI = 2.0 * math.pi


def wrap_pi(angle_rad: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    return (angle_rad + math.pi) % TWO_PI - math.pi


def reconstruct_path(wavelength_m: float, fringe_order: int, phase_rad: float) -> float:
    """Invert the fringe decomposition: x = lambda * (m + phi/2pi)."""
    return wavelength_m * (fringe_order + phase_rad / TWO_PI)


@dataclass
class PhaseState:
    """Drifting optical path difference read at two wavelengths.

    signal_origin_rad is the absolute signal phase defined as delta = 0;
    by default the state calibrates it to its own starting point.
    """

    path_difference_m: float
    lambda_signal_m: float = 1550e-9
    lambda_ref_m: float = 1570e-9
    drift_rad_per_ms: float = 0.5
    signal_origin_rad: Optional[float] = None

    def __post_init__(self) -> None:
        if self.path_difference_m < 0.0:
            raise ParameterError("path difference must be >= 0")
        if self.lambda_signal_m <= 0.0 or self.lambda_ref_m <= 0.0:
            raise ParameterError("wavelengths must be positive")
        if self.lambda_signal_m == self.lambda_ref_m:
            raise ParameterError(
                "signal and reference wavelengths must differ for the "
                "two-wavelength readout to be unambiguous"
            )
        if self.drift_rad_per_ms < 0.0:
            raise ParameterError("drift rate must be >= 0 rad/ms")
        if self.signal_origin_rad is None:
            self.signal_origin_rad = self.k_signal * self.path_difference_m

    @classmethod
    def at_lock_point(
        cls,
        lambda_signal_m: float = 1550e-9,
        lambda_ref_m: float = 1570e-9,
        drift_rad_per_ms: float = 0.5,
        fringe_order_ref: int = 58,
    ) -> "PhaseState":
        """State prepared at a mid-fringe reference point.

        The path difference is placed a quarter period into the given
        reference fringe order, so the reference phase is exactly pi/2
        (intensity I0/2, maximal slope) and the signal phase origin is
        calibrated to that point.
        """
        x0 = (fringe_order_ref + 0.25) * lambda_ref_m
        return cls(
            path_difference_m=x0,
            lambda_signal_m=lambda_signal_m,
            lambda_ref_m=lambda_ref_m,
            drift_rad_per_ms=drift_rad_per_ms,
        )

    @property
    def k_signal(self) -> float:
        return TWO_PI / self.lambda_signal_m

    @property
    def k_ref(self) -> float:
        return TWO_PI / self.lambda_ref_m

    def effective_path_m(self, actuator_rad: float = 0.0) -> float:
        """Path difference seen by the light with the stretcher engaged.

        The actuator is specified in signal-wavelength radians; it changes
        a physical length, so both wavelengths see it scaled by their own
        wavenumber.
        """
        return self.path_difference_m - actuator_rad / self.k_signal

    def signal_phase(self, actuator_rad: float = 0.0) -> float:
        return self.k_signal * self.effective_path_m(actuator_rad)

    def ref_phase(self, actuator_rad: float = 0.0) -> float:
        return self.k_ref * self.effective_path_m(actuator_rad)

    def delta_signal(self, actuator_rad: float = 0.0) -> float:
        """Signal phase error relative to the calibrated lock point."""
        return wrap_pi(self.signal_phase(actuator_rad) - self.signal_origin_rad)

    # fringe order and wrapped phase split the same float quotient, so
    # x = lambda * (m + phi/2pi) reassembles exactly even at fringe edges
    def fringe_order_signal(self, actuator_rad: float = 0.0) -> int:
        u = self.effective_path_m(actuator_rad) / self.lambda_signal_m
        return int(math.floor(u))

    def fringe_order_ref(self, actuator_rad: float = 0.0) -> int:
        u = self.effective_path_m(actuator_rad) / self.lambda_ref_m
        return int(math.floor(u))

    def wrapped_phase_signal(self, actuator_rad: float = 0.0) -> float:
        u = self.effective_path_m(actuator_rad) / self.lambda_signal_m
        return TWO_PI * (u - math.floor(u))

    def wrapped_phase_ref(self, actuator_rad: float = 0.0) -> float:
        u = self.effective_path_m(actuator_rad) / self.lambda_ref_m
        return TWO_PI * (u - math.floor(u))


def drift_sigma_rad(drift_rad_per_ms: float, dt_s: float) -> float:
    """Wiener increment sigma over dt for a mean-|step| drift rate."""
    sigma_per_ms = drift_rad_per_ms * math.sqrt(math.pi / 2.0)
    return sigma_per_ms * math.sqrt(dt_s / 1e-3)


def drift_step(state: PhaseState, dt_s: float, rng: np.random.Generator) -> PhaseState:
    """Advance the path difference by one Wiener increment."""
    if dt_s < 0.0:
        raise ParameterError("dt must be >= 0")
    if dt_s > 0.0 and state.drift_rad_per_ms > 0.0:
        sigma = drift_sigma_rad(state.drift_rad_per_ms, dt_s)
        state.path_difference_m += rng.normal(0.0, sigma) / state.k_signal
    return state


def reference_intensity(
    state: PhaseState,
    i0: float,
    noise_sd: float,
    rng: np.random.Generator,
    actuator_rad: float = 0.0,
) -> float:
    """Analog photodiode reading of the reference fringe, clamped at 0."""
    if i0 <= 0.0:
        raise ParameterError("i0 must be > 0")
    if noise_sd < 0.0:
        raise ParameterError("noise_sd must be >= 0")
    value = i0 * math.cos(state.ref_phase(actuator_rad) / 2.0) ** 2
    if noise_sd > 0.0:
        value += rng.normal(0.0, noise_sd)
    return max(value, 0.0)


@dataclass(frozen=True)
class PiControllerSpec:
    """PI gains and the actuator chain they drive.

    Defaults were tuned against the simulated plant: with gain 40 and
    pi/4 rad/V one volt moves the phase by 10*pi rad, and the mid-fringe
    intensity slope is i0/2 per signal radian scaled by the wavelength
    ratio. kp takes a small proportional bite; ki does the tracking work
    of following the drift random walk.
    """

    kp: float = 0.0065
    ki: float = 3.9e3
    setpoint: float = 0.5
    output_min_volts: float = -10.0
    output_max_volts: float = 10.0
    amplifier_gain: float = 40.0
    actuator_rad_per_volt: float = math.pi / 4.0
    loop_period_s: float = 10e-6
    compute_time_s: float = 9e-6

    def __post_init__(self) -> None:
        if self.output_min_volts >= self.output_max_volts:
            raise ParameterError("output_min_volts must be < output_max_volts")
        if not (10.0 <= self.amplifier_gain <= 40.0):
            raise ParameterError(
                f"amplifier gain must be within 10-40x, got {self.amplifier_gain}"
            )
        if self.actuator_rad_per_volt <= 0.0:
            raise ParameterError("actuator_rad_per_volt must be > 0")
        if self.loop_period_s <= 0.0:
            raise ParameterError("loop period must be > 0")
        if not (0.0 <= self.compute_time_s < self.loop_period_s):
            raise ParameterError("compute time must fit inside the loop period")

    @property
    def phase_authority_rad(self) -> float:
        """Total actuator range in signal radians across the output span."""
        span = self.output_max_volts - self.output_min_volts
        return span * self.amplifier_gain * self.actuator_rad_per_volt

    def actuator_rad(self, volts: float) -> float:
        return volts * self.amplifier_gain * self.actuator_rad_per_volt


@dataclass
class PiControllerState:
    integrator: float = 0.0
    output_volts: float = 0.0


def pi_step(
    spec: PiControllerSpec,
    state: PiControllerState,
    measured_intensity: float,
) -> tuple[PiControllerState, float]:
    """One controller update; returns the state and the actuator phase.

    The integrator is frozen whenever the unclamped output leaves the
    voltage rails, so the loop recovers immediately once the error sign
    flips instead of unwinding accumulated windup.
    """
    error = spec.setpoint - measured_intensity
    integ_candidate = state.integrator + error * spec.loop_period_s
    unclamped = spec.kp * error + spec.ki * integ_candidate
    if unclamped > spec.output_max_volts:
        output = spec.output_max_volts
    elif unclamped < spec.output_min_volts:
        output = spec.output_min_volts
    else:
        output = unclamped
        state.integrator = integ_candidate
    state.output_volts = output
    return state, spec.actuator_rad(output)


@dataclass
class LockResult:
    """Recorded stabilisation run at the loop-period grid."""

    times_s: np.ndarray
    delta_rad: np.ndarray
    output_volts: np.ndarray
    ref_intensity: np.ndarray
    feedback_on: bool
    static_visibility: float = 1.0

    @property
    def mean_cos_delta(self) -> float:
        return float(np.mean(np.cos(self.delta_rad)))

    @property
    def effective_visibility(self) -> float:
        return self.static_visibility * self.mean_cos_delta

    @property
    def fraction_in_lock(self) -> float:
        per_sample = self.static_visibility * np.cos(self.delta_rad)
        return float(np.mean(per_sample >= 0.98))

    @property
    def max_abs_volts(self) -> float:
        return float(np.max(np.abs(self.output_volts)))

    def summary(self) -> dict:
        step = float(self.times_s[1] - self.times_s[0]) if self.times_s.size > 1 else 0.0
        return {
            "feedback_on": self.feedback_on,
            "duration_s": float(self.times_s[-1]) + step,
            "samples": int(self.times_s.size),
            "effective_visibility": self.effective_visibility,
            "mean_cos_delta": self.mean_cos_delta,
            "fraction_in_lock": self.fraction_in_lock,
            "max_abs_volts": self.max_abs_volts,
            "rms_delta_rad": float(np.sqrt(np.mean(self.delta_rad**2))),
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time_s", "delta_rad", "volts", "ref_intensity"])
            for row in zip(
                self.times_s, self.delta_rad, self.output_volts, self.ref_intensity
            ):
                writer.writerow([f"{v:.9g}" for v in row])


def run_lock(
    phase: PhaseState,
    spec: PiControllerSpec,
    duration_s: float,
    rng: np.random.Generator,
    feedback_on: bool = True,
    i0: float = 1.0,
    noise_sd: float = 0.01,
    static_visibility: float = 1.0,
) -> LockResult:
    """Simulate the stabilisation loop for a wall-clock duration.

    Each loop period the path drifts, the reference photodiode is read
    with the held actuator value, and (when feedback is on) the PI
    controller computes the output applied for the next period. Drift
    increments and photodiode noise are pre-drawn in bulk, so the random
    stream consumption depends only on the step count.
    """
    if duration_s <= 0.0:
        raise ParameterError("duration must be > 0")
    if i0 <= 0.0:
        raise ParameterError("i0 must be > 0")
    if noise_sd < 0.0:
        raise ParameterError("noise_sd must be >= 0")
    n_steps = int(round(duration_s / spec.loop_period_s))
    if n_steps < 1:
        raise ParameterError("duration shorter than one loop period")

    sigma = drift_sigma_rad(phase.drift_rad_per_ms, spec.loop_period_s)
    drift_rad = rng.normal(0.0, sigma, n_steps) if sigma > 0.0 else np.zeros(n_steps)
    noise = rng.normal(0.0, noise_sd, n_steps) if noise_sd > 0.0 else np.zeros(n_steps)

    ctrl = PiControllerState()
    actuator = 0.0
    k_s = phase.k_signal
    # k_ref/k_signal: one physical length read at the other wavelength.
    ratio = phase.lambda_signal_m / phase.lambda_ref_m
    # Work on raw signal-phase coordinates; PhaseState is updated once at
    # the end so its two-wavelength bookkeeping stays exact.
    phi_raw = k_s * phase.path_difference_m
    origin = phase.signal_origin_rad

    times = np.arange(n_steps) * spec.loop_period_s
    deltas = np.empty(n_steps)
    volts = np.empty(n_steps)
    intensities = np.empty(n_steps)

    for t in range(n_steps):
        phi_raw += drift_rad[t]
        phi_eff = phi_raw - actuator
        measured = i0 * math.cos(ratio * phi_eff / 2.0) ** 2 + noise[t]
        if measured < 0.0:
            measured = 0.0
        deltas[t] = wrap_pi(phi_eff - origin)
        volts[t] = ctrl.output_volts
        intensities[t] = measured
        if feedback_on:
            _, actuator = pi_step(spec, ctrl, measured)

    phase.path_difference_m = phi_raw / k_s
    return LockResult(
        times_s=times,
        delta_rad=deltas,
        output_volts=volts,
        ref_intensity=intensities,
        feedback_on=feedback_on,
        static_visibility=static_visibility,
    )
