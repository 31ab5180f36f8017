"""Analytic waveforms for Rabi frequencies and detunings.

All waveform values are angular frequencies in rad/us (i.e. 2*pi*MHz) and
times are in microseconds.  Waveforms are small immutable callables so they
can be pickled into worker processes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence, TextIO

import numpy as np
from scipy.special import erf

TWO_PI = 2.0 * math.pi
SQRT_PI = math.sqrt(math.pi)

# width factor of the erf connector between segments
ERF_SHARPNESS = 5.0

Waveform = Callable[[float], float]


def sample(pulse: Waveform, times) -> np.ndarray:
    return np.array([pulse(float(t)) for t in np.asarray(times, dtype=float)])


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, t: float) -> float:
        return self.value


@dataclass(frozen=True)
class FlatGaussPulse:
    """``omega_max * [exp(-(t-t0)^4/tau^4) - a] / (1 - a)`` on ``[start, stop]``.

    ``a`` is fixed so the pulse vanishes at both support endpoints, which must
    therefore be symmetric about ``t0``.
    """

    omega_max: float
    t0: float
    tau: float
    start: float
    stop: float

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if not self.start < self.t0 < self.stop:
            raise ValueError("pulse center must lie inside its support")
        if abs((self.t0 - self.start) - (self.stop - self.t0)) > 1e-9 * (self.stop - self.start):
            raise ValueError("support must be symmetric about the pulse center")

    @property
    def offset(self) -> float:
        return math.exp(-(((self.start - self.t0) / self.tau) ** 4))

    def __call__(self, t: float) -> float:
        if t < self.start or t > self.stop:
            return 0.0
        a = self.offset
        return self.omega_max * (math.exp(-(((t - self.t0) / self.tau) ** 4)) - a) / (1.0 - a)

    def breakpoints(self) -> tuple[float, ...]:
        return (self.start, self.stop)


_SWEEP_PHASES = {
    "rise": (0.0, 0.5 * math.pi),
    "fall": (0.5 * math.pi, math.pi),
    "chirp": (-0.5 * math.pi, 0.5 * math.pi),
}


@dataclass(frozen=True)
class SineSweep:
    """Sinusoidal detuning sweep on ``[ta, tb]``.

    ``rise`` (0 -> sign*delta_max) and ``fall`` (sign*delta_max -> 0) are
    quarter periods;
    ``chirp`` sweeps from -sign*delta_max through resonance to +sign*delta_max,
    crossing zero at the center of the interval.
    """

    delta_max: float
    ta: float
    tb: float
    orientation: str = "rise"
    sign: int = 1

    def __post_init__(self):
        if self.orientation not in _SWEEP_PHASES:
            raise ValueError(f"orientation must be one of {sorted(_SWEEP_PHASES)}")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if not self.tb > self.ta:
            raise ValueError("sweep interval must have tb > ta")

    def __call__(self, t: float) -> float:
        if t < self.ta or t > self.tb:
            return 0.0
        p0, p1 = _SWEEP_PHASES[self.orientation]
        x = (t - self.ta) / (self.tb - self.ta)
        return self.sign * self.delta_max * math.sin(p0 + (p1 - p0) * x)

    def breakpoints(self) -> tuple[float, ...]:
        return (self.ta, self.tb)


# kept for readers looking for the quarter-period name
QuarterSineSweep = SineSweep


@dataclass(frozen=True)
class Piecewise:
    """Value of the first part whose support contains ``t``; zero elsewhere."""

    parts: tuple

    def __call__(self, t: float) -> float:
        for part in self.parts:
            lo, hi = _support(part)
            if lo <= t <= hi:
                return part(t)
        return 0.0

    def breakpoints(self) -> tuple[float, ...]:
        return waveform_breakpoints(self.parts)


@dataclass(frozen=True)
class Sum:
    parts: tuple

    def __call__(self, t: float) -> float:
        return sum(p(t) for p in self.parts)

    def breakpoints(self) -> tuple[float, ...]:
        return waveform_breakpoints(self.parts)


def waveform_breakpoints(waveforms) -> tuple[float, ...]:
    """Sorted finite times where any waveform may jump or kink."""
    times = set()
    for w in waveforms:
        times.update(t for t in getattr(w, "breakpoints", tuple)() if math.isfinite(t))
    return tuple(sorted(times))


def _support(part) -> tuple[float, float]:
    if isinstance(part, FlatGaussPulse):
        return part.start, part.stop
    if isinstance(part, SineSweep):
        return part.ta, part.tb
    return -math.inf, math.inf


@dataclass(frozen=True)
class SignSwitch:
    """``value * sign(t - t_switch)``."""

    value: float
    t_switch: float

    def __call__(self, t: float) -> float:
        return self.value * float(np.sign(t - self.t_switch))

    def breakpoints(self) -> tuple[float, ...]:
        return (self.t_switch,)


def _vasilev_envelope(t: float, tau: float) -> float:
    return math.exp(-((t / (2.0 * tau)) ** 6))


def _vasilev_switch(t: float, tau: float) -> float:
    x = -4.0 * t / tau
    if x > 700.0:
        return 0.0
    return 1.0 / (1.0 + math.exp(x))


@dataclass(frozen=True)
class VasilevPulse:
    """One field of the double-STIRAP pulse pair.

    ``field=1`` gives the pump ``Omega_1`` and ``field=2`` the Stokes
    ``Omega_2``; the second Stokes lobe carries a pi phase flip.
    """

    omega0: float
    t1: float
    t2: float
    tau: float
    field: int = 1

    def __post_init__(self):
        if self.field not in (1, 2):
            raise ValueError("field must be 1 or 2")
        if self.tau <= 0:
            raise ValueError("tau must be positive")

    def __call__(self, t: float) -> float:
        tau = self.tau
        a, b = t - self.t1, t - self.t2
        fa = 0.5 * math.pi * _vasilev_switch(a, tau)
        fb = 0.5 * math.pi * _vasilev_switch(b, tau)
        ea, eb = _vasilev_envelope(a, tau), _vasilev_envelope(b, tau)
        if self.field == 1:
            return self.omega0 * (ea * math.sin(fa) + eb * math.cos(fb))
        return self.omega0 * (ea * math.cos(fa) - eb * math.sin(fb))


def vasilev_pair(omega0: float, t1: float, t2: float, tau: float) -> tuple[VasilevPulse, VasilevPulse]:
    return VasilevPulse(omega0, t1, t2, tau, 1), VasilevPulse(omega0, t1, t2, tau, 2)


class SegmentedPulse:
    """Segment magnitudes joined by error-function connectors.

    The gate time ``[0, T]`` is cut into ``2N`` segments of length ``dt``.
    Value ``f_i`` sits on segment ``i`` and consecutive values are joined by
    ``(f_i + f_{i+1})/2 + (f_{i+1} - f_i)/2 * erf(5 (t - b_i) / dt)`` centred
    on their shared boundary ``b_i``.  The connectors are summed, so the
    function is smooth everywhere; outside ``[0, T]`` it is clamped to the
    edge values.
    """

    def __init__(self, values: Sequence[float], duration: float):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("need at least one segment value")
        if duration <= 0:
            raise ValueError("duration must be positive")
        self.values = values
        self.values.setflags(write=False)
        self.duration = float(duration)
        self.dt = self.duration / values.size
        self._jumps = 0.5 * np.diff(values)
        self._centers = self.dt * np.arange(1, values.size)
        self._k = ERF_SHARPNESS / self.dt

    @classmethod
    def symmetric_from_half(cls, half: Sequence[float], duration: float) -> "SegmentedPulse":
        half = list(half)
        return cls(half + half[::-1], duration)

    def __repr__(self):
        return f"SegmentedPulse(values={self.values.tolist()!r}, duration={self.duration!r})"

    def __reduce__(self):
        return SegmentedPulse, (self.values.tolist(), self.duration)

    def __eq__(self, other):
        return (
            isinstance(other, SegmentedPulse)
            and self.duration == other.duration
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    @property
    def n_segments(self) -> int:
        return self.values.size

    @property
    def symmetric(self) -> bool:
        return bool(np.array_equal(self.values, self.values[::-1]))

    def __call__(self, t: float) -> float:
        t = min(max(t, 0.0), self.duration)
        if not self._jumps.size:
            return float(self.values[0])
        steps = 1.0 + erf(self._k * (t - self._centers))
        return float(self.values[0] + np.dot(self._jumps, steps))

    def derivative(self, t: float) -> float:
        if t < 0.0 or t > self.duration:
            return 0.0
        x = self._k * (t - self._centers)
        return float(np.dot(self._jumps, np.exp(-x * x)) * 2.0 * self._k / SQRT_PI)


def max_slew(pulse: SegmentedPulse) -> float:
    """Peak slope of the erf connectors, ``max 5|f_{i+1}-f_i| / (sqrt(pi) dt)``, in MHz/us."""
    if pulse.n_segments < 2:
        return 0.0
    jump = float(np.max(np.abs(np.diff(pulse.values))))
    return ERF_SHARPNESS * jump / (SQRT_PI * pulse.dt) / TWO_PI


def segment_slew(pulse: SegmentedPulse) -> float:
    """Segment-to-segment rate ``max |f_{i+1}-f_i| / dt`` in MHz/us."""
    if pulse.n_segments < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(pulse.values)))) / pulse.dt / TWO_PI


def mixing_angle(omega1: Waveform, omega2: Waveform, t: float) -> float:
    """``atan2(Omega_1, Omega_2)`` in radians."""
    return math.atan2(omega1(t), omega2(t))


def mixing_angle_rate(omega1: Waveform, omega2: Waveform, t: float, h: float = 1e-5) -> float:
    """Central finite-difference ``d(theta)/dt`` in rad/us."""
    return (mixing_angle(omega1, omega2, t + h) - mixing_angle(omega1, omega2, t - h)) / (2 * h)


ARP_SWEEP_SIGNS = {"chirp": (1, 1), "rise": (1, -1), "fall": (1, -1)}


def build_arp_drive(
    omega_max: float,
    delta_max: float,
    T: float,
    tau_frac: float = 0.175,
    variant: str = "chirp",
    signs: tuple[int, int] | None = None,
) -> tuple[Piecewise, Piecewise]:
    """Double ARP pulse: two flat-Gauss Rabi pulses of length T/2 with sine detuning sweeps.

    ``variant`` picks the sweep orientation of each half (see :class:`SineSweep`);
    ``signs`` multiplies the first and second sweep.  The default ``chirp``
    with equal signs crosses resonance at each pulse peak.
    """
    if T <= 0:
        raise ValueError("gate duration must be positive")
    if signs is None:
        signs = ARP_SWEEP_SIGNS[variant]
    tau = tau_frac * T
    half = 0.5 * T
    omega = Piecewise(
        (
            FlatGaussPulse(omega_max, 0.25 * T, tau, 0.0, half),
            FlatGaussPulse(omega_max, 0.75 * T, tau, half, T),
        )
    )
    delta = Piecewise(
        (
            SineSweep(delta_max, 0.0, half, variant, signs[0]),
            SineSweep(delta_max, half, T, variant, signs[1]),
        )
    )
    return omega, delta


def build_stirap_drive(
    omega1_max: float,
    omega2_max: float,
    T: float,
    tau1_frac: float = 0.165,
    tau2_frac: float = 0.175,
) -> tuple[FlatGaussPulse, Piecewise]:
    """Counterintuitive STIRAP: one pump pulse at T/2 inside two Stokes pulses at T/4, 3T/4."""
    if T <= 0:
        raise ValueError("gate duration must be positive")
    omega1 = FlatGaussPulse(omega1_max, 0.5 * T, tau1_frac * T, 0.0, T)
    omega2 = Piecewise(
        (
            FlatGaussPulse(omega2_max, 0.25 * T, tau2_frac * T, 0.0, 0.5 * T),
            FlatGaussPulse(omega2_max, 0.75 * T, tau2_frac * T, 0.5 * T, T),
        )
    )
    return omega1, omega2


def export_waveform_csv(pulse: Waveform, t_start: float, t_stop: float, step: float, out: TextIO) -> None:
    """Write ``time_us,value_MHz`` samples (value divided by 2*pi)."""
    if step <= 0:
        raise ValueError("sample step must be positive")
    n = int(math.floor((t_stop - t_start) / step + 1e-9)) + 1
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["time_us", "value_MHz"])
    for i in range(n):
        t = t_start + i * step
        writer.writerow([repr(float(t)), repr(pulse(t) / TWO_PI)])
