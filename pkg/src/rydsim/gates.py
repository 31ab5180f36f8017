"""CZ gate protocols: drive assembly, gate runs, Bell sequences and parameter scans.

Drive amplitudes on the parameter dataclasses are angular frequencies in
rad/us; configuration files carry MHz and are converted once when the drive
objects are built.
"""

from __future__ import annotations

import dataclasses
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from rydsim.errors import ConfigurationError
from rydsim.lindblad import HamiltonianSpec, IntegratorConfig, TimeSeries, evolve_state, propagate
from rydsim.pulses import (
    ARP_SWEEP_SIGNS,
    TWO_PI,
    Constant,
    SegmentedPulse,
    SignSwitch,
    build_arp_drive,
    build_stirap_drive,
    vasilev_pair,
)
from rydsim.quantum import (
    DensityMatrix,
    LevelScheme,
    StateSpace,
    apply_hadamard,
    arp_scheme,
    bell_fidelity,
    default_observables,
    expectation,
    leak_d,
    stirap_scheme,
)

PROTOCOLS = ("ARP", "STIRAP-analytic", "STIRAP-vasilev", "STIRAP-segmented")

# Optimized first-half segment magnitudes (MHz) for the 12-segment STIRAP gate at T = 1 us.
SEGMENTED_REFERENCE_MHZ = {
    "omega1": (1.38, 10.30, 25.54, 42.85, 82.50, 93.35),
    "omega2": (165.09, 199.99, 198.14, 198.87, 200.00, 173.48),
    "delta1": (392.57, 363.48, 364.36, 360.99, 416.45, 420.39),
}


# -- drive parameters -----------------------------------------------------------


@dataclass(frozen=True)
class ARPDrive:
    """Double adiabatic-rapid-passage pulse on the 1 <-> r transition."""

    omega_max: float = TWO_PI * 17.0
    delta_max: float = TWO_PI * 23.0
    tau_frac: float = 0.175
    variant: str = "chirp"
    signs: tuple[int, int] | None = None

    @property
    def peak_rabi(self) -> float:
        return self.omega_max

    def waveforms(self, T: float) -> dict:
        omega, delta = build_arp_drive(self.omega_max, self.delta_max, T, self.tau_frac, self.variant, self.signs)
        return {"omega": omega, "delta": delta}

    def validate(self):
        if self.omega_max < 0 or self.delta_max < 0:
            raise ConfigurationError("ARP omega_max and delta_max must be >= 0")
        if self.tau_frac <= 0:
            raise ConfigurationError("ARP tau_frac must be positive")
        if self.variant not in ARP_SWEEP_SIGNS:
            raise ConfigurationError(f"ARP variant must be one of {sorted(ARP_SWEEP_SIGNS)}")


@dataclass(frozen=True)
class AnalyticStirapDrive:
    """Flat-Gauss pump inside two Stokes pulses, constant intermediate detuning."""

    omega1_max: float = TWO_PI * 190.0
    omega2_max: float = TWO_PI * 190.0
    delta1: float = TWO_PI * 750.0
    delta: float = 0.0
    tau1_frac: float = 0.165
    tau2_frac: float = 0.175

    @property
    def peak_rabi(self) -> float:
        return max(self.omega1_max, self.omega2_max)

    def waveforms(self, T: float) -> dict:
        o1, o2 = build_stirap_drive(self.omega1_max, self.omega2_max, T, self.tau1_frac, self.tau2_frac)
        return {"omega1": o1, "omega2": o2, "delta1": Constant(self.delta1), "delta": Constant(self.delta)}

    def validate(self):
        if self.omega1_max < 0 or self.omega2_max < 0:
            raise ConfigurationError("STIRAP Rabi amplitudes must be >= 0")


@dataclass(frozen=True)
class VasilevDrive:
    """Double-STIRAP pulse pair with sign-switched intermediate detuning."""

    omega0: float = TWO_PI * 220.0
    t1: float = 0.3
    t2: float = 0.9
    tau: float = 0.1
    delta1: float = TWO_PI * 750.0
    delta: float = 0.0
    switch_delta1: bool = True

    @property
    def peak_rabi(self) -> float:
        return self.omega0

    def waveforms(self, T: float) -> dict:
        o1, o2 = vasilev_pair(self.omega0, self.t1, self.t2, self.tau)
        d1 = SignSwitch(self.delta1, 0.5 * T) if self.switch_delta1 else Constant(self.delta1)
        return {"omega1": o1, "omega2": o2, "delta1": d1, "delta": Constant(self.delta)}

    def validate(self):
        if self.omega0 < 0:
            raise ConfigurationError("Vasilev omega0 must be >= 0")
        if self.tau <= 0:
            raise ConfigurationError("Vasilev tau must be positive")


@dataclass(frozen=True)
class SegmentedDrive:
    """Symmetric segmented pulses from first-half magnitudes (rad/us)."""

    omega1: tuple[float, ...] = tuple(TWO_PI * v for v in SEGMENTED_REFERENCE_MHZ["omega1"])
    omega2: tuple[float, ...] = tuple(TWO_PI * v for v in SEGMENTED_REFERENCE_MHZ["omega2"])
    delta1: tuple[float, ...] = tuple(TWO_PI * v for v in SEGMENTED_REFERENCE_MHZ["delta1"])
    delta: float = 0.0

    def __post_init__(self):
        for name in ("omega1", "omega2", "delta1"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))

    @property
    def n_half(self) -> int:
        return len(self.omega1)

    @property
    def peak_rabi(self) -> float:
        return max(max(self.omega1), max(self.omega2))

    @classmethod
    def from_vector(cls, x: Sequence[float], delta: float = 0.0) -> "SegmentedDrive":
        x = np.asarray(x, dtype=float)
        if x.size % 3:
            raise ValueError("decision vector length must be a multiple of 3")
        n = x.size // 3
        return cls(tuple(x[:n]), tuple(x[n:2 * n]), tuple(x[2 * n:]), delta)

    def to_vector(self) -> np.ndarray:
        return np.array(self.omega1 + self.omega2 + self.delta1)

    def pulses(self, T: float) -> dict:
        return {
            name: SegmentedPulse.symmetric_from_half(getattr(self, name), T)
            for name in ("omega1", "omega2", "delta1")
        }

    def waveforms(self, T: float) -> dict:
        out = self.pulses(T)
        out["delta"] = Constant(self.delta)
        return out

    def validate(self):
        if not (len(self.omega1) == len(self.omega2) == len(self.delta1) >= 1):
            raise ConfigurationError("segmented drive needs equal, nonzero segment counts")
        if min(self.omega1) < 0 or min(self.omega2) < 0:
            raise ConfigurationError("segmented Rabi magnitudes must be >= 0")


DRIVE_TYPES = {
    "ARP": ARPDrive,
    "STIRAP-analytic": AnalyticStirapDrive,
    "STIRAP-vasilev": VasilevDrive,
    "STIRAP-segmented": SegmentedDrive,
}

DEFAULT_TIMING = {
    # protocol: (T us, B rad/us)
    "ARP": (0.54, TWO_PI * 3000.0),
    "STIRAP-analytic": (1.0, TWO_PI * 500.0),
    "STIRAP-vasilev": (1.2, TWO_PI * 500.0),
    "STIRAP-segmented": (1.0, TWO_PI * 500.0),
}

# Bell-state basis pair produced by the ideal version of each protocol.
TARGET_PAIRS = {
    "ARP": ("00", "11"),
    "STIRAP-analytic": ("01", "10"),
    "STIRAP-vasilev": ("00", "11"),
    "STIRAP-segmented": ("01", "10"),
}


def default_scheme(protocol: str) -> LevelScheme:
    return arp_scheme() if protocol == "ARP" else stirap_scheme()


# -- configuration and results ---------------------------------------------------


@dataclass(frozen=True)
class GateConfig:
    """Everything needed to simulate one symmetric two-atom gate.

    ``B``, ``detuning_offset`` are in rad/us, ``T`` in us.  ``scheme`` and
    ``target`` default to the protocol's own level scheme and Bell pair.
    """

    protocol: str
    drive: object
    T: float
    B: float
    scheme: LevelScheme | None = None
    detuning_offset: float = 0.0
    intensity_offset: float = 0.0
    target: tuple[str, str] | None = None
    n_samples: int = 500
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigurationError(f"unknown protocol {self.protocol!r}; expected one of {PROTOCOLS}")
        if not isinstance(self.drive, DRIVE_TYPES[self.protocol]):
            raise ConfigurationError(
                f"protocol {self.protocol} needs {DRIVE_TYPES[self.protocol].__name__}, "
                f"got {type(self.drive).__name__}"
            )
        self.drive.validate()
        if not self.T > 0:
            raise ConfigurationError("gate duration T must be positive")
        if self.B < 0:
            raise ConfigurationError("blockade B must be >= 0")
        if self.intensity_offset <= -1:
            raise ConfigurationError("intensity offset must be > -1")
        if self.n_samples < 1:
            raise ConfigurationError("n_samples must be >= 1")
        if self.scheme is None:
            object.__setattr__(self, "scheme", default_scheme(self.protocol))
        if self.target is None:
            object.__setattr__(self, "target", TARGET_PAIRS[self.protocol])
        needed = {"r"} if self.protocol == "ARP" else {"p", "r"}
        if not needed <= set(self.scheme.levels):
            raise ConfigurationError(f"{self.protocol} needs levels {sorted(needed)} in the scheme")

    def replace(self, **changes) -> "GateConfig":
        return dataclasses.replace(self, **changes)

    @property
    def space(self) -> StateSpace:
        return StateSpace(self.scheme)

    def hamiltonian(self) -> HamiltonianSpec:
        kind = "ARP" if self.protocol == "ARP" else "STIRAP"
        return HamiltonianSpec(
            kind, self.B, self.drive.waveforms(self.T), self.detuning_offset, self.intensity_offset
        )


def default_config(protocol: str, **overrides) -> GateConfig:
    """Published parameter set for ``protocol`` with optional field overrides."""
    if protocol not in PROTOCOLS:
        raise ConfigurationError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")
    T, B = DEFAULT_TIMING[protocol]
    kwargs = {"drive": DRIVE_TYPES[protocol](), "T": T, "B": B}
    kwargs.update(overrides)
    return GateConfig(protocol, **kwargs)


class Phases(NamedTuple):
    phi1: float
    phi2: float
    ill_defined: bool = False


@dataclass
class SimulationResult:
    rho_final: DensityMatrix
    fidelity: float
    traces: TimeSeries
    leak_d: float
    phases: Phases | None = None


# -- single runs --------------------------------------------------------------------


def run_gate(cfg: GateConfig, rho0: DensityMatrix, observables=None) -> SimulationResult:
    """Propagate ``rho0`` through the gate and sample population traces.

    ``fidelity`` is the Bell fidelity of the final state against the
    protocol's target pair, meaningful when ``rho0`` is a Bell-sequence input.
    """
    space = rho0.space
    if observables is None:
        observables = default_observables(space)
    rho, traces = propagate(
        rho0, cfg.hamiltonian(), cfg.scheme, (0.0, cfg.T), cfg.integrator,
        observables, sample_dt=cfg.T / cfg.n_samples,
    )
    leak = expectation(rho, leak_d(space)) if "d" in space.levels else 0.0
    fid = min(1.0, max(0.0, bell_fidelity(rho, cfg.target)))
    return SimulationResult(rho, fid, traces, leak)


def bell_sequence(cfg: GateConfig, with_phases: bool = False, observables=None) -> SimulationResult:
    """``|11> -> (H x H) -> gate -> (I x H)`` and the Bell fidelity of the result."""
    space = cfg.space
    rho0 = DensityMatrix.basis(space, "11")
    rho0 = apply_hadamard(apply_hadamard(rho0, "control"), "target")
    res = run_gate(cfg, rho0, observables)
    rho = apply_hadamard(res.rho_final, "target")
    res.rho_final = rho
    res.fidelity = min(1.0, max(0.0, bell_fidelity(rho, cfg.target)))
    if with_phases:
        res.phases = extract_phases(cfg)
    return res


def _wrap_degrees(angle: float) -> float:
    deg = math.degrees(angle)
    return 180.0 if deg <= -180.0 else deg


def extract_phases(cfg: GateConfig) -> Phases:
    """Dynamical phases of |01> and |11> relative to the dark |00>, in degrees.

    Uses Hamiltonian-only evolution of ``(|00> + |uv>)/sqrt(2)``.  The
    ``ill_defined`` flag is set (and a warning issued) when less than half of
    the |uv> population returns.
    """
    space = cfg.space
    ham = cfg.hamiltonian()
    out, flag = [], False
    for state in ("01", "11"):
        psi0 = space.superposition({"00": 1.0, state: 1.0})
        psi = evolve_state(psi0, ham, space, (0.0, cfg.T), cfg.integrator)
        c_ref, c = psi[space.index("00")], psi[space.index(state)]
        if 2.0 * abs(c) ** 2 < 0.5:
            flag = True
            warnings.warn(f"|{state}> return population {2 * abs(c) ** 2:.3f} < 0.5; phase ill-defined")
        out.append(_wrap_degrees(float(np.angle(c * np.conj(c_ref)))))
    return Phases(out[0], out[1], flag)


# -- scans --------------------------------------------------------------------------


def resolve_workers(workers: int | None = None) -> int:
    if workers is None:
        workers = int(os.environ.get("RYDSIM_WORKERS", "1") or 1)
    if workers < 1:
        raise ConfigurationError("worker count must be >= 1")
    return workers


def parallel_map(fn: Callable, items: Iterable, workers: int | None = None) -> list:
    """``[fn(x) for x in items]`` over a process pool, ordered by input index."""
    items = list(items)
    workers = min(resolve_workers(workers), max(1, len(items)))
    if workers == 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _fidelity(cfg: GateConfig) -> float:
    return bell_sequence(cfg).fidelity


class BlockadeFit(NamedTuple):
    b: float
    c: float


@dataclass
class SweepResult:
    B: np.ndarray
    infidelity: np.ndarray
    peak_rabi: float
    fit: BlockadeFit | None

    def rows(self):
        for B, e in zip(self.B, self.infidelity):
            yield float(B), float(e)


def fit_blockade(B, infidelity, peak_rabi: float, weighting: str = "relative") -> BlockadeFit | None:
    """Least-squares ``1 - F = b + c (Omega_max / B)^2``.

    ``weighting="relative"`` minimizes residuals divided by the data, so the
    large-B floor ``b`` is not swamped by the small-B points; ``"none"`` is
    ordinary least squares.  Returns ``None`` with fewer than three points.
    """
    B = np.asarray(B, dtype=float)
    y = np.asarray(infidelity, dtype=float)
    if B.size < 3:
        return None
    x = (peak_rabi / B) ** 2
    a = np.column_stack([np.ones_like(x), x])
    if weighting == "relative":
        w = 1.0 / np.maximum(np.abs(y), np.finfo(float).tiny)
    elif weighting == "none":
        w = np.ones_like(y)
    else:
        raise ConfigurationError(f"unknown fit weighting {weighting!r}")
    coef, *_ = np.linalg.lstsq(a * w[:, None], y * w, rcond=None)
    return BlockadeFit(float(coef[0]), float(coef[1]))


def blockade_sweep(
    cfg: GateConfig, B_list: Sequence[float], workers: int | None = None, weighting: str = "relative"
) -> SweepResult:
    """Bell-sequence infidelity versus blockade ``B`` (rad/us) and the ``b + c x`` fit."""
    B_list = [float(b) for b in B_list]
    if not B_list or min(B_list) <= 0:
        raise ConfigurationError("blockade sweep needs a nonempty list of positive B values")
    fids = parallel_map(_fidelity, [cfg.replace(B=b) for b in B_list], workers)
    infid = 1.0 - np.array(fids)
    fit = fit_blockade(B_list, infid, cfg.drive.peak_rabi, weighting)
    return SweepResult(np.array(B_list), infid, cfg.drive.peak_rabi, fit)


@dataclass
class RobustnessGrid:
    """Fidelity on a grid; ``fidelity[i, j]`` is at ``(d_delta[i], d_intensity[j])``."""

    d_delta: np.ndarray
    d_intensity: np.ndarray
    fidelity: np.ndarray

    @property
    def spread(self) -> float:
        return float(self.fidelity.max() - self.fidelity.min())

    @property
    def minimum(self) -> float:
        return float(self.fidelity.min())

    def rows(self):
        for i, dd in enumerate(self.d_delta):
            for j, di in enumerate(self.d_intensity):
                yield float(dd), float(di), float(self.fidelity[i, j])


def robustness_grid(
    cfg: GateConfig,
    d_delta: Sequence[float],
    d_intensity: Sequence[float],
    workers: int | None = None,
) -> RobustnessGrid:
    """Bell fidelity with static detuning offsets (rad/us) and fractional intensity errors."""
    d_delta = np.asarray(d_delta, dtype=float)
    d_intensity = np.asarray(d_intensity, dtype=float)
    if not d_delta.size or not d_intensity.size:
        raise ConfigurationError("robustness grid needs nonempty offset lists")
    cfgs = [
        cfg.replace(detuning_offset=float(dd), intensity_offset=float(di))
        for dd in d_delta for di in d_intensity
    ]
    fids = parallel_map(_fidelity, cfgs, workers)
    return RobustnessGrid(d_delta, d_intensity, np.array(fids).reshape(d_delta.size, d_intensity.size))
