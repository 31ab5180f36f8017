"""Two-atom Lindblad master-equation propagation.

The equation of motion is ``drho/dt = i[H, rho] + L[rho]`` with the sign of
the commutator taken as written (a global sign flip only conjugates
coherences).  The anticommutator part of the dissipator is folded into a
non-Hermitian generator ``G = H + i K/2`` with ``K = sum_j L_j^dag L_j`` so the
right-hand side costs one matrix product plus a gather/scatter for the jumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from rydsim.errors import ConfigurationError, IntegrationError
from rydsim.pulses import Waveform, waveform_breakpoints
from rydsim.quantum import DensityMatrix, LevelScheme, Observable, StateSpace

METHODS = ("DOP853", "RK45", "RK4")

DRIVE_KEYS = {
    "ARP": ("omega", "delta"),
    "STIRAP": ("omega1", "omega2", "delta1", "delta"),
}


@dataclass(frozen=True)
class IntegratorConfig:
    """Integrator settings.

    ``max_step`` (us) caps the adaptive step; ``None`` leaves step control to
    the error estimate.  ``RK4`` is a fixed-step cross-check backend and uses
    ``max_step`` (default 2e-5 us) as its step.
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float | None = None
    method: str = "DOP853"
    hermiticity_tol: float = 1e-8

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"integrator method must be one of {METHODS}, got {self.method!r}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigurationError("integrator tolerances must be positive")
        if self.max_step is not None and not self.max_step > 0:
            raise ConfigurationError("max_step must be positive")

    def relaxed(self, rel_tol: float) -> "IntegratorConfig":
        return IntegratorConfig(rel_tol, rel_tol * 1e-2, self.max_step, self.method, self.hermiticity_tol)


@dataclass(frozen=True)
class HamiltonianSpec:
    """Symmetric two-atom drive.

    ARP drives need ``omega`` and ``delta``; STIRAP drives need ``omega1``,
    ``omega2``, ``delta1`` (intermediate detuning) and ``delta`` (two-photon
    detuning).  ``detuning_offset`` is added to ``delta`` and every Rabi
    frequency is scaled by ``sqrt(1 + intensity_offset)``.
    """

    scheme: str
    blockade: float
    drive: Mapping[str, Waveform]
    detuning_offset: float = 0.0
    intensity_offset: float = 0.0

    def __post_init__(self):
        if self.scheme not in DRIVE_KEYS:
            raise ConfigurationError(f"unknown Hamiltonian scheme {self.scheme!r}")
        missing = [k for k in DRIVE_KEYS[self.scheme] if k not in self.drive]
        if missing:
            raise ConfigurationError(f"{self.scheme} drive is missing {missing}")
        if self.blockade < 0:
            raise ConfigurationError("blockade strength must be >= 0")
        if self.intensity_offset <= -1:
            raise ConfigurationError("intensity offset must be > -1")


class TwoAtomHamiltonian:
    """``H(t) = static + sum_k c_k(t) A_k`` on the two-atom space."""

    def __init__(self, space: StateSpace, static: np.ndarray, terms: Sequence[tuple[Waveform, float, np.ndarray]]):
        self.space = space
        self.static = np.asarray(static, dtype=complex)
        self.waveforms = tuple(w for w, _, _ in terms)
        self.scales = np.array([s for _, s, _ in terms], dtype=float)
        if terms:
            self.ops = np.array([op for _, _, op in terms], dtype=complex)
        else:
            self.ops = np.zeros((0, space.dim, space.dim), dtype=complex)
        self._flat_ops = self.ops.reshape(len(terms), -1)

    def coefficients(self, t: float) -> np.ndarray:
        return self.scales * np.array([w(t) for w in self.waveforms], dtype=float)

    def __call__(self, t: float) -> np.ndarray:
        if not self.waveforms:
            return self.static.copy()
        return self.static + (self.coefficients(t) @ self._flat_ops).reshape(self.static.shape)

    @classmethod
    def from_spec(cls, spec: HamiltonianSpec, space: StateSpace) -> "TwoAtomHamiltonian":
        sym = space.symmetric
        rabi = math.sqrt(1.0 + spec.intensity_offset)

        def coupling(lo, hi):
            op = space.single(hi, lo)
            return sym(0.5 * (op + op.conj().T))

        static = spec.blockade * np.diag(space.ket("rr").real).astype(complex)
        static = static + spec.detuning_offset * sym(space.projector("r"))
        d = spec.drive
        if spec.scheme == "ARP":
            terms = [
                (d["omega"], rabi, coupling("1", "r")),
                (d["delta"], 1.0, sym(space.projector("r"))),
            ]
        else:
            terms = [
                (d["omega1"], rabi, coupling("1", "p")),
                (d["omega2"], rabi, coupling("p", "r")),
                (d["delta1"], 1.0, sym(space.projector("p"))),
                (d["delta"], 1.0, sym(space.projector("r"))),
            ]
        return cls(space, static, terms)


@dataclass(frozen=True, eq=False)
class LindbladOperator:
    label: str
    atom: int
    lower: str
    upper: str
    rate: float
    matrix: np.ndarray


def dissipator(scheme: LevelScheme) -> list[LindbladOperator]:
    """Jump operators ``sqrt(b_jk gamma_k) |j><k|`` for each atom and nonzero channel."""
    space = StateSpace(scheme)
    ops = []
    for atom in (0, 1):
        for j, k, rate in scheme.decay_channels():
            m = math.sqrt(rate) * space.embed(space.single(j, k), atom)
            ops.append(LindbladOperator(f"L{atom + 1}_{j}{k}", atom, j, k, rate, m))
    return ops


@dataclass
class TimeSeries:
    times: np.ndarray
    values: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def labels(self) -> list[str]:
        return list(self.values)

    def __getitem__(self, label: str) -> np.ndarray:
        return self.values[label]

    def rows(self):
        cols = [self.values[k] for k in self.values]
        for i, t in enumerate(self.times):
            yield [float(t)] + [float(c[i]) for c in cols]


class _Generator:
    """Right-hand side of the master equation on flattened density matrices."""

    def __init__(self, ham: TwoAtomHamiltonian, scheme: LevelScheme):
        space = ham.space
        d, dim = space.d, space.dim
        self.dim = dim
        self.ham = ham
        k_single = np.zeros(d)
        rates = np.zeros((d, d))
        for j, k, rate in scheme.decay_channels():
            jj, kk = space.level(j), space.level(k)
            k_single[kk] += rate
            rates[jj, kk] += rate
        k_two = np.add.outer(k_single, k_single).ravel()
        self.static = ham.static + 0.5j * np.diag(k_two)
        self.flat_ops = ham._flat_ops
        self.scales = ham.scales
        self.waveforms = ham.waveforms
        self.has_jumps = bool(np.any(rates))
        if self.has_jumps:
            a = np.arange(d)
            # src1[k] = flat indices of <k a|rho|k b>, src2[k] = <a k|rho|b k>
            row1 = (a[:, None] * d + a[None, :])  # (k, a) -> k*d + a
            self.src1 = (row1[:, :, None] * dim + row1[:, None, :]).reshape(d, d * d)
            row2 = (a[None, :] * d + a[:, None])  # (k, a) -> a*d + k
            self.src2 = (row2[:, :, None] * dim + row2[:, None, :]).reshape(d, d * d)
            used = np.flatnonzero(rates.any(axis=1))
            src = np.flatnonzero(rates.any(axis=0))
            self.rates = rates[np.ix_(used, src)]
            self.dst1, self.dst2 = self.src1[used], self.src2[used]
            self.src1, self.src2 = self.src1[src], self.src2[src]

    def generator(self, t: float) -> np.ndarray:
        if not self.waveforms:
            return self.static
        c = self.scales * np.array([w(t) for w in self.waveforms])
        return self.static + (c @ self.flat_ops).reshape(self.dim, self.dim)

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        rho = y.reshape(self.dim, self.dim)
        x = self.generator(t) @ rho
        out = 1j * (x - x.conj().T)
        if self.has_jumps:
            flat = out.reshape(-1)
            flat[self.dst1] += self.rates @ y[self.src1]
            flat[self.dst2] += self.rates @ y[self.src2]
        return out.reshape(-1)


def _as_hamiltonian(h, space: StateSpace) -> TwoAtomHamiltonian:
    if isinstance(h, TwoAtomHamiltonian):
        return h
    if isinstance(h, HamiltonianSpec):
        return TwoAtomHamiltonian.from_spec(h, space)
    raise TypeError(f"expected HamiltonianSpec or TwoAtomHamiltonian, got {type(h).__name__}")


def _sample_times(t0: float, t1: float, sample_dt: float | None) -> np.ndarray:
    if sample_dt is None:
        return np.array([t1])
    if sample_dt <= 0:
        raise ValueError("sample_dt must be positive")
    n = int(math.floor((t1 - t0) / sample_dt + 1e-9))
    times = t0 + sample_dt * np.arange(n + 1)
    if t1 - times[-1] > 1e-12 * max(1.0, abs(t1)):
        times = np.append(times, t1)
    else:
        times[-1] = t1
    return times


def _rk4(fun, t0: float, y0: np.ndarray, times: np.ndarray, h_max: float, breaks=()) -> np.ndarray:
    """Fixed-step RK4 that lands on every drive breakpoint.

    End-point stages are evaluated a hair inside each step so a waveform jump
    at a step boundary is seen from the correct side.
    """
    out = np.empty((times.size, y0.size), dtype=complex)
    y, t = y0.copy(), t0
    nodes = sorted(set(times.tolist()) | {b for b in breaks if t0 < b < times[-1]})
    k = 0
    for node in nodes:
        span = node - t
        if span > 0:
            n = max(1, int(math.ceil(span / h_max - 1e-9)))
            h = span / n
            eps = 1e-9 * h
            for i in range(n):
                ts = t + i * h
                k1 = fun(ts + eps, y)
                k2 = fun(ts + 0.5 * h, y + 0.5 * h * k1)
                k3 = fun(ts + 0.5 * h, y + 0.5 * h * k2)
                k4 = fun(ts + h - eps, y + h * k3)
                y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(y)):
                raise IntegrationError("non-finite density matrix", node)
            t = node
        while k < times.size and times[k] <= node:
            out[k] = y
            k += 1
    return out


def _integrate(fun, y0, t0, t1, times, cfg: IntegratorConfig, breaks=()) -> np.ndarray:
    if cfg.method == "RK4":
        return _rk4(fun, t0, y0, times, cfg.max_step or 2e-5, breaks)
    kwargs = {}
    if cfg.max_step is not None:
        kwargs["max_step"] = cfg.max_step
    # non-finite states are reported below with their time
    with np.errstate(invalid="ignore", over="ignore"):
        sol = solve_ivp(
            fun, (t0, t1), y0, method=cfg.method, t_eval=times,
            rtol=cfg.rel_tol, atol=cfg.abs_tol, **kwargs,
        )
    if sol.status != 0:
        t_fail = float(sol.t[-1]) if sol.t.size else t0
        raise IntegrationError(f"integration failed: {sol.message}", t_fail)
    ys = sol.y.T
    if not np.all(np.isfinite(ys)):
        bad = int(np.argmax(~np.all(np.isfinite(ys), axis=1)))
        raise IntegrationError("non-finite density matrix", float(times[bad]))
    return ys


def _observable_table(observables: Sequence[Observable], dim: int):
    if not observables:
        return None
    # Tr[O rho] = sum_ij O_ij rho_ji
    return np.array([o.matrix.T.reshape(-1) for o in observables])


def propagate(
    rho0: DensityMatrix,
    h,
    scheme: LevelScheme | None = None,
    t_span: tuple[float, float] = (0.0, 1.0),
    cfg: IntegratorConfig | None = None,
    observables: Sequence[Observable] = (),
    sample_dt: float | None = None,
) -> tuple[DensityMatrix, TimeSeries]:
    """Integrate the master equation from ``t_span[0]`` to ``t_span[1]``.

    Returns the final state and the observables sampled every ``sample_dt``
    (always including both endpoints).  ``scheme`` defaults to the scheme of
    ``rho0``'s state space and sets the dissipator.
    """
    cfg = cfg or IntegratorConfig()
    space = rho0.space
    scheme = scheme or space.scheme
    if scheme.levels != space.levels:
        raise ConfigurationError("level scheme does not match the state space")
    t0, t1 = map(float, t_span)
    if t1 < t0:
        raise ValueError("t_span must satisfy t1 >= t0")
    ham = _as_hamiltonian(h, space)
    table = _observable_table(observables, space.dim)
    if t1 == t0:
        series = TimeSeries(np.array([t0]))
        if table is not None:
            vals = np.real(table @ rho0.data.reshape(-1))
            series.values = {o.label: vals[[i]] for i, o in enumerate(observables)}
        return rho0, series
    fun = _Generator(ham, scheme)
    times = _sample_times(t0, t1, sample_dt)
    if times[0] > t0:
        times = np.insert(times, 0, t0)
    breaks = waveform_breakpoints(ham.waveforms)
    ys = _integrate(fun, rho0.data.reshape(-1).astype(complex), t0, t1, times, cfg, breaks)
    final = ys[-1].reshape(space.dim, space.dim)
    drift = float(np.max(np.abs(final - final.conj().T)))
    if drift > cfg.hermiticity_tol:
        raise IntegrationError(f"hermiticity drift {drift:.3g} exceeds tolerance", t1)
    final = 0.5 * (final + final.conj().T)
    series = TimeSeries(times)
    if table is not None:
        vals = np.real(ys @ table.T)
        series.values = {o.label: vals[:, i] for i, o in enumerate(observables)}
    return DensityMatrix(space, final), series


def evolve_state(
    psi0: np.ndarray,
    h,
    space: StateSpace,
    t_span: tuple[float, float],
    cfg: IntegratorConfig | None = None,
) -> np.ndarray:
    """Hamiltonian-only evolution ``dpsi/dt = i H psi`` (same sign as the master equation)."""
    cfg = cfg or IntegratorConfig()
    ham = _as_hamiltonian(h, space)
    t0, t1 = map(float, t_span)
    psi0 = np.asarray(psi0, dtype=complex)
    if t1 == t0:
        return psi0.copy()

    def fun(t, y):
        return 1j * (ham(t) @ y)

    ys = _integrate(fun, psi0, t0, t1, np.array([t1]), cfg, waveform_breakpoints(ham.waveforms))
    return ys[-1]


def liouvillian(hamiltonian: np.ndarray, jump_ops: Sequence[np.ndarray] = ()) -> np.ndarray:
    """Superoperator acting on row-major ``vec(rho)``."""
    n = hamiltonian.shape[0]
    eye = np.eye(n)
    sup = 1j * (np.kron(hamiltonian, eye) - np.kron(eye, hamiltonian.T))
    for op in jump_ops:
        ld = op.conj().T @ op
        sup += np.kron(op, op.conj()) - 0.5 * np.kron(ld, eye) - 0.5 * np.kron(eye, ld.T)
    return sup


def propagate_piecewise(
    rho0: DensityMatrix,
    segments: Sequence[tuple[np.ndarray, float]],
    scheme: LevelScheme | None = None,
) -> DensityMatrix:
    """Exact propagation through piecewise-constant Hamiltonians ``[(H, duration), ...]``.

    Without dissipation each segment is ``exp(iHt) rho exp(-iHt)`` from an
    eigendecomposition, which stays accurate for very large blockade shifts
    where explicit Runge-Kutta steps are impractical.
    """
    space = rho0.space
    scheme = scheme or space.scheme
    jumps = [op.matrix for op in dissipator(scheme)]
    rho = rho0.data.copy()
    for ham, duration in segments:
        ham = np.asarray(ham, dtype=complex)
        if duration < 0:
            raise ValueError("segment durations must be >= 0")
        if not jumps:
            w, v = np.linalg.eigh(0.5 * (ham + ham.conj().T))
            u = (v * np.exp(1j * w * duration)) @ v.conj().T
            rho = u @ rho @ u.conj().T
        else:
            vec = expm(liouvillian(ham, jumps) * duration) @ rho.reshape(-1)
            rho = vec.reshape(space.dim, space.dim)
    return DensityMatrix(space, 0.5 * (rho + rho.conj().T))
