"""Closed-form model of the constant-amplitude pi / 2pi / pi blockade gate.

Single-atom rotations act on the ``{|0>, |1>, |r>}`` basis and blockade is
perfect: a pulse on one atom is the identity whenever the other atom sits in
``|r>``.  Pulse errors enter through a static detuning and a fractional
intensity error.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from rydsim.gates import RobustnessGrid
from rydsim.lindblad import propagate_piecewise
from rydsim.quantum import HADAMARD, DensityMatrix, LevelScheme, StateSpace

# single-atom projectors in the {0, 1, r} basis
_P_QUBIT = np.diag([1.0, 1.0, 0.0]).astype(complex)
_P_R = np.diag([0.0, 0.0, 1.0]).astype(complex)
_EYE3 = np.eye(3, dtype=complex)
_H3 = np.eye(3, dtype=complex)
_H3[:2, :2] = HADAMARD

IDEAL_BELL = np.zeros(9, dtype=complex)
IDEAL_BELL[1], IDEAL_BELL[3] = 1 / math.sqrt(2), -1 / math.sqrt(2)


@dataclass(frozen=True)
class AnalyticParams:
    """Drive parameters (rad/us) for the constant-amplitude gate.

    ``omega_q`` and ``delta_min`` are only used for leakage estimates.
    """

    omega0: complex
    delta: float = 0.0
    dI: float = 0.0
    omega_q: float | None = None
    delta_min: float | None = None

    def __post_init__(self):
        if self.dI <= -1:
            raise ValueError("intensity error must be > -1")

    @property
    def omega_prime(self) -> float:
        """Generalized Rabi frequency ``sqrt(|Omega0|^2 (1 + dI) + Delta^2)``."""
        return math.sqrt(abs(self.omega0) ** 2 * (1.0 + self.dI) + self.delta ** 2)


def rotation_matrix(t: float, p: AnalyticParams) -> np.ndarray:
    """Detuned, intensity-scaled 1 <-> r rotation over time ``t`` in the {0, 1, r} basis."""
    if t < 0:
        raise ValueError("rotation time must be >= 0")
    w = p.omega_prime
    amp = math.sqrt(1.0 + p.dI)
    phase = cmath.exp(0.5j * p.delta * t)
    c, s = math.cos(0.5 * w * t), math.sin(0.5 * w * t)
    if w == 0.0:
        ratio_d, ratio_o, ratio_oc = 0.0, 0.0, 0.0
    else:
        ratio_d = p.delta / w
        ratio_o = p.omega0 * amp / w
        ratio_oc = np.conj(p.omega0) * amp / w
    r = np.zeros((3, 3), dtype=complex)
    r[0, 0] = 1.0
    r[1, 1] = phase * (c - 1j * ratio_d * s)
    r[1, 2] = 1j * phase * ratio_oc * s
    r[2, 1] = 1j * phase * ratio_o * s
    r[2, 2] = phase * (c + 1j * ratio_d * s)
    return r


def _control(rot: np.ndarray) -> np.ndarray:
    return np.kron(rot, _P_QUBIT) + np.kron(_EYE3, _P_R)


def _target(rot: np.ndarray) -> np.ndarray:
    return np.kron(_P_QUBIT, rot) + np.kron(_P_R, _EYE3)


def gate_operator(r_pi: np.ndarray, r_2pi: np.ndarray) -> np.ndarray:
    """pi (control), blocked 2pi (target), pi (control) with perfect blockade."""
    c = _control(r_pi)
    return c @ _target(r_2pi) @ c


def ideal_cz() -> np.ndarray:
    """Error-free two-atom operator on the 9-dimensional {0, 1, r}^2 space."""
    p = AnalyticParams(1.0)
    return gate_operator(rotation_matrix(math.pi, p), rotation_matrix(2 * math.pi, p))


def bell_state(u: np.ndarray) -> np.ndarray:
    """``(I x H) U (I x H)(H x I)|00>``."""
    psi = np.zeros(9, dtype=complex)
    psi[0] = 1.0
    h_c, h_t = np.kron(_H3, _EYE3), np.kron(_EYE3, _H3)
    return h_t @ u @ h_t @ h_c @ psi


def pulse_durations(omega0: complex) -> tuple[float, float]:
    """Nominal pi and 2pi durations at the unperturbed Rabi frequency."""
    return math.pi / abs(omega0), 2 * math.pi / abs(omega0)


def analytic_bell_fidelity(
    delta: float,
    dI: float,
    omega0: complex,
    durations: tuple[float, float] | None = None,
) -> float:
    """Pure-state fidelity ``|<Bell'|Bell>|^2`` of the erroneous gate sequence."""
    p = AnalyticParams(omega0, delta, dI)
    t_pi, t_2pi = durations or pulse_durations(omega0)
    u = gate_operator(rotation_matrix(t_pi, p), rotation_matrix(t_2pi, p))
    return float(abs(np.vdot(IDEAL_BELL, bell_state(u))) ** 2)


def leakage_bound(omega_max: float, delta_min: float) -> float:
    """Off-resonant leakage estimate ``(Omega_max / Delta_min)^2``."""
    if delta_min <= 0:
        raise ValueError("delta_min must be positive")
    return (omega_max / delta_min) ** 2


def sensitivity_surface(omega0: complex, d_delta, d_intensity) -> RobustnessGrid:
    """Analytic fidelity on a (detuning offset, intensity error) grid."""
    d_delta = np.asarray(d_delta, dtype=float)
    d_intensity = np.asarray(d_intensity, dtype=float)
    fid = np.array([[analytic_bell_fidelity(dd, di, omega0) for di in d_intensity] for dd in d_delta])
    return RobustnessGrid(d_delta, d_intensity, fid)


# -- finite-blockade numerical counterpart ------------------------------------------

THREE_LEVEL = LevelScheme(("0", "1", "r"))


def _drive_matrix(p: AnalyticParams) -> np.ndarray:
    amp = math.sqrt(1.0 + p.dI)
    h = np.zeros((3, 3), dtype=complex)
    h[2, 1] = 0.5 * p.omega0 * amp
    h[1, 2] = np.conj(h[2, 1])
    h[2, 2] = p.delta
    return h


def numerical_bell_fidelity(
    delta: float,
    dI: float,
    omega0: complex,
    blockade: float,
    durations: tuple[float, float] | None = None,
) -> float:
    """The same three-pulse sequence propagated with a finite blockade shift."""
    space = StateSpace(THREE_LEVEL)
    p = AnalyticParams(omega0, delta, dI)
    t_pi, t_2pi = durations or pulse_durations(omega0)
    h = _drive_matrix(p)
    rr = blockade * np.outer(space.ket("rr"), space.ket("rr"))
    h_control = space.embed(h, "control") + rr
    h_target = space.embed(h, "target") + rr
    rho = DensityMatrix.basis(space, "00")
    hc, ht = space.embed(space.hadamard, "control"), space.embed(space.hadamard, "target")
    rho = rho.conjugate_by(ht @ hc)
    rho = propagate_piecewise(rho, [(h_control, t_pi), (h_target, t_2pi), (h_control, t_pi)], THREE_LEVEL)
    rho = rho.conjugate_by(ht)
    return float(np.real(np.vdot(IDEAL_BELL, rho.data @ IDEAL_BELL)))
