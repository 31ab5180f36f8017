"""Atomic level schemes, two-atom state spaces and density-matrix utilities.

Basis convention: the per-atom levels are ordered exactly as listed in the
:class:`LevelScheme`; two-atom states use row-major ``atom1 (x) atom2``
indexing, so ``<a1 a2|rho|b1 b2>`` lives at ``rho[a1*d + a2, b1*d + b2]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from rydsim.errors import ConfigurationError

GROUND_LEVELS = ("0", "1", "d")
QUBIT_LEVELS = ("0", "1")

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)

ATOMS = {"control": 0, "target": 1, 0: 0, 1: 1}


@dataclass(frozen=True, eq=False)
class LevelScheme:
    """Per-atom level set with decay rates (1/us) and branching ratios.

    ``branching[(j, k)]`` is the probability that decay out of level ``k``
    lands in level ``j``.
    """

    levels: tuple[str, ...]
    gamma: Mapping[str, float] = field(default_factory=dict)
    branching: Mapping[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "gamma", dict(self.gamma))
        object.__setattr__(self, "branching", dict(self.branching))
        self.validate()

    def _key(self):
        return self.levels, tuple(sorted(self.gamma.items())), tuple(sorted(self.branching.items()))

    def __eq__(self, other):
        if not isinstance(other, LevelScheme):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def rate(self, level: str) -> float:
        return float(self.gamma.get(level, 0.0))

    def _rank(self, level: str) -> int:
        # stable levels sit below every excited level
        if level in GROUND_LEVELS:
            return -1
        return self.levels.index(level)

    def validate(self) -> None:
        if len(set(self.levels)) != len(self.levels):
            raise ConfigurationError(f"duplicate level labels in {self.levels}")
        for level in ("0", "1"):
            if level not in self.levels:
                raise ConfigurationError(f"level scheme must contain qubit level {level!r}")
        for level, g in self.gamma.items():
            if level not in self.levels:
                raise ConfigurationError(f"decay rate given for unknown level {level!r}")
            if not np.isfinite(g) or g < 0:
                raise ConfigurationError(f"decay rate of level {level!r} must be >= 0, got {g}")
            if level in GROUND_LEVELS and g != 0:
                raise ConfigurationError(f"level {level!r} is stable and cannot decay")
        for (j, k), b in self.branching.items():
            if j not in self.levels or k not in self.levels:
                raise ConfigurationError(f"branching ratio ({j!r}, {k!r}) names an unknown level")
            if not 0.0 <= b <= 1.0:
                raise ConfigurationError(f"branching ratio b_{j}{k} = {b} outside [0, 1]")
            if self._rank(j) >= self._rank(k):
                raise ConfigurationError(f"branching ratio b_{j}{k}: {j!r} is not below {k!r}")
        for k in self.levels:
            if self.rate(k) == 0.0:
                continue
            total = sum(b for (_, kk), b in self.branching.items() if kk == k)
            if abs(total - 1.0) > 1e-12:
                raise ConfigurationError(
                    f"branching ratios out of level {k!r} sum to {total:.15g}, expected 1"
                )

    def with_rates(self, **rates: float) -> "LevelScheme":
        """Copy with some decay rates replaced, e.g. ``scheme.with_rates(r=0.0)``."""
        gamma = dict(self.gamma)
        gamma.update(rates)
        return LevelScheme(self.levels, gamma, self.branching)

    def without_decay(self) -> "LevelScheme":
        return LevelScheme(self.levels, {}, self.branching)

    def scaled_decay(self, factor: float) -> "LevelScheme":
        return LevelScheme(
            self.levels, {k: g * factor for k, g in self.gamma.items()}, self.branching
        )

    def decay_channels(self) -> list[tuple[str, str, float]]:
        """``(lower, upper, rate)`` triples with nonzero rate ``b_jk * gamma_k``."""
        channels = []
        for (j, k), b in self.branching.items():
            rate = b * self.rate(k)
            if rate > 0:
                channels.append((j, k, rate))
        order = {lvl: i for i, lvl in enumerate(self.levels)}
        channels.sort(key=lambda c: (order[c[1]], order[c[0]]))
        return channels


def arp_scheme(tau_r: float = 540.0) -> LevelScheme:
    """One-photon scheme (0, 1, r, d) with Cs 107p3/2 style branching."""
    return LevelScheme(
        ("0", "1", "r", "d"),
        {"r": 1.0 / tau_r},
        {("0", "r"): 1 / 16, ("1", "r"): 1 / 16, ("d", "r"): 7 / 8},
    )


def stirap_scheme(tau_p: float = 0.155, tau_r: float = 540.0) -> LevelScheme:
    """Two-photon scheme (0, 1, p, r, d) with intermediate-state decay."""
    return LevelScheme(
        ("0", "1", "p", "r", "d"),
        {"p": 1.0 / tau_p, "r": 1.0 / tau_r},
        {
            ("0", "p"): 1 / 16,
            ("1", "p"): 1 / 16,
            ("d", "p"): 7 / 8,
            ("0", "r"): 1 / 32,
            ("1", "r"): 1 / 32,
            ("d", "r"): 7 / 16,
            ("p", "r"): 1 / 2,
        },
    )


def _split_pair(state) -> tuple[str, str]:
    if isinstance(state, str):
        if len(state) != 2:
            raise ValueError(f"two-atom state label must have two characters, got {state!r}")
        return state[0], state[1]
    a, b = state
    return str(a), str(b)


class StateSpace:
    """Indexed two-atom basis for a level scheme."""

    def __init__(self, scheme: LevelScheme):
        scheme.validate()
        self.scheme = scheme
        self.levels = scheme.levels
        self.d = len(scheme.levels)
        self.dim = self.d * self.d
        self._index = {lvl: i for i, lvl in enumerate(self.levels)}

    def __repr__(self):
        return f"StateSpace(levels={self.levels!r}, dim={self.dim})"

    def level(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise ValueError(f"unknown level {label!r}; scheme has {self.levels}") from None

    def index(self, state) -> int:
        a, b = _split_pair(state)
        return self.level(a) * self.d + self.level(b)

    def label(self, index: int) -> str:
        a, b = divmod(index, self.d)
        return self.levels[a] + self.levels[b]

    def ket(self, state) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(state)] = 1.0
        return v

    def superposition(self, amplitudes: Mapping) -> np.ndarray:
        """Normalized ket from ``{label: amplitude}``."""
        v = np.zeros(self.dim, dtype=complex)
        for state, amp in amplitudes.items():
            v[self.index(state)] += amp
        return v / np.linalg.norm(v)

    def single(self, row: str, col: str) -> np.ndarray:
        """Single-atom operator ``|row><col|``."""
        op = np.zeros((self.d, self.d), dtype=complex)
        op[self.level(row), self.level(col)] = 1.0
        return op

    def projector(self, level: str) -> np.ndarray:
        return self.single(level, level)

    def embed(self, op: np.ndarray, atom) -> np.ndarray:
        eye = np.eye(self.d)
        return np.kron(op, eye) if ATOMS[atom] == 0 else np.kron(eye, op)

    def symmetric(self, op: np.ndarray) -> np.ndarray:
        """``op (x) I + I (x) op``."""
        return self.embed(op, 0) + self.embed(op, 1)

    @cached_property
    def hadamard(self) -> np.ndarray:
        """Single-atom Hadamard on {0, 1}, identity elsewhere."""
        h = np.eye(self.d, dtype=complex)
        q = [self.level(x) for x in QUBIT_LEVELS]
        h[np.ix_(q, q)] = HADAMARD
        return h


def build_space(scheme: LevelScheme) -> StateSpace:
    return StateSpace(scheme)


class DensityMatrix:
    """Two-atom density matrix bound to a :class:`StateSpace`.

    Instances are treated as immutable: operations return new objects.
    """

    __slots__ = ("space", "data")

    def __init__(self, space: StateSpace, data: np.ndarray):
        data = np.asarray(data, dtype=complex)
        if data.shape != (space.dim, space.dim):
            raise ValueError(f"expected {space.dim}x{space.dim} matrix, got {data.shape}")
        self.space = space
        self.data = data
        self.data.setflags(write=False)

    @classmethod
    def from_ket(cls, space: StateSpace, ket: np.ndarray) -> "DensityMatrix":
        ket = np.asarray(ket, dtype=complex)
        return cls(space, np.outer(ket, ket.conj()))

    @classmethod
    def basis(cls, space: StateSpace, state) -> "DensityMatrix":
        return cls.from_ket(space, space.ket(state))

    @property
    def dim(self) -> int:
        return self.space.d

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def purity(self) -> float:
        return float(np.real(np.vdot(self.data.conj().T, self.data)))

    def population(self, state) -> float:
        i = self.space.index(state)
        return float(self.data[i, i].real)

    def coherence(self, bra_state, ket_state) -> complex:
        """``<bra_state|rho|ket_state>``."""
        return complex(self.data[self.space.index(bra_state), self.space.index(ket_state)])

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.data - self.data.conj().T)))

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.data + self.data.conj().T)
        return float(np.linalg.eigvalsh(h)[0])

    def swapped(self) -> "DensityMatrix":
        """Exchange the two atoms."""
        d = self.space.d
        r = self.data.reshape(d, d, d, d).transpose(1, 0, 3, 2)
        return DensityMatrix(self.space, r.reshape(self.space.dim, self.space.dim))

    def conjugate_by(self, unitary: np.ndarray) -> "DensityMatrix":
        return DensityMatrix(self.space, unitary @ self.data @ unitary.conj().T)


@dataclass(frozen=True, eq=False)
class Observable:
    label: str
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"observable {self.label!r} must be a square matrix")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-12:
            raise ValueError(f"observable {self.label!r} is not Hermitian")
        object.__setattr__(self, "matrix", m)


def apply_hadamard(rho: DensityMatrix, atom) -> DensityMatrix:
    """Perfect instantaneous Hadamard on one atom's qubit levels."""
    u = rho.space.embed(rho.space.hadamard, atom)
    return rho.conjugate_by(u)


def bell_fidelity(rho: DensityMatrix, pair: Sequence = ("00", "11")) -> float:
    """Bell fidelity ``(P_uv + P_xy)/2 + |<uv|rho|xy>|`` against basis pair ``(uv, xy)``.

    This is the one place that maps the four-index ``rho_1010`` notation onto
    a matrix element: the coherence between the two target basis states.
    """
    uv, xy = pair
    space = rho.space
    i, j = space.index(uv), space.index(xy)
    if i == j:
        raise ValueError(f"Bell pair needs two distinct basis states, got {uv!r} twice")
    for state in (uv, xy):
        if any(lvl not in QUBIT_LEVELS for lvl in _split_pair(state)):
            raise ValueError(f"Bell pair states must be two-qubit basis states, got {state!r}")
    pops = rho.data[i, i].real + rho.data[j, j].real
    return float(0.5 * pops + abs(rho.data[i, j]))


def expectation(rho: DensityMatrix, obs: Observable) -> float:
    if obs.matrix.shape != rho.data.shape:
        raise ValueError(
            f"observable {obs.label!r} has shape {obs.matrix.shape}, density matrix {rho.data.shape}"
        )
    return float(np.real(np.einsum("ij,ji->", obs.matrix, rho.data)))


# -- observables ------------------------------------------------------------


def population(space: StateSpace, *states) -> Observable:
    """Summed population of the listed two-atom basis states."""
    m = np.zeros((space.dim, space.dim), dtype=complex)
    for s in states:
        i = space.index(s)
        m[i, i] = 1.0
    return Observable("P_" + "+".join("".join(_split_pair(s)) for s in states), m)


def symmetric_projector(space: StateSpace, a: str = "1", b: str = "r") -> Observable:
    """Projector onto ``(|ab> + |ba>)/sqrt(2)``."""
    v = space.superposition({a + b: 1.0, b + a: 1.0})
    return Observable(f"P_{a}{b}+{b}{a}", np.outer(v, v.conj()))


def level_number(space: StateSpace, level: str, label: str | None = None) -> Observable:
    """Number of atoms in ``level``; for ``p`` this is 2 rho_pppp + sum_j (rho_jjpp + rho_ppjj)."""
    m = space.symmetric(space.projector(level))
    return Observable(label or f"N_{level}", m)


def leak_d(space: StateSpace) -> Observable:
    """Population with at least one atom in |d>: 1 - Tr restricted to non-d levels."""
    if "d" not in space.levels:
        raise ValueError("scheme has no |d> level")
    keep = [lvl for lvl in space.levels if lvl != "d"]
    p = sum(space.projector(lvl) for lvl in keep)
    m = np.eye(space.dim) - np.kron(p, p)
    return Observable("leak_d", m)


def default_observables(space: StateSpace) -> list[Observable]:
    """Population traces recorded during gate dynamics."""
    obs = [
        population(space, "10"),
        population(space, "r0"),
        population(space, "11"),
        symmetric_projector(space, "1", "r"),
        population(space, "rr"),
    ]
    if "p" in space.levels:
        obs.insert(1, population(space, "p0"))
        obs.append(level_number(space, "p", "P_pp"))
    if "d" in space.levels:
        obs.append(leak_d(space))
    return obs

