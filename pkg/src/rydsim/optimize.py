"""Differential-evolution search over symmetric segmented STIRAP pulses.

Every random draw of candidate ``i`` in generation ``g`` comes from
``numpy.random.default_rng([seed, g, i])``, so results do not depend on the
order in which candidates are evaluated or on the worker count.
"""

from __future__ import annotations

import functools
import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from rydsim.errors import CheckpointError, ConfigurationError, IntegrationError
from rydsim.gates import GateConfig, SegmentedDrive, bell_sequence, default_config, parallel_map
from rydsim.pulses import TWO_PI, max_slew, segment_slew

SLEW_METRICS = {"segment": segment_slew, "erf": max_slew}

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class OptimizationProblem:
    """Segmented-pulse search space.

    Bounds are in rad/us; ``slew_limit`` is in MHz/us and is measured with
    ``slew_metric``: ``"segment"`` uses the jump between neighbouring segment
    values divided by the segment length, ``"erf"`` the peak slope of the
    error-function connectors.
    """

    template: GateConfig = field(default_factory=lambda: default_config("STIRAP-segmented"))
    n_half_segments: int = 6
    omega_bounds: tuple[float, float] = (0.0, TWO_PI * 200.0)
    delta1_bounds: tuple[float, float] = (TWO_PI * 200.0, TWO_PI * 800.0)
    slew_limit: float = 1000.0
    slew_metric: str = "segment"
    penalty: float = 1.0
    search_rel_tol: float = 1e-7

    def __post_init__(self):
        if self.template.protocol != "STIRAP-segmented":
            raise ConfigurationError("optimization template must use the STIRAP-segmented protocol")
        if self.n_half_segments < 1:
            raise ConfigurationError("need at least one half segment")
        for lo, hi in (self.omega_bounds, self.delta1_bounds):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ConfigurationError(f"invalid bounds ({lo}, {hi})")
        if self.slew_metric not in SLEW_METRICS:
            raise ConfigurationError(f"slew_metric must be one of {sorted(SLEW_METRICS)}")
        if self.slew_limit <= 0:
            raise ConfigurationError("slew limit must be positive")

    @property
    def dim(self) -> int:
        return 3 * self.n_half_segments

    @property
    def bounds(self) -> np.ndarray:
        n = self.n_half_segments
        return np.array([self.omega_bounds] * (2 * n) + [self.delta1_bounds] * n, dtype=float)

    def decode(self, x) -> SegmentedDrive:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"decision vector must have length {self.dim}")
        return SegmentedDrive.from_vector(x, self.template.drive.delta)

    def slew(self, x) -> float:
        pulses = self.decode(x).pulses(self.template.T)
        metric = SLEW_METRICS[self.slew_metric]
        return max(metric(p) for p in pulses.values())

    def config(self, x, rel_tol: float | None = None) -> GateConfig:
        integ = self.template.integrator
        if rel_tol is not None:
            integ = integ.relaxed(rel_tol)
        return self.template.replace(drive=self.decode(x), integrator=integ)


def slew_penalty(slew: float, limit: float, weight: float = 1.0) -> float:
    return weight * max(0.0, slew - limit) / limit


def fitness(x, problem: OptimizationProblem, rel_tol: float | None = None) -> float:
    """Bell fidelity of the decoded pulses minus the slew penalty; 0 if integration fails."""
    try:
        fid = bell_sequence(problem.config(x, rel_tol)).fidelity
    except IntegrationError:
        return 0.0
    return fid - slew_penalty(problem.slew(x), problem.slew_limit, problem.penalty)


@dataclass(frozen=True)
class DEConfig:
    """DE/rand/1/bin settings; ``population=None`` means ``10 * dim``."""

    population: int | None = None
    weight: float = 0.7
    crossover: float = 0.9
    generations: int = 100
    seed: int = 0
    workers: int | None = None

    def __post_init__(self):
        if not 0 < self.weight <= 2:
            raise ConfigurationError("DE weight must be in (0, 2]")
        if not 0 <= self.crossover <= 1:
            raise ConfigurationError("DE crossover rate must be in [0, 1]")
        if self.population is not None and self.population < 4:
            raise ConfigurationError("DE population must be >= 4")
        if self.generations < 0:
            raise ConfigurationError("generations must be >= 0")
        if self.seed < 0:
            raise ConfigurationError("seed must be >= 0")

    def population_size(self, dim: int) -> int:
        return self.population if self.population is not None else max(4, 10 * dim)


@dataclass
class DEResult:
    x: np.ndarray
    fitness: float
    history: list[float]
    population: np.ndarray
    scores: np.ndarray
    generation: int


def _candidate_rng(seed: int, generation: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, generation, index])


def _trial(pop: np.ndarray, i: int, bounds: np.ndarray, cfg: DEConfig, generation: int) -> np.ndarray:
    rng = _candidate_rng(cfg.seed, generation, i)
    n, dim = pop.shape
    others = [k for k in range(n) if k != i]
    a, b, c = rng.choice(others, size=3, replace=False)
    mutant = np.clip(pop[a] + cfg.weight * (pop[b] - pop[c]), bounds[:, 0], bounds[:, 1])
    mask = rng.random(dim) < cfg.crossover
    mask[rng.integers(dim)] = True
    return np.where(mask, mutant, pop[i])


def _save_checkpoint(path: str, cfg: DEConfig, bounds: np.ndarray, gen: int, pop, scores, history) -> None:
    doc = {
        "version": CHECKPOINT_VERSION,
        "seed": cfg.seed,
        "generation": gen,
        "weight": cfg.weight,
        "crossover": cfg.crossover,
        "bounds": bounds.tolist(),
        "population": pop.tolist(),
        "scores": [float(s) for s in scores],
        "history": [float(h) for h in history],
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def _load_checkpoint(path: str, cfg: DEConfig, bounds: np.ndarray, n_pop: int):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        pop = np.array(doc["population"], dtype=float)
        scores = np.array(doc["scores"], dtype=float)
        history = [float(h) for h in doc["history"]]
        gen = int(doc["generation"])
        version, seed = doc["version"], doc["seed"]
        saved_bounds = np.array(doc["bounds"], dtype=float)
        hyper = (doc["weight"], doc["crossover"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint version {version} not supported")
    if seed != cfg.seed or hyper != (cfg.weight, cfg.crossover):
        raise CheckpointError("checkpoint was written with different DE settings")
    if pop.shape != (n_pop, bounds.shape[0]) or scores.shape != (n_pop,) or len(history) != gen + 1:
        raise CheckpointError("checkpoint population does not match the problem")
    if saved_bounds.shape != bounds.shape or not np.array_equal(saved_bounds, bounds):
        raise CheckpointError("checkpoint bounds do not match the problem")
    return gen, pop, scores, history


def run_de(
    objective: Callable[[np.ndarray], float],
    bounds,
    cfg: DEConfig,
    checkpoint: str | None = None,
) -> DEResult:
    """Maximize ``objective`` inside box ``bounds`` (shape ``(dim, 2)``).

    ``objective`` must be picklable when more than one worker is used.  With
    ``checkpoint`` set, state is written after every generation and an
    existing file is resumed from.
    """
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim != 2 or bounds.shape[1] != 2 or np.any(bounds[:, 0] >= bounds[:, 1]):
        raise ConfigurationError("bounds must be (dim, 2) with low < high")
    dim = bounds.shape[0]
    n_pop = cfg.population_size(dim)
    if n_pop < 4:
        raise ConfigurationError("DE population must be >= 4")
    lo, span = bounds[:, 0], bounds[:, 1] - bounds[:, 0]

    if checkpoint and os.path.exists(checkpoint):
        gen, pop, scores, history = _load_checkpoint(checkpoint, cfg, bounds, n_pop)
    else:
        gen = 0
        pop = np.array([lo + span * _candidate_rng(cfg.seed, 0, i).random(dim) for i in range(n_pop)])
        scores = np.array(parallel_map(objective, list(pop), cfg.workers), dtype=float)
        history = [float(scores.max())]
        if checkpoint:
            _save_checkpoint(checkpoint, cfg, bounds, gen, pop, scores, history)

    while gen < cfg.generations:
        gen += 1
        trials = [_trial(pop, i, bounds, cfg, gen) for i in range(n_pop)]
        trial_scores = parallel_map(objective, trials, cfg.workers)
        for i, (x, s) in enumerate(zip(trials, trial_scores)):
            if s >= scores[i]:
                pop[i], scores[i] = x, s
        history.append(float(scores.max()))
        if checkpoint:
            _save_checkpoint(checkpoint, cfg, bounds, gen, pop, scores, history)

    best = int(np.argmax(scores))
    return DEResult(pop[best].copy(), float(scores[best]), history, pop, scores, gen)


@dataclass
class OptimizationResult:
    x: np.ndarray
    fitness: float
    search_fitness: float
    history: list[float]
    drive: SegmentedDrive


def optimize(problem: OptimizationProblem, de_cfg: DEConfig, checkpoint: str | None = None) -> OptimizationResult:
    """Search at the relaxed tolerance, then rescore the best candidate at full tolerance."""
    objective = functools.partial(fitness, problem=problem, rel_tol=problem.search_rel_tol)
    res = run_de(objective, problem.bounds, de_cfg, checkpoint)
    final = fitness(res.x, problem)
    return OptimizationResult(res.x, final, res.fitness, res.history, problem.decode(res.x))
