import json

import numpy as np
import pytest

from rydsim import CheckpointError, ConfigurationError, IntegrationError
from rydsim import optimize as opt
from rydsim.gates import SEGMENTED_REFERENCE_MHZ
from rydsim.optimize import (
    DEConfig,
    OptimizationProblem,
    fitness,
    optimize,
    run_de,
    slew_penalty,
)
from rydsim.pulses import TWO_PI

TABLE_X = TWO_PI * np.array(SEGMENTED_REFERENCE_MHZ["omega1"] + SEGMENTED_REFERENCE_MHZ["omega2"] + SEGMENTED_REFERENCE_MHZ["delta1"])


def sphere(x):
    return -float(np.sum(np.asarray(x) ** 2))


def rastrigin(x):
    x = np.asarray(x)
    return -float(10 * x.size + np.sum(x**2 - 10 * np.cos(2 * np.pi * x)))


class TestDifferentialEvolution:
    def test_sphere_converges(self):
        res = run_de(sphere, [[-5, 5]] * 2, DEConfig(generations=200, seed=7))
        assert np.linalg.norm(res.x) < 1e-3

    def test_seed_determinism(self):
        cfg = DEConfig(population=12, generations=30, seed=5)
        a = run_de(rastrigin, [[-5, 5]] * 3, cfg)
        b = run_de(rastrigin, [[-5, 5]] * 3, cfg)
        assert a.history == b.history
        np.testing.assert_array_equal(a.population, b.population)

    def test_worker_count_independent(self):
        one = run_de(rastrigin, [[-5, 5]] * 3, DEConfig(population=8, generations=5, seed=2, workers=1))
        two = run_de(rastrigin, [[-5, 5]] * 3, DEConfig(population=8, generations=5, seed=2, workers=2))
        assert one.history == two.history
        np.testing.assert_array_equal(one.population, two.population)

    def test_history_monotone_and_bounds_respected(self):
        bounds = np.array([[-5.0, 5.0], [0.0, 1.0], [2.0, 3.0]])
        res = run_de(rastrigin, bounds, DEConfig(population=10, generations=40, seed=3))
        assert np.all(np.diff(res.history) >= 0)
        assert len(res.history) == 41
        assert np.all(res.population >= bounds[:, 0]) and np.all(res.population <= bounds[:, 1])

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            DEConfig(weight=0)
        with pytest.raises(ConfigurationError):
            DEConfig(crossover=1.5)
        with pytest.raises(ConfigurationError):
            DEConfig(population=3)
        with pytest.raises(ConfigurationError):
            run_de(sphere, [[1, 0]], DEConfig())
        assert DEConfig().population_size(18) == 180


class TestCheckpoint:
    def test_resume_matches_uninterrupted(self, tmp_path):
        path = str(tmp_path / "ck.json")
        straight = run_de(rastrigin, [[-5, 5]] * 2, DEConfig(population=6, generations=8, seed=9))
        run_de(rastrigin, [[-5, 5]] * 2, DEConfig(population=6, generations=3, seed=9), path)
        resumed = run_de(rastrigin, [[-5, 5]] * 2, DEConfig(population=6, generations=8, seed=9), path)
        assert resumed.history == straight.history
        np.testing.assert_array_equal(resumed.population, straight.population)
        assert json.loads(open(path).read())["generation"] == 8

    def test_corrupt_file(self, tmp_path):
        path = tmp_path / "ck.json"
        path.write_text("{not json")
        with pytest.raises(CheckpointError):
            run_de(sphere, [[-1, 1]], DEConfig(population=4, generations=1), str(path))

    def test_mismatched_seed(self, tmp_path):
        path = str(tmp_path / "ck.json")
        run_de(sphere, [[-1, 1]], DEConfig(population=4, generations=1, seed=1), path)
        with pytest.raises(CheckpointError, match="different"):
            run_de(sphere, [[-1, 1]], DEConfig(population=4, generations=2, seed=2), path)

    def test_mismatched_problem(self, tmp_path):
        path = str(tmp_path / "ck.json")
        run_de(sphere, [[-1, 1]], DEConfig(population=4, generations=1), path)
        with pytest.raises(CheckpointError):
            run_de(sphere, [[-1, 1], [-1, 1]], DEConfig(population=4, generations=2), path)


class TestGateProblem:
    problem = OptimizationProblem()

    def test_layout(self):
        assert self.problem.dim == 18
        b = self.problem.bounds
        assert b[0].tolist() == [0.0, TWO_PI * 200] and b[-1].tolist() == [TWO_PI * 200, TWO_PI * 800]

    def test_decoded_pulses_symmetric(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(self.problem.bounds[:, 0], self.problem.bounds[:, 1])
        for p in self.problem.decode(x).pulses(1.0).values():
            for t in (0.05, 0.21, 0.4):
                assert p(1.0 - t) == pytest.approx(p(t), rel=1e-12)

    def test_table_slew_metrics(self):
        assert self.problem.slew(TABLE_X) == pytest.approx(55.46 * 12, rel=1e-9)
        erf = OptimizationProblem(slew_metric="erf").slew(TABLE_X)
        assert erf > 1000.0

    def test_penalty_formula(self):
        assert slew_penalty(2000.0, 1000.0) == 1.0
        assert slew_penalty(900.0, 1000.0) == 0.0

    def test_penalty_applied_in_fitness(self, monkeypatch):
        monkeypatch.setattr(opt, "bell_sequence", lambda cfg: type("R", (), {"fidelity": 0.9})())
        loose = OptimizationProblem(slew_limit=1e9)
        tight = OptimizationProblem(slew_limit=loose.slew(TABLE_X) / 2)
        assert fitness(TABLE_X, loose) - fitness(TABLE_X, tight) == pytest.approx(1.0)

    def test_integration_failure_scores_zero(self, monkeypatch):
        def boom(cfg):
            raise IntegrationError("diverged", 0.1)

        monkeypatch.setattr(opt, "bell_sequence", boom)
        assert fitness(TABLE_X, self.problem) == 0.0

    def test_undriven_sequence(self):
        x = TABLE_X.copy()
        x[:12] = 0.0
        assert fitness(x, self.problem) == pytest.approx(0.25, abs=1e-12)

    def test_small_search_improves(self):
        problem = OptimizationProblem(n_half_segments=1)
        res = optimize(problem, DEConfig(population=5, generations=1, seed=1))
        assert res.history[1] > res.history[0]
        assert res.fitness == pytest.approx(res.search_fitness, abs=1e-5)
