import math

import numpy as np
import pytest

from rydsim import ConfigurationError
from rydsim import gates
from rydsim.gates import (
    ARPDrive,
    GateConfig,
    SegmentedDrive,
    VasilevDrive,
    blockade_sweep,
    default_config,
    extract_phases,
    fit_blockade,
    parallel_map,
    resolve_workers,
    robustness_grid,
    run_gate,
)
from rydsim.pulses import TWO_PI
from rydsim.quantum import DensityMatrix, population


def angle_from(phi, ref):
    return abs((phi - ref + 180.0) % 360.0 - 180.0)


class TestGateConfig:
    def test_defaults(self):
        cfg = default_config("ARP")
        assert cfg.T == 0.54 and cfg.B == pytest.approx(TWO_PI * 3000)
        assert cfg.scheme.levels == ("0", "1", "r", "d")
        assert cfg.target == ("00", "11")
        assert default_config("STIRAP-segmented").target == ("01", "10")
        assert default_config("STIRAP-vasilev").scheme.levels == ("0", "1", "p", "r", "d")

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            default_config("ARP", T=0.0)
        with pytest.raises(ConfigurationError):
            default_config("ARP", B=-1.0)
        with pytest.raises(ConfigurationError, match="needs ARPDrive"):
            GateConfig("ARP", VasilevDrive(), 1.0, 1.0)
        with pytest.raises(ConfigurationError):
            default_config("CNOT")
        with pytest.raises(ConfigurationError):
            default_config("ARP", drive=ARPDrive(omega_max=-1.0))
        with pytest.raises(ConfigurationError):
            default_config("ARP", drive=ARPDrive(variant="zigzag"))

    def test_segmented_vector_roundtrip(self):
        d = SegmentedDrive()
        assert SegmentedDrive.from_vector(d.to_vector()) == d
        assert d.n_half == 6


class TestRunGate:
    def test_dark_state_untouched(self):
        cfg = default_config("ARP", scheme=default_config("ARP").scheme.without_decay())
        rho0 = DensityMatrix.basis(cfg.space, "00")
        res = run_gate(cfg, rho0)
        np.testing.assert_allclose(res.rho_final.data, rho0.data, atol=1e-12)

    def test_arp_single_atom_full_rotation(self):
        cfg = default_config("ARP")
        res = run_gate(cfg, DensityMatrix.basis(cfg.space, "10"))
        assert res.rho_final.population("10") > 0.998
        assert res.traces["P_r0"].max() > 0.99
        assert res.traces.times.size == cfg.n_samples + 1

    def test_stirap_analytic_p_stays_small(self):
        cfg = default_config("STIRAP-analytic")
        res = run_gate(cfg, DensityMatrix.basis(cfg.space, "11"))
        assert res.traces["P_pp"].max() < 0.1

    def test_swap_symmetry(self):
        cfg = default_config("ARP", B=TWO_PI * 300)
        space = cfg.space
        obs = [population(space, s) for s in ("01", "0r", "11", "1r")]
        swapped_obs = [population(space, s) for s in ("10", "r0", "11", "r1")]
        a = run_gate(cfg, DensityMatrix.basis(space, "01"), obs)
        b = run_gate(cfg, DensityMatrix.basis(space, "10"), swapped_obs)
        np.testing.assert_allclose(a.rho_final.swapped().data, b.rho_final.data, atol=1e-8)
        for la, lb in zip(a.traces.labels, b.traces.labels):
            np.testing.assert_allclose(a.traces[la], b.traces[lb], atol=1e-8)


class TestBellSequence:
    def test_leak_nondecreasing(self, bell_run):
        leak = bell_run("ARP").traces["leak_d"]
        assert np.all(np.diff(leak) > -1e-12)
        assert leak[-1] > 0

    def test_more_decay_hurts(self, bell_run):
        base = bell_run("ARP").fidelity
        worse = bell_run("ARP", scheme=default_config("ARP").scheme.scaled_decay(10)).fidelity
        assert worse < base <= 1.0

    def test_arp_phases_near_pi(self, bell_run):
        phases = bell_run("ARP", with_phases=True).phases
        assert angle_from(phases.phi1, 180.0) < 10 and angle_from(phases.phi2, 180.0) < 10
        assert not phases.ill_defined

    def test_ideal_limit(self, bell_run):
        scheme = default_config("ARP").scheme.without_decay()
        assert bell_run("ARP", scheme=scheme, B=TWO_PI * 50_000).fidelity > 0.9999

    def test_identity_offset_is_exact(self, bell_run):
        cfg = default_config("ARP")
        grid = robustness_grid(cfg, [0.0], [0.0])
        assert grid.fidelity[0, 0] == bell_run("ARP").fidelity


class TestPhases:
    def test_zero_drive(self):
        cfg = default_config("ARP", drive=ARPDrive(omega_max=0.0, delta_max=0.0))
        assert tuple(extract_phases(cfg)) == (0.0, 0.0, False)

    def test_range_and_warning(self, monkeypatch):
        cfg = default_config("ARP")

        def fake(psi0, ham, space_, t_span, integ):
            out = psi0.copy()
            nz = np.flatnonzero(psi0)[1]
            out[nz] *= -0.3  # phase pi, most population lost
            return out

        monkeypatch.setattr(gates, "evolve_state", fake)
        with pytest.warns(UserWarning, match="ill-defined"):
            ph = extract_phases(cfg)
        assert ph.phi1 == 180.0 and ph.phi2 == 180.0 and ph.ill_defined


class TestSweepsAndGrids:
    def test_fit_recovers_coefficients(self):
        B = np.array([100.0, 300.0, 1000.0, 3000.0])
        y = 3.5e-4 + 7.0 * (17.0 / B) ** 2
        for w in ("relative", "none"):
            fit = fit_blockade(B, y, 17.0, w)
            assert fit.b == pytest.approx(3.5e-4, rel=1e-9) and fit.c == pytest.approx(7.0, rel=1e-9)

    def test_fit_skipped_for_two_points(self, monkeypatch):
        monkeypatch.setattr(gates, "_fidelity", lambda cfg: 1.0 - 1.0 / cfg.B)
        res = blockade_sweep(default_config("ARP"), [100.0, 200.0])
        assert res.fit is None
        np.testing.assert_allclose(res.infidelity, [0.01, 0.005])

    def test_sweep_rejects_bad_input(self):
        with pytest.raises(ConfigurationError):
            blockade_sweep(default_config("ARP"), [])
        with pytest.raises(ConfigurationError):
            blockade_sweep(default_config("ARP"), [100.0, -5.0])

    def test_grid_layout(self, monkeypatch):
        monkeypatch.setattr(gates, "_fidelity", lambda cfg: cfg.detuning_offset + 10 * cfg.intensity_offset)
        grid = robustness_grid(default_config("ARP"), [1.0, 2.0], [0.1, 0.2, 0.3])
        assert grid.fidelity.shape == (2, 3)
        assert list(grid.rows())[1] == (1.0, 0.2, pytest.approx(3.0))
        assert grid.spread == pytest.approx(3.0)


class TestParallelMap:
    def test_order_preserved_across_workers(self):
        items = [9.0, 1.0, 4.0, 16.0, 25.0]
        assert parallel_map(math.sqrt, items, 2) == parallel_map(math.sqrt, items, 1) == [3, 1, 2, 4, 5]

    def test_env_default(self, monkeypatch):
        monkeypatch.setenv("RYDSIM_WORKERS", "3")
        assert resolve_workers() == 3
        monkeypatch.setenv("RYDSIM_WORKERS", "0")
        with pytest.raises(ConfigurationError):
            resolve_workers()
