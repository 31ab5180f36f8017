import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydsim.analytic import (
    IDEAL_BELL,
    AnalyticParams,
    analytic_bell_fidelity,
    bell_state,
    ideal_cz,
    leakage_bound,
    numerical_bell_fidelity,
    rotation_matrix,
    sensitivity_surface,
)
from rydsim.pulses import TWO_PI

OMEGA = TWO_PI * 4.0
QUBIT = [0, 1, 3, 4]  # |00>, |01>, |10>, |11> in the {0, 1, r}^2 basis


class TestRotation:
    @settings(max_examples=60, deadline=None)
    @given(
        st.floats(0, 2.0), st.floats(-100, 100), st.floats(-100, 100), st.floats(-50, 50), st.floats(-0.5, 0.5)
    )
    def test_unitary(self, t, re, im, delta, dI):
        r = rotation_matrix(t, AnalyticParams(complex(re, im), delta, dI))
        assert np.max(np.abs(r.conj().T @ r - np.eye(3))) < 1e-12

    def test_identity_at_zero(self):
        np.testing.assert_allclose(rotation_matrix(0.0, AnalyticParams(OMEGA, 3.0, 0.1)), np.eye(3))

    def test_resonant_pi_pulse(self):
        r = rotation_matrix(math.pi / OMEGA, AnalyticParams(OMEGA))
        assert abs(r[2, 1]) == pytest.approx(1.0)
        assert r[2, 1] == pytest.approx(1j)

    def test_generalized_rabi_cycle(self):
        p = AnalyticParams(OMEGA, OMEGA)
        t = 2 * math.pi / p.omega_prime
        r = rotation_matrix(t, p)
        assert r[1, 1] == pytest.approx(-np.exp(0.5j * OMEGA * t))
        assert abs(r[1, 1]) == pytest.approx(1.0)

    def test_omega_prime(self):
        assert AnalyticParams(3.0, 4.0).omega_prime == 5.0
        assert AnalyticParams(3.0, 0.0, 0.44).omega_prime == pytest.approx(3.6)


class TestIdealGate:
    def test_cz_on_qubits(self):
        u = ideal_cz()[np.ix_(QUBIT, QUBIT)]
        np.testing.assert_allclose(u, np.diag([1, -1, -1, -1]), atol=1e-12)

    def test_bell_output(self):
        np.testing.assert_allclose(bell_state(ideal_cz()), IDEAL_BELL, atol=1e-12)
        assert IDEAL_BELL[1] == -IDEAL_BELL[3]


class TestFidelity:
    def test_perfect_pulses(self):
        assert analytic_bell_fidelity(0.0, 0.0, OMEGA) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("delta,dI", [(TWO_PI * 0.2, 0.0), (TWO_PI * 0.1, 0.05), (TWO_PI * 0.3, -0.02)])
    def test_detuning_sign_symmetry(self, delta, dI):
        a = analytic_bell_fidelity(delta, dI, OMEGA)
        b = analytic_bell_fidelity(-delta, dI, OMEGA)
        assert a == pytest.approx(b, abs=1e-14)

    def test_depends_on_area_only(self):
        # same Omega0 * t * sqrt(1 + dI) with durations fixed by the nominal pulse areas
        dI = 0.05
        scale = 1.0 / math.sqrt(1 + dI)
        t1 = (math.pi / OMEGA, 2 * math.pi / OMEGA)
        a = analytic_bell_fidelity(0.0, dI, OMEGA, t1)
        t2 = (math.pi / (2 * OMEGA), math.pi / OMEGA)
        b = analytic_bell_fidelity(0.0, dI, 2 * OMEGA, t2)
        c = analytic_bell_fidelity(0.0, 0.0, OMEGA, (t1[0] / scale, t1[1] / scale))
        assert a == pytest.approx(b, abs=1e-14)
        assert a == pytest.approx(c, abs=1e-14)
        assert a < 1.0

    def test_matches_finite_blockade_propagation(self):
        for delta, dI in [(TWO_PI * 0.15, 0.03), (-TWO_PI * 0.2, -0.05)]:
            a = analytic_bell_fidelity(delta, dI, OMEGA)
            n = numerical_bell_fidelity(delta, dI, OMEGA, TWO_PI * 1e6)
            assert a == pytest.approx(n, abs=1e-6)

    def test_finite_blockade_degrades(self):
        assert numerical_bell_fidelity(0.0, 0.0, OMEGA, TWO_PI * 20) < 0.99

    def test_surface(self):
        grid = sensitivity_surface(OMEGA, [0.0, TWO_PI * 0.2], [0.0, 0.05])
        assert grid.fidelity.shape == (2, 2)
        assert grid.fidelity[0, 0] == pytest.approx(1.0, abs=1e-12)
        assert grid.minimum < 0.995


class TestLeakage:
    def test_values(self):
        assert leakage_bound(TWO_PI * 17, TWO_PI * 3000) == pytest.approx(3.2e-5, rel=0.01)
        assert leakage_bound(0.0, 1.0) == 0.0
        assert leakage_bound(2.0, 2.0) == 1.0
        with pytest.raises(ValueError):
            leakage_bound(1.0, 0.0)
