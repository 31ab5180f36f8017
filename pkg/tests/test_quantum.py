import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydsim import ConfigurationError
from rydsim.quantum import (
    DensityMatrix,
    LevelScheme,
    Observable,
    StateSpace,
    apply_hadamard,
    arp_scheme,
    bell_fidelity,
    default_observables,
    expectation,
    leak_d,
    level_number,
    population,
    stirap_scheme,
    symmetric_projector,
)


def random_density(space, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(space.dim, space.dim)) + 1j * rng.normal(size=(space.dim, space.dim))
    rho = a @ a.conj().T
    return DensityMatrix(space, rho / np.trace(rho))


class TestLevelScheme:
    def test_arp_defaults(self):
        s = arp_scheme()
        assert s.levels == ("0", "1", "r", "d")
        assert s.rate("r") == pytest.approx(1 / 540)
        assert s.branching[("d", "r")] == 7 / 8

    def test_stirap_channels(self):
        chans = stirap_scheme().decay_channels()
        assert len(chans) == 7
        rates = {(j, k): r for j, k, r in chans}
        assert rates[("p", "r")] == pytest.approx(0.5 / 540)
        assert rates[("d", "p")] == pytest.approx(7 / 8 / 0.155)

    def test_only_p_channels_without_rydberg_decay(self):
        chans = stirap_scheme().with_rates(r=0.0).decay_channels()
        assert {k for _, k, _ in chans} == {"p"}

    def test_branching_must_sum_to_one(self):
        with pytest.raises(ConfigurationError, match="sum to"):
            LevelScheme(("0", "1", "r"), {"r": 1.0}, {("0", "r"): 0.5, ("1", "r"): 0.4})

    def test_decay_must_go_downward(self):
        with pytest.raises(ConfigurationError, match="not below"):
            LevelScheme(("0", "1", "p", "r"), {"p": 1.0}, {("r", "p"): 1.0})

    def test_ground_levels_cannot_decay(self):
        with pytest.raises(ConfigurationError, match="stable"):
            LevelScheme(("0", "1", "r"), {"1": 0.1}, {})

    def test_duplicate_levels(self):
        with pytest.raises(ConfigurationError, match="duplicate"):
            LevelScheme(("0", "1", "1"))

    def test_negative_rate(self):
        with pytest.raises(ConfigurationError):
            arp_scheme().with_rates(r=-1.0)

    def test_scaled_decay(self):
        s = arp_scheme().scaled_decay(10)
        assert s.rate("r") == pytest.approx(10 / 540)
        assert arp_scheme().without_decay().decay_channels() == []


class TestStateSpace:
    space = StateSpace(arp_scheme())

    def test_row_major_index(self):
        assert self.space.dim == 16
        assert self.space.index("1r") == 1 * 4 + 2
        assert self.space.index(("r", "1")) == 2 * 4 + 1
        assert self.space.label(6) == "1r"

    def test_unknown_level(self):
        with pytest.raises(ValueError, match="unknown level"):
            self.space.index("1p")

    def test_embed_acts_on_one_atom(self):
        op = self.space.single("r", "1")
        v = self.space.embed(op, "target") @ self.space.ket("01")
        np.testing.assert_allclose(v, self.space.ket("0r"))

    def test_hadamard_only_on_qubit(self):
        h = self.space.hadamard
        np.testing.assert_allclose(h @ h, np.eye(4), atol=1e-15)
        assert h[2, 2] == 1 and h[3, 3] == 1


class TestDensityMatrix:
    space = StateSpace(arp_scheme())

    def test_immutable(self):
        rho = DensityMatrix.basis(self.space, "00")
        with pytest.raises(ValueError):
            rho.data[0, 0] = 2

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            DensityMatrix(self.space, np.eye(3))

    def test_swap(self):
        rho = DensityMatrix.basis(self.space, "1r").swapped()
        assert rho.population("r1") == 1.0

    def test_coherence_orientation(self):
        psi = self.space.superposition({"00": 1.0, "11": 1j})
        rho = DensityMatrix.from_ket(self.space, psi)
        assert rho.coherence("11", "00") == pytest.approx(0.5j)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_swap_and_hadamard_involutions(self, seed):
        rho = random_density(self.space, seed)
        np.testing.assert_allclose(rho.swapped().swapped().data, rho.data)
        back = apply_hadamard(apply_hadamard(rho, "target"), "target")
        np.testing.assert_allclose(back.data, rho.data, atol=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_bell_fidelity_bounded(self, seed):
        rho = random_density(self.space, seed)
        for pair in (("00", "11"), ("01", "10")):
            assert 0.0 <= bell_fidelity(rho, pair) <= 1.0 + 1e-12


class TestBellFidelity:
    space = StateSpace(arp_scheme())

    def test_bell_state(self):
        rho = DensityMatrix.from_ket(self.space, self.space.superposition({"01": 1, "10": -1}))
        assert bell_fidelity(rho, ("01", "10")) == pytest.approx(1.0)
        assert bell_fidelity(rho, ("00", "11")) == pytest.approx(0.0)

    def test_product_state(self):
        assert bell_fidelity(DensityMatrix.basis(self.space, "00")) == pytest.approx(0.5)

    def test_rejects_non_qubit_pair(self):
        rho = DensityMatrix.basis(self.space, "00")
        with pytest.raises(ValueError):
            bell_fidelity(rho, ("0r", "10"))
        with pytest.raises(ValueError):
            bell_fidelity(rho, ("01", "01"))


class TestObservables:
    space = StateSpace(stirap_scheme())

    def test_hermiticity_checked(self):
        with pytest.raises(ValueError, match="Hermitian"):
            Observable("x", np.array([[0, 1], [0, 0]]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            expectation(DensityMatrix.basis(self.space, "00"), Observable("x", np.eye(2)))

    def test_p_number_counts_atoms(self):
        n_p = level_number(self.space, "p")
        assert expectation(DensityMatrix.basis(self.space, "pp"), n_p) == pytest.approx(2.0)
        assert expectation(DensityMatrix.basis(self.space, "1p"), n_p) == pytest.approx(1.0)

    def test_symmetric_projector(self):
        psi = self.space.superposition({"1r": 1, "r1": 1})
        rho = DensityMatrix.from_ket(self.space, psi)
        assert expectation(rho, symmetric_projector(self.space)) == pytest.approx(1.0)
        assert expectation(rho, population(self.space, "1r")) == pytest.approx(0.5)

    def test_leak_d(self):
        obs = leak_d(self.space)
        assert expectation(DensityMatrix.basis(self.space, "d1"), obs) == pytest.approx(1.0)
        assert expectation(DensityMatrix.basis(self.space, "dd"), obs) == pytest.approx(1.0)
        assert expectation(DensityMatrix.basis(self.space, "pr"), obs) == pytest.approx(0.0)

    def test_default_labels(self):
        labels = [o.label for o in default_observables(self.space)]
        assert labels[0] == "P_10" and "leak_d" in labels and "N_p" not in labels
