import itertools

import numpy as np
import pytest

from otn.bath import BathSpec, discretize
from otn.errors import ConfigurationError, SizeError
from otn.influence import (
    CouplingBasis,
    exact_influence,
    exact_influence_batch,
    export_gate_csv,
    gate,
    weight,
    weight_table,
)


@pytest.fixture
def zero_bath():
    return discretize(BathSpec(kind="exponential_sum", exponentials=((0.0, 1.0),)),
                      0.1, n_cut=4)


class TestCouplingBasis:
    def test_pair_map_bijection(self):
        basis = CouplingBasis.from_eigenvalues([2.0, 0.5, -1.0])
        pairs = {basis.pair(e) for e in range(1, 10)}
        assert pairs == set(itertools.product(range(3), repeat=2))
        for e in range(1, 10):
            assert basis.slot(*basis.pair(e)) == e

    def test_zero_slot_not_produced(self):
        basis = CouplingBasis.from_eigenvalues([1.0, -1.0])
        assert all(basis.slot(l, r) != 0 for l in range(2) for r in range(2))

    def test_must_be_descending(self):
        with pytest.raises(ConfigurationError):
            CouplingBasis.from_eigenvalues([-1.0, 1.0])

    def test_degenerate_eigenvalues_allowed(self):
        basis = CouplingBasis.from_eigenvalues([1.0, 0.0, 0.0, -1.0])
        assert basis.d == 4


class TestWeight:
    def test_diagonal_pair_is_one(self, qubit_basis, exp_bath):
        for k in range(exp_bath.n_cut + 1):
            for l in range(2):
                mu = qubit_basis.slot(l, l)
                for nu in range(5):
                    assert weight(qubit_basis, exp_bath, k, mu, nu) == pytest.approx(1.0)

    def test_zero_slot_is_one(self, qubit_basis, exp_bath):
        for k in range(exp_bath.n_cut + 1):
            for other in range(5):
                assert weight(qubit_basis, exp_bath, k, 0, other) == 1.0
                assert weight(qubit_basis, exp_bath, k, other, 0) == 1.0

    def test_coherence_against_diagonal_pair(self, qubit_basis):
        # mu = (1,2), nu = (1,1) with eigenvalues (1,-1): exp(-4 i Im eta)
        eta = 0.3 + 0.7j
        db = discretize(
            BathSpec(kind="tabulated",
                     table=(np.linspace(0, 1, 5), np.full(5, 0.0))), 0.1, n_cut=2)
        db.eta[1] = eta
        mu = qubit_basis.slot(0, 1)
        nu = qubit_basis.slot(0, 0)
        val = weight(qubit_basis, db, 1, mu, nu)
        assert val == pytest.approx(np.exp(-4j * eta.imag))
        assert abs(val) == pytest.approx(1.0)

    def test_hermiticity_pairing(self, qubit_basis, exp_bath, rng):
        for _ in range(50):
            k = rng.integers(0, exp_bath.n_cut + 1)
            mu, nu = rng.integers(0, 5, size=2)
            mu_bar = qubit_basis.conjugate_slot(mu)
            nu_bar = qubit_basis.conjugate_slot(nu)
            lhs = weight(qubit_basis, exp_bath, k, mu_bar, nu_bar)
            rhs = np.conj(weight(qubit_basis, exp_bath, k, mu, nu))
            assert lhs == pytest.approx(rhs)

    def test_out_of_range_k(self, qubit_basis, exp_bath):
        with pytest.raises(ConfigurationError):
            weight(qubit_basis, exp_bath, exp_bath.n_cut + 1, 1, 1)


class TestGate:
    def test_delta_structure_k_positive(self, qubit_basis, exp_bath):
        g = gate(qubit_basis, exp_bath, 2)
        table = weight_table(qubit_basis, exp_bath, 2)
        for mu, nu, j, i in itertools.product(range(5), repeat=4):
            expected = table[mu, j] if (i == j and mu == nu) else 0.0
            assert g.tensor[mu, nu, j, i] == pytest.approx(expected)

    def test_zero_index_gate_reduces_to_deltas(self, qubit_basis, exp_bath):
        g = gate(qubit_basis, exp_bath, 1)
        for nu, j, i in itertools.product(range(5), repeat=3):
            expected = 1.0 if (nu == 0 and i == j) else 0.0
            assert g.tensor[0, nu, j, i] == pytest.approx(expected)

    def test_k0_gate_fully_diagonal(self, qubit_basis, exp_bath):
        g = gate(qubit_basis, exp_bath, 0)
        nz = np.argwhere(g.tensor != 0)
        assert len(nz) == 5
        assert all(mu == nu == j == i for mu, nu, j, i in nz)

    def test_zero_bath_gate_is_identity(self, qubit_basis, zero_bath):
        g = gate(qubit_basis, zero_bath, 1)
        for mu, nu, j, i in itertools.product(range(5), repeat=4):
            assert g.tensor[mu, nu, j, i] == (1.0 if mu == nu and i == j else 0.0)

    def test_gate_csv_export(self, qubit_basis, exp_bath, tmp_path):
        g = gate(qubit_basis, exp_bath, 0)
        path = tmp_path / "gate.csv"
        export_gate_csv(g, path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 6  # header + 5 diagonal entries


class TestExactInfluence:
    def test_single_step(self, qubit_basis, exp_bath):
        for mu in range(5):
            expected = weight(qubit_basis, exp_bath, 0, mu, mu)
            assert exact_influence(qubit_basis, exp_bath, [mu]) == pytest.approx(expected)

    def test_two_step_expansion(self, qubit_basis, exp_bath):
        # hand expansion of the double product: I0(m1,m1) I0(m2,m2) I1(m2,m1),
        # cross-checked by an independent loop
        for m1, m2 in itertools.product(range(5), repeat=2):
            by_hand = (
                weight(qubit_basis, exp_bath, 0, m1, m1)
                * weight(qubit_basis, exp_bath, 0, m2, m2)
                * weight(qubit_basis, exp_bath, 1, m2, m1)
            )
            loop = 1.0
            path = [m1, m2]
            for i in range(2):
                for j in range(i + 1):
                    loop *= weight(qubit_basis, exp_bath, i - j, path[i], path[j])
            val = exact_influence(qubit_basis, exp_bath, path)
            assert val == pytest.approx(by_hand)
            assert val == pytest.approx(loop)

    def test_zero_bath_gives_unity(self, qubit_basis, zero_bath, rng):
        paths = rng.integers(0, 5, size=(20, 10))
        assert np.allclose(exact_influence_batch(qubit_basis, zero_bath, paths), 1.0)

    def test_reduction_identity(self, qubit_basis, exp_bath, rng):
        # boundary zeros drop out: F(0..0, path) = F(path, 0..0) = F(path)
        for _ in range(30):
            m = rng.integers(1, 5)
            base = rng.integers(0, 5, size=m)
            z = rng.integers(1, 4)
            ref = exact_influence(qubit_basis, exp_bath, base)
            lead = np.concatenate([np.zeros(z, np.int64), base])
            trail = np.concatenate([base, np.zeros(z, np.int64)])
            assert exact_influence(qubit_basis, exp_bath, lead) == pytest.approx(ref, abs=1e-12)
            assert exact_influence(qubit_basis, exp_bath, trail) == pytest.approx(ref, abs=1e-12)

    def test_factorization_identity(self, qubit_basis, rng):
        spec = BathSpec(kind="exponential_sum", exponentials=(((0.35 - 0.15j), (1.0 + 0.4j)),))
        db = discretize(spec, 0.2, n_cut=3)
        for _ in range(20):
            m, k = rng.integers(1, 4, size=2)
            left = rng.integers(0, 5, size=m)
            right = rng.integers(0, 5, size=k)
            zeros = np.zeros(db.n_cut, np.int64)
            joint = exact_influence(qubit_basis, db, np.concatenate([left, zeros, right]))
            split = exact_influence(qubit_basis, db, left) * exact_influence(qubit_basis, db, right)
            assert joint == pytest.approx(split, abs=1e-12)

    def test_path_cap(self, qubit_basis, exp_bath):
        with pytest.raises(SizeError):
            exact_influence(qubit_basis, exp_bath, [1] * 17)
        with pytest.raises(SizeError):
            exact_influence_batch(qubit_basis, exp_bath, np.ones((2, 20), np.int64))
        # the cap lifts explicitly for benchmark-style long paths
        vals = exact_influence_batch(qubit_basis, exp_bath, np.ones((2, 20), np.int64), cap=20)
        assert vals.shape == (2,)

    def test_bad_indices(self, qubit_basis, exp_bath):
        with pytest.raises(ConfigurationError):
            exact_influence(qubit_basis, exp_bath, [5])
