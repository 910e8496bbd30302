import numpy as np
import pytest

from otn.bath import BathSpec, discretize
from otn.errors import ConfigurationError, DegeneracyError
from otn.influence import CouplingBasis, exact_influence_batch
from otn.itebd import (
    InfluenceMPO,
    TruncationPolicy,
    boundary_vectors,
    contract,
    reconstruct,
    reconstruct_batch,
)

TIGHT = TruncationPolicy(rel_svd_threshold=1e-12, chi_max=512)


@pytest.fixture(scope="module")
def mpo_and_bath():
    basis = CouplingBasis.from_eigenvalues([1.0, -1.0])
    spec = BathSpec(kind="exponential_sum", exponentials=(((0.35 - 0.15j), (1.0 + 0.4j)),))
    db = discretize(spec, 0.2, n_cut=6)
    return contract(basis, db, TIGHT), basis, db


class TestContract:
    def test_zero_bath_trivial(self, qubit_basis):
        db = discretize(BathSpec(kind="exponential_sum", exponentials=((0.0, 1.0),)),
                        0.1, n_cut=4)
        mpo = contract(qubit_basis, db, TruncationPolicy())
        assert mpo.chi == 1
        assert np.allclose(mpo.f, 1.0)
        paths = np.array([[1, 2, 3, 4, 0, 2]])
        assert reconstruct_batch(mpo, paths)[0] == pytest.approx(1.0)

    def test_oracle_equivalence(self, mpo_and_bath, rng):
        mpo, basis, db = mpo_and_bath
        paths = rng.integers(0, 5, size=(1000, 6))
        vals = reconstruct_batch(mpo, paths)
        refs = exact_influence_batch(basis, db, paths)
        assert np.abs(vals - refs).mean() <= 1e-8

    def test_svd_count_is_n_cut(self, mpo_and_bath, qubit_basis):
        mpo, _, db = mpo_and_bath
        assert mpo.diagnostics["svd_count"] == db.n_cut
        spec = BathSpec(kind="ohmic_zero_t", coupling=0.1, omega_c=1.0, s=0.5)
        db2 = discretize(spec, 0.1, n_cut=17)
        mpo2 = contract(qubit_basis, db2, TruncationPolicy(rel_svd_threshold=1e-8))
        assert mpo2.diagnostics["svd_count"] == 17

    def test_requires_memory(self, qubit_basis, exp_bath):
        from otn.bath import DiscretizedBath

        db0 = DiscretizedBath(dt=0.1, n_cut=0, eta=np.zeros(1, complex))
        with pytest.raises(ConfigurationError):
            contract(qubit_basis, db0, TruncationPolicy())

    def test_chi_profile_monotone_during_contraction(self, qubit_basis):
        # bond dimension grows only as the gates approach small memory k
        spec = BathSpec(kind="ohmic_zero_t", coupling=0.15, omega_c=1.0, s=0.5)
        db = discretize(spec, 0.1, n_cut=24)
        mpo = contract(qubit_basis, db, TruncationPolicy(rel_svd_threshold=1e-9))
        profile = mpo.diagnostics["chi_profile"]
        assert all(a <= b for a, b in zip(profile, profile[1:]))
        assert mpo.diagnostics["max_intermediate_chi"] == max(profile)

    def test_determinism(self, qubit_basis, exp_bath):
        a = contract(qubit_basis, exp_bath, TIGHT)
        b = contract(qubit_basis, exp_bath, TIGHT)
        assert np.array_equal(a.f, b.f)
        assert np.array_equal(a.v_l, b.v_l)
        assert a.diagnostics == b.diagnostics

    def test_chi_max_warning_on_heavy_truncation(self, qubit_basis):
        spec = BathSpec(kind="exponential_sum", exponentials=(((2.0 - 0.5j), (1.0 + 0.4j)),))
        db = discretize(spec, 0.5, n_cut=5)
        mpo = contract(qubit_basis, db, TruncationPolicy(rel_svd_threshold=1e-12, chi_max=2))
        assert mpo.chi <= 2
        assert mpo.diagnostics["warnings"]
        assert mpo.diagnostics["total_discarded_weight"] > 1e-3

    def test_error_monotone_in_threshold(self, qubit_basis, rng):
        spec = BathSpec(kind="ohmic_zero_t", coupling=0.15, omega_c=1.0, s=0.5)
        db = discretize(spec, 0.2, n_cut=6)
        paths = rng.integers(0, 5, size=(300, 6))
        refs = exact_influence_batch(qubit_basis, db, paths)
        errs = []
        for thr in (1e-4, 1e-6, 1e-8, 1e-10):
            mpo = contract(qubit_basis, db, TruncationPolicy(rel_svd_threshold=thr,
                                                             chi_max=400))
            errs.append(np.abs(reconstruct_batch(mpo, paths) - refs).mean())
        assert all(a >= b for a, b in zip(errs, errs[1:]))


class TestBoundaryVectors:
    def test_invariants(self, mpo_and_bath):
        mpo, _, _ = mpo_and_bath
        assert abs(mpo.v_l @ mpo.v_r - 1.0) <= 1e-12
        assert np.abs(mpo.f[0] @ mpo.v_r - mpo.v_r).max() <= 1e-10
        assert np.abs(mpo.v_l @ mpo.f[0] - mpo.v_l).max() <= 1e-10

    def test_chi_one(self):
        f = np.full((5, 1, 1), 2.0, complex)
        f2, v_l, v_r = boundary_vectors(f)
        assert v_l[0] * v_r[0] == pytest.approx(1.0)
        assert f2[0][0, 0] == pytest.approx(1.0)

    def test_phase_gauge_makes_v_l_nonnegative(self, mpo_and_bath):
        mpo, _, _ = mpo_and_bath
        big = np.abs(mpo.v_l) > 1e-12
        assert np.all(np.real(mpo.v_l[big]) > 0)
        assert np.abs(np.imag(mpo.v_l)).max() < 1e-12

    def test_degenerate_leading_eigenvalue_raises(self):
        f = np.zeros((5, 2, 2), complex)
        f[0] = np.diag([1.0, 1.0 + 1e-12])
        f[1:] = np.eye(2) * 0.5
        with pytest.raises(DegeneracyError):
            boundary_vectors(f)


class TestReconstruct:
    def test_empty_path(self, mpo_and_bath):
        mpo, _, _ = mpo_and_bath
        assert reconstruct(mpo, []) == pytest.approx(1.0, abs=1e-12)

    def test_all_zero_path(self, mpo_and_bath):
        mpo, _, _ = mpo_and_bath
        for n in (1, 5, 40):
            assert reconstruct(mpo, [0] * n) == pytest.approx(1.0, abs=1e-10)

    def test_reduction_via_mpo(self, mpo_and_bath, rng):
        # inserting boundary zeros leaves reconstructed values unchanged
        mpo, basis, db = mpo_and_bath
        path = rng.integers(0, 5, size=5)
        base = reconstruct(mpo, path)
        padded = np.concatenate([np.zeros(3, np.int64), path, np.zeros(2, np.int64)])
        assert reconstruct(mpo, padded) == pytest.approx(base, abs=1e-9)

    def test_index_bounds(self, mpo_and_bath):
        mpo, _, _ = mpo_and_bath
        with pytest.raises(ConfigurationError):
            reconstruct(mpo, [7])
