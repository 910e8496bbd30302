import numpy as np
import pytest

from otn.bath import BathSpec, discretize
from otn.errors import SizeError
from otn.heom import HierarchySpace, converged_heom, heom_generator, heom_influence
from otn.influence import exact_influence_batch
from otn.models import SIGMA_Z, spin_boson
from otn.propagator import build_Q, evolve, unitary_channel

EXPONENTIALS = (((0.15 + 0.05j), (1.0 + 0.3j)),)
RHO_UP = np.array([[1.0, 0.0], [0.0, 0.0]], complex)


class TestHierarchySpace:
    def test_single_exponential_depth_one(self):
        space = HierarchySpace.build(1, 1)
        assert space.dim == 3
        assert set(space.states) == {((0,), (0,)), ((1,), (0,)), ((0,), (1,))}

    def test_dimension_formula(self):
        # |n| + |m| <= D over 2M nonnegative integers: C(D + 2M, 2M)
        from math import comb

        for m, d in [(1, 4), (2, 3), (1, 8)]:
            space = HierarchySpace.build(m, d)
            assert space.dim == comb(d + 2 * m, 2 * m)

    def test_size_guard(self):
        with pytest.raises(SizeError):
            HierarchySpace.build(4, 20)


class TestGenerator:
    def test_damping_diagonal(self):
        model = spin_boson(1.0)
        g, w = EXPONENTIALS[0]
        space = HierarchySpace.build(1, 3)
        gen = heom_generator(model, EXPONENTIALS, 3, mu=1, space=space).toarray()
        for (n, m), i in space.index.items():
            assert gen[i, i] == pytest.approx(-(w * n[0] + np.conj(w) * m[0]))

    def test_zero_amplitude_diagonal_pair_tier0(self):
        # G = 0 and a diagonal pair: row of the root state is identically zero
        model = spin_boson(1.0)
        space = HierarchySpace.build(1, 2)
        gen = heom_generator(model, ((0.0, 1.0 + 0.5j),), 2, mu=1, space=space).toarray()
        root = space.root()
        assert np.all(gen[root, :] == 0)
        assert np.all(gen[:, root] == 0)

    def test_zero_slot_is_pure_damping(self):
        model = spin_boson(1.0)
        space = HierarchySpace.build(1, 2)
        gen = heom_generator(model, EXPONENTIALS, 2, mu=0, space=space).toarray()
        assert np.count_nonzero(gen - np.diag(np.diag(gen))) == 0


class TestHeomInfluence:
    def test_zero_amplitude_reduces_to_unitary(self):
        model = spin_boson(1.0, half_convention=True)
        hset = heom_influence(model, ((0.0, 1.0),), depth=2, dt=0.05)
        traj = evolve(model, hset, RHO_UP, 100)
        from scipy.linalg import expm

        u_half = expm(-1j * model.h_sys * 0.05 / 2)
        rho = RHO_UP.copy()
        for _ in range(100):
            rho = u_half @ u_half @ rho @ u_half.conj().T @ u_half.conj().T
        assert np.abs(traj.states[100] - rho).max() < 1e-12

    def test_path_values_converge_to_exact_influence(self, qubit_basis, rng):
        db = discretize(BathSpec(kind="exponential_sum", exponentials=EXPONENTIALS),
                        0.05, n_cut=60)
        model = spin_boson(1.0)
        paths = rng.integers(0, 5, size=(60, 8))
        refs = exact_influence_batch(qubit_basis, db, paths)
        errs = []
        for depth in (2, 4, 6, 8):
            hset = heom_influence(model, EXPONENTIALS, depth, 0.05)
            vals = np.empty(len(paths), complex)
            for i, p in enumerate(paths):
                v = hset.v_l.copy()
                for mu in p:
                    v = v @ hset.f[mu]
                vals[i] = v @ hset.v_r
            errs.append(np.abs(vals - refs).mean())
        assert all(a >= b for a, b in zip(errs, errs[1:]))
        assert errs[-1] < 1e-12

    def test_trace_preservation_of_embedded_dynamics(self):
        model = spin_boson(1.0, half_convention=True)
        hset = heom_influence(model, EXPONENTIALS, depth=8, dt=0.05)
        traj = evolve(model, hset, RHO_UP, 200)
        traces = np.einsum("tii->t", traj.states)
        assert np.abs(traces - 1.0).max() <= 1e-8

    def test_usable_by_build_q(self):
        model = spin_boson(1.0, half_convention=True)
        hset = heom_influence(model, EXPONENTIALS, depth=4, dt=0.05)
        prop = build_Q(hset, unitary_channel(model, 0.05))
        evals = np.linalg.eigvals(prop.matrix)
        assert np.abs(evals - 1.0).min() < 1e-10

    def test_depth_convergence_helper(self):
        model = spin_boson(1.0, half_convention=True)
        hset, vals = converged_heom(model, EXPONENTIALS, 0.05, 100, RHO_UP, SIGMA_Z,
                                    tol=1e-6)
        assert hset.depth >= 4
        assert len(vals) == 101

    def test_depth_plateau_at_weak_coupling(self):
        # doubling the depth changes the trajectory below 1e-6 once converged
        model = spin_boson(1.0, half_convention=True)
        weak = (((0.02 + 0.005j), (1.0 + 0.3j)),)
        t4 = evolve(model, heom_influence(model, weak, 4, 0.05), RHO_UP, 200)
        t8 = evolve(model, heom_influence(model, weak, 8, 0.05), RHO_UP, 200)
        sz4 = np.real(t4.expect(SIGMA_Z))
        sz8 = np.real(t8.expect(SIGMA_Z))
        assert np.abs(sz4 - sz8).max() <= 1e-6
