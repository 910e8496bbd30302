"""Unitary Trotter channel, short-time propagator Q, evolution, and spectra.

One time step of the open evolution is the symmetric split

    rho -> u(dt/2) . [bath weight on the middle index] . u(dt/2)

realized by the channel tensor U[lam, mu, nu] = u[nu, mu] u[mu, lam] and the
uniform influence tensor f^mu.  Both combine into the dense short-time
propagator

    Q[(nu, j), (lam, i)] = sum_mu U[lam, mu, nu] f^mu_{ij}

acting on joint (system, bond) states.  A state is embedded as
w[(lam, i)] = rho^lam v_l^i and read out through the future boundary vector,
rho^nu = sum_j w[(nu, j)] v_r^j.  Asymptotics follow from the non-Hermitian
eigendecomposition of Q.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, NumericalError, StateError
from .influence import CouplingBasis

SOLVER_CAP = 20000


@dataclass(frozen=True)
class SystemModel:
    """System Hamiltonian and coupling operator, rotated into the S eigenbasis.

    ``h_sys`` is stored in the eigenbasis of the coupling operator (sorted by
    descending eigenvalue, ties keeping original order), where S is diagonal.
    """

    d: int
    h_sys: np.ndarray = field(repr=False)
    basis: CouplingBasis = field(repr=False)

    @classmethod
    def from_operators(cls, h_sys, s):
        h_sys = np.asarray(h_sys, complex)
        s = np.asarray(s, complex)
        d = h_sys.shape[0]
        if h_sys.shape != (d, d) or s.shape != (d, d):
            raise ConfigurationError("H_sys and S must be square matrices of equal dimension")
        if not np.allclose(h_sys, h_sys.conj().T, atol=1e-12 * max(1.0, np.abs(h_sys).max())):
            raise ConfigurationError("H_sys must be Hermitian")
        if not np.allclose(s, s.conj().T, atol=1e-12 * max(1.0, np.abs(s).max())):
            raise ConfigurationError("S must be Hermitian")
        off = np.abs(s - np.diag(np.diag(s))).max()
        if off < 1e-14 * max(1.0, np.abs(s).max()):
            diag_eigs = np.real(np.diag(s))
            order = np.argsort(-diag_eigs, kind="stable")
            eigs_sorted = diag_eigs[order]
            vecs = np.eye(d)[:, order].astype(complex)
        else:
            evals, evecs = np.linalg.eigh(s)
            order = np.argsort(-evals, kind="stable")
            eigs_sorted = evals[order]
            vecs = evecs[:, order]
        h_rot = vecs.conj().T @ h_sys @ vecs
        return cls(d=d, h_sys=h_rot, basis=CouplingBasis.from_eigenvalues(eigs_sorted))


@dataclass(frozen=True)
class UnitaryChannel:
    """Superoperator tensor U[lam, mu, nu] for one symmetric Trotter step."""

    dt: float
    tensor: np.ndarray = field(repr=False)


def unitary_channel(model, dt):
    """Channel of two half-step unitaries exp(-i H dt/2) around the bath gate."""
    if dt <= 0:
        raise ConfigurationError("dt must be > 0")
    w_half = scipy.linalg.expm(-1j * model.h_sys * dt / 2.0)
    u = np.kron(w_half, w_half.conj())  # u[a, b]: row-major pair indices
    tensor = np.einsum("nm,ml->lmn", u, u)
    return UnitaryChannel(dt=dt, tensor=tensor)


@dataclass(frozen=True)
class Propagator:
    """Dense short-time propagator on the joint (system, bond) space.

    ``matrix`` is stored output-row: matrix[(nu, j), (lam, i)], so one step is
    w_out = matrix @ w_in on embedded column states.
    """

    d: int
    chi: int
    dt: float
    matrix: np.ndarray = field(repr=False)
    v_l: np.ndarray = field(repr=False)
    v_r: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return self.d * self.d * self.chi

    def embed(self, rho):
        """w[(lam, i)] = rho^lam v_l^i."""
        rho = np.asarray(rho, complex)
        return (rho.reshape(self.d * self.d)[:, None] * self.v_l[None, :]).reshape(self.dim)

    def extract(self, w):
        """rho^nu = sum_j w[(nu, j)] v_r^j."""
        return (w.reshape(self.d * self.d, self.chi) @ self.v_r).reshape(self.d, self.d)

    def propagate(self, w, n_steps=1):
        for _ in range(n_steps):
            w = self.matrix @ w
        return w


def build_Q(mpo, channel):
    """Assemble Q[(nu,j),(lam,i)] = sum_mu U[lam,mu,nu] f^mu_{ij}.

    The extended slot 0 of f is dropped: it only encodes boundary conditions
    and never carries physical weight during propagation.
    """
    f = np.asarray(mpo.f)
    d = mpo.d
    if channel.tensor.shape[0] != d * d:
        raise ConfigurationError("channel and influence MPO have mismatched dimensions")
    chi = f.shape[1]
    if d * d * chi > SOLVER_CAP:
        raise ConfigurationError(f"propagator dimension {d * d * chi} exceeds cap {SOLVER_CAP}")
    q = np.einsum("lmn,mij->njli", channel.tensor, f[1:], optimize=True)
    return Propagator(
        d=d,
        chi=chi,
        dt=channel.dt,
        matrix=np.ascontiguousarray(q.reshape(d * d * chi, d * d * chi)),
        v_l=np.asarray(mpo.v_l, complex),
        v_r=np.asarray(mpo.v_r, complex),
    )


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n_steps + 1, d, d)

    def expect(self, op):
        """tr(op rho(t)) along the trajectory."""
        return np.einsum("tij,ji->t", self.states, np.asarray(op, complex))


def _check_initial_state(rho0, d):
    rho0 = np.asarray(rho0, complex)
    if rho0.shape != (d, d):
        raise StateError(f"initial state must be {d}x{d}")
    if np.abs(rho0 - rho0.conj().T).max() > 1e-10:
        raise StateError("initial state must be Hermitian")
    if abs(np.trace(rho0) - 1.0) > 1e-8:
        raise StateError("initial state must have unit trace")
    if np.linalg.eigvalsh(0.5 * (rho0 + rho0.conj().T)).min() < -1e-10:
        raise StateError("initial state must be positive semidefinite")
    return rho0


def evolve(model, mpo, rho0, n_steps, segments=None):
    """Propagate a density matrix for n_steps time steps of size mpo.dt.

    Parameters
    ----------
    model : SystemModel
        Used for the unitary channel; ignored when ``segments`` is given.
    mpo : InfluenceMPO or compatible (f, v_l, v_r, d, dt)
    rho0 : (d, d) ndarray
        Hermitian, unit-trace, positive-semidefinite initial state
        (in the S eigenbasis of the model).
    n_steps : int
    segments : list of (h_sys, n_k), optional
        Piecewise-constant Hamiltonians; sum of n_k must equal n_steps.

    Returns
    -------
    Trajectory
        States at times k*dt for k = 0..n_steps.
    """
    rho0 = _check_initial_state(rho0, mpo.d)
    if segments is None:
        plan = [(build_Q(mpo, unitary_channel(model, mpo.dt)), n_steps)]
    else:
        if sum(n for _, n in segments) != n_steps:
            raise ConfigurationError("segment lengths must sum to n_steps")
        plan = []
        for h_k, n_k in segments:
            seg_model = SystemModel(d=model.d, h_sys=np.asarray(h_k, complex), basis=model.basis)
            plan.append((build_Q(mpo, unitary_channel(seg_model, mpo.dt)), n_k))
    prop = plan[0][0]
    w = prop.embed(rho0)
    states = np.empty((n_steps + 1, mpo.d, mpo.d), complex)
    states[0] = rho0
    step = 0
    for prop_k, n_k in plan:
        for _ in range(n_k):
            w = prop_k.matrix @ w
            step += 1
            rho = prop_k.extract(w)
            if not np.all(np.isfinite(rho)):
                raise NumericalError(f"non-finite state at step {step}")
            states[step] = rho
    return Trajectory(times=np.arange(n_steps + 1) * mpo.dt, states=states)


@dataclass
class SpectralDecomposition:
    """Eigendecomposition of Q with per-mode system components.

    ``eigenvalues`` are sorted by descending modulus; ``rates`` are
    log(q)/dt on the principal branch.  ``left`` and ``right`` hold the
    paired eigenvectors column-wise with left[:, k]^T right[:, k] = 1.
    ``rho_modes[k]`` is the system component of mode k for the given initial
    state, so that rho(t) = sum_k q_k^(t/dt) rho_modes[k].

    ``steady_indices`` lists every mode with |q - 1| within the steady
    window: models with decoherence-free subspaces have several, and the
    asymptotic state is their sum.  ``steady_index`` is the representative
    with the largest |tr rho_k|.
    """

    dt: float
    eigenvalues: np.ndarray
    rates: np.ndarray
    left: np.ndarray = field(repr=False)
    right: np.ndarray = field(repr=False)
    rho_modes: np.ndarray = field(repr=False)
    traces: np.ndarray
    steady_index: int
    steady_indices: list
    flags: dict

    def mode_observables(self, op):
        """Per-mode observable components tr(op rho_k)."""
        return np.einsum("kij,ji->k", self.rho_modes, np.asarray(op, complex))

    @property
    def steady_state(self):
        """Asymptotic state: sum of all near-unit-eigenvalue mode components."""
        return self.rho_modes[self.steady_indices].sum(axis=0)


def spectrum(prop, rho0, rate_positive_tol=1e-8, steady_tol=1e-8):
    """Full non-Hermitian spectral decomposition of the short-time propagator.

    Left eigenvectors are taken as the rows of the inverse right-eigenvector
    matrix, which pairs them with the right eigenvectors exactly
    (left[:, k]^T right[:, k] = 1 by construction) and stays well defined
    under eigenvalue clustering.  A propagator whose eigenvector matrix is
    numerically singular is flagged defective and only the leading eigenpair
    is reported.
    """
    rho0 = _check_initial_state(rho0, prop.d)
    if prop.dim > SOLVER_CAP:
        raise ConfigurationError(f"propagator dimension {prop.dim} exceeds cap {SOLVER_CAP}")
    q, right = np.linalg.eig(prop.matrix)
    order = np.argsort(-np.abs(q), kind="stable")
    q = q[order]
    right = right[:, order]
    flags = {"defective": False, "aliased_modes": [], "positive_rate_modes": []}
    try:
        cond = np.linalg.cond(right)
        if not np.isfinite(cond) or cond > 1e13:
            raise np.linalg.LinAlgError(f"eigenvector condition number {cond:.2e}")
        left = np.linalg.inv(right).T
    except np.linalg.LinAlgError:
        flags["defective"] = True
        q, right = q[:1], right[:, :1]
        # the trace functional is an exact left fixed point; use it to pair
        # the leading (steady) mode when the full basis is defective
        x = np.zeros(prop.dim, complex)
        trace_vec = np.zeros(prop.d * prop.d)
        trace_vec[:: prop.d + 1] = 1.0
        x = np.kron(trace_vec, prop.v_r).astype(complex)
        overlap = x @ right[:, 0]
        left = (x / overlap).reshape(-1, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        rates = np.log(q) / prop.dt
    nyquist = np.pi / prop.dt
    for k, g in enumerate(rates):
        if np.isfinite(g.imag) and abs(abs(g.imag) - nyquist) < 0.01 * nyquist:
            flags["aliased_modes"].append(k)
        if np.isfinite(g.real) and g.real > rate_positive_tol:
            flags["positive_rate_modes"].append(k)
    w0 = prop.embed(rho0)
    coeffs = left.T @ w0
    comp = right.reshape(prop.d * prop.d, prop.chi, -1)
    rho_modes = np.einsum("njk,j,k->kn", comp, prop.v_r, coeffs, optimize=True)
    rho_modes = rho_modes.reshape(-1, prop.d, prop.d)
    traces = np.einsum("kii->k", rho_modes)
    candidates = np.nonzero(np.abs(q - 1.0) <= steady_tol)[0]
    if candidates.size == 0:
        steady_list = [0]
        flags["no_unit_eigenvalue"] = True
    else:
        steady_list = [int(c) for c in candidates]
    steady = steady_list[int(np.argmax(np.abs(traces[steady_list])))]
    return SpectralDecomposition(
        dt=prop.dt,
        eigenvalues=q,
        rates=rates,
        left=left,
        right=right,
        rho_modes=rho_modes,
        traces=traces,
        steady_index=steady,
        steady_indices=steady_list,
        flags=flags,
    )
