"""Infinite-network contraction of the influence functional to a uniform MPO.

The influence network restricted to memory distances k <= n_cut forms an
infinite band.  Rotated to the anti-diagonal frame it becomes a brickwork
circuit of two-site gates: the gate at memory level k swaps its two inputs
and multiplies the weight I_k(later, earlier), with gates at level k acting
on bonds of parity k mod 2.  Descending the levels from n_cut to 1 is plain
infinite TEBD on a two-site unit cell; the diagonal level-0 gate is absorbed
without a factorization.  The result is a single uniform tensor f and
boundary vectors obtained from the leading eigenpair of f^0.

Gate orientation note: which of the two inputs feeds the first argument of
I_k is fixed by validation against the brute-force oracle (the pictorial
network definition leaves it ambiguous); the choice implemented here is the
one that reproduces exact_influence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import ConfigurationError, ContractionError, DegeneracyError
from .influence import weight_table

_LAMBDA_FLOOR = 1e-300


@dataclass(frozen=True)
class TruncationPolicy:
    """SVD truncation contract: keep sigma_i / sigma_1 >= rel_svd_threshold,
    at most chi_max values; ties at the threshold are kept."""

    rel_svd_threshold: float = 1e-10
    chi_max: int = 256
    record_discarded_weight: bool = True

    def __post_init__(self):
        if not 0 < self.rel_svd_threshold < 1:
            raise ConfigurationError("rel_svd_threshold must lie in (0, 1)")
        if self.chi_max < 1:
            raise ConfigurationError("chi_max must be >= 1")


@dataclass
class InfluenceMPO:
    """Uniform influence-functional MPO: f (P x chi x chi) with P = d^2 + 1,
    boundary vectors v_l, v_r, and contraction diagnostics."""

    d: int
    chi: int
    f: np.ndarray = field(repr=False)
    v_l: np.ndarray = field(repr=False)
    v_r: np.ndarray = field(repr=False)
    dt: float = 0.0
    n_cut: int = 0
    diagnostics: dict = field(default_factory=dict)


def _svd(matrix):
    try:
        return scipy.linalg.svd(matrix, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(matrix, full_matrices=False, lapack_driver="gesvd")


def _truncate(s, policy):
    if s[0] <= _LAMBDA_FLOOR:
        raise ContractionError("singular-value underflow: all weights below threshold")
    keep = int(np.count_nonzero(s >= policy.rel_svd_threshold * s[0]))
    return max(1, min(keep, policy.chi_max))


def contract(basis, bath, policy=TruncationPolicy()):
    """Contract the infinite influence network into an InfluenceMPO.

    Parameters
    ----------
    basis : CouplingBasis
    bath : DiscretizedBath
        Memory coefficients; requires n_cut >= 1.
    policy : TruncationPolicy

    Returns
    -------
    InfluenceMPO
        With ``diagnostics['svd_count'] == bath.n_cut`` exactly.
    """
    if bath.n_cut < 1:
        raise ConfigurationError("contract requires a bath with n_cut >= 1")
    p = basis.n_slots
    # B-form unit cell (Hastings update, no lambda inversions):
    # B[x] = Gamma_x lambda_right(x); lam[0] sits on the (A,B) bond,
    # lam[1] on the (B,A) bond between unit cells.
    b_tensors = [np.ones((1, p, 1), complex), np.ones((1, p, 1), complex)]
    lam = [np.ones(1), np.ones(1)]
    svd_count = 0
    total_discarded = 0.0
    chi_profile = []
    warnings = []
    for k in range(bath.n_cut, 0, -1):
        gate = weight_table(basis, bath, k).T  # gate[a, b] = I_k(b, a)
        a = 0 if k % 2 == 0 else 1
        b = 1 - a
        left, right = b_tensors[a], b_tensors[b]
        outer = lam[b]
        phi = np.einsum("ayb,bxg->axyg", left, right, optimize=True)
        phi *= gate[None, :, :, None]
        chi_l, chi_r = phi.shape[0], phi.shape[3]
        theta = (outer[:, None] * phi.reshape(chi_l, p * p * chi_r)).reshape(chi_l * p, p * chi_r)
        u, s, vh = _svd(theta)
        svd_count += 1
        chi = _truncate(s, policy)
        if policy.record_discarded_weight:
            norm2 = float(np.sum(s**2))
            discarded = float(np.sum(s[chi:] ** 2) / norm2) if norm2 > 0 else 0.0
            total_discarded += discarded
            if chi == policy.chi_max and len(s) > chi and discarded > 1e-3:
                warnings.append(
                    f"chi_max={policy.chi_max} reached at k={k} with discarded weight "
                    f"{discarded:.3e}"
                )
        scale = s[0]
        new_right = vh[:chi].reshape(chi, p, chi_r)
        new_left = np.tensordot(
            phi.reshape(chi_l, p, p * chi_r), vh[:chi].conj(), axes=([2], [1])
        ) / scale
        b_tensors[a], b_tensors[b], lam[a] = new_left, new_right, s[:chi] / scale
        chi_profile.append(int(chi))
    # absorb the diagonal level-0 gate and fold the unit cell
    w0_diag = np.diag(weight_table(basis, bath, 0)).copy()
    f = np.einsum("asb,bsc,s->sac", b_tensors[0], b_tensors[1], w0_diag, optimize=True)
    f, v_l, v_r = _normalize(f)
    mpo = InfluenceMPO(
        d=basis.d,
        chi=f.shape[1],
        f=f,
        v_l=v_l,
        v_r=v_r,
        dt=bath.dt,
        n_cut=bath.n_cut,
        diagnostics={
            "svd_count": svd_count,
            "max_intermediate_chi": int(max(chi_profile)),
            "chi_profile": chi_profile,
            "total_discarded_weight": total_discarded,
            "warnings": warnings,
        },
    )
    return mpo


def boundary_vectors(f):
    """Leading left/right eigenpair of f^0, biorthonormalized.

    Returns the rescaled tensor (leading eigenvalue of f^0 set to exactly 1)
    together with (v_l, v_r) satisfying v_l @ v_r = 1.  Raises
    DegeneracyError when the two largest eigenvalue moduli of f^0 are closer
    than a relative gap of 1e-8.
    """
    f, v_l, v_r = _normalize(np.asarray(f))
    return f, v_l, v_r


def _leading_eig(matrix):
    evals, vecs = np.linalg.eig(matrix)
    order = np.argsort(-np.abs(evals), kind="stable")
    lead, vec = evals[order[0]], vecs[:, order[0]]
    if len(order) > 1:
        m1, m2 = np.abs(evals[order[0]]), np.abs(evals[order[1]])
        if m1 > 0 and (m1 - m2) / m1 < 1e-8:
            raise DegeneracyError(
                f"leading eigenvalue of f^0 is degenerate: moduli {m1:.12e} and {m2:.12e}"
            )
    return lead, vec


def _normalize(f):
    q1, v_r = _leading_eig(f[0])
    _, v_l = _leading_eig(f[0].T)
    f = f / q1
    overlap = v_l @ v_r
    if abs(overlap) < 1e-14:
        raise DegeneracyError("left/right boundary vectors are orthogonal")
    v_l = v_l / np.linalg.norm(v_l)
    v_r = v_r / ((v_l @ v_r))
    # phase gauge: rotate bond phases so v_l is real-nonnegative where possible
    phases = np.where(np.abs(v_l) > 1e-14, np.exp(-1j * np.angle(v_l)), 1.0)
    f = f * phases[None, None, :] / phases[None, :, None]
    v_l = v_l * phases
    v_r = v_r / phases
    return f, v_l.real.astype(complex) if np.allclose(v_l.imag, 0) else v_l, v_r


def reconstruct(mpo, path):
    """Influence value v_l^T f^(mu_1) ... f^(mu_N) v_r for one path."""
    path = np.asarray(path, np.int64).reshape(1, -1)
    _check_path(mpo, path)
    if path.size == 0:
        return complex(mpo.v_l @ mpo.v_r)
    return complex(_kernels.reconstruct_paths(mpo.f, mpo.v_l, mpo.v_r, path)[0])


def reconstruct_batch(mpo, paths):
    """Batched reconstruct over a (n_paths, n_steps) index array."""
    paths = np.asarray(paths, np.int64)
    _check_path(mpo, paths)
    return _kernels.reconstruct_paths(mpo.f, mpo.v_l, mpo.v_r, paths)


def _check_path(mpo, paths):
    if paths.size and (paths.min() < 0 or paths.max() >= mpo.f.shape[0]):
        raise ConfigurationError("path indices must lie in 0..d^2")
