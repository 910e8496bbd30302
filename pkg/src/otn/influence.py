"""Influence weights, elementary gates, and the brute-force path oracle.

All objects live on the extended index set {0, 1, ..., d^2}: slot 0 is a
bookkeeping dimension with unit weights, used downstream to encode
finite-time boundary conditions inside an infinite network.  Slots 1..d^2
enumerate ordered pairs (l, r) of coupling-operator eigenstates in row-major
order against the descending eigenvalue list.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigurationError, SizeError

EXACT_PATH_CAP = 16


@dataclass(frozen=True)
class CouplingBasis:
    """Eigenbasis bookkeeping for a coupling operator S.

    ``s_eigs`` holds the eigenvalues sorted descending (ties keep original
    matrix order).  ``s_left``/``s_right`` are the extended per-slot
    eigenvalue lookups of length d^2 + 1 with zeros in slot 0, so that the
    influence weight formula needs no special casing for the extended index.
    """

    d: int
    s_eigs: np.ndarray = field(repr=False)
    s_left: np.ndarray = field(repr=False)
    s_right: np.ndarray = field(repr=False)

    @classmethod
    def from_eigenvalues(cls, s_eigs):
        s_eigs = np.asarray(s_eigs, float)
        if s_eigs.ndim != 1 or s_eigs.size < 1:
            raise ConfigurationError("s_eigs must be a non-empty 1-d array")
        if np.any(np.diff(s_eigs) > 1e-12):
            raise ConfigurationError("s_eigs must be sorted descending")
        d = s_eigs.size
        left = np.zeros(d * d + 1)
        right = np.zeros(d * d + 1)
        for e in range(1, d * d + 1):
            l, r = divmod(e - 1, d)
            left[e] = s_eigs[l]
            right[e] = s_eigs[r]
        return cls(d=d, s_eigs=s_eigs, s_left=left, s_right=right)

    @property
    def n_slots(self):
        """Extended physical dimension d^2 + 1."""
        return self.d * self.d + 1

    def pair(self, e):
        """Map extended slot e in {1..d^2} to the 0-based eigenstate pair (l, r)."""
        if not 1 <= e <= self.d * self.d:
            raise ConfigurationError(f"slot {e} has no eigenstate pair")
        return divmod(e - 1, self.d)

    def slot(self, l, r):
        """Map a 0-based eigenstate pair to its extended slot in {1..d^2}."""
        if not (0 <= l < self.d and 0 <= r < self.d):
            raise ConfigurationError("pair indices out of range")
        return 1 + l * self.d + r

    def conjugate_slot(self, e):
        """Slot of the swapped pair (r, l); slot 0 maps to itself."""
        if e == 0:
            return 0
        l, r = self.pair(e)
        return self.slot(r, l)

    def trace_slots(self):
        """Slots of the diagonal pairs (l, l), whose weights sum to the trace."""
        return np.array([self.slot(l, l) for l in range(self.d)])


def weight(basis, bath, k, mu, nu):
    """Influence weight I_k(mu, nu) for one memory distance k.

    Returns exp(-(S_l(mu) - S_r(mu)) * (eta_k S_l(nu) - eta_k* S_r(nu)));
    equal to 1 whenever mu or nu is the extended slot 0 or a diagonal pair.
    """
    if not 0 <= k <= bath.n_cut:
        raise ConfigurationError(f"memory step k={k} outside 0..{bath.n_cut}")
    eta = bath.eta[k]
    s_mu = basis.s_left[mu] - basis.s_right[mu]
    return complex(np.exp(-s_mu * (eta * basis.s_left[nu] - np.conj(eta) * basis.s_right[nu])))


def weight_table(basis, bath, k):
    """All weights I_k(mu, nu) as an (d^2+1, d^2+1) table."""
    if not 0 <= k <= bath.n_cut:
        raise ConfigurationError(f"memory step k={k} outside 0..{bath.n_cut}")
    eta = bath.eta[k]
    s_mu = basis.s_left - basis.s_right
    return np.exp(-np.outer(s_mu, eta * basis.s_left - np.conj(eta) * basis.s_right))


def weight_tables(basis, bath):
    """Stack of all weight tables, shape (n_cut+1, d^2+1, d^2+1)."""
    return np.stack([weight_table(basis, bath, k) for k in range(bath.n_cut + 1)])


@dataclass(frozen=True)
class InfluenceGate:
    """Elementary four-index tensor of the influence network.

    ``tensor[mu, nu, j, i]`` with mu the down leg, nu up, j left, i right;
    each axis has dimension d^2 + 1.  For k > 0 the gate is
    delta_ij delta_munu I_k(mu, j); for k = 0 an additional delta_jmu makes
    it fully diagonal.
    """

    k: int
    tensor: np.ndarray = field(repr=False)


def gate(basis, bath, k):
    """Build the dense elementary gate b(k)."""
    table = weight_table(basis, bath, k)
    n = basis.n_slots
    b = np.zeros((n, n, n, n), complex)
    if k > 0:
        for mu in range(n):
            for j in range(n):
                b[mu, mu, j, j] = table[mu, j]
    else:
        for mu in range(n):
            b[mu, mu, mu, mu] = table[mu, mu]
    return InfluenceGate(k=k, tensor=b)


def exact_influence(basis, bath, path):
    """Brute-force influence functional for one index path.

    Evaluates prod_{i=1..N} prod_{j=1..i} I_{i-j}(mu_i, mu_j) directly;
    linear cost per path, exponential only if enumerated over all paths.
    """
    path = np.asarray(path, np.int64).reshape(1, -1)
    if path.shape[1] > EXACT_PATH_CAP:
        raise SizeError(
            f"path length {path.shape[1]} exceeds the exact-influence cap {EXACT_PATH_CAP}"
        )
    _check_slots(basis, path)
    return complex(_kernels.influence_paths(weight_tables(basis, bath), path)[0])


def exact_influence_batch(basis, bath, paths, cap=None):
    """Vector of brute-force influence values for many paths at once.

    The per-path cap can be lifted explicitly for benchmark workloads, where
    path evaluation stays linear in the path length.
    """
    paths = np.asarray(paths, np.int64)
    if paths.ndim != 2:
        raise ConfigurationError("paths must be a 2-d integer array")
    limit = EXACT_PATH_CAP if cap is None else cap
    if paths.shape[1] > limit:
        raise SizeError(f"path length {paths.shape[1]} exceeds cap {limit}")
    _check_slots(basis, paths)
    return _kernels.influence_paths(weight_tables(basis, bath), paths)


def _check_slots(basis, paths):
    if paths.size and (paths.min() < 0 or paths.max() >= basis.n_slots):
        raise ConfigurationError("path indices must lie in 0..d^2")


def export_gate_csv(g, path):
    """Debug dump of a gate's nonzero entries as flat CSV."""
    nz = np.argwhere(g.tensor != 0)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mu", "nu", "j", "i", "re", "im"])
        for mu, nu, j, i in nz:
            v = g.tensor[mu, nu, j, i]
            writer.writerow([mu, nu, j, i, format(v.real, ".17g"), format(v.imag, ".17g")])
