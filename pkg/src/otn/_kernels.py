"""Hot path-evaluation kernels with a numba fast path and a numpy fallback.

The backend is chosen once at import time: numba when importable and not
disabled through the environment variable ``OTN_NO_NUMBA=1``.  Both backends
implement identical semantics; the benchmark pipeline times them against
each other.
"""

from __future__ import annotations

import os

import numpy as np

_FORCE_NUMPY = os.environ.get("OTN_NO_NUMBA", "") == "1"

try:  # pragma: no cover - exercised indirectly through backend_name()
    if _FORCE_NUMPY:
        raise ImportError
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if len(args) == 1 and callable(args[0]):
            return args[0]
        return wrap


def backend_name():
    return "numba" if _HAVE_NUMBA else "numpy"


@njit(cache=True)
def _influence_paths_jit(tables, paths):  # pragma: no cover - jit body
    n_paths, n_steps = paths.shape
    n_cut = tables.shape[0] - 1
    out = np.empty(n_paths, np.complex128)
    for p in range(n_paths):
        acc = 1.0 + 0.0j
        for i in range(n_steps):
            mi = paths[p, i]
            kmax = i if i < n_cut else n_cut
            for k in range(kmax + 1):
                acc *= tables[k, mi, paths[p, i - k]]
        out[p] = acc
    return out


def _influence_paths_np(tables, paths):
    n_paths, n_steps = paths.shape
    n_cut = tables.shape[0] - 1
    out = np.ones(n_paths, np.complex128)
    for i in range(n_steps):
        mi = paths[:, i]
        for k in range(min(i, n_cut) + 1):
            out *= tables[k][mi, paths[:, i - k]]
    return out


def influence_paths(tables, paths):
    """Brute-force influence functional for a batch of index paths.

    Parameters
    ----------
    tables : (n_cut+1, P, P) complex ndarray
        Weight tables I_k(mu, nu) including the extended zero slot.
    paths : (n_paths, n_steps) integer ndarray

    Returns
    -------
    (n_paths,) complex ndarray
    """
    tables = np.ascontiguousarray(tables, np.complex128)
    paths = np.ascontiguousarray(paths, np.int64)
    if _HAVE_NUMBA:
        return _influence_paths_jit(tables, paths)
    return _influence_paths_np(tables, paths)


@njit(cache=True)
def _reconstruct_paths_jit(f, v_l, v_r, paths):  # pragma: no cover - jit body
    n_paths, n_steps = paths.shape
    chi = f.shape[1]
    out = np.empty(n_paths, np.complex128)
    for p in range(n_paths):
        v = v_l.copy()
        for t in range(n_steps):
            v = v @ f[paths[p, t]]
        acc = 0.0 + 0.0j
        for c in range(chi):
            acc += v[c] * v_r[c]
        out[p] = acc
    return out


def _reconstruct_paths_np(f, v_l, v_r, paths):
    n_paths, n_steps = paths.shape
    v = np.broadcast_to(v_l, (n_paths, len(v_l))).copy()
    for t in range(n_steps):
        v = np.einsum("nc,ncd->nd", v, f[paths[:, t]])
    return v @ v_r


def reconstruct_paths(f, v_l, v_r, paths):
    """Evaluate v_l^T f^(mu_1) ... f^(mu_N) v_r for a batch of paths."""
    f = np.ascontiguousarray(f, np.complex128)
    v_l = np.ascontiguousarray(v_l, np.complex128)
    v_r = np.ascontiguousarray(v_r, np.complex128)
    paths = np.ascontiguousarray(paths, np.int64)
    if _HAVE_NUMBA:
        return _reconstruct_paths_jit(f, v_l, v_r, paths)
    return _reconstruct_paths_np(f, v_l, v_r, paths)
