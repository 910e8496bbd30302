"""Binary container for contracted influence objects, with JSON sidecar.

Layout (all little-endian):

    magic    8 bytes  b"OTNMPO1\\0"
    kind     u32      0 = uniform iTEBD MPO, 1 = finite process MPO, 2 = HEOM
    d        u32      system Hilbert dimension
    chi      u32      bond dimension (uniform/heom); site count (finite)
    n_cut    u32      memory steps of the generating bath (0 if n/a)
    dt       f64      time step
    sign     i8       influence-weight sign convention (-1: exponent carries
                      a minus sign, the supplement convention)
    thr      f64      truncation policy: relative SVD threshold
    chi_max  u32      truncation policy: bond cap
    rec      u8       truncation policy: record_discarded_weight flag

followed by the payload: for uniform/heom kinds the tensor f as row-major
complex doubles ((d^2+1) * chi * chi), then v_l (chi), then v_r (chi).  For
the finite kind, per site: u32 chi_l, u32 chi_r, then the (chi_l, d^2+1,
chi_r) tensor.  Diagnostics go to ``<path>.json``.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .baseline import FiniteProcessMPO
from .errors import ConfigurationError
from .heom import HeomPropagatorSet
from .itebd import InfluenceMPO, TruncationPolicy

MAGIC = b"OTNMPO1\0"
SIGN_CONVENTION = -1  # exponent sign of the influence weights
_KIND_CODES = {"uniform": 0, "finite": 1, "heom": 2}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}
_HEADER = struct.Struct("<8sIIIIdbdIB")


def _write_header(fh, kind, d, chi, n_cut, dt, policy):
    policy = policy or TruncationPolicy()
    fh.write(
        _HEADER.pack(
            MAGIC,
            _KIND_CODES[kind],
            d,
            chi,
            n_cut,
            float(dt),
            SIGN_CONVENTION,
            policy.rel_svd_threshold,
            policy.chi_max,
            1 if policy.record_discarded_weight else 0,
        )
    )


def _complex_bytes(arr):
    return np.ascontiguousarray(arr, dtype="<c16").tobytes()


def _sidecar(path, kind, diagnostics):
    payload = {"kind": kind, "diagnostics": _jsonable(diagnostics)}
    with open(str(path) + ".json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def save_mpo(obj, path, policy=None, kind=None):
    """Write a uniform-tensor object (iTEBD MPO or HEOM set) plus sidecar."""
    if kind is None:
        kind = "heom" if isinstance(obj, HeomPropagatorSet) else "uniform"
    if kind not in ("uniform", "heom"):
        raise ConfigurationError(f"save_mpo cannot write kind {kind!r}")
    n_cut = getattr(obj, "n_cut", 0)
    with open(path, "wb") as fh:
        _write_header(fh, kind, obj.d, obj.chi, n_cut, obj.dt, policy)
        fh.write(_complex_bytes(obj.f))
        fh.write(_complex_bytes(obj.v_l))
        fh.write(_complex_bytes(obj.v_r))
    _sidecar(path, kind, getattr(obj, "diagnostics", {}))


def save_finite(fmpo, path, dt=0.0, n_cut=0, policy=None):
    """Write a finite process MPO plus sidecar."""
    with open(path, "wb") as fh:
        _write_header(fh, "finite", fmpo.d, len(fmpo.tensors), n_cut, dt, policy)
        for tensor in fmpo.tensors:
            chi_l, _, chi_r = tensor.shape
            fh.write(struct.pack("<II", chi_l, chi_r))
            fh.write(_complex_bytes(tensor))
    _sidecar(path, "finite", fmpo.diagnostics)


def load(path):
    """Read any container kind back; returns the matching object."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ConfigurationError("truncated container header")
        magic, kind_code, d, chi, n_cut, dt, sign, thr, chi_max, rec = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ConfigurationError("not an OTN container (bad magic)")
        if sign != SIGN_CONVENTION:
            raise ConfigurationError(f"unsupported sign convention {sign}")
        kind = _KIND_NAMES.get(kind_code)
        if kind is None:
            raise ConfigurationError(f"unknown container kind code {kind_code}")
        diagnostics = _load_sidecar(path)
        p = d * d + 1
        if kind in ("uniform", "heom"):
            f = np.frombuffer(fh.read(16 * p * chi * chi), dtype="<c16").reshape(p, chi, chi)
            v_l = np.frombuffer(fh.read(16 * chi), dtype="<c16").copy()
            v_r = np.frombuffer(fh.read(16 * chi), dtype="<c16").copy()
            if kind == "uniform":
                return InfluenceMPO(d=d, chi=chi, f=f.copy(), v_l=v_l, v_r=v_r, dt=dt,
                                    n_cut=n_cut, diagnostics=diagnostics)
            return HeomPropagatorSet(d=d, chi=chi, dt=dt,
                                     depth=int(diagnostics.get("depth", 0)),
                                     f=f.copy(), v_l=v_l, v_r=v_r, diagnostics=diagnostics)
        tensors = []
        for _ in range(chi):  # chi stores the site count for finite kind
            chi_l, chi_r = struct.unpack("<II", fh.read(8))
            words = np.frombuffer(fh.read(16 * chi_l * p * chi_r), dtype="<c16")
            tensors.append(words.reshape(chi_l, p, chi_r).copy())
        return FiniteProcessMPO(d=d, n_steps=chi, tensors=tensors, diagnostics=diagnostics)


def _load_sidecar(path):
    try:
        with open(str(path) + ".json") as fh:
            return json.load(fh).get("diagnostics", {})
    except FileNotFoundError:
        return {}
