"""Concrete physical models and analysis routines.

Spin-boson and two-spin-boson system models, the Wootters concurrence,
algebraic extrapolation fits for the regularization time, and the
steady-state parameter sweep that combines contraction, propagator assembly
and spectral analysis per grid point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .bath import BathSpec, OHMIC_THERMAL, OHMIC_ZERO_T, discretize
from .errors import ConfigurationError, FitError, NumericalError, StateError
from .itebd import TruncationPolicy, contract
from .propagator import SystemModel, build_Q, spectrum, unitary_channel

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], complex)
IDENTITY_2 = np.eye(2, dtype=complex)


def spin_boson(omega, half_convention=False):
    """Spin-boson model: H = omega * sigma_x (or omega/2 with the flag), S = sigma_z."""
    scale = 0.5 * omega if half_convention else omega
    return SystemModel.from_operators(scale * SIGMA_X, SIGMA_Z)


def two_spin_boson(omega):
    """Two noninteracting spins coupled to one bath:
    H = (omega/2)(sigma_x^A + sigma_x^B), S = (sigma_z^A + sigma_z^B)/2."""
    h = 0.5 * omega * (np.kron(SIGMA_X, IDENTITY_2) + np.kron(IDENTITY_2, SIGMA_X))
    s = 0.5 * (np.kron(SIGMA_Z, IDENTITY_2) + np.kron(IDENTITY_2, SIGMA_Z))
    return SystemModel.from_operators(h, s)


def concurrence(rho, psd_tol=1e-6):
    """Wootters concurrence of a two-qubit density matrix.

    C = max(0, l1 - l2 - l3 - l4) with l_i the descending square roots of the
    eigenvalues of rho (sy x sy) rho* (sy x sy).
    """
    rho = np.asarray(rho, complex)
    if rho.shape != (4, 4):
        raise StateError("concurrence requires a 4x4 density matrix")
    if np.abs(rho - rho.conj().T).max() > 1e-8:
        raise StateError("density matrix must be Hermitian")
    if abs(np.trace(rho) - 1.0) > 1e-6:
        raise StateError("density matrix must have unit trace")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -psd_tol:
        raise StateError(f"density matrix is not PSD within {psd_tol}")
    yy = np.kron(SIGMA_Y, SIGMA_Y)
    rho_tilde = rho @ yy @ rho.conj() @ yy
    evals = np.sort(np.abs(np.real(np.linalg.eigvals(rho_tilde))))[::-1]
    roots = np.sqrt(evals)
    return float(max(0.0, roots[0] - roots[1] - roots[2] - roots[3]))


@dataclass(frozen=True)
class FitResult:
    """Algebraic extrapolation y = a / t^b + c."""

    a: float
    b: float
    c: float
    residual_norm: float
    covariance: np.ndarray
    degenerate: bool = False


def fit_algebraic(t_r, y, b_starts=(0.25, 0.5, 1.0, 2.0)):
    """Damped least-squares fit of y = a / t_r^b + c with multi-start in b.

    Requires at least 4 strictly increasing abscissas.  A constant input
    makes b unidentifiable; the fit then degenerates to a -> 0, c = mean and
    is flagged.
    """
    t_r = np.asarray(t_r, float)
    y = np.asarray(y, float)
    if t_r.size < 4:
        raise ConfigurationError("fit requires at least 4 points")
    if np.any(np.diff(t_r) <= 0):
        raise ConfigurationError("t_r must be strictly increasing")
    spread = np.ptp(y)
    scale = max(np.abs(y).max(), 1.0)
    if spread < 1e-12 * scale:
        return FitResult(
            a=0.0, b=1.0, c=float(np.mean(y)), residual_norm=float(np.std(y)),
            covariance=np.zeros((3, 3)), degenerate=True,
        )

    def resid(params):
        a, b, c = params
        return a / t_r**b + c - y

    best = None
    for b0 in b_starts:
        design = np.stack([t_r**-b0, np.ones_like(t_r)], axis=1)
        (a0, c0), *_ = np.linalg.lstsq(design, y, rcond=None)
        try:
            sol = least_squares(resid, [a0, b0, c0], method="lm", xtol=1e-14, ftol=1e-14)
        except Exception:
            continue
        if not np.isfinite(sol.cost):
            continue
        if best is None or sol.cost < best.cost:
            best = sol
    if best is None:
        raise FitError("algebraic fit did not converge from any starting point")
    a, b, c = best.x
    if b < 0:
        # a/t^b growing with t: refit in the decaying branch failed; flag it
        return FitResult(a=float(a), b=float(b), c=float(c),
                         residual_norm=float(np.linalg.norm(best.fun)),
                         covariance=_fit_covariance(best), degenerate=True)
    return FitResult(
        a=float(a), b=float(b), c=float(c),
        residual_norm=float(np.linalg.norm(best.fun)),
        covariance=_fit_covariance(best),
    )


def _fit_covariance(sol):
    jac = sol.jac
    n, k = jac.shape
    dof = max(n - k, 1)
    try:
        jtj_inv = np.linalg.pinv(jac.T @ jac)
    except np.linalg.LinAlgError:
        return np.full((k, k), np.nan)
    return 2.0 * sol.cost / dof * jtj_inv


def steady_state_point(model, bath_spec, dt, policy, n_cut=None, cutoff_tolerance=1e-8,
                       rho0=None, observables=None, steady_tol=None):
    """Contract, build Q, decompose, and report steady-state observables.

    Returns a dict with the raw parameters echoed plus steady-state results;
    used as the per-point worker of the sweep.  ``steady_tol`` widens with
    the truncation threshold so that truncation-shifted unit eigenvalues
    stay inside the steady window.
    """
    d = model.d
    db = discretize(bath_spec, dt, n_cut=n_cut, cutoff_tolerance=cutoff_tolerance)
    mpo = contract(model.basis, db, policy)
    prop = build_Q(mpo, unitary_channel(model, dt))
    if rho0 is None:
        rho0 = np.eye(d, dtype=complex) / d
    if steady_tol is None:
        steady_tol = max(1e-8, 50.0 * policy.rel_svd_threshold)
    sd = spectrum(prop, rho0, steady_tol=steady_tol)
    rho_ss = sd.steady_state
    rho_ss = 0.5 * (rho_ss + rho_ss.conj().T)
    trace = np.trace(rho_ss).real
    if abs(trace) < 1e-8:
        raise NumericalError("steady-state mode has vanishing trace")
    rho_ss = rho_ss / trace
    out = {
        "chi": mpo.chi,
        "n_cut": db.n_cut,
        "svd_count": mpo.diagnostics["svd_count"],
        "q1_abs": float(np.abs(sd.eigenvalues[sd.steady_index])),
        "steady_trace": complex(np.trace(rho_ss)),
        "rho_steady": rho_ss,
        "spectral": sd,
    }
    if observables:
        for name, op in observables.items():
            out[name] = float(np.real(np.trace(np.asarray(op, complex) @ rho_ss)))
    return out


def sweep_steady_state(model_kind, omega, s, omega_c, couplings, temperatures, dt,
                       policy=TruncationPolicy(), n_cut=None, cutoff_tolerance=1e-8,
                       half_convention=False, progress=None):
    """Steady-state observables over a (coupling, temperature) grid.

    Yields one result dict per grid point (row-by-row, so callers can write
    output incrementally and resume).  Per-point failures are recorded in the
    row under ``error`` and the sweep continues.
    """
    if model_kind == "spin_boson":
        model = spin_boson(omega, half_convention=half_convention)
        observables = {"sz": SIGMA_Z, "sx": SIGMA_X}
    elif model_kind == "two_spin_boson":
        model = two_spin_boson(omega)
        observables = {
            "sz_total": np.kron(SIGMA_Z, IDENTITY_2) + np.kron(IDENTITY_2, SIGMA_Z),
        }
    else:
        raise ConfigurationError(f"unknown model kind {model_kind!r}")
    for alpha in couplings:
        for temperature in temperatures:
            row = {
                "model": model_kind,
                "omega": omega,
                "s": s,
                "omega_c": omega_c,
                "alpha": alpha,
                "temperature": temperature,
                "dt": dt,
                "rel_svd_threshold": policy.rel_svd_threshold,
                "chi_max": policy.chi_max,
            }
            try:
                if temperature > 0:
                    spec = BathSpec(kind=OHMIC_THERMAL, coupling=alpha, omega_c=omega_c,
                                    s=s, temperature=temperature)
                else:
                    spec = BathSpec(kind=OHMIC_ZERO_T, coupling=alpha, omega_c=omega_c, s=s)
                res = steady_state_point(model, spec, dt, policy, n_cut=n_cut,
                                         cutoff_tolerance=cutoff_tolerance,
                                         observables=observables)
                row.update({k: v for k, v in res.items() if k not in ("spectral", "rho_steady")})
                if model_kind == "two_spin_boson":
                    row["concurrence"] = concurrence(res["rho_steady"], psd_tol=1e-4)
                row["error"] = ""
            except Exception as exc:  # per-point failures must not kill the sweep
                row["error"] = f"{type(exc).__name__}: {exc}"
            if progress is not None:
                progress(row)
            yield row
