"""Batch front end: JSON job configs in, CSV artifacts and a manifest out.

Usage:
    otn run <config.json> [--jobs N] [--out DIR]
    otn validate|evolve|steady|spectrum|sweep|benchmark <config.json> ...

Subcommand aliases override the config's ``kind``.  Exit codes: 0 success,
2 configuration/validation failure, 3 numerical failure.  The environment
variable ``OTN_THREADS`` caps internal linear-algebra parallelism (it must
take effect before numpy loads, hence the assignment at import time).
"""

from __future__ import annotations

import os

if os.environ.get("OTN_THREADS"):
    _n = os.environ["OTN_THREADS"]
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                 "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
        os.environ.setdefault(_var, _n)

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, OtnError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_KINDS = ("validate", "evolve", "steady", "spectrum", "sweep", "benchmark")

_NUMBER = {"type": "number"}
_COMPLEX_PAIR = {
    "type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2,
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "bath", "discretization"],
    "properties": {
        "kind": {"enum": list(_KINDS)},
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "bath": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["ohmic_zero_t", "ohmic_thermal", "exponential_sum",
                                  "tabulated"]},
                "coupling": _NUMBER,
                "omega_c": _NUMBER,
                "s": _NUMBER,
                "temperature": _NUMBER,
                "exponentials": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["g", "w"],
                        "properties": {"g": _COMPLEX_PAIR, "w": _COMPLEX_PAIR},
                    },
                    "minItems": 1,
                },
                "table_times": {"type": "array", "items": _NUMBER},
                "table_values": {"type": "array", "items": _COMPLEX_PAIR},
                "regularization": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["t_r", "delta"],
                    "properties": {"t_r": _NUMBER, "delta": _NUMBER},
                },
            },
        },
        "discretization": {
            "type": "object",
            "additionalProperties": False,
            "required": ["dt"],
            "properties": {
                "dt": _NUMBER,
                "n_cut": {"type": "integer", "minimum": 1},
                "cutoff_tolerance": _NUMBER,
            },
        },
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["spin_boson", "two_spin_boson"]},
                "omega": _NUMBER,
                "half_convention": {"type": "boolean"},
            },
        },
        "policy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rel_svd_threshold": _NUMBER,
                "chi_max": {"type": "integer", "minimum": 1},
                "record_discarded_weight": {"type": "boolean"},
            },
        },
        "evolve": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_steps": {"type": "integer", "minimum": 1},
                "initial_state": {"enum": ["up", "down", "plus", "mixed"]},
            },
        },
        "validate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_paths": {"type": "integer", "minimum": 1},
                "path_length": {"type": "integer", "minimum": 1},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["couplings", "temperatures"],
            "properties": {
                "couplings": {"type": "array", "items": _NUMBER, "minItems": 1},
                "temperatures": {"type": "array", "items": _NUMBER, "minItems": 1},
            },
        },
        "benchmark": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_steps": {"type": "integer", "minimum": 2},
                "n_paths": {"type": "integer", "minimum": 1},
                "thresholds": {"type": "array", "items": _NUMBER, "minItems": 1},
                "kernel_timing": {"type": "boolean"},
            },
        },
    },
}


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, (complex, np.complexfloating)):
        return f"{format(x.real, '.17g')}{'+' if x.imag >= 0 else '-'}{format(abs(x.imag), '.17g')}j"
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _parse_config(path, kind_override=None):
    import jsonschema

    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    if kind_override:
        raw["kind"] = kind_override
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        pointer = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"config schema violation at {pointer}: {exc.message}") from exc
    raw.setdefault("seed", 0)
    return raw


def _build_bath_spec(cfg):
    from .bath import BathSpec, Regularization

    b = cfg["bath"]
    reg = None
    if "regularization" in b:
        reg = Regularization(t_r=b["regularization"]["t_r"], delta=b["regularization"]["delta"])
    kind = b["kind"]
    kwargs = dict(kind=kind, regularization=reg)
    if kind in ("ohmic_zero_t", "ohmic_thermal"):
        kwargs.update(coupling=b["coupling"], omega_c=b["omega_c"], s=b.get("s", 1.0))
    if kind == "ohmic_thermal":
        kwargs.update(temperature=b.get("temperature", 0.0))
    if kind == "exponential_sum":
        if "exponentials" not in b:
            raise ConfigurationError("bath/exponentials is required for exponential_sum")
        kwargs["exponentials"] = tuple(
            (complex(*e["g"]), complex(*e["w"])) for e in b["exponentials"]
        )
    if kind == "tabulated":
        if "table_times" not in b or "table_values" not in b:
            raise ConfigurationError("bath/table_times and bath/table_values are required")
        kwargs["table"] = (
            np.asarray(b["table_times"], float),
            np.asarray([complex(*v) for v in b["table_values"]]),
        )
    return BathSpec(**kwargs)


def _build_model(cfg):
    from .models import spin_boson, two_spin_boson

    m = cfg.get("model", {"kind": "spin_boson"})
    omega = m.get("omega", 1.0)
    if m["kind"] == "spin_boson":
        return spin_boson(omega, half_convention=m.get("half_convention", False))
    return two_spin_boson(omega)


def _build_policy(cfg):
    from .itebd import TruncationPolicy

    p = cfg.get("policy", {})
    return TruncationPolicy(
        rel_svd_threshold=p.get("rel_svd_threshold", 1e-10),
        chi_max=p.get("chi_max", 256),
        record_discarded_weight=p.get("record_discarded_weight", True),
    )


def _discretize(cfg, spec):
    from .bath import discretize

    d = cfg["discretization"]
    return discretize(spec, d["dt"], n_cut=d.get("n_cut"),
                      cutoff_tolerance=d.get("cutoff_tolerance", 1e-8))


def _initial_state(name, d):
    if name == "mixed":
        return np.eye(d, dtype=complex) / d
    if d == 2:
        states = {
            "up": np.array([[1.0, 0.0], [0.0, 0.0]], complex),
            "down": np.array([[0.0, 0.0], [0.0, 1.0]], complex),
            "plus": np.array([[0.5, 0.5], [0.5, 0.5]], complex),
        }
        return states[name]
    if name == "up":
        rho = np.zeros((d, d), complex)
        rho[0, 0] = 1.0
        return rho
    raise ConfigurationError(f"initial state {name!r} undefined for d={d}")


def _contract(cfg, model):
    from .itebd import contract

    spec = _build_bath_spec(cfg)
    db = _discretize(cfg, spec)
    mpo = contract(model.basis, db, _build_policy(cfg))
    return spec, db, mpo


def _job_validate(cfg, outdir, manifest):
    from .influence import exact_influence_batch
    from .itebd import reconstruct_batch
    from .propagator import build_Q, evolve, unitary_channel

    model = _build_model(cfg)
    _, db, mpo = _contract(cfg, model)
    opts = cfg.get("validate", {})
    n_paths = opts.get("n_paths", 200)
    length = opts.get("path_length", min(db.n_cut, 8))
    rng = np.random.default_rng(cfg["seed"])
    paths = rng.integers(0, model.d**2 + 1, size=(n_paths, length))
    vals = reconstruct_batch(mpo, paths)
    refs = exact_influence_batch(model.basis, db, paths, cap=length)
    path_err = float(np.abs(vals - refs).mean())
    zeros = abs(reconstruct_batch(mpo, np.zeros((1, 16), np.int64))[0] - 1.0)
    rho0 = _initial_state("up", model.d)
    traj = evolve(model, mpo, rho0, 50)
    trace_err = float(np.abs(np.einsum("tii->t", traj.states) - 1.0).max())
    herm_err = float(max(np.abs(r - r.conj().T).max() for r in traj.states))
    checks = {
        "mean_path_error": path_err,
        "zero_path_deviation": float(zeros),
        "svd_count_equals_n_cut": mpo.diagnostics["svd_count"] == db.n_cut,
        "trace_error_50_steps": trace_err,
        "hermiticity_error_50_steps": herm_err,
    }
    tol = max(10 * _build_policy(cfg).rel_svd_threshold, 1e-8)
    checks["passed"] = bool(
        path_err < max(1e-6, 1e3 * tol) and zeros < 1e-8
        and checks["svd_count_equals_n_cut"] and trace_err < 1e-6 and herm_err < 1e-8
    )
    manifest["oracle_checks"] = checks
    _write_csv(outdir / "validate.csv",
               ["check", "value"], sorted(checks.items()))
    if not checks["passed"]:
        raise ConfigurationError(f"validation checks failed: {checks}")


def _job_evolve(cfg, outdir, manifest):
    from .models import SIGMA_X, SIGMA_Y, SIGMA_Z
    from .propagator import evolve

    model = _build_model(cfg)
    _, db, mpo = _contract(cfg, model)
    opts = cfg.get("evolve", {})
    n_steps = opts.get("n_steps", 100)
    rho0 = _initial_state(opts.get("initial_state", "up"), model.d)
    traj = evolve(model, mpo, rho0, n_steps)
    manifest["contraction"] = dict(mpo.diagnostics, chi=mpo.chi, n_cut=db.n_cut)
    d = model.d
    header = ["t"] + [f"re_rho_{i}{j}" for i in range(d) for j in range(d)] + \
             [f"im_rho_{i}{j}" for i in range(d) for j in range(d)]
    obs_ops = {}
    if d == 2:
        obs_ops = {"sx": SIGMA_X, "sy": SIGMA_Y, "sz": SIGMA_Z}
        header += list(obs_ops)
    rows = []
    for t, rho in zip(traj.times, traj.states):
        row = [t] + [rho[i, j].real for i in range(d) for j in range(d)] + \
              [rho[i, j].imag for i in range(d) for j in range(d)]
        row += [np.real(np.trace(op @ rho)) for op in obs_ops.values()]
        rows.append(row)
    _write_csv(outdir / "trajectory.csv", header, rows)


def _job_spectrum(cfg, outdir, manifest, steady_only=False):
    from .models import SIGMA_Z
    from .propagator import build_Q, spectrum, unitary_channel

    model = _build_model(cfg)
    _, db, mpo = _contract(cfg, model)
    prop = build_Q(mpo, unitary_channel(model, db.dt))
    rho0 = _initial_state(cfg.get("evolve", {}).get("initial_state", "mixed"), model.d)
    sd = spectrum(prop, rho0)
    manifest["contraction"] = dict(mpo.diagnostics, chi=mpo.chi, n_cut=db.n_cut)
    manifest["spectrum_flags"] = sd.flags
    if model.d == 2:
        obs = np.real(sd.mode_observables(SIGMA_Z))
        obs_name = "sz"
    else:
        from .models import IDENTITY_2

        op = np.kron(SIGMA_Z, IDENTITY_2) + np.kron(IDENTITY_2, SIGMA_Z)
        obs = np.real(sd.mode_observables(op))
        obs_name = "sz_total"
    if steady_only:
        rho_ss = 0.5 * (sd.steady_state + sd.steady_state.conj().T)
        rows = [["steady_trace", np.trace(rho_ss).real],
                ["q_steady_re", sd.eigenvalues[sd.steady_index].real],
                ["q_steady_im", sd.eigenvalues[sd.steady_index].imag],
                [obs_name, float(np.real(np.trace(_op_for(model, obs_name) @ rho_ss)))]]
        if model.d == 4:
            from .models import concurrence

            rows.append(["concurrence", concurrence(rho_ss, psd_tol=1e-4)])
        _write_csv(outdir / "steady.csv", ["quantity", "value"], rows)
        return
    rows = []
    for k, (q, g, tr, o) in enumerate(zip(sd.eigenvalues, sd.rates, sd.traces, obs)):
        rows.append([k + 1, q.real, q.imag, g.real, g.imag, tr.real, tr.imag, o])
    _write_csv(outdir / "spectrum.csv",
               ["k", "re_q", "im_q", "re_gamma", "im_gamma", "re_tr_rho", "im_tr_rho",
                obs_name], rows)


def _op_for(model, obs_name):
    from .models import IDENTITY_2, SIGMA_Z

    if obs_name == "sz":
        return SIGMA_Z
    return np.kron(SIGMA_Z, IDENTITY_2) + np.kron(IDENTITY_2, SIGMA_Z)


def _job_sweep(cfg, outdir, manifest, jobs=1):
    from .models import sweep_steady_state

    b = cfg["bath"]
    m = cfg.get("model", {"kind": "two_spin_boson"})
    sw = cfg["sweep"]
    d = cfg["discretization"]
    rows_path = outdir / "sweep.csv"
    existing = set()
    if rows_path.exists():
        with open(rows_path) as fh:
            for row in csv.DictReader(fh):
                existing.add((row["alpha"], row["temperature"]))
    gen = sweep_steady_state(
        m["kind"], m.get("omega", 1.0), b.get("s", 1.0), b["omega_c"],
        sw["couplings"], sw["temperatures"], d["dt"],
        policy=_build_policy(cfg), n_cut=d.get("n_cut"),
        cutoff_tolerance=d.get("cutoff_tolerance", 1e-8),
        half_convention=m.get("half_convention", False),
    )
    header = None
    mode = "a" if existing else "w"
    failures = 0
    with open(rows_path, mode, newline="") as fh:
        writer = csv.writer(fh)
        for row in gen:
            if header is None:
                header = list(row)
                if mode == "w":
                    writer.writerow(header)
            if (_fmt(row["alpha"]), _fmt(row["temperature"])) in existing:
                continue
            writer.writerow([_fmt(row.get(k, "")) for k in header])
            fh.flush()
            if row.get("error"):
                failures += 1
    manifest["sweep_failures"] = failures


def _job_benchmark(cfg, outdir, manifest):
    from .baseline import contract_finite, reconstruct_finite
    from .influence import exact_influence_batch
    from .itebd import TruncationPolicy, contract, reconstruct_batch
    from . import _kernels

    model = _build_model(cfg)
    spec = _build_bath_spec(cfg)
    db = _discretize(cfg, spec)
    opts = cfg.get("benchmark", {})
    n_steps = opts.get("n_steps", db.n_cut)
    n_paths = opts.get("n_paths", 1000)
    thresholds = opts.get("thresholds", [cfg.get("policy", {}).get("rel_svd_threshold", 1e-8)])
    chi_max = cfg.get("policy", {}).get("chi_max", 256)
    rng = np.random.default_rng(cfg["seed"])
    paths = rng.integers(0, model.d**2 + 1, size=(n_paths, n_steps))
    refs = exact_influence_batch(model.basis, db, paths, cap=n_steps)
    rows = []
    for thr in thresholds:
        policy = TruncationPolicy(rel_svd_threshold=thr, chi_max=chi_max)
        t0 = time.perf_counter()
        mpo = contract(model.basis, db, policy)
        t_itebd = time.perf_counter() - t0
        err_i = float(np.abs(reconstruct_batch(mpo, paths) - refs).mean())
        t0 = time.perf_counter()
        fmpo = contract_finite(model.basis, db, n_steps, policy)
        t_fin = time.perf_counter() - t0
        vals_f = np.array([reconstruct_finite(fmpo, p) for p in paths])
        err_f = float(np.abs(vals_f - refs).mean())
        rows.append(["itebd", thr, mpo.chi, mpo.diagnostics["max_intermediate_chi"],
                     mpo.diagnostics["svd_count"], err_i, t_itebd])
        rows.append(["finite", thr, fmpo.diagnostics["max_chi"],
                     fmpo.diagnostics["max_chi"], fmpo.diagnostics["svd_count"],
                     err_f, t_fin])
    _write_csv(outdir / "benchmark.csv",
               ["method", "rel_svd_threshold", "chi", "max_chi", "svd_count",
                "mean_path_error", "wall_time"], rows)
    if opts.get("kernel_timing", True):
        from .influence import weight_tables

        tables = weight_tables(model.basis, db)
        timings = {"backend": _kernels.backend_name()}
        t0 = time.perf_counter()
        _kernels._influence_paths_np(tables, paths)
        timings["influence_paths_numpy_s"] = time.perf_counter() - t0
        if _kernels.backend_name() == "numba":
            _kernels.influence_paths(tables, paths[:2])  # warm the jit once
            t0 = time.perf_counter()
            _kernels.influence_paths(tables, paths)
            timings["influence_paths_numba_s"] = time.perf_counter() - t0
        manifest["kernel_timings"] = timings


_JOBS = {
    "validate": _job_validate,
    "evolve": _job_evolve,
    "steady": lambda cfg, outdir, manifest: _job_spectrum(cfg, outdir, manifest, True),
    "spectrum": _job_spectrum,
    "sweep": _job_sweep,
    "benchmark": _job_benchmark,
}


def run(config_path, kind_override=None, out_override=None, jobs=1):
    """Execute one job config; returns the process exit code."""
    t_start = time.perf_counter()
    try:
        cfg = _parse_config(config_path, kind_override)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = Path(out_override or cfg.get("output_dir", "otn_out"))
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": cfg,
        "versions": _versions(),
        "kind": cfg["kind"],
        "seed": cfg["seed"],
    }
    try:
        if cfg["kind"] == "sweep":
            _JOBS["sweep"](cfg, outdir, manifest, jobs=jobs)
        else:
            _JOBS[cfg["kind"]](cfg, outdir, manifest)
        status = EXIT_OK
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        manifest["error"] = str(exc)
        status = EXIT_CONFIG
    except OtnError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        manifest["error"] = str(exc)
        status = EXIT_NUMERICAL
    manifest["wall_time_s"] = time.perf_counter() - t_start
    manifest["exit_status"] = status
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(_json_safe(manifest), fh, indent=2, sort_keys=True)
    return status


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    return obj


def _versions():
    import scipy

    from . import __version__
    from . import _kernels

    return {
        "otn": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "kernel_backend": _kernels.backend_name(),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(prog="otn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run",) + _KINDS:
        p = sub.add_parser(name, help=f"{name} job" if name != "run" else
                           "run the job kind given in the config")
        p.add_argument("config", help="path to the JSON job configuration")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel workers for sweep points")
        p.add_argument("--out", default=None, help="output directory override")
    args = parser.parse_args(argv)
    kind = None if args.command == "run" else args.command
    return run(args.config, kind_override=kind, out_override=args.out, jobs=args.jobs)


if __name__ == "__main__":
    sys.exit(main())
