"""Command-line interface: preparation, measurement, tomography, bounds.

Exit codes: 0 success, 2 configuration error, 3 solver did not certify
(infeasible or unconverged), 4 truncation-leakage check failed.

All durations are in ns and all frequencies in GHz*2pi at this boundary;
internal code is dimensionless.  Stochastic commands require --seed, and
identical configuration plus seed reproduces byte-identical artifacts.
Every artifact embeds the configuration digest and the seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys

import numpy as np

from . import estimation, measurement
from .hilbert import HilbertLayout, QuantumState, fidelity_with_pure, partial_trace
from .model import ConfigError, default_system
from .protocol import (LeakageError, ProtocolError, budget, check_leakage,
                       noon_schedule, noon_vector_two_cavity,
                       reported_noon_phase, simulate)

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_LEAKAGE = 4

_CROP_TOL = 1e-6


def _digest(options: dict) -> str:
    # output paths and the dispatch closure are not configuration
    clean = {k: v for k, v in options.items() if k not in ("func", "out")}
    blob = json.dumps(clean, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


# --- state (de)serialization: nested [re, im] arrays plus layout header ----


def _complex_to_json(arr: np.ndarray):
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def _complex_from_json(data) -> np.ndarray:
    a = np.asarray(data, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def state_to_json(state: QuantumState, meta: dict) -> str:
    doc = dict(meta)
    doc["layout"] = [[lab, dim] for lab, dim in state.layout.factors]
    doc["kind"] = "vector" if state.is_vector else "density_matrix"
    doc["state"] = _complex_to_json(state.data)
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def state_from_json(text: str) -> tuple[QuantumState, dict]:
    doc = json.loads(text)
    layout = HilbertLayout(tuple((lab, int(dim)) for lab, dim in doc["layout"]))
    state = QuantumState(layout, _complex_from_json(doc["state"]))
    return state, doc


def _reduce_to_cavities(state: QuantumState, N: int,
                        tol: float = _CROP_TOL) -> QuantumState:
    """Trace out everything but the data cavities and crop to N+1 levels."""
    reduced = partial_trace(state.to_matrix(), ("C1", "C2"))
    dims = reduced.layout.dims
    d1 = N + 1
    mat = reduced.data.reshape(dims + dims)[:d1, :d1, :d1, :d1]
    mat = mat.reshape(d1 * d1, d1 * d1)
    kept = float(np.trace(mat).real)
    if 1.0 - kept > tol:
        raise LeakageError(
            f"population {1.0 - kept:.3e} outside the {d1}-level working "
            f"space exceeds {tol}")
    layout = HilbertLayout((("C1", d1), ("C2", d1)))
    return QuantumState(layout, mat / kept)


# --- subcommands ------------------------------------------------------------


def _cmd_prepare(args) -> int:
    # the integrating backend keeps real (g/Delta)^2-scale population in
    # buffer levels; give it one extra level so the top stays a sentinel
    buffer_levels = 3 if args.backend == "hamiltonian" else 2
    params = default_system(args.N, delta2_over_g=args.delta2_over_g,
                            g_inv_ns=args.g_inv_ns, t_rabi=args.t_rabi_ns,
                            buffer_levels=buffer_levels)
    schedule = noon_schedule(args.N, params, variant=args.variant)
    state = simulate(schedule, args.backend, params)
    check_leakage(state, tol=args.leak_tol)
    try:
        phi = reported_noon_phase(state, args.N)
    except ProtocolError:
        phi = None
    reduced = _reduce_to_cavities(state, args.N, tol=args.leak_tol)
    meta = {"config_digest": _digest(vars(args) | {"command": "prepare"}),
            "seed": None, "N": args.N, "phi": phi,
            "total_time_ns": schedule.total_time}
    _write(args.out, state_to_json(reduced, meta))
    return 0


def _cmd_budget(args) -> int:
    rep = budget(args.N, 1.0 / args.g_inv_ns, args.t_rabi_ns, args.t2_ns)
    print(f"T_tot = {rep.T_tot:.4g} ns")
    print(f"T_limit = {rep.T_limit:.4g} ns")
    print(f"N_max = {rep.N_max}")
    return 0


def _cmd_measure(args) -> int:
    with open(args.state) as fh:
        state, doc = state_from_json(fh.read())
    N = max(state.layout.dims) - 1
    settings = measurement.sample_settings(args.count, N, radius=args.radius,
                                           seed=args.seed)
    record = measurement.generate_record(state, settings, sigma=args.sigma,
                                         seed=args.seed)
    digest = _digest(vars(args) | {"command": "measure",
                                   "state_digest": doc.get("config_digest")})
    _write(args.out, f"# config_digest={digest}\n" + measurement.record_to_table(record))
    return 0


def _load_record(path: str) -> measurement.MeasurementRecord:
    with open(path) as fh:
        return measurement.record_from_table(fh.read())


def _cmd_tomo(args) -> int:
    record = _load_record(args.record)
    dims = (args.N + 1, args.N + 1)
    est = estimation.physical_estimate(record, dims, mode=args.mode)
    target = noon_vector_two_cavity(args.N, args.phi, args.N + 1)
    fid = fidelity_with_pure(est, QuantumState(est.layout, target))
    meta = {"config_digest": _digest(vars(args) | {"command": "tomo"}),
            "seed": record.seed, "N": args.N, "fidelity": fid,
            "count": len(record)}
    _write(args.out, state_to_json(est, meta))
    return 0


def _cmd_bound(args) -> int:
    record = _load_record(args.record)
    dims = (args.N + 1, args.N + 1)
    target = noon_vector_two_cavity(args.N, args.phi, args.N + 1)
    b = estimation.fidelity_bounds(record, target, dims, kappa=args.kappa)
    doc = {"config_digest": _digest(vars(args) | {"command": "bound"}),
           "seed": record.seed, "N": args.N, "count": b.count,
           "lower": b.lower, "upper": b.upper, "gap": b.gap,
           "lower_status": b.lower_status, "upper_status": b.upper_status}
    _write(args.out, json.dumps(doc, sort_keys=True, indent=1) + "\n")
    if not b.optimal:
        print("solver did not certify both bounds "
              f"({b.lower_status}/{b.upper_status})", file=sys.stderr)
        return EXIT_SOLVER
    return 0


def _cmd_sweep(args) -> int:
    counts = sorted({int(c) for c in args.counts.split(",")})
    if not counts or counts[0] <= 0:
        raise ConfigError("counts must be positive integers")
    d1 = args.N + 1
    d = d1 * d1
    layout = HilbertLayout((("C1", d1), ("C2", d1)))
    target = noon_vector_two_cavity(args.N, args.phi, d1)
    pure = np.outer(target, target.conj())
    if not 0.0 <= args.p <= 1.0:
        raise ConfigError("mixture parameter p must be in [0, 1]")
    state = QuantumState(layout, args.p * pure + (1.0 - args.p) * np.eye(d) / d)
    result = estimation.bound_sweep(state, target, counts, args.N,
                                    sigma=args.sigma, seed=args.seed,
                                    radius=args.radius, kappa=args.kappa)
    digest = _digest(vars(args) | {"command": "sweep"})
    _write(args.out, f"# config_digest={digest} seed={args.seed}\n"
           + estimation.sweep_to_csv(result))
    return 0


def _cmd_check_complete(args) -> int:
    dims = (args.N + 1, args.N + 1)
    d = dims[0] * dims[1]
    if args.record:
        settings = _load_record(args.record).settings
    else:
        if args.count is None or args.seed is None:
            raise ConfigError("check-complete needs --record or --count and --seed")
        settings = measurement.sample_settings(args.count, args.N,
                                               radius=args.radius, seed=args.seed)
    rank = measurement.completeness_rank(settings, dims)
    print(f"rank = {rank} of d^2 = {d * d} "
          f"({'complete' if rank == d * d else 'incomplete'})")
    return 0


# --- parser -----------------------------------------------------------------


def _add_system_flags(p):
    p.add_argument("--g-inv-ns", type=float, default=20.0,
                   help="inverse swap coupling 1/g in ns")
    p.add_argument("--t-rabi-ns", type=float, default=10.0,
                   help="qubit pi-pulse duration in ns")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="noonsim",
                                 description="two-cavity NOON-state preparation, "
                                             "measurement and certification")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="simulate the schedule, dump the cavity state")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--backend", choices=("ideal", "hamiltonian"), default="ideal")
    p.add_argument("--variant", choices=("sequential", "parallel"),
                   default="sequential")
    p.add_argument("--delta2-over-g", type=float, default=40.0)
    _add_system_flags(p)
    p.add_argument("--leak-tol", type=float, default=_CROP_TOL,
                   help="max population allowed outside the working space; "
                        "the integrating backend leaves ~(g/Delta)^2 there")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_prepare)

    p = sub.add_parser("budget", help="print the timing budget")
    p.add_argument("--N", type=int, required=True)
    _add_system_flags(p)
    p.add_argument("--t2-ns", type=float, required=True)
    p.set_defaults(func=_cmd_budget)

    p = sub.add_parser("measure", help="sample settings and emit a record table")
    p.add_argument("--state", required=True, help="state JSON from prepare")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_measure)

    p = sub.add_parser("tomo", help="least-squares + projection reconstruction")
    p.add_argument("--record", required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--phi", type=float, default=math.pi,
                   help="target relative phase in radians")
    p.add_argument("--mode", choices=("clip", "nearest"), default="clip")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_tomo)

    p = sub.add_parser("bound", help="certified fidelity bounds from a record")
    p.add_argument("--record", required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--phi", type=float, default=math.pi)
    p.add_argument("--kappa", type=float, default=3.0,
                   help="band half-width in units of sigma")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("sweep", help="bounds vs measurement count, CSV output")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--p", type=float, default=1.0,
                   help="mixture weight of the target state")
    p.add_argument("--phi", type=float, default=math.pi)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--kappa", type=float, default=3.0)
    p.add_argument("--counts", required=True, help="comma-separated counts")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("check-complete", help="rank of the measurement map")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--record", default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_check_complete)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except LeakageError as exc:
        print(f"truncation-leakage check failed: {exc}", file=sys.stderr)
        return EXIT_LEAKAGE
    except (ConfigError, ProtocolError, estimation.EstimationError,
            measurement.MeasurementError, OSError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
