"""Command-line entry point: ``stratlim <subcommand> [options]``.

Exit codes: 0 success, 2 usage or contract violation, 3 inconclusive
statistics, 4 numerical failure or failed invariant.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import chaos, simplex
from .convergence import run_convergence
from .grid import GridSpec
from .io import CONFIG_KEYS, ConfigError, RunManifest, build_sim_config, dump_json, load_config, write_json
from .pde_solver import NumericalFailure
from .random_field import CorrelationModel, rho_kernel, sample_white_noise
from .spectral_green import kernel_bounds, log_time_mesh, m_epsilon_rate

log = logging.getLogger("stratlim")

EXIT_OK, EXIT_USAGE, EXIT_INCONCLUSIVE, EXIT_FAILURE = 0, 2, 3, 4
MANIFEST = "manifest.json"


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _digest(payload) -> str:
    return hashlib.sha256(dump_json(payload).encode()).hexdigest()


def _emit(args, name: str, payload: dict, seed=None, csv_files=()) -> Path:
    """Write ``payload`` as ``<name>.json`` plus the run manifest."""
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = dict(payload, manifest=MANIFEST)
    path = out / f"{name}.json"
    write_json(path, payload)
    manifest = RunManifest(args.command, payload.get("config_digest") or _digest(payload), seed,
                           [path.name, *[Path(p).name for p in csv_files]], started=args.started)
    manifest.finish()
    write_json(out / MANIFEST, manifest.to_json())
    return path


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(f"# manifest: {MANIFEST}\n")
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _isserlis_recursive(cov, idx: tuple) -> float:
    if not idx:
        return 1.0
    first, rest = idx[0], idx[1:]
    return sum(cov[first, j] * _isserlis_recursive(cov, rest[:i] + rest[i + 1:])
               for i, j in enumerate(rest))


# -- subcommands ------------------------------------------------------------

def cmd_green_bounds(args) -> int:
    n = args.N or (1024 if args.d == 1 else 64)
    grid = GridSpec(args.d, args.L, n)
    times = args.times if args.times else log_time_mesh(args.m, grid, args.T)
    rep = kernel_bounds(args.m, grid, times)
    payload = rep.to_json()
    _emit(args, "green_bounds", payload)
    print(f"m={args.m} d={args.d}: l1_sup={rep.l1_sup:.9f} "
          f"l2_scaled_sup={rep.l2_scaled_sup:.6g} linf_scaled_sup={rep.linf_scaled_sup:.6g}")
    return EXIT_OK


def _converge_overrides(args) -> dict:
    over = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        over[k.strip()] = v
    over.update(realizations=args.realizations, master_seed=args.seed,
                eps_values=tuple(args.eps) if args.eps else None)
    return over


def cmd_converge(args) -> int:
    cfg = load_config(args.config, _converge_overrides(args))
    sim = build_sim_config(cfg)
    rep = run_convergence(
        sim, cfg["eps_values"], int(cfg["realizations"]), int(cfg["master_seed"]),
        batch_size=int(cfg["batch_size"]), workers=args.threads,
        sentinel_realizations=int(cfg["sentinel_realizations"]),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    samples = out / "converge_samples.csv"
    _write_csv(samples, ["realization_index", "eps", "squared_error"],
               ([r, e, repr(float(v))] for r, row in enumerate(rep.samples)
                for e, v in zip(rep.eps_values, row)))
    payload = rep.to_json()
    payload["monotone_violations"] = rep.monotone_violations()
    _emit(args, "converge_report", payload, int(cfg["master_seed"]), [samples])
    for e, m, s in zip(rep.eps_values, rep.mse, rep.stderr):
        print(f"eps={e:<6g} mse={m:.4e} se={s:.2e}")
    lo, hi = rep.slope_ci
    print(f"slope={rep.fitted_slope:.3f} [{lo:.3f}, {hi:.3f}] coupling_ratio={rep.coupling_ratio:.3g}")
    if not rep.conclusive:
        print("inconclusive: stderr/mse >= 0.2 or fewer than 50 realizations")
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def cmd_chaos_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    failures, counts = [], {}
    for n in range(1, args.max_n + 1):
        got = len(chaos.enumerate_pairings(2 * n))
        counts[2 * n] = got
        if got != chaos.double_factorial_odd(n):
            failures.append({"check": "pairing_count", "two_n": 2 * n, "got": got})

    # Pairing sum against the recursion E[X_0 X_rest] = sum_j C_0j E[X_rest without j].
    for n in range(1, args.max_n + 1):
        A = rng.standard_normal((2 * n, 2 * n))
        cov = A @ A.T / (2 * n)
        direct = _isserlis_recursive(cov, tuple(range(2 * n)))
        got = chaos.gaussian_moment(cov)
        if not np.isclose(got, direct, rtol=1e-12):
            failures.append({"check": "isserlis", "two_n": 2 * n, "got": got, "expected": direct})

    for total in range(2, 2 * args.max_n + 1, 2):
        for n in range(total + 1):
            m = total - n
            for p in chaos.enumerate_pairings(total):
                c = chaos.classify_pairing(p, n, m)
                if c.n0 > (n + 1) / 2 or c.m0 > m / 2:
                    failures.append({"check": "n0_m0_bound", "n": n, "m": m,
                                     "pairs": list(p.pair_map), "n0": c.n0, "m0": c.m0})

    grid = GridSpec(1, 1.0, 8)
    worst = 0.0
    for arity in range(2, min(args.max_n, chaos.MAX_ARITY) + 1):
        for case in range(args.cases):
            f = chaos.random_symmetric_function(arity, grid, rng)
            W = sample_white_noise(grid, args.seed, case)
            lhs, rhs = chaos.hu_meyer_residual(f, W)
            rel = abs(lhs - rhs) / max(abs(lhs), 1e-300)
            worst = max(worst, rel)
            if rel > 1e-10:
                failures.append({"check": "hu_meyer", "arity": arity, "case": case,
                                 "strat": lhs, "ito_sum": rhs,
                                 "f": [[list(k), v] for k, v in f.values.items()]})
    payload = {
        "schema": "chaos_verify/1",
        "max_n": args.max_n,
        "seed": args.seed,
        "pairing_counts": {str(k): v for k, v in counts.items()},
        "hu_meyer_max_rel_err": worst,
        "failures": failures,
    }
    _emit(args, "chaos_verify", payload, args.seed)
    print(f"pairing counts {counts}; Hu-Meyer max rel err {worst:.2e}; {len(failures)} failures")
    return EXIT_FAILURE if failures else EXIT_OK


def cmd_simplex(args) -> int:
    rows, failures = [], []
    for prof in simplex.all_profiles(args.n, args.alpha):
        exact = simplex.simplex_closed_form(args.t, prof)
        beta = simplex.simplex_beta_product(args.t, prof)
        row = {"alphas": list(prof.alphas), "closed_form": exact,
               "beta_product_rel_err": abs(beta - exact) / exact}
        if args.n <= 4:
            quad = simplex.simplex_quadrature(args.t, prof, tol=args.tol)
            row["quadrature"] = quad
            row["quadrature_rel_err"] = abs(quad - exact) / exact
            if row["quadrature_rel_err"] >= 1e-4:
                failures.append(row)
        if row["beta_product_rel_err"] > 1e-12:
            failures.append(row)
        rows.append(row)
    payload = {"schema": "simplex_check/1", "n": args.n, "alpha": args.alpha, "t": args.t,
               "profiles": rows, "failures": failures}
    csv_files = []
    if args.scan_nmax:
        scan = simplex.bound_scan(args.alpha, args.scan_nmax)
        path = Path(args.out) / "bound_scan.csv"
        Path(args.out).mkdir(parents=True, exist_ok=True)
        fields = ["n", "m", "alpha", "value", "ratio", "n0", "m0", "C"]
        _write_csv(path, fields, ([r[k] for k in fields] for r in scan))
        payload["bound_constant"] = scan[0]["C"]
        payload["max_ratio"] = max(r["ratio"] for r in scan)
        csv_files.append(path)
    _emit(args, "simplex_check", payload, None, csv_files)
    worst = max(r.get("quadrature_rel_err", 0.0) for r in rows)
    print(f"n={args.n} alpha={args.alpha}: {len(rows)} profiles, max quadrature rel err {worst:.2e}")
    return EXIT_FAILURE if failures else EXIT_OK


def cmd_m_epsilon(args) -> int:
    n = args.N or (1024 if args.d == 1 else 64)
    grid = GridSpec(args.d, args.L, n)
    model = CorrelationModel.with_sigma(1.0, "gaussian", args.length_scale, args.d)
    g = rho_kernel(model, grid)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        vals, slope = m_epsilon_rate(args.m, grid, g, args.T, args.eps)
    rows = [{"eps": e, "m_eps": float(v)} for e, v in zip(args.eps, vals)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "m_epsilon.csv"
    _write_csv(path, ["eps", "m_eps"], ([r["eps"], repr(r["m_eps"])] for r in rows))
    payload = {"schema": "m_epsilon/1", "m": args.m, "d": args.d, "L": args.L, "N": n,
               "T": args.T, "table": rows, "slope": slope,
               "warnings": [str(w.message) for w in caught]}
    _emit(args, "m_epsilon", payload, None, [path])
    for r in rows:
        print(f"eps={r['eps']:<6g} M_eps={r['m_eps']:.6e}")
    print(f"slope={slope:.3f}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(prog="stratlim", description=__doc__, formatter_class=fmt)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads for independent realizations")

    sp = sub.add_parser("green-bounds", help="kernel norm suprema over a time mesh", formatter_class=fmt)
    sp.add_argument("--m", type=int, required=True, help="operator order (even, > d)")
    sp.add_argument("--d", type=int, required=True, help="spatial dimension")
    sp.add_argument("--L", type=float, default=40.0, help="box side")
    sp.add_argument("--N", type=int, default=None, help="points per axis (default 1024 for d=1, else 64)")
    sp.add_argument("--T", type=float, default=1.0, help="largest probed time")
    sp.add_argument("--times", type=_floats, default=None, help="explicit times (default: 64-point log mesh)")
    common(sp)
    sp.set_defaults(func=cmd_green_bounds)

    keys = "\n".join(f"  {k} = {v[0]!r}: {v[1]}" for k, v in CONFIG_KEYS.items())
    sp = sub.add_parser(
        "converge", help="coupled Monte-Carlo convergence experiment",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"config keys (flat key = value file, defaults shown):\n{keys}",
    )
    sp.add_argument("--config", default=None, help="flat key = value config file")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    sp.add_argument("--realizations", type=int, default=None, help="override realizations")
    sp.add_argument("--seed", type=int, default=None, help="override master_seed")
    sp.add_argument("--eps", type=_floats, default=None, help="override eps_values")
    common(sp)
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("chaos-verify", help="pairing and Hu-Meyer property suite", formatter_class=fmt)
    sp.add_argument("--max-n", type=int, default=3, help="largest half-size 2n of pairings")
    sp.add_argument("--cases", type=int, default=20, help="random integrands per arity")
    sp.add_argument("--seed", type=int, default=0)
    common(sp)
    sp.set_defaults(func=cmd_chaos_verify)

    sp = sub.add_parser("simplex", help="closed form vs quadrature for simplex integrals",
                        formatter_class=fmt)
    sp.add_argument("--n", type=int, required=True, help="simplex dimension")
    sp.add_argument("--alpha", type=float, required=True, help="singular exponent in [0, 1)")
    sp.add_argument("--t", type=float, default=1.0, help="simplex size")
    sp.add_argument("--tol", type=float, default=1e-6, help="quadrature tolerance")
    sp.add_argument("--scan-nmax", type=int, default=0, help="also write a Gamma-ratio bound scan")
    common(sp)
    sp.set_defaults(func=cmd_simplex)

    sp = sub.add_parser("m-epsilon", help="M_eps table and log-log slope", formatter_class=fmt)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--L", type=float, default=40.0)
    sp.add_argument("--N", type=int, default=None, help="points per axis (default 1024 for d=1, else 64)")
    sp.add_argument("--T", type=float, default=1.0)
    sp.add_argument("--eps", type=_floats, default=[0.4, 0.2, 0.1, 0.05])
    sp.add_argument("--length-scale", type=float, default=1.0, help="Gaussian correlation length")
    common(sp)
    sp.set_defaults(func=cmd_m_epsilon)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.started = time.time()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc} (last valid t={exc.last_valid_time})", file=sys.stderr)
        return EXIT_FAILURE
    except (ValueError, ConfigError, simplex.DivergentIntegralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except simplex.QuadratureBudgetError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
