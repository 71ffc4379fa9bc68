"""Command-line entry points.  Exit codes: 0 pass, 2 verdict failure, 1 error."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import InlsError
from .experiments import identity_residual_study, inequality_suite, run_scenario
from .functionals import SUITE_SEED
from .io import RunManifest, config_to_dict, parse_config, smoothing_length, write_json, write_timeseries
from .model import V0_VARIANTS, PotentialSpec, make_grid
from .operators import simon_klaus_check

logger = logging.getLogger("inlsdecay")

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=str))


def simulate_one(config_path: str, out_dir: str | None = None) -> dict:
    """Run one config file; write CSV, report and manifest when ``out_dir`` is given."""
    scenario, solver, grid = parse_config(config_path)
    start = time.perf_counter()
    report = run_scenario(scenario, solver, grid)
    duration = time.perf_counter() - start
    summary = report.to_dict()
    for key in ("times", "l2_local", "linf_local", "envelope", "h1_alpha_running"):
        summary.pop(key, None)
    summary["config"] = str(config_path)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        manifest = RunManifest(config_to_dict(scenario, solver, grid), duration)
        ts = out / "timeseries.csv"
        write_timeseries(report.trajectory.records, ts)
        rep = out / "report.json"
        write_json(report.to_dict(), rep)
        manifest.add_file(ts)
        manifest.add_file(rep)
        manifest.validity = {"valid": report.valid, "breach_time": report.breach_time}
        manifest.write(out / "manifest.json")
    return summary


def cmd_simulate(args) -> int:
    summary = simulate_one(args.config, args.out)
    _emit(summary)
    return EXIT_PASS if summary["passed"] else EXIT_FAIL


def cmd_eigen(args) -> int:
    pot = PotentialSpec(args.potential, args.m, args.n)
    grid = make_grid(args.L, args.N)
    reports = simon_klaus_check(pot, args.variant, args.mu, grid)
    _emit([r.to_dict() for r in reports])
    return EXIT_PASS


def cmd_verify_identity(args) -> int:
    grid = make_grid(args.L, args.N)
    mollify = smoothing_length(args.mollify, grid) / grid.h
    pot = PotentialSpec(args.potential, args.m, args.n) if args.mu > 0 else None
    study = identity_residual_study(args.weight, args.dt, args.mu, mollify, grid,
                                    stride=args.stride, T=args.T, R=args.R, potential=pot)
    print(f"{'dt':>12} {'residual':>12} {'tail_mass':>12}")
    for row in study.rows:
        print(f"{row.dt:12.4e} {row.residual:12.4e} {row.tail_mass:12.4e}")
    print(f"ratio {study.ratio:.3f}  {'PASS' if study.passed else 'FAIL'}")
    return EXIT_PASS if study.passed else EXIT_FAIL


def cmd_morawetz(args) -> int:
    summary = simulate_one(args.config, args.out)
    fit = summary.get("fit")
    _emit({"morawetz": summary["morawetz"], "fit": fit,
           "increments": summary["morawetz_cumulative_increments"]})
    if fit is None:
        return EXIT_FAIL
    return EXIT_PASS if fit["verified"] else EXIT_FAIL


def cmd_sweep(args) -> int:
    configs = list(args.configs)
    outs = [None if args.out is None else str(Path(args.out) / Path(c).stem) for c in configs]
    results = []
    with ProcessPoolExecutor(max_workers=args.workers) as pool:
        futures = [pool.submit(simulate_one, c, o) for c, o in zip(configs, outs)]
        for c, fut in zip(configs, futures):
            try:
                s = fut.result()
                results.append({"config": c, "passed": s["passed"], "valid": s["valid"]})
            except InlsError as err:
                results.append({"config": c, "passed": False, "error": str(err)})
    _emit(results)
    if any("error" in r for r in results):
        return EXIT_ERROR
    return EXIT_PASS if all(r["passed"] for r in results) else EXIT_FAIL


def cmd_inequalities(args) -> int:
    grid = make_grid(args.L, args.N)
    pot = PotentialSpec(args.potential, args.m, args.n)
    report = inequality_suite(args.b, args.samples, args.seed, pot, args.mu, grid)
    d = report.to_dict()
    for key in ("coercivity", "coercivity_potential"):
        d[key].pop("ratios", None)
    _emit(d)
    return EXIT_PASS if report.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="inlsdecay", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one scenario from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="directory for timeseries.csv, report.json, manifest.json")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("eigen", help="negative spectrum of -d^2/dx^2 + mu V0")
    s.add_argument("--potential", choices=("inverse_power", "yukawa", "zero"), default="yukawa")
    s.add_argument("--m", type=float, default=0.5)
    s.add_argument("--n", type=float, default=1.0)
    s.add_argument("--variant", choices=V0_VARIANTS, default="cutoff")
    s.add_argument("--mu", type=float, nargs="+", default=[0.01])
    s.add_argument("--L", type=float, default=1024.0)
    s.add_argument("--N", type=int, default=16384)
    s.set_defaults(func=cmd_eigen)

    s = sub.add_parser("verify-identity", help="virial identity residual under dt halving")
    s.add_argument("--weight", choices=("bounded", "cutoff"), default="bounded")
    s.add_argument("--mollify", default="4h", help="K smoothing length, a number or e.g. '4h'")
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--T", type=float, default=2.0)
    s.add_argument("--R", type=float, default=8.0)
    s.add_argument("--mu", type=float, default=0.0)
    s.add_argument("--potential", choices=("inverse_power", "yukawa"), default="inverse_power")
    s.add_argument("--m", type=float, default=0.0)
    s.add_argument("--n", type=float, default=3.0)
    s.add_argument("--stride", type=int, default=16)
    s.add_argument("--L", type=float, default=40.0)
    s.add_argument("--N", type=int, default=16384)
    s.set_defaults(func=cmd_verify_identity)

    s = sub.add_parser("morawetz", help="Morawetz averages over (T, R) and bound fit")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_morawetz)

    s = sub.add_parser("sweep", help="run several configs concurrently")
    s.add_argument("configs", nargs="+")
    s.add_argument("--out")
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("inequalities", help="GN and coercivity suites")
    s.add_argument("--b", type=float, default=0.5)
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--seed", type=int, default=SUITE_SEED)
    s.add_argument("--potential", choices=("inverse_power", "yukawa"), default="yukawa")
    s.add_argument("--m", type=float, default=0.5)
    s.add_argument("--n", type=float, default=1.0)
    s.add_argument("--mu", type=float, default=0.01)
    s.add_argument("--L", type=float, default=40.0)
    s.add_argument("--N", type=int, default=4096)
    s.set_defaults(func=cmd_inequalities)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InlsError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
