"""Command-line interface: ``iclv {estimate,simulate,generate,design,validate}``.

Exit codes: 0 success, 2 input error (unreadable or malformed files, bad
usage), 3 model or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import logging
import sys
import time
import warnings
from dataclasses import replace
from pathlib import Path

from . import __version__
from . import io
from .errors import ICLVError, InputError

EXIT_OK, EXIT_INPUT, EXIT_MODEL = 0, 2, 3

log = logging.getLogger("iclv")


class StrictWarning(ICLVError):
    """A warning raised as an error under ``--strict``."""


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="seed for every random component (default 0)")
    p.add_argument("--draws", type=int, default=None, help="simulation draws per respondent")
    p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    p.add_argument("--out-dir", type=Path, default=Path("."), help="output directory (default .)")
    p.add_argument("--strict", action="store_true", help="treat warnings as errors")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="iclv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", parents=[common], help="simulated maximum likelihood estimation")
    p.add_argument("dataset", type=Path, help="choice CSV (its _individuals.csv must sit alongside)")
    p.add_argument("spec", type=Path, help="model spec JSON")
    p.add_argument("settings", type=Path, nargs="?", help="estimation settings JSON")
    p.add_argument("--start", type=Path, help="starting values (params JSON)")

    p = sub.add_parser("simulate", parents=[common], help="policy scenario sweep")
    p.add_argument("params", type=Path, help="params JSON")
    p.add_argument("--cohorts", type=Path, help="cohorts JSON (default: the bundled six cohorts)")
    p.add_argument("--scenario", type=int, required=True, choices=range(1, 7), metavar="{1..6}")
    p.add_argument("--points", type=int, default=11, help="grid points (default 11)")

    p = sub.add_parser("generate", parents=[common], help="simulate a synthetic dataset")
    p.add_argument("design_spec", type=Path, help="design spec JSON")
    p.add_argument("true_params", type=Path, help="params JSON used to simulate")
    p.add_argument("-n", "--n-individuals", type=int, required=True)
    p.add_argument("--design", type=Path, help="design CSV (default: a random design)")
    p.add_argument("--name", default="dataset", help="output file stem (default dataset)")

    p = sub.add_parser("design", parents=[common], help="build and improve an experimental design")
    p.add_argument("design_spec", type=Path)
    p.add_argument("priors", type=Path)
    p.add_argument("--swaps", type=int, default=5000, help="coordinate-exchange proposals (default 5000)")

    p = sub.add_parser("validate", parents=[common], help="check files against their schema")
    p.add_argument("files", type=Path, nargs="+")
    return parser


def _warn(args, messages) -> None:
    for m in messages:
        if args.strict:
            raise StrictWarning(m)
        print(f"warning: {m}", file=sys.stderr)


def cmd_estimate(args) -> int:
    from .estimation import EstimationSettings, estimate

    t0 = time.perf_counter()
    dataset = io.read_dataset(args.dataset)
    spec = io.read_spec(args.spec)
    settings = io.read_settings(args.settings) if args.settings else EstimationSettings()
    draws = settings.draw_settings
    if args.draws is not None:
        draws = replace(draws, n_draws=args.draws)
    if args.seed:
        draws = replace(draws, seed=args.seed)
    settings = replace(settings, draw_settings=draws, threads=max(args.threads, settings.threads))
    start = None
    if args.start:
        start, _ = io.read_params(args.start)
        settings = replace(settings, starting_values="user_supplied")
    result = estimate(dataset, spec, settings, start)
    if not result.converged:
        _warn(args, [f"estimation did not converge: {result.message}"])
    out = args.out_dir
    io.write_result(out / "result.json", result)
    inputs = [args.dataset, io.individuals_path(args.dataset), args.spec] + \
        [p for p in (args.settings, args.start) if p]
    io.write_manifest(out / "manifest.json", "estimate", inputs, {"draws": draws.seed},
                      settings.to_dict(), [out / "result.json"], time.perf_counter() - t0,
                      {"converged": result.converged})
    print(f"LL {result.final_ll:.6f}  rho2 {result.rho_square:.4f}  iterations {result.iterations}  "
          f"converged {str(result.converged).lower()}")
    return EXIT_OK


def curves_csv(result) -> str:
    out = _io.StringIO()
    out.write(f"# schema_version: {io.SCHEMA_VERSION}\n# kind: curves\n")
    out.write(f"# scenario: {result.sweep.scenario_id} ({result.sweep.swept_field}, x in {result.sweep.unit})\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("scenario", "cohort", "gender", "x", "probability"))
    for r in result.rows:
        w.writerow((r.scenario, r.cohort, r.gender, io.fmt(r.x), io.fmt(r.probability)))
    return out.getvalue()


def cmd_simulate(args) -> int:
    from .policy import DEFAULT_COHORTS, ScenarioSweep, cohort_latents, scenario_sweep

    t0 = time.perf_counter()
    params, calibration = io.read_params(args.params)
    cohorts = io.read_cohorts(args.cohorts) if args.cohorts else DEFAULT_COHORTS
    if args.points < 1:
        raise InputError("--points must be >= 1")
    sweep = ScenarioSweep.default(args.scenario, args.points, cohorts)
    ev_constant = float(calibration.get("ev_constant", 0.0))
    result = scenario_sweep(params, sweep, ev_constant=ev_constant, n_draws=args.draws or 0, seed=args.seed)
    _warn(args, result.warnings)
    out = args.out_dir
    (out / "curves.csv").write_text(curves_csv(result))
    latents = {c.label: dict(zip(("design", "environment", "safety"), map(float, cohort_latents(params, c))))
               for c in cohorts}
    inputs = [args.params] + ([args.cohorts] if args.cohorts else [])
    io.write_manifest(out / "manifest.json", "simulate", inputs, {"seed": args.seed},
                      {"scenario": args.scenario, "points": args.points, "mc_draws": args.draws or 0},
                      [out / "curves.csv"], time.perf_counter() - t0,
                      {"latents": latents, "warnings": result.warnings,
                       "ev_constant": {"value": ev_constant,
                                       "note": "calibration constant on the EV utility, taken from the params file"}})
    return EXIT_OK


def cmd_generate(args) -> int:
    from .synthetic import random_design, simulate_dataset

    t0 = time.perf_counter()
    spec = io.read_design_spec(args.design_spec)
    params, _ = io.read_params(args.true_params)
    if args.n_individuals < 0:
        raise InputError("--n-individuals must be >= 0")
    design = io.read_design(args.design, spec) if args.design else random_design(spec, args.seed)
    dataset = simulate_dataset(design, params, args.n_individuals, seed=args.seed)
    out = args.out_dir
    paths = list(io.write_dataset(out / f"{args.name}.csv", dataset))
    if not args.design:
        io.write_design(out / "design.csv", design)
        paths.append(out / "design.csv")
    inputs = [args.design_spec, args.true_params] + ([args.design] if args.design else [])
    io.write_manifest(out / "manifest.json", "generate", inputs, {"seed": args.seed},
                      {"n_individuals": args.n_individuals}, paths, time.perf_counter() - t0)
    return EXIT_OK


def cmd_design(args) -> int:
    from .synthetic import DesignWarning, d_error, improve_design, random_design

    t0 = time.perf_counter()
    spec = io.read_design_spec(args.design_spec)
    priors = io.read_priors(args.priors)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DesignWarning)
        start = random_design(spec, args.seed)
        d0 = d_error(start, priors)
        design = improve_design(start, priors, args.swaps, args.seed)
        d1 = d_error(design, priors)
    _warn(args, [str(w.message) for w in caught])
    out = args.out_dir
    io.write_design(out / "design.csv", design)
    report = {"schema_version": io.SCHEMA_VERSION, "kind": "design_report",
              "d_error_random": d0 if d0 != float("inf") else None,
              "d_error": d1 if d1 != float("inf") else None,
              "swaps": args.swaps, "seed": args.seed, "design_spec": spec.to_dict(), "priors": priors}
    io._dump(out / "design_report.json", report)
    io.write_manifest(out / "manifest.json", "design", [args.design_spec, args.priors], {"seed": args.seed},
                      {"swaps": args.swaps}, [out / "design.csv", out / "design_report.json"],
                      time.perf_counter() - t0)
    print(f"D-error random {d0:.6g} -> improved {d1:.6g}")
    return EXIT_OK


def cmd_validate(args) -> int:
    findings = [f for path in args.files for f in io.validate(path)]
    for f in findings:
        print(f)
    if not findings:
        print(f"{len(args.files)} file(s): no findings")
    return EXIT_INPUT if findings else EXIT_OK


COMMANDS = {"estimate": cmd_estimate, "simulate": cmd_simulate, "generate": cmd_generate,
            "design": cmd_design, "validate": cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command != "validate":
        args.out_dir.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ICLVError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
