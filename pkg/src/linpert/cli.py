"""Command-line front end.

    linpert strata --n 1 --m 2 --l 1 [--sf 3]
    linpert sf --catalog circle_in_R2 [--samples 1000] [--seed 0]
    linpert verify --property morse --catalog circle_in_R2 --F height_cubed --seed 5
    linpert experiment --config run.cfg [--workers 8] [--csv out.csv] [--sweep 1e-4,1e-6]
    linpert catalog

JSON goes to stdout, everything else to stderr. Exit codes: 0 success or
pass, 1 property failed, 2 usage or configuration error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from .errors import ArgumentError, NumericalError
from .experiments import (
    PROPERTIES,
    config_from_mapping,
    load_config,
    parse_config_text,
    run_experiment,
    run_property,
    tolerance_sweep,
)
from .geometry import CATALOG, TARGET_MAPS, builtin, target_map
from .perturbation import LinearPerturbation, perturb, sample_perturbation
from .strata import estimate_sf, strata_profile
from .verifiers import Budget, Tolerances

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


def _emit(obj):
    sys.stdout.write(json.dumps(obj, indent=2, allow_nan=False) + "\n")


def cmd_strata(args) -> int:
    _emit(strata_profile(args.n, args.m, args.l, args.sf).to_dict())
    return EXIT_OK


def cmd_sf(args) -> int:
    man, f = builtin(args.catalog)
    if not CATALOG[args.catalog].injection:
        logging.getLogger(__name__).warning("%s is not an injection; s_f is undefined", args.catalog)
    est = estimate_sf(f, man, args.samples, args.seed, args.rank_tol_scale)
    _emit({"catalog": args.catalog, **est.to_dict()})
    return EXIT_OK


def _tol_overrides(pairs):
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise ArgumentError(f"--tol expects name=value, got {item!r}")
        name, raw = item.split("=", 1)
        out[f"tol.{name.strip()}"] = raw.strip()
    return out


def cmd_verify(args) -> int:
    values = parse_config_text(open(args.config, encoding="utf-8").read()) if args.config else {}
    flags = {
        "catalog": args.catalog,
        "F": args.F,
        "l": args.l,
        "seed": args.seed,
        "perturb_scale": args.scale,
        "sf": args.sf,
        "samples": args.samples,
        "starts_per_chart": args.starts,
        "grid_density": args.grid,
        "rank_tol_scale": args.rank_tol_scale,
    }
    values.update({k: v for k, v in flags.items() if v is not None})
    extra = _tol_overrides(args.tol)
    if extra:
        values.update(parse_config_text("\n".join(f"{k} = {v}" for k, v in extra.items())))
    values["properties"] = (args.property,)
    cfg = config_from_mapping(values)
    man, f = builtin(cfg.catalog)
    F = target_map(cfg.F, f.codomain_dim, cfg.l)
    m, l = F.domain_dim, F.codomain_dim
    if args.alpha_zero:
        alpha = LinearPerturbation.zero(m, l)
    else:
        alpha = sample_perturbation(m, l, cfg.perturb_scale, cfg.seed, args.index)
    s_f = cfg.s_f
    if args.property == "nc" and s_f is None:
        s_f = estimate_sf(f, man, 1000, cfg.seed, cfg.tolerances.rank_tol_scale).estimate
    verdict = run_property(args.property, perturb(F, alpha), f, man, cfg.budget_for(args.property), cfg.seed, cfg.tolerances, s_f)
    out = verdict.to_dict()
    out["alpha_digest"] = alpha.digest()
    if args.dump_alpha:
        out["alpha"] = alpha.alpha.tolist()
    _emit(out)
    return EXIT_OK if verdict.passed else EXIT_FAIL


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    changes = {}
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.dump_alpha:
        changes["dump_alpha"] = True
    if changes:
        cfg = dataclasses.replace(cfg, **changes)
    if args.sweep:
        floors = [float(x) for x in args.sweep.split(",")]
        _emit(tolerance_sweep(cfg, floors))
        return EXIT_OK
    report = run_experiment(cfg)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(report.to_csv())
    sys.stdout.write(report.to_json() + "\n")
    return EXIT_OK


def cmd_catalog(args) -> int:
    _emit({
        "manifolds": {k: dataclasses.asdict(v) for k, v in CATALOG.items()},
        "target_maps": dict(TARGET_MAPS),
        "properties": list(PROPERTIES),
        "tolerances": Tolerances().to_dict(),
        "budget": dataclasses.asdict(Budget()),
    })
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linpert", description="Genericity checks for linearly perturbed maps.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("strata", help="print the stratum profile of a dimension triple")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--sf", type=int)
    p.set_defaults(func=cmd_strata)

    p = sub.add_parser("sf", help="estimate s_f of a catalog injection")
    p.add_argument("--catalog", required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rank-tol-scale", type=float, default=1e3)
    p.set_defaults(func=cmd_sf)

    p = sub.add_parser("verify", help="run one verifier on one perturbation")
    p.add_argument("--property", required=True, choices=PROPERTIES)
    p.add_argument("--config")
    p.add_argument("--catalog")
    p.add_argument("--F")
    p.add_argument("--l", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--index", type=int, default=0, help="perturbation index within the seed's stream")
    p.add_argument("--scale", type=float)
    p.add_argument("--alpha-zero", action="store_true", help="use alpha = 0 (the unperturbed map)")
    p.add_argument("--sf", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--starts", type=int)
    p.add_argument("--grid", type=int)
    p.add_argument("--rank-tol-scale", type=float)
    p.add_argument("--tol", action="append", metavar="NAME=VALUE")
    p.add_argument("--dump-alpha", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("experiment", help="Monte Carlo experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--csv")
    p.add_argument("--sweep", help="comma list of decreasing floors for a tolerance sweep")
    p.add_argument("--dump-alpha", action="store_true")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("catalog", help="list built-in manifolds and target maps")
    p.set_defaults(func=cmd_catalog)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
