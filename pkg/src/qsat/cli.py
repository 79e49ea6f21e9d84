"""Command-line entry point: ``qsat {gen,run,gap,baseline,fit,appendix}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .errors import NumericalError, ParseError
from .instances import EnsembleRule, generate_soluble_ensemble, read_dimacs, save_ensemble

log = logging.getLogger("qsat")

OK, FLAGGED, CONFIG_ERROR = 0, 1, 2


def _common(p: argparse.ArgumentParser, out_default: str | None = None):
    p.add_argument("--seed", type=int, default=None, help="ensemble / RNG seed (default 0)")
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker processes (default ${harness.THREADS_ENV} or 1)")
    p.add_argument("--out", default=out_default, help="output path")
    p.add_argument("--config", default=None, help="JSON config file")


def _ensemble_args(p):
    p.add_argument("-n", type=int, nargs="+", help="number of variables (required)")
    p.add_argument("--count", type=int, default=100, help="instances per n")
    p.add_argument("--mu", type=float, default=4.25, help="clause-to-variable ratio")
    p.add_argument("-k", type=int, default=3, help="literals per clause")
    p.add_argument("--no-duplicates", action="store_true", help="reject repeated clauses")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsat", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="soluble random k-SAT ensembles as DIMACS + manifest")
    _common(p, "ensembles")
    _ensemble_args(p)

    p = sub.add_parser("run", help="experiment config -> result CSV")
    _common(p)
    p.add_argument("--timing", action="store_true", help="fill runtime_ms (breaks byte-identical reruns)")

    p = sub.add_parser("gap", help="spectral gap profiles -> CSV")
    _common(p, "gaps")
    p.add_argument("-n", type=int, nargs="+", help="number of variables (random ensemble)")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--mu", type=float, default=4.25)
    p.add_argument("--cnf", nargs="+", help="DIMACS files instead of a random ensemble")
    p.add_argument("--grid", type=int, default=101, help="uniform f points")
    p.add_argument("--levels", type=int, default=6, help="eigenpairs per point (L)")
    p.add_argument("--classify", choices=("overlap", "count"), default="overlap")
    p.add_argument("--refine", type=int, default=3, help="10x refinement rounds")
    p.add_argument("--weights", default="unweighted",
                   choices=("unweighted", "clause-count", "normalized"))

    p = sub.add_parser("baseline", help="GSAT / unstructured search costs -> CSV")
    _common(p, "baseline.csv")
    _ensemble_args(p)
    p.add_argument("--method", choices=("gsat", "grover", "both"), default="both")
    p.add_argument("--trials", type=int, default=100, help="GSAT runs per instance")

    p = sub.add_parser("fit", help="exponential and power-law fits of median cost")
    _common(p)
    p.add_argument("csv", help="result CSV from run/baseline")

    p = sub.add_parser("appendix", help="two-level example: P_soln(j) and eigenphase traces")
    _common(p, "appendix.csv")
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--jmax", type=int, default=4096)
    p.add_argument("--points", type=int, default=64, help="geometrically spaced j values")
    p.add_argument("--trace", default=None, help="also write an eigenphase trace CSV here")
    p.add_argument("--trace-j", type=int, default=64, help="steps for the eigenphase trace")
    return parser


def _need_n(args):
    if not args.n:
        raise harness.ConfigError(f"{args.command} needs -n (flag or config)")


def _cmd_gen(args) -> int:
    _need_n(args)
    rule = EnsembleRule(mu=args.mu, allow_duplicates=not args.no_duplicates)
    for n in args.n:
        ens = generate_soluble_ensemble(n, args.count, rule, args.seed, args.k)
        manifest = save_ensemble(ens, Path(args.out) / f"n{n}")
        print(f"n={n}: {len(ens)} instances -> {manifest}")
    return OK


def _cmd_run(args) -> int:
    if not args.config:
        raise harness.ConfigError("run needs --config")
    config = harness.ExperimentConfig.load(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.timing:
        config.timing = True
    out = args.out or config.output
    if not out:
        raise harness.ConfigError("no output path (set 'output' in the config or pass --out)")
    rows = harness.run_experiment(config, out=out, threads=args.threads)
    return _report(rows, out)


def _report(rows, out) -> int:
    for s in harness.summarize(rows):
        p = "" if s.p_soln is None else f"  P_soln {s.p_soln.median:.4g}"
        print(f"{s.method:>20s} n={s.n:<3d} count={s.count:<5d} median cost {s.cost.median:.6g} "
              f"[{s.cost.lo:.6g}, {s.cost.hi:.6g}]{p}")
    bad = sum(1 for r in rows if "error" in r.flags)
    print(f"{len(rows)} rows -> {out}" + (f" ({bad} flagged failures)" if bad else ""))
    return FLAGGED if bad else OK


def _cmd_gap(args) -> int:
    from .kernel import make_weights
    from .spectrum import gap_profile
    from .instances import enumerate_solutions

    if args.cnf:
        instances = []
        for path in args.cnf:
            inst = read_dimacs(Path(path).read_text())
            inst.meta.setdefault("id", Path(path).stem)
            enumerate_solutions(inst)
            instances.append(inst)
    elif args.n:
        instances = [inst for n in args.n
                     for inst in generate_soluble_ensemble(n, args.count, EnsembleRule(mu=args.mu), args.seed)]
    else:
        raise harness.ConfigError("gap needs -n or --cnf")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failed = 0
    with open(out / "summary.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["instance_id", "n", "n_solutions", "min_gap", "f_star", "refinement",
                     "max_cost_drop", "flags"])
        for inst in instances:
            try:
                prof = gap_profile(inst, make_weights(inst, args.weights),
                                   f_grid=np.linspace(0, 1, args.grid), L=args.levels,
                                   classify=args.classify, refine=args.refine)
            except NumericalError as e:
                failed += 1
                wr.writerow([inst.id, inst.n, len(inst.solutions), "", "", "", "",
                             f"error:NumericalError(f={e.f})"])
                continue
            prof.to_csv(out / f"{inst.id}.csv")
            wr.writerow([inst.id, inst.n, len(inst.solutions), repr(prof.min_gap),
                         repr(prof.f_star), prof.refinement, repr(prof.max_cost_drop), ""])
            print(f"{inst.id}: G={prof.min_gap:.5f} at f={prof.f_star:.5f}")
    return FLAGGED if failed else OK


def _cmd_baseline(args) -> int:
    _need_n(args)
    methods = []
    if args.method in ("gsat", "both"):
        methods.append({"label": "gsat", "family": "gsat", "trials": args.trials, "seed": args.seed})
    if args.method in ("grover", "both"):
        methods.append({"label": "grover", "family": "grover"})
    config = harness.ExperimentConfig.from_dict({
        "ns": args.n, "count": args.count, "seed": args.seed, "k": args.k, "mu": args.mu,
        "allow_duplicates": not args.no_duplicates, "methods": methods,
    })
    rows = harness.run_experiment(config, out=args.out, threads=args.threads)
    return _report(rows, args.out)


def _cmd_fit(args) -> int:
    report = harness.fit_report(harness.read_csv(args.csv))
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return OK


def _cmd_appendix(args) -> int:
    from .kernel import MixingWeights
    from .schedules import constant_delta, run_schedule
    from .spectrum import adiabatic_trace, appendix_pair, appendix_problem

    if args.jmax < 1 or args.points < 1:
        raise harness.ConfigError("--jmax and --points must be >= 1")
    problem = appendix_problem()
    weights = MixingWeights.from_weights([1.0], "unweighted", unit=1.0)
    js = np.unique(np.rint(np.geomspace(1, args.jmax, args.points)).astype(int))
    with open(args.out, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["j", "delta", "p_soln", "cost"])
        for j in js:
            res = run_schedule(problem, weights, constant_delta(int(j), args.delta))
            wr.writerow([int(j), repr(args.delta), repr(res.p_soln), repr(res.cost)])
    print(f"P_soln(j) for delta={args.delta} -> {args.out}")
    if args.trace:
        h0, hc = appendix_pair()
        tr = adiabatic_trace((h0, hc, problem.solutions), constant_delta(args.trace_j, args.delta))
        N = tr.theta.shape[1]
        with open(args.trace, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["f", *[f"theta_{r}" for r in range(N)], *[f"leakage_{r}" for r in range(N)],
                         "p_soln"])
            for i in range(tr.f.size):
                wr.writerow([repr(float(tr.f[i])), *map(repr, tr.theta[i].tolist()),
                             *map(repr, tr.leakage[i].tolist()), repr(float(tr.p_soln[i]))])
        print(f"eigenphase trace (j={args.trace_j}) -> {args.trace}")
    return OK


COMMANDS = {"gen": _cmd_gen, "run": _cmd_run, "gap": _cmd_gap, "baseline": _cmd_baseline,
            "fit": _cmd_fit, "appendix": _cmd_appendix}


def _explicit_dests(parser: argparse.ArgumentParser, command: str, argv: list[str]) -> set[str]:
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    given = set()
    for action in sub.choices[command]._actions:
        for opt in action.option_strings:
            if any(tok == opt or tok.startswith(opt + "=") for tok in argv):
                given.add(action.dest)
    return given


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # argparse: 0 for --help, 2 for usage errors
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.config and args.command != "run":
        # a config file supplies any flag of the other commands not given explicitly
        try:
            given = _explicit_dests(parser, args.command, argv if argv is not None else sys.argv[1:])
            for key, value in json.loads(Path(args.config).read_text()).items():
                if hasattr(args, key) and key not in given:
                    setattr(args, key, value)
        except (OSError, json.JSONDecodeError) as e:
            print(f"qsat: bad config: {e}", file=sys.stderr)
            return CONFIG_ERROR
    if args.command != "run" and args.seed is None:
        args.seed = 0
    try:
        return COMMANDS[args.command](args)
    except (harness.ConfigError, ParseError, FileNotFoundError, ValueError) as e:
        print(f"qsat: {e}", file=sys.stderr)
        return CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
