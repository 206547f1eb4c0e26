"""Command line entry point: ``dpagd train|experiment|accountant|trace``.

Exit codes: 0 success, 2 invalid arguments, 3 data error, 4 trainer error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from . import privacy
from .data import load_and_preprocess, read_schema
from .exceptions import DataError, DimensionMismatchError, InvalidParameterError, TrainerError
from .harness import TRACE_COLUMNS, ExperimentSpec, emit_results, run_experiment, trace_run
from .objectives import LossModel
from .optimizer import OptimizerConfig, dpagd_train

EXIT_OK, EXIT_ARGS, EXIT_DATA, EXIT_TRAIN = 0, 2, 3, 4


def _add_data_args(p):
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("csv", "svmlight"), default="csv")
    p.add_argument("--schema")
    p.add_argument("--no-intercept", action="store_true")
    p.add_argument("--model", choices=("logreg", "svm"), default="logreg")
    p.add_argument("--lam", type=float, default=1e-4, help="L2 regularization coefficient")


def _add_optimizer_args(p):
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, default=1e-8)
    p.add_argument("--splits", type=int, default=60)
    p.add_argument("--gamma", type=float, default=0.3)
    p.add_argument("--c-grad", type=float, default=3.0)
    p.add_argument("--c-obj", type=float, default=3.0)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpagd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model with DP-AGD and write the result JSON")
    _add_data_args(p)
    _add_optimizer_args(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("experiment", help="run a repeated cross-validation sweep")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("accountant", help="privacy conversions")
    acc = p.add_subparsers(dest="action", required=True)
    a = acc.add_parser("rho-from-dp", help="largest rho whose zCDP guarantee implies (eps, delta)-DP")
    a.add_argument("--eps", type=float, required=True)
    a.add_argument("--delta", type=float, required=True)
    a = acc.add_parser("to-dp", help="(eps, delta)-DP implied by rho-zCDP")
    a.add_argument("--rho", type=float, required=True)
    a.add_argument("--delta", type=float, required=True)
    a = acc.add_parser("compose", help="sum zCDP costs and convert to (eps, delta)-DP")
    a.add_argument("--rho", type=float, nargs="*", default=[])
    a.add_argument("--pure-eps", type=float, nargs="*", default=[],
                   help="pure-DP mechanisms, each counted as eps^2/2")
    a.add_argument("--gaussian", nargs="*", default=[], metavar="DELTA2:SIGMA",
                   help="Gaussian mechanisms given as sensitivity:sigma")
    a.add_argument("--delta", type=float, required=True)
    a = acc.add_parser("advanced", help="advanced composition of k (eps, delta)-DP mechanisms")
    a.add_argument("--eps", type=float, required=True)
    a.add_argument("--delta", type=float, default=0.0)
    a.add_argument("--k", type=int, required=True)
    a.add_argument("--delta-prime", type=float, required=True)

    p = sub.add_parser("trace", help="per-iteration diagnostic trace (not private)")
    _add_data_args(p)
    _add_optimizer_args(p)
    p.add_argument("--diagnostic", action="store_true",
                   help="required: acknowledges that the output is not private")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    return parser


def _load(args):
    schema = read_schema(args.schema) if args.schema else {}
    return load_and_preprocess(args.data, args.format, schema, add_intercept=not args.no_intercept)


def _config(args, **extra):
    return OptimizerConfig(eps_tot=args.eps, delta_tot=args.delta, splits=args.splits,
                           gamma=args.gamma, c_grad=args.c_grad, c_obj=args.c_obj,
                           batch_size=args.batch_size, **extra)


def _model(args):
    return LossModel("logistic" if args.model == "logreg" else "hinge", args.lam)


def _cmd_train(args):
    data = _load(args)
    result = dpagd_train(_model(args), data, _config(args), privacy.NoiseSource(args.seed))
    doc = {
        "method": result.method,
        "weights": [float(v) for v in result.weights],
        "iterations": result.iterations,
        "escalations": result.escalations,
        "rho_initial": result.rho_initial,
        "rho_final": result.rho_final,
        "wall_capped": result.wall_capped,
        "ledger": result.ledger,
    }
    Path(args.out).write_text(json.dumps(doc, indent=2) + "\n")
    print(f"{result.iterations} updates, {result.escalations} escalations -> {args.out}")


def _cmd_experiment(args):
    spec = ExperimentSpec.from_file(args.spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_experiment(spec)
    emit_results(rows, out / "summary.csv", out / "rows.csv")
    failed = sum(1 for r in rows if r.error)
    print(f"{len(rows)} cells ({failed} failed) -> {out}")


def _cmd_accountant(args):
    if args.action == "rho-from-dp":
        rho = privacy.rho_from_approx_dp(args.eps, args.delta)
        print(json.dumps({"rho": rho, "eps": args.eps, "delta": args.delta}))
    elif args.action == "to-dp":
        eps = privacy.approx_dp_from_rho(args.rho, args.delta)
        print(json.dumps({"eps": eps, "delta": args.delta, "rho": args.rho}))
    elif args.action == "compose":
        costs = list(args.rho) + [privacy.rho_of_pure_eps(e) for e in args.pure_eps]
        for item in args.gaussian:
            try:
                d2, sigma = (float(v) for v in item.split(":"))
            except ValueError:
                raise InvalidParameterError(f"expected DELTA2:SIGMA, got {item!r}") from None
            costs.append(privacy.rho_of_gaussian(d2, sigma))
        if not costs:
            raise InvalidParameterError("nothing to compose")
        rho = math.fsum(costs)
        eps = privacy.approx_dp_from_rho(rho, args.delta)
        print(json.dumps({"rho": rho, "eps": eps, "delta": args.delta, "mechanisms": len(costs)}))
    else:
        res = privacy.advanced_composition(args.eps, args.delta, args.k, args.delta_prime)
        print(json.dumps({"eps": res.epsilon, "delta": res.delta}))


def _cmd_trace(args):
    if not args.diagnostic:
        raise InvalidParameterError("trace prints non-private values; rerun with --diagnostic")
    data = _load(args)
    rows = trace_run(_model(args), data, _config(args), args.seed, diagnostic=True)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            fh.close()


COMMANDS = {"train": _cmd_train, "experiment": _cmd_experiment,
            "accountant": _cmd_accountant, "trace": _cmd_trace}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ARGS if exc.code else EXIT_OK
    try:
        COMMANDS[args.command](args)
    except (DataError, DimensionMismatchError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvalidParameterError as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except TrainerError as exc:
        print(f"trainer error: {exc}", file=sys.stderr)
        return EXIT_TRAIN
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
