"""``tropdiv`` command line.

Exit codes: 0 success, 1 unexpected failure, 2 unreadable or malformed
input, 3 non-integer degrees where lattice division needs integers,
4 invalid compression fraction.
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import json
import logging
import sys

import numpy as np

from . import io
from .compress import CompressionReport, compress, iterative_compress
from .data import (DataFormatError, Dataset, load_csv, load_idx, sample_subset,
                   synth_gaussians)
from .division import divide, divide_multi, pointwise_gap, verify_inequality
from .exceptions import LatticeError
from .ggp import GGPDivisionProblem, r_sweep, solve_division_ggp
from .train import TrainConfig, accuracy, init_net, train

log = logging.getLogger("tropdiv")

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_LATTICE, EXIT_FRACTION = 0, 1, 2, 3, 4


class UsageError(Exception):
    def __init__(self, message, code=EXIT_INPUT):
        super().__init__(message)
        self.code = code


def load_data(source: str) -> Dataset:
    """Resolve a data source string.

    ``path.csv``; ``idx:IMAGES:LABELS`` optionally followed by ``:A,B`` (a
    digit pair) or ``:evenodd``; ``synth:n=400,d=2,sep=4,seed=0``.
    """
    try:
        if source.startswith("synth:"):
            opts = dict(kv.split("=", 1) for kv in source[6:].split(",") if kv)
            return synth_gaussians(int(opts.get("n", 400)), int(opts.get("d", 2)),
                                   float(opts.get("sep", 4.0)), int(opts.get("seed", 0)))
        if source.startswith("idx:"):
            parts = source[4:].split(":")
            if len(parts) not in (2, 3):
                raise UsageError(f"bad idx source {source!r}; expected idx:IMAGES:LABELS[:A,B|:evenodd]")
            digits, even_odd = None, False
            if len(parts) == 3:
                if parts[2] == "evenodd":
                    even_odd = True
                else:
                    digits = tuple(int(v) for v in parts[2].split(","))
                    if len(digits) != 2:
                        raise UsageError(f"digit filter needs two classes, got {parts[2]!r}")
            return load_idx(parts[0], parts[1], digits=digits, even_odd=even_odd)
        return load_csv(source)
    except (OSError, DataFormatError, ValueError) as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"cannot load data {source!r}: {exc}") from None


def _read_poly(path):
    try:
        return io.read_polynomial(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _read_model(path):
    try:
        return io.read_model(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _grid(dim, n_per_axis, lo=-5.0, hi=5.0):
    axes = [np.linspace(lo, hi, n_per_axis)] * dim
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)


def _grid_size(dim):
    return {1: 1001, 2: 101}.get(dim, 11)


def cmd_divide(args):
    p, d = _read_poly(args.dividend), _read_poly(args.divisor)
    result = divide(p, d, workers=args.workers)
    points = _grid(p.dim, _grid_size(p.dim))
    gap = float(pointwise_gap(p, result.quotient, d, points).max()) if result.shifts else float("nan")
    holds = verify_inequality(p, result.quotient, d, result.remainder, points=points)
    io.write_json(args.out, io.division_to_json(result))
    print(f"exact: {str(result.exact).lower()}")
    print(f"max gap p - (q + d) on grid: {gap:.12g}")
    print(f"p >= max(q + d, r) on grid: {str(holds).lower()}")
    return EXIT_OK


def cmd_divide_multi(args):
    p = _read_poly(args.dividend)
    divisors = [_read_poly(path) for path in args.divisors]
    results, remainder = divide_multi(p, divisors, workers=args.workers)
    doc = {"quotients": [io.polynomial_to_json(r.quotient) for r in results],
           "exact": [bool(r.exact) for r in results],
           "remainder": io.polynomial_to_json(remainder)}
    io.write_json(args.out, doc)
    print(f"divisors: {len(results)}, remainder terms: {len(remainder)}")
    return EXIT_OK


def cmd_ggp_divide(args):
    p, d = _read_poly(args.dividend), _read_poly(args.divisor)
    try:
        problem = GGPDivisionProblem.from_polynomials(p, d)
    except ValueError as exc:
        if isinstance(exc, LatticeError):
            raise
        raise UsageError(str(exc)) from None
    q = solve_division_ggp(problem)
    reference = divide(p, d).quotient
    diff = max(abs(q.coeffs[c] - reference.coeffs[c]) for c in q.keys())
    io.write_json(args.out, {"quotient": io.polynomial_to_json(q),
                             "max_abs_diff_vs_erosion": diff})
    print(f"max |q_ggp - q_erosion|: {diff:.3g}")
    return EXIT_OK


def _parse_floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_direct_approx(args):
    p, d = _read_poly(args.dividend), _read_poly(args.divisor)
    Rs = _parse_floats(args.ggp_r_sweep)
    if not Rs or any(R <= 0 for R in Rs):
        raise UsageError("--ggp-r-sweep needs positive values")
    try:
        results, best = r_sweep(p, d, Rs, workers=args.workers, beta=args.ggp_beta,
                                max_iters=args.ggp_max_iters)
    except ValueError as exc:
        if isinstance(exc, LatticeError):
            raise
        raise UsageError(str(exc)) from None
    runs = []
    for R, res in zip(Rs, results):
        runs.append({"R": R, "goal0": res.goal0, "goal2": res.goal2, "max_xi": res.max_xi,
                     "converged": bool(res.converged), "iterations": len(res.objective_trace),
                     "quotient": io.polynomial_to_json(res.quotient)})
    doc = {"runs": runs, "best": {"R": Rs[results.index(best)], "goal0": best.goal0,
                                  "quotient": io.polynomial_to_json(best.quotient)}}
    io.write_json(args.out, doc)
    for run in runs:
        print(f"R={run['R']:g} goal0={run['goal0']:.6g} max_xi={run['max_xi']:.9g}")
    return EXIT_OK


def _train_config(args, epochs=None, seed=None):
    return TrainConfig(epochs=args.epochs if epochs is None else epochs,
                       batch_size=args.batch_size, learning_rate=args.lr,
                       seed=args.seed if seed is None else seed, patience=args.patience)


def cmd_train(args):
    data = load_data(args.data)
    net = init_net(data.n_features, args.hidden, args.seed)
    net = train(net, data, _train_config(args))
    io.write_json(args.out, io.model_to_json(net))
    print(f"train accuracy: {accuracy(net, data):.4f}")
    if args.test:
        print(f"test accuracy: {accuracy(net, load_data(args.test)):.4f}")
    return EXIT_OK


def _check_fraction(f):
    if not 0 < f <= 1:
        raise UsageError(f"--fraction must be in (0, 1], got {f}", EXIT_FRACTION)


def _harvest_sample(data, subset, seed):
    if subset < 1:
        raise UsageError("--subset must be positive")
    if subset > len(data):
        log.warning("--subset %d exceeds the %d available samples; using all of them",
                    subset, len(data))
    return sample_subset(data, subset, seed).features


def cmd_compress(args):
    _check_fraction(args.fraction)
    net = _read_model(args.model)
    data = load_data(args.data)
    evaluation = load_data(args.test) if args.test else data
    X = _harvest_sample(data, args.subset, args.seed)
    try:
        small, report = compress(net, X, args.fraction, args.seed, eval_data=evaluation)
    except ValueError as exc:
        raise UsageError(str(exc), EXIT_FRACTION) from None
    report.dataset = evaluation.tag or data.tag
    io.write_json(args.out, io.model_to_json(small))
    if args.report:
        io.write_json(args.report, report.to_dict())
    print(f"neurons: {report.original_neurons} -> {report.compressed_neurons}")
    print(f"accuracy before: {report.accuracy_before:.4f}")
    print(f"accuracy after: {report.accuracy_after:.4f}")
    return EXIT_OK


def cmd_iterate(args):
    net = _read_model(args.model)
    data = load_data(args.data)
    evaluation = load_data(args.test) if args.test else data
    X = _harvest_sample(data, args.subset, args.seed)
    if args.halvings < 1:
        raise UsageError("--halvings must be at least 1")
    try:
        small, reports = iterative_compress(net, data, X, args.halvings,
                                            _train_config(args), seed=args.seed,
                                            eval_data=evaluation)
    except ValueError as exc:
        raise UsageError(str(exc), EXIT_FRACTION) from None
    for rep in reports:
        rep.dataset = evaluation.tag or data.tag
    io.write_json(args.out, io.model_to_json(small))
    if args.report:
        final = reports[-1]
        final.fraction = small.n_hidden / net.n_hidden
        final.original_neurons = net.n_hidden
        final.extra = {**final.extra, "iterations": [r.to_dict() for r in reports[:-1]]}
        io.write_json(args.report, final.to_dict())
    for rep in reports:
        print(f"iteration {rep.extra['iteration']}: {rep.compressed_neurons} neurons, "
              f"accuracy {rep.accuracy_after:.4f}")
    return EXIT_OK


def cmd_eval(args):
    net = _read_model(args.model)
    data = load_data(args.data)
    if data.n_features != net.n_features:
        raise UsageError(f"data has {data.n_features} features, model expects {net.n_features}")
    print(json.dumps({"dataset": data.tag, "n": len(data), "neurons": net.n_hidden,
                      "accuracy": accuracy(net, data)}, sort_keys=True))
    return EXIT_OK


def report_table(reports) -> str:
    """CSV with one row per (dataset, fraction) and one column per variant."""
    variants = sorted({r.variant for r in reports})
    rows = {}
    for r in reports:
        key = (r.dataset, r.fraction)
        row = rows.setdefault(key, {"original": r.accuracy_before})
        row[r.variant] = r.accuracy_after
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset", "fraction", "original", *variants])
    for (dataset, fraction) in sorted(rows, key=lambda k: (k[0], -k[1])):
        row = rows[(dataset, fraction)]
        cells = [row.get("original"), *(row.get(v) for v in variants)]
        writer.writerow([dataset, f"{fraction:g}", *("" if c is None else f"{c:.4f}" for c in cells)])
    return buf.getvalue()


def cmd_report(args):
    if not args.reports:
        raise UsageError("report needs at least one report file")
    reports = []
    for path in args.reports:
        try:
            reports.append(CompressionReport.from_dict(io.read_json(path)))
        except (OSError, TypeError, ValueError) as exc:
            raise UsageError(f"{path}: {exc}") from None
    sys.stdout.write(report_table(reports))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="tropdiv", description="Tropical polynomial division "
                                     "and tropical compression of two-layer ReLU classifiers.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def poly_pair(name, help_text, func):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("dividend", help="polynomial JSON")
        sp.add_argument("divisor", help="polynomial JSON")
        sp.add_argument("--out", required=True, help="result JSON")
        sp.add_argument("--workers", type=int, default=1, help="threads for per-shift work")
        sp.set_defaults(func=func)
        return sp

    poly_pair("divide", "divide one polynomial JSON by another", cmd_divide)
    poly_pair("ggp-divide", "solve the division as a geometric program", cmd_ggp_divide)
    sp = poly_pair("direct-approx", "relaxed division over a sweep of R", cmd_direct_approx)
    sp.add_argument("--ggp-r-sweep", default="1e0,1e1,1e2,1e3,1e4,1e5,1e6",
                    help="comma-separated slack penalties")
    sp.add_argument("--ggp-beta", type=float, default=50.0, help="initial smoothing sharpness")
    sp.add_argument("--ggp-max-iters", type=int, default=4000)

    sp = sub.add_parser("divide-multi", help="divide by several polynomials")
    sp.add_argument("dividend")
    sp.add_argument("divisors", nargs="+")
    sp.add_argument("--out", required=True)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_divide_multi)

    def training_flags(sp, epochs):
        sp.add_argument("--epochs", type=int, default=epochs)
        sp.add_argument("--batch-size", type=int, default=32)
        sp.add_argument("--lr", type=float, default=0.1)
        sp.add_argument("--patience", type=int, default=None,
                        help="stop after this many epochs without validation improvement")

    sp = sub.add_parser("train", help="train a two-layer ReLU classifier")
    sp.add_argument("data", help="CSV path, idx:IMAGES:LABELS[:A,B|:evenodd] or synth:k=v,...")
    sp.add_argument("--hidden", type=int, default=200)
    sp.add_argument("--test", help="held-out data source for reporting accuracy")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    training_flags(sp, 30)
    sp.set_defaults(func=cmd_train)

    for name, func, help_text in (("compress", cmd_compress, "compress a trained model"),
                                  ("iterate", cmd_iterate, "halve and retrain repeatedly")):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("model", help="model JSON")
        sp.add_argument("data", help="data source used for vertex harvesting")
        sp.add_argument("--test", help="data source for accuracy in the report")
        sp.add_argument("--subset", type=int, default=2000,
                        help="harvest sample size, clamped to the data size")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", required=True)
        sp.add_argument("--report", help="compression report JSON")
        sp.set_defaults(func=func)
        if name == "compress":
            sp.add_argument("--fraction", type=float, required=True,
                            help="kept share of hidden neurons, in (0, 1]")
        else:
            sp.add_argument("--halvings", type=int, default=2)
            training_flags(sp, 10)

    sp = sub.add_parser("eval", help="accuracy of a model on a dataset")
    sp.add_argument("model")
    sp.add_argument("data")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("report", help="tabulate compression reports as CSV")
    sp.add_argument("reports", nargs="*")
    sp.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except io.SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except LatticeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LATTICE


if __name__ == "__main__":
    sys.exit(main())
