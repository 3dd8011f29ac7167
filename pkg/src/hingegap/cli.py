"""Command-line entry point: ``hingegap {train,lowerbound,project,project-struct}``.

Exit codes: 0 success/converged, 1 bad input or flags, 2 iteration cap,
3 infeasible projection, 4 failed lower-bound identity check.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys


from . import bundle, lowerbound, objective, pragam, projection, structproj
from .dataio import ParseError, load_libsvm
from .errors import DivergenceError, Infeasible, InvalidProblem, NoConvergence
from .trace import write_csv

EXIT_OK, EXIT_ERROR, EXIT_CAP, EXIT_INFEASIBLE, EXIT_CHECK = 0, 1, 2, 3, 4
SOLVERS = ("pragam", "pragam-b", "ls-bmrm", "qp-bmrm")



class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive(x):
    v = float(x)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {x!r}")
    return v


def build_parser():
    p = _Parser(prog="hingegap", description="Linear SVM solvers and projection tools.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a linear SVM and write a convergence trace")
    t.add_argument("--solver", choices=SOLVERS, required=True)
    t.add_argument("--data", required=True, help="training set in LIBSVM format")
    t.add_argument("--lambda", dest="lam", type=_positive, required=True)
    t.add_argument("--eps", type=_positive, default=1e-4)
    t.add_argument("--max-iter", type=int, default=10_000)
    t.add_argument("--trace", help="CSV output (one row per iteration)")
    t.add_argument("--test", help="held-out set in LIBSVM format")
    t.add_argument("--ref-opt", type=float, help="reference optimal J(w*) for err_t")
    t.add_argument("--seed", type=int, help="random dual start for pragam (default: centre)")
    t.add_argument("--lipschitz", choices=("power", "bound"), default="power")
    t.add_argument("--median", choices=projection.MEDIAN_METHODS, default="quickselect")
    t.add_argument("--save-model", help="write one weight per line, bias last")

    lb = sub.add_parser("lowerbound", help="run the Hadamard cutting-plane adversary")
    lb.add_argument("--d", type=int, required=True)
    lb.add_argument("--lambda", dest="lam", type=_positive, default=1.0)
    lb.add_argument("--t-max", type=int, required=True)
    lb.add_argument("--mode", choices=lowerbound.MODES, default="prescribed")
    lb.add_argument("--trace", help="CSV output")

    pr = sub.add_parser("project", help="solve a box + hyperplane projection given as JSON")
    pr.add_argument("--input", default="-", help="JSON file (default stdin)")
    pr.add_argument("--output", default="-", help="JSON file (default stdout)")
    pr.add_argument("--median", choices=projection.MEDIAN_METHODS, default="quickselect")

    ps = sub.add_parser("project-struct", help="project chain marginals given as JSON")
    ps.add_argument("--input", default="-")
    ps.add_argument("--output", default="-")
    ps.add_argument("--tol", type=_positive, default=1e-8)
    ps.add_argument("--max-sweeps", type=int, default=10_000)
    ps.add_argument("--clamp", action="store_true", help="clip tiny negatives and renormalize")
    return p


def _read_json(path):
    if path == "-":
        return json.load(sys.stdin)
    with open(path) as fh:
        return json.load(fh)


def _write_json(obj, path):
    text = json.dumps(obj, indent=None) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _open_out(path):
    return open(path, "w", newline="")


def cmd_train(args) -> int:
    ds = load_libsvm(args.data)
    test = load_libsvm(args.test) if args.test else None
    if test is not None and test.d != ds.d:
        # features unseen in training get weight zero
        d = max(ds.d, test.d)
        ds, test = ds.with_dimension(d), test.with_dimension(d)
    if args.max_iter < 1:
        raise UsageError("--max-iter must be at least 1")
    lam = args.lam
    state = {"best": math.inf, "model": None}

    def tracker(rec, model):
        if rec.J < state["best"]:
            state["best"], state["model"] = rec.J, model
        if args.ref_opt is not None:
            rec.err_t = state["best"] - args.ref_opt
        if test is not None:
            rec.test_acc = objective.accuracy(state["model"], test)

    if args.solver.startswith("pragam"):
        bias = args.solver == "pragam-b"
        L = pragam.estimate_lipschitz(ds, lam, args.lipschitz)
        model, dual, trace = pragam.pragam_run(
            ds, lam, bias=bias, eps=args.eps, max_iter=args.max_iter, lipschitz=L,
            init="center" if args.seed is None else "random", seed=args.seed,
            median=args.median, callback=tracker)
    else:
        variant = "ls" if args.solver == "ls-bmrm" else "qp"
        model, trace = bundle.bmrm_train(ds, lam, variant=variant, eps=args.eps,
                                         max_iter=args.max_iter, callback=tracker)
    best = state["model"] if state["model"] is not None else model

    if args.trace:
        with _open_out(args.trace) as fh:
            write_csv(trace, fh)
    if args.save_model:
        with open(args.save_model, "w") as fh:
            for v in best.w:
                fh.write(f"{v!r}\n")
            if best.bias is not None:
                fh.write(f"{best.bias!r}\n")

    last = trace[-1]
    parts = [f"solver={args.solver}", f"iterations={last.iter}", f"J={objective.primal_objective(best, ds)!r}"]
    if last.D is not None:
        parts += [f"D={last.D!r}", f"gap={last.gap!r}"]
    if last.eps_t is not None:
        parts.append(f"eps_t={last.eps_t!r}")
    parts.append(f"train_acc={objective.accuracy(best, ds):.6f}")
    if test is not None:
        parts.append(f"test_acc={objective.accuracy(best, test):.6f}")
    parts.append(f"converged={trace.converged}")
    print(" ".join(parts))
    return EXIT_OK if trace.converged else EXIT_CAP


def cmd_lowerbound(args) -> int:
    if args.t_max >= args.d // 2 or args.t_max < 1:
        raise UsageError(f"--t-max must satisfy 1 <= t_max < d/2 (got t_max={args.t_max}, d={args.d})")
    try:
        inst = lowerbound.build_instance(args.d, args.lam)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    records = lowerbound.run_adversary(inst, args.t_max, args.mode)
    if args.trace:
        with _open_out(args.trace) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("t", "Jt", "J", "eps_t", "delta_t", "column"))
            for r in records:
                w.writerow((r.t, repr(r.Jt), repr(r.J), repr(r.eps_t), repr(r.delta_t), r.column))
    last = records[-1]
    print(f"mode={args.mode} steps={len(records)} Jt={last.Jt!r} eps_t={last.eps_t!r} delta_t={last.delta_t!r}")
    if args.mode == "prescribed":
        fails = lowerbound.check_identities(inst, records)
        for f in fails:
            print(f"identity check failed: {f}", file=sys.stderr)
        if fails:
            return EXIT_CHECK
    return EXIT_OK


def cmd_project(args) -> int:
    doc = _read_json(args.input)
    try:
        p = projection.SeparableQpProblem.build(doc["d"], doc["m"], doc["l"], doc["u"],
                                                doc["sigma"], doc["z"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidProblem(f"bad problem JSON: {exc}") from None
    sol = projection.solve_separable_qp(p, median=args.median)
    _write_json({"alpha": sol.alpha.tolist(), "lambda": sol.lam, "kkt_residual": sol.kkt_residual}, args.output)
    return EXIT_OK


def cmd_project_struct(args) -> int:
    doc = _read_json(args.input)
    try:
        L, m = int(doc["L"]), int(doc["m"])
        p = structproj.SequenceProjectionProblem.build(L, m, doc["targets"], doc.get("d", 1.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidProblem(f"bad chain JSON: {exc}") from None
    res = structproj.project_sequence(p, tol=args.tol, max_sweeps=args.max_sweeps, clamp=args.clamp)
    _write_json({"alpha": res.alpha.tolist(),
                 "feasibility_residual": structproj.consistency_residual(res.alpha),
                 "min_entry": float(res.alpha.min()),
                 "sweeps": res.sweeps,
                 "dual_objective": res.dual_trace[-1]}, args.output)
    return EXIT_OK


COMMANDS = {"train": cmd_train, "lowerbound": cmd_lowerbound, "project": cmd_project,
            "project-struct": cmd_project_struct}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_ERROR
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ParseError, InvalidProblem, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (NoConvergence, DivergenceError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
