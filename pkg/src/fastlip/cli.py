"""Command-line front end.

Subcommands::

    fastlip check  (--gallery NAME [params] | --file PATH) --cond COND [--report OUT]
    fastlip solve  SOURCE [--tol --max-iter --async --delay --drop --seed] [--out OUT --csv CSV]
    fastlip oracle SOURCE [--resolution R --mu-count K --levels L --seed S] [--out OUT]
    fastlip demo   {toy,power,control}

Exit codes: 0 pass/agreement, 2 failed verdict, 3 solver did not converge,
1 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import gallery, oracle, qc, relax, solver
from .core import FastLipError
from .problem_file import load_problem

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAIL = 2
EXIT_NOT_CONVERGED = 3


class UsageError(Exception):
    pass


def _dump(doc: dict, path) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _gallery_params(args) -> dict:
    params = {}
    if args.params:
        try:
            params.update(json.loads(args.params))
        except json.JSONDecodeError as exc:
            raise UsageError(f"--params is not valid JSON: {exc.msg}") from None
    for key in ("a", "b", "c_s", "c_u", "N", "kind", "s_init"):
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    if getattr(args, "random_w", False):
        params["random_w"] = True
        params["seed"] = args.seed
    return params


def load_source(args):
    """Returns ``(problem, partition_or_None, control_spec_or_None)``."""
    if (args.gallery is None) == (args.file is None):
        raise UsageError("give exactly one of --gallery or --file")
    if args.file is not None:
        return load_problem(args.file), None, None
    built = gallery.from_name(args.gallery, **_gallery_params(args))
    if isinstance(built, tuple):
        oc, problem, part = built
        return problem, part, oc
    return built, None, None


def _grid(args, problem):
    if args.per_axis is None and args.random is None:
        return qc.default_grid(problem.box, seed=args.seed)
    if args.per_axis is None:
        return qc.sample_random(problem.box, args.random, seed=args.seed)
    return qc.sample_grid(problem.box, args.per_axis, n_random=args.random or 0, seed=args.seed)


def cmd_check(args) -> int:
    problem, part, oc = load_source(args)
    cond = args.cond.lower()
    if cond == "result1":
        if oc is None:
            raise UsageError("--cond result1 needs --gallery control")
        r = gallery.result1_check(oc, n_sims=64, seed=args.seed)
        doc = {"schema_version": qc.SCHEMA_VERSION, "condition": "result1", "verdict": "pass" if r.passed else "fail",
               "margin": r.margin, "lhs": r.lhs, "rhs": r.rhs, "max_grad_s": r.max_grad_s,
               "max_grad_u": r.max_grad_u, "reason": r.reason, "pair_condition": r.pair_condition}
        _dump(doc, args.report)
        return EXIT_OK if r.passed else EXIT_FAIL
    grid = _grid(args, problem)
    if cond in ("fewer", "fewer-constraints"):
        if part is None:
            raise UsageError("--cond fewer needs a partitioned gallery problem (control)")
        rep = relax.check_fewer_constraints(problem, part, grid, z_seed=args.seed)
        doc = rep.to_dict()
    elif cond in ("missing", "missing-vars"):
        epi, epart = gallery.epigraph_transform(problem)
        rep = relax.check_missing_objective_vars(epi, epart, _grid(args, epi))
        doc = rep.to_dict()
    else:
        rep = qc.check_condition(problem, qc.Condition.parse(args.cond), grid)
        doc = rep.to_dict()
    _dump(doc, args.report)
    return EXIT_OK if rep.passed else EXIT_FAIL


def _x0(args, problem):
    if args.x0 is None:
        return None
    try:
        x0 = np.asarray(json.loads(args.x0), dtype=float)
    except (json.JSONDecodeError, ValueError):
        raise UsageError("--x0 must be a JSON list of numbers") from None
    if x0.shape != (problem.n,):
        raise UsageError(f"--x0 needs {problem.n} entries")
    return x0


def cmd_solve(args) -> int:
    problem, _, _ = load_source(args)
    x0 = _x0(args, problem)
    if args.use_async:
        cfg = solver.AsyncSimConfig(max_delay=args.delay, drop_prob=args.drop, seed=args.seed,
                                    max_steps=max(args.max_iter * problem.n, 1))
        res = solver.solve_async(problem, x0, cfg, tol=args.tol, record_trace=args.trace is not None)
    else:
        res = solver.solve_fixed_point(problem, x0, tol=args.tol, max_iter=args.max_iter)
    doc = {"schema_version": qc.SCHEMA_VERSION, "problem": problem.name, "mode": "async" if args.use_async else "sync"}
    cert_error = None
    if res.converged:
        try:
            res.certificate = solver.kkt_certificate(problem, res.xstar, seed=args.seed,
                                                     feas_tol=max(1e-6, 10 * args.tol))
        except FastLipError as exc:
            cert_error = f"{type(exc).__name__}: {exc}"
    doc.update(res.to_dict())
    if cert_error:
        doc["kkt_error"] = cert_error
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(res.residual_csv())
    if args.trace and res.trace:
        with open(args.trace, "w") as fh:
            fh.write(res.trace_csv())
    if not res.converged:
        doc["verdict"] = "not-converged"
        _dump(doc, args.out)
        return EXIT_NOT_CONVERGED
    ok = res.certificate is not None and res.certificate.passed
    doc["verdict"] = "pass" if ok else "certificate-failed"
    _dump(doc, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_oracle(args) -> int:
    problem, _, oc = load_source(args)
    doc = {"schema_version": qc.SCHEMA_VERSION, "problem": problem.name}
    if oc is not None:
        seq, cost = oracle.control_bruteforce(oc, args.levels)
        res = solver.solve_fixed_point(problem, tol=1e-12)
        u_fl = 0.0 - res.xstar[oc.N:].reshape(oc.N, oc.p) + 0.0
        step = float(np.max(oc.u_bound_batch(oc.simulate(np.zeros((oc.N, oc.p)))))) / (args.levels - 1)
        gap = float(np.max(np.abs(seq - u_fl)))
        agree = res.converged and gap <= step * (1 + 1e-9)
        doc.update({"oracle": "control_bruteforce", "levels": args.levels, "best_sequence": seq.ravel().tolist(),
                    "best_cost": cost, "fixed_point_control": u_fl.ravel().tolist(),
                    "fixed_point_cost": oc.total_cost(u_fl), "max_gap": gap, "lattice_step": step})
    else:
        res = solver.solve_fixed_point(problem, tol=1e-12)
        if not res.converged:
            doc.update({"verdict": "not-converged"})
            _dump(doc, args.out)
            return EXIT_NOT_CONVERGED
        xs = res.xstar
        pareto = oracle.pareto_check(problem, xs, args.resolution)
        spacing = (problem.box.upper - problem.box.lower) / (args.resolution - 1)
        mus = solver.simplex_weights(problem.m, args.mu_count, seed=args.seed)
        gaps = []
        for mu in mus:
            best = oracle.scalarized_grid_opt(problem, mu, args.resolution)
            gaps.append(float(np.max(np.abs(best - xs) / np.where(spacing > 0, spacing, 1.0))))
        agree = pareto and max(gaps) <= 1.0 + 1e-9
        doc.update({"oracle": "lattice", "resolution": args.resolution, "xstar": xs.tolist(), "pareto": pareto,
                    "mu": [m.tolist() for m in mus], "gaps_in_steps": gaps})
    doc["verdict"] = "agree" if agree else "disagree"
    _dump(doc, args.out)
    return EXIT_OK if agree else EXIT_FAIL


def cmd_demo(args) -> int:
    if args.name == "toy":
        for a, b in ((-0.3, 0.3), (0.5, 0.5), (1.0, 1.0)):
            p = gallery.make_toy(a, b)
            grid = qc.sample_grid(p.box, 33)
            verdicts = {str(c): qc.check_condition(p, c, grid).verdict for c in (qc.Q1, qc.Q2D, qc.QINFD)}
            print(f"toy a={a:+.2f} b={b:+.2f}  " + "  ".join(f"{k}:{v}" for k, v in verdicts.items()))
        res = solver.solve_fixed_point(gallery.make_toy(-0.3, 0.3), [1.0, 1.0], tol=1e-6)
        print(f"solve from (1,1): x* = {np.round(res.xstar, 6).tolist()} after {res.iterations} iterations")
    elif args.name == "power":
        p = gallery.make_power_control([[0.0, 0.2], [0.2, 0.0]], [1.0, 1.0])
        res = solver.solve_fixed_point(p)
        print(f"power control: p* = {np.round(res.xstar, 9).tolist()} (closed form [1.25, 1.25])")
    else:
        for b in (0.3, 0.5):
            oc, _, _ = gallery.make_optimal_control("linear", {"a": 0.5, "b": b, "c_s": 3, "c_u": 2}, N=3, w=[0, 0, 0])
            r = gallery.result1_check(oc)
            seq, cost = oracle.control_bruteforce(oc, 11)
            print(f"control b={b}: criterion {'pass' if r.passed else 'fail'} "
                  f"({r.lhs:.3f} vs {r.rhs:.3f}); brute force u = {seq.ravel().tolist()} cost {cost:.4f}")
    return EXIT_OK


def _add_source(p):
    p.add_argument("source", nargs="?", help="problem file (same as --file)")
    p.add_argument("--file", help="affine JSON problem file")
    p.add_argument("--gallery", choices=("toy", "power", "control"))
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--c-s", dest="c_s", type=float)
    p.add_argument("--c-u", dest="c_u", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--kind", choices=("linear", "nonlinear"))
    p.add_argument("--s-init", dest="s_init", type=float)
    p.add_argument("--random-w", dest="random_w", action="store_true",
                   help="draw control disturbances uniformly from [0,1] with --seed")
    p.add_argument("--params", help="extra gallery parameters as a JSON object")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fastlip", description="Fast-Lipschitz optimization toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="sampled qualifying-condition certificate")
    _add_source(c)
    c.add_argument("--cond", required=True, help="Q1, Q2, QINF, Q2D, QINFD, QK(k), OLD_I..III, fewer, missing, result1")
    c.add_argument("--per-axis", dest="per_axis", type=int)
    c.add_argument("--random", type=int, help="number of Monte Carlo points")
    c.add_argument("--report", help="output JSON path (default stdout)")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("solve", help="fixed-point solve with KKT certificate")
    _add_source(s)
    s.add_argument("--tol", type=float, default=solver.DEFAULT_TOL)
    s.add_argument("--max-iter", dest="max_iter", type=int, default=solver.DEFAULT_MAX_ITER)
    s.add_argument("--async", dest="use_async", action="store_true")
    s.add_argument("--delay", type=int, default=0)
    s.add_argument("--drop", type=float, default=0.0)
    s.add_argument("--x0", help="starting point as a JSON list")
    s.add_argument("--out", help="result JSON path (default stdout)")
    s.add_argument("--csv", help="residual trace CSV path")
    s.add_argument("--trace", help="asynchronous event trace CSV path")
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", help="compare the fixed point against brute force")
    _add_source(o)
    o.add_argument("--resolution", type=int, default=101)
    o.add_argument("--mu-count", dest="mu_count", type=int, default=5)
    o.add_argument("--levels", type=int, default=11)
    o.add_argument("--out", help="comparison JSON path (default stdout)")
    o.set_defaults(func=cmd_oracle)

    d = sub.add_parser("demo", help="short narrated runs of the gallery problems")
    d.add_argument("name", choices=("toy", "power", "control"))
    d.set_defaults(func=cmd_demo)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "source", None) is not None:
        if args.file is not None:
            print("fastlip: give the problem file once", file=sys.stderr)
            return EXIT_USAGE
        args.file = args.source
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"fastlip: {exc}", file=sys.stderr)
    except (OSError, qc.BudgetError) as exc:
        print(f"fastlip: {exc}", file=sys.stderr)
    except FastLipError as exc:
        print(f"fastlip: {type(exc).__name__}: {exc}", file=sys.stderr)
    except ValueError as exc:
        print(f"fastlip: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
