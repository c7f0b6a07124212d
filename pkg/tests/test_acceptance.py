"""Acceptance criteria, one test each, at their stated tolerances.

Each test records a one-line verdict that the terminal summary prints under
"acceptance criteria".
"""

import math
import time

import numpy as np
import pytest

from fastlip.core import inf_norm, one_norm, transpose_norm
from fastlip.gallery import make_optimal_control, make_power_control, make_toy, result1_check
from fastlip.oracle import control_bruteforce, pareto_check, scalarized_grid_opt
from fastlip.qc import IMPLICATIONS, Q1, Q2D, QINFD, check_condition, implication_audit, sample_grid, sample_random
from fastlip.solver import AsyncSimConfig, kkt_certificate, simplex_weights, solve_async, solve_fixed_point
from instances import random_power

BASE = {"a": 0.5, "b": 0.3, "c_s": 3.0, "c_u": 2.0}
POWER_SEEDS = range(50)


@pytest.fixture
def record(request):
    results = request.config.acceptance

    def _record(key, ok, detail):
        results[key] = (bool(ok), detail)
        assert ok, detail

    return _record


def test_ac01_toy_thresholds(record):
    cases = [((a, b), Q1, True) for a in (0, 0.25, 0.5, 0.9) for b in (0, 0.25, 0.5, 0.9)]
    cases += [((1.0, 1.0), Q1, False), ((-0.4, -0.4), Q2D, True), ((-0.6, -0.6), Q2D, False),
              ((-0.3, 0.3), QINFD, True), ((-0.4, 0.4), QINFD, False)]
    wrong, slowest = [], 0.0
    for (a, b), cond, expected in cases:
        p = make_toy(a, b)
        t0 = time.perf_counter()
        rep = check_condition(p, cond, sample_grid(p.box, 33))
        slowest = max(slowest, time.perf_counter() - t0)
        if rep.passed != expected:
            wrong.append(f"{cond}@({a},{b})")
    ok = not wrong and slowest < 1.0
    record(1, ok, f"toy thresholds: {len(cases) - len(wrong)}/{len(cases)} verdicts as expected, "
                  f"slowest check {slowest:.3f}s (< 1s)" + (f"; wrong: {wrong}" if wrong else ""))


def test_ac02_toy_convergence(record):
    res = solve_fixed_point(make_toy(-0.3, 0.3), [1.0, 1.0], tol=1e-6)
    r = np.asarray(res.residuals)
    ratios = r[3:] / r[2:-1]
    worst = float(ratios.max()) if ratios.size else 0.0
    ok = res.converged and res.iterations <= 10 and worst <= 0.35
    record(2, ok, f"toy from (1,1): {res.iterations} iterations (<= 10), max ratio after iter 2 = {worst:.3f} (<= 0.35)")


def test_ac03_power_closed_form(record):
    worst = 0.0
    for seed in POWER_SEEDS:
        G, eta = random_power(seed)
        assert np.max(np.abs(np.linalg.eigvals(G))) <= 0.8 + 1e-12
        xs = solve_fixed_point(make_power_control(G, eta), tol=1e-12).xstar
        worst = max(worst, float(np.max(np.abs(xs - np.linalg.solve(np.eye(len(eta)) - G, eta)))))
    record(3, worst <= 1e-8, f"power control, 50 instances: max |x* - (I-G)^-1 eta| = {worst:.2e} (<= 1e-8)")


def test_ac04_async_equivalence(record):
    worst, failed = 0.0, 0
    for seed in POWER_SEEDS:
        G, eta = random_power(seed)
        p = make_power_control(G, eta)
        sync = solve_fixed_point(p, tol=1e-12).xstar
        for run in range(3):
            res = solve_async(p, None, AsyncSimConfig(max_delay=5, drop_prob=0.2, seed=1000 * seed + run),
                              tol=1e-10, record_trace=False)
            failed += not res.converged
            worst = max(worst, float(np.max(np.abs(res.xstar - sync))))
    ok = failed == 0 and worst <= 1e-6
    record(4, ok, f"async B=5 drop=0.2, 150 runs: {failed} non-convergent, max gap to sync {worst:.2e} (<= 1e-6)")


def _passing_gallery():
    out = []
    for a, b in [(-0.3, 0.3), (0.5, 0.5), (0.9, 0.9), (-0.4, -0.4), (0.0, 0.0), (0.25, 0.9)]:
        out.append((f"toy({a},{b})", make_toy(a, b)))
    for seed in POWER_SEEDS:
        out.append((f"power#{seed}", make_power_control(*random_power(seed))))
    for kind in ("linear", "nonlinear"):
        w = np.random.default_rng(0).uniform(0, 1, 20)
        _, P, _ = make_optimal_control(kind, BASE, N=20, s_init=1.0, w=w)
        out.append((f"control-{kind}", P))
    return out


def test_ac05_kkt(record):
    worst, bad = math.inf, []
    count = 0
    for name, p in _passing_gallery():
        xs = solve_fixed_point(p, tol=1e-12).xstar
        cert = kkt_certificate(p, xs, n_mu=100, seed=0)
        count += 1
        worst = min(worst, cert.min_lambda)
        if not cert.passed:
            bad.append(name)
    record(5, not bad, f"KKT on {count} passing instances x 100 mu: min lambda = {worst:.3e} (> 1e-10)"
                       + (f"; failed: {bad}" if bad else ""))


def test_ac06_implication_audit(record):
    problems = [make_toy(a, b) for a, b in [(-0.3, 0.3), (0.5, 0.5), (-0.4, -0.4), (0.9, -0.2), (1.0, 1.0)]]
    problems += [make_power_control(*random_power(s)) for s in range(5)]
    violations, pairs = [], 0
    for p in problems:
        grid = sample_grid(p.box, 33) if p.n <= 2 else sample_random(p.box, 400, seed=0)
        pairs += len(grid) * len(IMPLICATIONS)
        violations += implication_audit(p, grid)
    ok = not violations and pairs >= 10_000
    record(6, ok, f"implication audit: {len(violations)} violations over {pairs} (point, condition) pairs")


def test_ac07_pareto_oracle(record):
    problems = [make_toy(-0.3, 0.3), make_toy(0.5, 0.5),
                make_power_control([[0, 0.2], [0.2, 0]], [1, 1]),
                make_power_control([[0, 0.5], [0.1, 0]], [0.4, 1.3])]
    worst_steps, not_pareto = 0.0, 0
    for k, p in enumerate(problems):
        xs = solve_fixed_point(p, tol=1e-12).xstar
        not_pareto += not pareto_check(p, xs, 101)
        step = (p.box.upper - p.box.lower) / 100
        for mu in simplex_weights(p.m, 5, seed=k):
            best = scalarized_grid_opt(p, mu, 101)
            worst_steps = max(worst_steps, float(np.max(np.abs(best - xs) / step)))
    ok = not_pareto == 0 and worst_steps <= 1.0 + 1e-9
    record(7, ok, f"Pareto oracle: {not_pareto} dominated fixed points, scalarized optimum within "
                  f"{worst_steps:.3f} lattice steps (<= 1)")


def test_ac08_result1(record):
    oc_pass, _, _ = make_optimal_control("linear", BASE, N=20)
    oc_fail, _, _ = make_optimal_control("linear", dict(BASE, b=0.5), N=20)
    r_pass, r_fail = result1_check(oc_pass), result1_check(oc_fail)
    oc3, _, _ = make_optimal_control("linear", BASE, N=3, s_init=1.0, w=[0, 0, 0])
    seq, cost = control_bruteforce(oc3, 11)
    ok = (r_pass.passed and r_pass.margin >= 0.06 and not r_fail.passed
          and np.all(seq == 0) and abs(cost - 5.25) <= 1e-9)
    record(8, ok, f"zero-control criterion: b=0.3 {'pass' if r_pass.passed else 'fail'} margin {r_pass.margin:.4f} (>= 0.06), "
                  f"b=0.5 {'pass' if r_fail.passed else 'fail'}; brute force N=3 L=11 u={seq.ravel().tolist()} "
                  f"cost {cost:.10f}")


def test_ac09_nonlinear_gradient_bound(record):
    lo, hi = math.inf, -math.inf
    for b in (0.3, 0.5):
        w = np.random.default_rng(0).uniform(0, 1, 20)
        oc, _, _ = make_optimal_control("nonlinear", dict(BASE, b=b), N=20, s_init=1.0, w=w)
        S, U = oc.random_rollouts(64, seed=0)
        vals = [float(oc.grad_s(s, u)[0, 0]) for s, u in zip(S, U)]
        lo, hi = min(lo, min(vals)), max(hi, max(vals))
    a = BASE["a"]
    record(9, lo >= 0 and hi <= a, f"nonlinear control, 64 rollouts: grad_s f in [{lo:.4f}, {hi:.4f}] within [0, {a}]")


def test_ac10_norm_axioms(record):
    rng = np.random.default_rng(0)
    tol = 1e-12
    bad = []
    for trial in range(1000):
        n = int(rng.integers(1, 7))
        A = rng.normal(size=(n, n)) * rng.uniform(0.01, 10)
        B = rng.normal(size=(n, n)) * rng.uniform(0.01, 10)
        c = float(rng.normal() * 5)
        for base in ("inf", "one"):
            nA, nB = transpose_norm(A, base), transpose_norm(B, base)
            checks = {
                "nonneg": nA >= 0,
                "definite": transpose_norm(np.zeros_like(A), base) == 0 and nA > 0,
                "homogeneous": abs(transpose_norm(c * A, base) - abs(c) * nA) <= tol * abs(c) * nA,
                "triangle": transpose_norm(A + B, base) <= (nA + nB) * (1 + tol),
                "submultiplicative": transpose_norm(A @ B, base) <= nA * nB * (1 + tol),
            }
            bad += [(trial, base, k) for k, v in checks.items() if not v]
        # transposition swaps the two base norms
        if transpose_norm(A, "inf") != one_norm(A) or transpose_norm(A, "one") != inf_norm(A):
            bad.append((trial, "swap", "identity"))
    record(10, not bad, f"norm axioms on 1000 random pairs x 2 base norms: {len(bad)} violations (rel tol 1e-12)")
