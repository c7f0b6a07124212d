"""Brute-force ground truth that shares no code path with the solvers.

Everything here enumerates: lattice points of the box for feasibility and
Pareto dominance, and control sequences for the optimal-control family.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import FastLipError, ProblemSpec
from .qc import BudgetError

LATTICE_MAX_DIM = 3
CONTROL_BUDGET = 10**7
VALUE_TOL = 1e-8
INEQ_TOL = 1e-12


class InfeasibleError(FastLipError, ValueError):
    """No lattice point satisfies the constraints."""


@dataclass
class FeasGrid:
    resolution: int
    points: np.ndarray
    values: np.ndarray  # objective values at ``points``
    feas_tol: float
    spacing: np.ndarray


def _lattice(problem: ProblemSpec, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    n = problem.n
    if n > LATTICE_MAX_DIM:
        raise BudgetError(f"lattice oracles support n <= {LATTICE_MAX_DIM}, got n={n}")
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(problem.box.lower, problem.box.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    spacing = (problem.box.upper - problem.box.lower) / (resolution - 1)
    return pts, spacing


def feasible_lattice(problem: ProblemSpec, resolution: int, feas_tol: Optional[float] = None) -> FeasGrid:
    """Lattice points satisfying every constraint.

    Inequalities are tested with a round-off slack only. Equalities get
    ``feas_tol`` (default 1.5 lattice spacings) since equality manifolds
    rarely pass through lattice points.
    """
    pts, spacing = _lattice(problem, resolution)
    if feas_tol is None:
        feas_tol = 1.5 * float(np.max(spacing))
    sign = 1.0 if problem.sense == "max" else -1.0
    ineq = list(problem.ineq_set)
    eq = list(problem.eq_set)
    keep = np.zeros(len(pts), dtype=bool)
    for r, x in enumerate(pts):
        fx = problem.f(x)
        ok = np.all(sign * (x[ineq] - fx[ineq]) <= INEQ_TOL) if ineq else True
        if ok and eq:
            ok = np.all(np.abs(x[eq] - fx[eq]) <= feas_tol)
        keep[r] = ok
    feas = pts[keep]
    values = np.array([problem.f0(x) for x in feas]).reshape(len(feas), problem.m)
    return FeasGrid(resolution, feas, values, feas_tol, spacing)


def find_dominating(problem: ProblemSpec, xstar, resolution: int = 101, value_tol: float = VALUE_TOL, feas_tol: Optional[float] = None):
    """A feasible lattice point strictly better than ``xstar``, or ``None``."""
    xstar = np.asarray(xstar, dtype=float)
    lat = feasible_lattice(problem, resolution, feas_tol)
    ref = problem.f0(xstar)
    diff = lat.values - ref if problem.sense == "max" else ref - lat.values
    dominated = np.all(diff >= -value_tol, axis=1) & np.any(diff > value_tol, axis=1)
    hits = np.flatnonzero(dominated)
    return lat.points[hits[0]] if hits.size else None


def pareto_check(problem: ProblemSpec, xstar, resolution: int = 101, value_tol: float = VALUE_TOL, feas_tol: Optional[float] = None) -> bool:
    """True iff no feasible lattice point dominates ``xstar``.

    ``xstar`` itself must be feasible; it need not be a fixed point, which
    lets the check also confirm that non-optimal points are dominated.
    """
    xstar = np.asarray(xstar, dtype=float)
    fx = problem.f(xstar)
    sign = 1.0 if problem.sense == "max" else -1.0
    tol = 1e-6
    ineq, eq = list(problem.ineq_set), list(problem.eq_set)
    if (ineq and np.any(sign * (xstar[ineq] - fx[ineq]) > tol)) or (eq and np.any(np.abs(xstar[eq] - fx[eq]) > tol)):
        raise ValueError("xstar is not feasible")
    return find_dominating(problem, xstar, resolution, value_tol, feas_tol) is None


def scalarized_grid_opt(problem: ProblemSpec, mu, resolution: int = 101, feas_tol: Optional[float] = None) -> np.ndarray:
    """Best feasible lattice point for the weighted objective ``mu . f0``.

    Ties go to the lexicographically smallest point.

    Raises:
        InfeasibleError: if no lattice point is feasible.
    """
    mu = np.asarray(mu, dtype=float).ravel()
    if mu.size != problem.m or np.any(mu <= 0):
        raise ValueError("mu must be a strictly positive vector of length m")
    lat = feasible_lattice(problem, resolution, feas_tol)
    if len(lat.points) == 0:
        raise InfeasibleError(f"{problem.name}: no feasible point on a {resolution}-per-axis lattice")
    score = lat.values @ mu
    if problem.sense == "min":
        score = -score
    best = np.max(score)
    tied = lat.points[score >= best - 1e-12 * max(1.0, abs(best))]
    order = np.lexsort(tied.T[::-1])
    return tied[order[0]]


def control_bruteforce(oc, u_levels: int) -> tuple[np.ndarray, float]:
    """Exhaustive search over per-step control lattices.

    Step ``i`` may use ``u = l * u_max(s_i) / (L - 1)`` for ``l = 0..L-1``,
    where ``u_max`` is evaluated at the current state (state-dependent bounds
    are honoured). Returns the cheapest ``(N, p)`` sequence and its cost;
    ties go to the lexicographically smallest level sequence.

    Raises:
        BudgetError: if ``u_levels ** (N * p)`` exceeds ``CONTROL_BUDGET``.
    """
    N, p = oc.N, oc.p
    L = int(u_levels)
    if L < 2:
        raise ValueError("u_levels must be >= 2")
    if float(L) ** (N * p) > CONTROL_BUDGET:
        raise BudgetError(f"{L}^{N * p} control sequences exceed the budget of {CONTROL_BUDGET:.0e}")
    frac = np.array(np.meshgrid(*[np.arange(L)] * p, indexing="ij")).reshape(p, -1).T / (L - 1)
    C = len(frac)
    # Breadth-first expansion: row order is lexicographic in the level indices.
    states = np.atleast_2d(np.asarray(oc.s_init, dtype=float))
    costs = np.zeros(1)
    for i in range(N):
        umax = np.atleast_2d(oc.u_bound_batch(states))
        u = (umax[:, None, :] * frac[None, :, :]).reshape(-1, p)
        s_rep = np.repeat(states, C, axis=0)
        costs = np.repeat(costs, C) + oc.stage_cost_batch(s_rep, u)
        if i < N - 1:
            states = oc.step_batch(s_rep, u, i)
    k = int(np.argmin(costs))
    digits = []
    for _ in range(N):
        k, d = divmod(k, C)
        digits.append(d)
    digits.reverse()
    s = np.atleast_1d(np.asarray(oc.s_init, dtype=float))
    seq = np.zeros((N, p))
    for i, d in enumerate(digits):
        seq[i] = np.atleast_2d(oc.u_bound_batch(s[None, :]))[0] * frac[d]
        if i < N - 1:
            s = oc.step_batch(s[None, :], seq[i][None, :], i)[0]
    return seq, float(np.min(costs))
