"""Fixed-point engines and dual certificates.

``solve_fixed_point`` iterates ``x <- f(x)`` synchronously. ``solve_async``
simulates a totally asynchronous network: components update one at a time
from neighbour values that may be stale or lost. ``kkt_certificate`` checks
that the scalarised KKT multipliers at the fixed point are strictly positive.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import EPS_POS, EvaluationError, FastLipError, ProblemSpec, inf_norm, one_norm
from .qc import _as_grid

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 10_000
COND_LIMIT = 1e12


class RegularityError(FastLipError, np.linalg.LinAlgError):
    """``I - grad f(x)`` is singular or too ill-conditioned to trust."""


class NotFixedPointError(FastLipError, ValueError):
    pass


class StarvationError(FastLipError, RuntimeError):
    """A component went un-updated past the starvation cap."""


@dataclass
class SolveResult:
    xstar: np.ndarray
    iterations: int
    residuals: list
    contraction_estimate: float
    converged: bool
    clamp_events: int = 0
    iterates: list = field(default_factory=list, repr=False)
    trace: list = field(default_factory=list, repr=False)
    certificate: Optional["KktCertificate"] = None

    def residual_csv(self) -> str:
        """CSV with columns ``iter, residual, x_1 .. x_n``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = len(self.xstar)
        w.writerow(["iter", "residual"] + [f"x_{i + 1}" for i in range(n)])
        for k, (r, x) in enumerate(zip(self.residuals, self.iterates)):
            w.writerow([k, repr(float(r))] + [repr(float(v)) for v in x])
        return buf.getvalue()

    def trace_csv(self) -> str:
        """Asynchronous event trace: ``step, component, age_vector, value``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "component", "age_vector", "value"])
        for ev in self.trace:
            w.writerow([ev.step, ev.component + 1, ";".join(str(a) for a in ev.ages), repr(float(ev.value))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        d = {
            "xstar": [float(v) for v in self.xstar],
            "iterations": self.iterations,
            "converged": self.converged,
            "final_residual": float(self.residuals[-1]),
            "contraction_estimate": float(self.contraction_estimate),
            "clamp_events": self.clamp_events,
        }
        if self.certificate is not None:
            d["kkt"] = self.certificate.to_dict()
        return d


def _residual(problem: ProblemSpec, x) -> float:
    return float(np.max(np.abs(x - problem.f(x))))


def _ratio_max(residuals) -> float:
    best = 0.0
    for a, b in zip(residuals, residuals[1:]):
        if a > 0:
            best = max(best, b / a)
    return best


def _clamp(problem, x, counter):
    y = problem.box.clip(x)
    if not np.array_equal(y, x):
        counter[0] += 1
    return y


def solve_fixed_point(problem: ProblemSpec, x0=None, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> SolveResult:
    """Synchronous iteration ``x <- f(x)`` projected onto the box.

    Stops once ``||x - f(x)||_inf <= tol``. Running out of iterations is not
    an error: the result comes back with ``converged=False``.

    Raises:
        EvaluationError: if the constraint map produces non-finite values.
    """
    x = problem.box.lower.copy() if x0 is None else np.asarray(x0, dtype=float).copy()
    if not problem.box.contains(x, tol=1e-12):
        raise ValueError("x0 must lie in the bounding box")
    clamps = [0]
    fx = problem.f(x)
    residuals = [float(np.max(np.abs(x - fx)))]
    iterates = [x.copy()]
    k = 0
    while residuals[-1] > tol and k < max_iter:
        x = _clamp(problem, fx, clamps)
        fx = problem.f(x)
        residuals.append(float(np.max(np.abs(x - fx))))
        iterates.append(x.copy())
        k += 1
    if clamps[0]:
        logger.warning("%s: %d iterate(s) left the box and were clamped", problem.name, clamps[0])
    return SolveResult(
        xstar=x,
        iterations=k,
        residuals=residuals,
        contraction_estimate=_ratio_max(residuals),
        converged=residuals[-1] <= tol,
        clamp_events=clamps[0],
        iterates=iterates,
    )


def solve_gauss_seidel(problem: ProblemSpec, x0=None, tol: float = DEFAULT_TOL, max_sweeps: int = DEFAULT_MAX_ITER) -> SolveResult:
    """In-place sweeps updating components in index order.

    Residuals and iterates are recorded after every single-component update,
    which makes the history directly comparable with ``solve_async``.
    """
    x = problem.box.lower.copy() if x0 is None else np.asarray(x0, dtype=float).copy()
    clamps = [0]
    residuals = [_residual(problem, x)]
    iterates = [x.copy()]
    steps = 0
    while residuals[-1] > tol and steps < max_sweeps * problem.n:
        i = steps % problem.n
        x[i] = problem.f(x)[i]
        x = _clamp(problem, x, clamps)
        steps += 1
        residuals.append(_residual(problem, x))
        iterates.append(x.copy())
    return SolveResult(x, steps, residuals, _ratio_max(residuals), residuals[-1] <= tol, clamps[0], iterates)


@dataclass
class AsyncSimConfig:
    """Delay and loss model for the asynchronous simulator.

    Attributes:
        max_delay: Largest age (in steps) of a value read over a link.
        drop_prob: Probability a read is lost; the link then re-delivers
            the last value it delivered.
        seed: Seed for every random draw in the simulation.
        schedule: ``"round-robin"`` or ``"random-component"``.
        max_steps: Budget of single-component updates.
    """

    max_delay: int = 0
    drop_prob: float = 0.0
    seed: int = 0
    schedule: str = "round-robin"
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.max_delay < 0:
            raise ValueError("max_delay must be >= 0")
        if not 0.0 <= self.drop_prob < 1.0:
            raise ValueError("drop_prob must lie in [0, 1)")
        if self.schedule not in ("round-robin", "random-component"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass(frozen=True)
class AsyncEvent:
    step: int
    component: int
    ages: tuple
    value: float


def solve_async(problem: ProblemSpec, x0=None, cfg: Optional[AsyncSimConfig] = None, tol: float = DEFAULT_TOL, record_trace: bool = True) -> SolveResult:
    """Deterministic event-loop simulation of asynchronous fixed-point updates.

    At each step one component ``i`` recomputes ``f_i`` from its view of the
    others. Each link ``j -> i`` delivers the value ``j`` held ``d`` steps ago,
    with ``d`` uniform on ``{0..max_delay}``; with probability ``drop_prob``
    the delivery is lost and the link repeats its previous delivery. The run
    ends when the true state's residual drops to ``tol``.
    """
    cfg = cfg or AsyncSimConfig()
    n = problem.n
    rng = np.random.default_rng(cfg.seed)
    x = problem.box.lower.copy() if x0 is None else np.asarray(x0, dtype=float).copy()
    if not problem.box.contains(x, tol=1e-12):
        raise ValueError("x0 must lie in the bounding box")
    B = cfg.max_delay
    history = deque([x.copy()], maxlen=B + 1)  # history[-1 - d] = state d steps ago
    delivered = np.tile(x, (n, 1))  # delivered[i, j]: last value of j seen by i
    delivered_age = np.zeros((n, n), dtype=int)
    last_update = np.zeros(n, dtype=int)
    cap = n * max(B, 1)
    clamps = [0]
    residuals = [_residual(problem, x)]
    iterates = [x.copy()]
    trace = []
    step = 0
    while residuals[-1] > tol and step < cfg.max_steps:
        if cfg.schedule == "round-robin":
            i = step % n
        else:
            starving = np.flatnonzero(step - last_update >= cap)
            i = int(starving[0]) if starving.size else int(rng.integers(n))
        ages = rng.integers(0, B + 1, size=n)
        drops = rng.random(n) < cfg.drop_prob
        for j in range(n):
            if j == i:
                continue
            if drops[j]:
                delivered_age[i, j] += 1
                continue
            d = min(int(ages[j]), len(history) - 1)
            delivered[i, j] = history[-1 - d][j]
            delivered_age[i, j] = d
        view = delivered[i].copy()
        view[i] = x[i]
        value = float(problem.f(view)[i])
        if not math.isfinite(value):
            raise EvaluationError("constraint map returned a non-finite value")
        x[i] = min(max(value, problem.box.lower[i]), problem.box.upper[i])
        if x[i] != value:
            clamps[0] += 1
        last_update[i] = step + 1
        step += 1
        if np.any(step - last_update > cap + n):
            raise StarvationError("a component exceeded the starvation cap")
        history.append(x.copy())
        residuals.append(_residual(problem, x))
        iterates.append(x.copy())
        if record_trace:
            age_vec = tuple(0 if j == i else int(delivered_age[i, j]) for j in range(n))
            trace.append(AsyncEvent(step, i, age_vec, x[i]))
    return SolveResult(
        xstar=x,
        iterations=step,
        residuals=residuals,
        contraction_estimate=_ratio_max(residuals),
        converged=residuals[-1] <= tol,
        clamp_events=clamps[0],
        iterates=iterates,
        trace=trace,
    )


@dataclass
class KktCertificate:
    mu_samples: list
    lambdas: list
    min_lambda: float
    condition_number: float

    @property
    def passed(self) -> bool:
        return self.min_lambda > EPS_POS

    def to_dict(self) -> dict:
        return {
            "n_mu": len(self.mu_samples),
            "min_lambda": float(self.min_lambda),
            "condition_number": float(self.condition_number),
            "passed": self.passed,
        }


def simplex_weights(m: int, count: int, seed: int = 0) -> np.ndarray:
    """``count`` strictly positive weight vectors summing to one."""
    rng = np.random.default_rng(seed)
    if m == 1:
        return np.ones((count, 1))
    mus = rng.dirichlet(np.ones(m), size=count)
    while np.any(mus <= 0):
        bad = np.any(mus <= 0, axis=1)
        mus[bad] = rng.dirichlet(np.ones(m), size=int(bad.sum()))
    return mus


def kkt_certificate(problem: ProblemSpec, xstar, n_mu: int = 100, seed: int = 0, feas_tol: float = 1e-6) -> KktCertificate:
    """Solve ``(I - grad f(x*)) lambda = grad f0(x*) mu`` for seeded weights.

    Raises:
        NotFixedPointError: if ``xstar`` is not a fixed point within tolerance.
        RegularityError: if ``I - grad f(x*)`` has condition number above 1e12.
    """
    xstar = np.asarray(xstar, dtype=float)
    res = _residual(problem, xstar)
    if res > feas_tol:
        raise NotFixedPointError(f"residual {res:.3g} exceeds {feas_tol:g}")
    M = np.eye(problem.n) - problem.grad_f(xstar)
    cond = float(np.linalg.cond(M))
    if not math.isfinite(cond) or cond > COND_LIMIT:
        raise RegularityError(f"I - grad f(x*) is ill-conditioned (cond = {cond:.3g})")
    G0 = problem.grad_f0(xstar)
    mus = simplex_weights(problem.m, n_mu, seed)
    lambdas = np.linalg.solve(M, (G0 @ mus.T)).T
    return KktCertificate(list(mus), list(lambdas), float(np.min(lambdas)), cond)


def estimate_contraction(problem: ProblemSpec, grid, norms=("inf", "one")) -> float:
    """Largest over the grid of the smallest configured norm of ``grad f``.

    A value below one certifies (on the samples) that ``f`` is a contraction.
    """
    funcs = {"inf": inf_norm, "one": one_norm}
    alpha = 0.0
    for x in _as_grid(grid):
        A = problem.grad_f(x)
        alpha = max(alpha, min(funcs[nm](A) for nm in norms))
    if alpha >= 1.0:
        logger.warning("%s: sampled contraction estimate %.4g >= 1 (not contractive)", problem.name, alpha)
    return alpha
