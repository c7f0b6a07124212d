"""Numeric foundations shared by the condition checkers, solvers and oracles.

Gradient orientation follows the row-per-variable convention used throughout
the package: ``[grad f(x)]_ij = d f_j / d x_i``, i.e. the transpose of the
Jacobian. Objective gradients are ``n x m`` with one column per objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

# Tolerances for sign tests; floating-point zero noise must not flip verdicts.
EPS_SIGN = 1e-12
EPS_POS = 1e-10
K_MAX = 8
# A spectral-radius estimate certifies contraction only below 1 - RHO_MARGIN.
RHO_MARGIN = 1e-3
FD_REL_STEP = 1e-6


class FastLipError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(FastLipError, ValueError):
    """Non-finite or malformed numeric input."""


class ConditionViolationError(FastLipError, ValueError):
    """A quantity is undefined because a sign assumption does not hold."""


class UnsupportedKError(FastLipError, ValueError):
    """Requested matrix power exceeds ``K_MAX``."""


class DivergentSeriesError(FastLipError, ArithmeticError):
    """Geometric series bound requested for a matrix with norm >= 1."""


class BoxMarginError(FastLipError, ValueError):
    """Point too close to the bounding box for a central difference."""


class EvaluationError(FastLipError, RuntimeError):
    """A user evaluator returned NaN or raised."""


def _as_finite(A, name="A") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return A


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box ``lower <= x <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise InvalidInputError("box bounds must be vectors of equal length")
        if np.any(lower > upper):
            raise InvalidInputError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n(self) -> int:
        return self.lower.size

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def clip(self, x) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def corners(self) -> np.ndarray:
        n = self.n
        idx = (np.arange(2**n)[:, None] >> np.arange(n)[None, ::-1]) & 1
        return np.where(idx == 1, self.upper, self.lower)


def _fd_jacobian_t(func, x, steps) -> np.ndarray:
    """Central-difference gradient in row-per-variable orientation."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = steps[i]
        cols.append((np.atleast_1d(func(x + e)) - np.atleast_1d(func(x - e))) / (2 * steps[i]))
    return np.vstack(cols)


@dataclass
class ProblemSpec:
    """A problem in Fast-Lipschitz form.

    ``sense="max"`` is the canonical form: maximise ``f0(x)`` subject to
    ``x_i <= f_i(x)`` for ``i`` in ``ineq_set`` and ``x_i = f_i(x)`` for ``i``
    in ``eq_set``. ``sense="min"`` is the mirrored interference form
    (minimise ``f0`` subject to ``x >= f(x)``); the substitution ``x -> -x``
    maps it to the canonical form without changing either gradient, so every
    gradient-based check applies verbatim.

    Attributes:
        n: Number of variables.
        m: Objective dimension.
        obj_grad: ``x -> (n, m)`` objective gradient.
        con: ``x -> (n,)`` constraint map.
        con_grad: ``x -> (n, n)`` constraint gradient; ``None`` selects a
            central-difference fallback.
        ineq_set, eq_set: Complementary index sets (0-based).
        box: Bounding box assumed to contain every optimality candidate.
        extra_set: Optional membership predicate for an additional set.
        obj: Optional objective evaluator, required by the lattice oracles.
    """

    n: int
    m: int
    obj_grad: Callable[[np.ndarray], np.ndarray]
    con: Callable[[np.ndarray], np.ndarray]
    box: BoundingBox
    con_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    ineq_set: Optional[Sequence[int]] = None
    eq_set: Sequence[int] = ()
    extra_set: Optional[Callable[[np.ndarray], bool]] = None
    obj: Optional[Callable[[np.ndarray], np.ndarray]] = None
    sense: str = "max"
    name: str = "problem"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        eq = sorted(int(i) for i in self.eq_set)
        if self.ineq_set is None:
            ineq = [i for i in range(self.n) if i not in set(eq)]
        else:
            ineq = sorted(int(i) for i in self.ineq_set)
        if set(ineq) & set(eq):
            raise InvalidInputError("inequality and equality index sets overlap")
        if set(ineq) | set(eq) != set(range(self.n)):
            raise InvalidInputError("index sets must cover 0..n-1")
        self.ineq_set = tuple(ineq)
        self.eq_set = tuple(eq)
        if self.box.n != self.n:
            raise InvalidInputError(f"box has dimension {self.box.n}, expected {self.n}")
        if self.sense not in ("max", "min"):
            raise InvalidInputError(f"unknown sense {self.sense!r}")

    def f(self, x) -> np.ndarray:
        return _checked(self.con(np.asarray(x, dtype=float)), (self.n,), "constraint map")

    def f0(self, x) -> np.ndarray:
        if self.obj is None:
            raise FastLipError(f"{self.name}: no objective evaluator supplied")
        return _checked(np.atleast_1d(self.obj(np.asarray(x, dtype=float))), (self.m,), "objective")

    def grad_f0(self, x) -> np.ndarray:
        g = np.asarray(self.obj_grad(np.asarray(x, dtype=float)), dtype=float)
        if g.size == self.n * self.m:
            g = g.reshape(self.n, self.m)
        return _checked(g, (self.n, self.m), "objective gradient")

    def grad_f(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.con_grad is None:
            return _checked(_fd_jacobian_t(self.con, x, FD_REL_STEP * (1 + np.abs(x))), (self.n, self.n), "constraint gradient")
        return _checked(np.asarray(self.con_grad(x), dtype=float), (self.n, self.n), "constraint gradient")


def _checked(v, shape, what) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != shape:
        raise EvaluationError(f"{what} has shape {v.shape}, expected {shape}")
    if not np.all(np.isfinite(v)):
        raise EvaluationError(f"{what} returned non-finite values")
    return v


def inf_norm(A) -> float:
    """Max absolute row sum."""
    A = _as_finite(A)
    if A.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(np.atleast_2d(A)), axis=1)))


def one_norm(A) -> float:
    """Max absolute column sum."""
    A = _as_finite(A)
    if A.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(np.atleast_2d(A)), axis=0)))


_NORMS = {"inf": inf_norm, "one": one_norm}


def transpose_norm(A, base_norm: str = "inf") -> float:
    """``base_norm(A.T)``; a matrix norm whenever ``base_norm`` is one."""
    try:
        norm = _NORMS[base_norm]
    except KeyError:
        raise InvalidInputError(f"unknown norm id {base_norm!r}; expected one of {sorted(_NORMS)}") from None
    return norm(np.atleast_2d(_as_finite(A)).T)


def spectral_radius(A, squarings: int = 32) -> float:
    """Upper estimate of the spectral radius by repeated matrix squaring.

    Every iterate ``||A^(2^j)||_inf^(1/2^j)`` bounds ``rho(A)`` from above
    (Gelfand), so the minimum over iterates is returned. The matrix is
    renormalised after each squaring and the scale tracked in log space.
    Unlike vector power iteration this needs no dominant real eigenvalue.
    """
    B = np.atleast_2d(_as_finite(A)).copy()
    if B.shape[0] != B.shape[1]:
        raise InvalidInputError("spectral radius needs a square matrix")
    best = inf_norm(B)
    log_scale = 0.0
    for j in range(squarings):
        s = inf_norm(B)
        if s == 0.0:
            return 0.0
        est = math.exp(log_scale + math.log(s) / 2**j)
        best = min(best, est)
        log_scale += math.log(s) / 2**j
        B = B / s
        B = B @ B
    s = inf_norm(B)
    if s == 0.0:
        return 0.0
    return min(best, math.exp(log_scale + math.log(s) / 2**squarings))


def q_ratio(G0) -> float:
    """Smallest within-column min/max ratio of an objective gradient.

    Raises:
        ConditionViolationError: if ``G0`` has an entry below ``-EPS_SIGN``.
    """
    G0 = np.atleast_2d(_as_finite(G0, "G0"))
    if np.any(G0 < -EPS_SIGN):
        raise ConditionViolationError("q(x) is defined only for non-negative objective gradients")
    G0 = np.maximum(G0, 0.0)
    col_max = G0.max(axis=0)
    if np.any(col_max == 0.0):
        return 0.0
    return float(np.min(G0.min(axis=0) / col_max))


def delta_Delta(G0) -> tuple[float, float]:
    G0 = _as_finite(G0, "G0")
    return float(np.min(G0)), float(np.max(G0))


def matrix_power_nonneg(A, k: int, k_max: int = K_MAX, eps: float = EPS_SIGN) -> bool:
    """True iff every entry of ``A**k`` is at least ``-eps``."""
    if k < 1:
        raise InvalidInputError("k must be a positive integer")
    if k > k_max:
        raise UnsupportedKError(f"k={k} exceeds K_MAX={k_max}")
    return bool(np.min(np.linalg.matrix_power(_as_finite(A), k)) >= -eps)


def geometric_tail_norm(A, k) -> float:
    """``||A + A^2 + ... + A^(k-1)||_inf``, or its geometric bound for ``k = inf``."""
    A = np.atleast_2d(_as_finite(A))
    if k == math.inf:
        a = inf_norm(A)
        if a >= 1.0:
            raise DivergentSeriesError(f"||A||_inf = {a:.6g} >= 1; series bound undefined")
        return a / (1.0 - a)
    k = int(k)
    if k < 1:
        raise InvalidInputError("k must be >= 1 or inf")
    total = np.zeros_like(A)
    P = np.eye(A.shape[0])
    for _ in range(k - 1):
        P = P @ A
        total += P
    return inf_norm(total)


@dataclass
class ConditionSample:
    """Per-point quantities consumed by the qualifying-condition checks."""

    x: np.ndarray
    G0: np.ndarray
    Gf: np.ndarray
    q: float
    delta: float
    Delta: float
    inf_norm_Gf: float

    @classmethod
    def at(cls, problem: ProblemSpec, x) -> "ConditionSample":
        x = np.asarray(x, dtype=float)
        G0 = problem.grad_f0(x)
        Gf = problem.grad_f(x)
        try:
            q = q_ratio(G0)
        except ConditionViolationError:
            q = math.nan
        delta, Delta = delta_Delta(G0)
        return cls(x, G0, Gf, q, delta, Delta, inf_norm(Gf))


def fd_check_gradients(problem: ProblemSpec, x, h: float = 1e-6) -> float:
    """Worst absolute gap between analytic and central-difference gradients.

    ``grad f`` is always compared; ``grad f0`` only when ``problem.obj`` is set.
    """
    x = np.asarray(x, dtype=float)
    box = problem.box
    if np.any(x - box.lower < h) or np.any(box.upper - x < h):
        raise BoxMarginError(f"x must lie at least h={h:g} inside the box")
    steps = np.full(x.size, h)
    worst = 0.0
    if problem.con_grad is not None:
        fd = _fd_jacobian_t(problem.f, x, steps)
        worst = max(worst, float(np.max(np.abs(fd - problem.grad_f(x)))))
    if problem.obj is not None:
        fd0 = _fd_jacobian_t(problem.f0, x, steps)
        worst = max(worst, float(np.max(np.abs(fd0 - problem.grad_f0(x)))))
    return worst
