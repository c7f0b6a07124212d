"""Ready-made problems: power control, the two-variable non-convex toy,
the finite-horizon control family, and the epigraph transform."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import BoundingBox, ConditionSample, FastLipError, InvalidInputError, ProblemSpec, inf_norm
from .qc import Q1, QINF, QK, evaluate_point
from .relax import PartitionSpec


class InfeasibleGainError(FastLipError, ValueError):
    """Gain matrix with spectral radius >= 1: the power problem is infeasible."""


# ---------------------------------------------------------------------------
# Power control
# ---------------------------------------------------------------------------


def make_power_control(G, eta, p_max=None) -> ProblemSpec:
    """Affine power control: minimise ``p`` subject to ``p >= G p + eta``.

    The problem is returned in the mirrored (``sense="min"``) form over the
    box ``[0, p_max]``. The objective is the power vector itself, so
    ``grad f0 = I``. Without ``p_max`` the box upper bound is ``2 (I-G)^-1 eta``,
    which ``p -> G p + eta`` maps into itself.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    n = eta.size
    if G.shape != (n, n):
        raise InvalidInputError(f"G must be {n}x{n}")
    if np.any(G < 0):
        raise InvalidInputError("gain matrix must be non-negative")
    if np.any(eta <= 0):
        raise InvalidInputError("eta must be strictly positive")
    rho = float(np.max(np.abs(np.linalg.eigvals(G))))
    if rho >= 1.0:
        raise InfeasibleGainError(f"rho(G) = {rho:.4g} >= 1")
    if p_max is None:
        upper = 2.0 * np.linalg.solve(np.eye(n) - G, eta)
    else:
        upper = np.broadcast_to(np.asarray(p_max, dtype=float), (n,)).copy()
    GT = G.T.copy()
    return ProblemSpec(
        n=n,
        m=n,
        obj=lambda p: np.asarray(p, dtype=float).copy(),
        obj_grad=lambda p: np.eye(n),
        con=lambda p: G @ p + eta,
        con_grad=lambda p: GT,
        box=BoundingBox(np.zeros(n), upper),
        sense="min",
        name="power",
        params={"G": G.tolist(), "eta": eta.tolist()},
    )


# ---------------------------------------------------------------------------
# Two-variable non-convex example
# ---------------------------------------------------------------------------

TOY_OBJ_GRAD = np.array([[2.0, 1.0], [1.0, 2.0]])


def make_toy(a: float, b: float) -> ProblemSpec:
    """``max (2x1 + x2, x1 + 2x2)`` s.t. ``x <= 0.5 (1 + a x2^2, 1 + b x1^2)`` on ``[0,1]^2``."""
    if abs(a) > 2 or abs(b) > 2:
        raise InvalidInputError("toy problem expects |a|, |b| <= 2")
    a, b = float(a), float(b)

    def con(x):
        return 0.5 * np.array([1 + a * x[1] ** 2, 1 + b * x[0] ** 2])

    def con_grad(x):
        return np.array([[0.0, b * x[0]], [a * x[1], 0.0]])

    return ProblemSpec(
        n=2,
        m=2,
        obj=lambda x: TOY_OBJ_GRAD.T @ np.asarray(x, dtype=float),
        obj_grad=lambda x: TOY_OBJ_GRAD,
        con=con,
        con_grad=con_grad,
        box=BoundingBox([0.0, 0.0], [1.0, 1.0]),
        extra_set=lambda x: bool(np.all(np.asarray(x) >= 0) and np.all(np.asarray(x) <= 1)),
        name="toy",
        params={"a": a, "b": b},
    )


# ---------------------------------------------------------------------------
# Finite-horizon optimal control
# ---------------------------------------------------------------------------


@dataclass
class OptimalControlSpec:
    """Finite-horizon control instance ``s' = f(s, u) + w``.

    The batch callables take ``(k, n)`` states and ``(k, p)`` controls.
    Gradient accessors take one ``(s, u)`` pair and return matrices in the
    package orientation (rows index the differentiation variable).

    Attributes:
        w: ``(N, n)`` disturbances; row ``i`` enters the transition from
            stage ``i`` to ``i + 1`` (the last row is unused).
    """

    N: int
    n: int
    p: int
    dynamics: Callable
    grad_s: Callable
    grad_u: Callable
    stage_cost: Callable
    cost_grad_s: Callable
    cost_grad_u: Callable
    u_max: Callable
    w: np.ndarray
    s_init: np.ndarray
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float).reshape(self.N, self.n)
        self.s_init = np.atleast_1d(np.asarray(self.s_init, dtype=float))
        if not np.all(np.isfinite(self.w)):
            raise InvalidInputError("disturbances must be bounded")

    def step_batch(self, S, U, i: int) -> np.ndarray:
        return np.asarray(self.dynamics(S, U)).reshape(-1, self.n) + self.w[i]

    def stage_cost_batch(self, S, U) -> np.ndarray:
        return np.asarray(self.stage_cost(S, U)).reshape(-1)

    def u_bound_batch(self, S) -> np.ndarray:
        return np.asarray(self.u_max(S), dtype=float).reshape(-1, self.p)

    def simulate(self, u_seq) -> np.ndarray:
        """States ``s^1..s^N`` under ``u_seq`` (clipped to ``[0, u_max(s)]``)."""
        u_seq = np.asarray(u_seq, dtype=float).reshape(self.N, self.p)
        states = np.zeros((self.N, self.n))
        s = self.s_init.copy()
        for i in range(self.N):
            states[i] = s
            if i < self.N - 1:
                u = np.clip(u_seq[i], 0.0, self.u_bound_batch(s[None, :])[0])
                s = self.step_batch(s[None, :], u[None, :], i)[0]
        return states

    def total_cost(self, u_seq) -> float:
        u_seq = np.asarray(u_seq, dtype=float).reshape(self.N, self.p)
        states = self.simulate(u_seq)
        return float(np.sum(self.stage_cost_batch(states, u_seq)))

    def random_rollouts(self, count: int, seed: int = 0):
        """Visited ``(s, u)`` pairs of ``count`` seeded uniform control sequences."""
        rng = np.random.default_rng(seed)
        S, U = [], []
        for _ in range(count):
            s = self.s_init.copy()
            for i in range(self.N):
                u = rng.uniform(0.0, 1.0, self.p) * self.u_bound_batch(s[None, :])[0]
                S.append(s.copy())
                U.append(u)
                if i < self.N - 1:
                    s = self.step_batch(s[None, :], u[None, :], i)[0]
        return np.array(S), np.array(U)


def _linear_oc(a, b, c_s, c_u, N, s_init, w, u_max):
    return OptimalControlSpec(
        N=N, n=1, p=1,
        dynamics=lambda S, U: a * np.asarray(S) - b * np.asarray(U),
        grad_s=lambda s, u: np.array([[a]]),
        grad_u=lambda s, u: np.array([[-b]]),
        stage_cost=lambda S, U: c_s * np.asarray(S)[..., 0] + c_u * np.asarray(U)[..., 0],
        cost_grad_s=lambda s, u: np.array([c_s]),
        cost_grad_u=lambda s, u: np.array([c_u]),
        u_max=lambda S: np.full(np.shape(S), float(u_max)),
        w=w, s_init=s_init, kind="linear",
        params={"a": a, "b": b, "c_s": c_s, "c_u": c_u, "u_max": u_max},
    )


def _nonlinear_oc(a, b, c_s, c_u, N, s_init, w):
    def dyn(S, U):
        S = np.asarray(S, dtype=float)
        return a * S**2 / (1 + S) - b * np.asarray(U)

    def ds(s, u):
        s = float(np.asarray(s).ravel()[0])
        return np.array([[a * (s**2 + 2 * s) / (s + 1) ** 2]])

    def umax(S):
        S = np.asarray(S, dtype=float)
        return a * S**2 / (b * (1 + S))

    return OptimalControlSpec(
        N=N, n=1, p=1,
        dynamics=dyn,
        grad_s=ds,
        grad_u=lambda s, u: np.array([[-b]]),
        stage_cost=lambda S, U: c_s * np.asarray(S)[..., 0] + c_u * np.asarray(U)[..., 0],
        cost_grad_s=lambda s, u: np.array([c_s]),
        cost_grad_u=lambda s, u: np.array([c_u]),
        u_max=umax,
        w=w, s_init=s_init, kind="nonlinear",
        params={"a": a, "b": b, "c_s": c_s, "c_u": c_u},
    )


def _stage_bounds(oc: OptimalControlSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-stage state interval and control upper bound for the scalar kinds."""
    N = oc.N
    lo = np.zeros(N)
    hi = np.zeros(N)
    umax = np.zeros(N)
    lo[0] = hi[0] = oc.s_init[0]
    for i in range(N):
        umax[i] = float(np.max(oc.u_bound_batch(np.array([[lo[i]], [hi[i]]]))))
        if i == N - 1:
            break
        w = oc.w[i, 0]
        if oc.kind == "linear":
            a, b = oc.params["a"], oc.params["b"]
            lo[i + 1] = a * lo[i] - b * umax[i] + w
            hi[i + 1] = a * hi[i] + w
        else:
            a = oc.params["a"]
            lo[i + 1] = w
            hi[i + 1] = a * hi[i] ** 2 / (1 + hi[i]) + w
    return lo, hi, umax


def make_optimal_control(kind: str, params: dict, N: int, s_init=1.0, w=None, u_max: float = 1.0):
    """Control instance plus its stacked Fast-Lipschitz form.

    Variables are ``x = [y; z]`` with ``y_i = -s^i`` and ``z_i = -u^i``. The
    ``y`` constraints encode the dynamics and the ``z`` constraints are the
    constant bound ``z <= 0``; the objective is ``-sum g(-y_i, -z_i)``.

    Args:
        kind: ``"linear"`` (``f = a s - b u``) or ``"nonlinear"``
            (``f = a s^2/(1+s) - b u`` with ``u_max(s) = a s^2 / (b (1+s))``).
        params: ``a, b, c_s, c_u``, all strictly positive.
        N: Horizon.
        s_init: Initial state.
        w: Disturbances, length ``N`` (or ``N-1``); zeros when omitted.
        u_max: Control bound for the linear kind.

    Returns:
        ``(OptimalControlSpec, ProblemSpec, PartitionSpec)``.
    """
    try:
        a, b, c_s, c_u = (float(params[k]) for k in ("a", "b", "c_s", "c_u"))
    except KeyError as exc:
        raise InvalidInputError(f"missing control parameter {exc}") from None
    if min(a, b, c_s, c_u) <= 0:
        raise InvalidInputError("a, b, c_s, c_u must be positive")
    if N < 1:
        raise InvalidInputError("horizon N must be >= 1")
    w = np.zeros(N) if w is None else np.asarray(w, dtype=float).ravel()
    if w.size == N - 1:
        w = np.append(w, 0.0)
    if w.size != N:
        raise InvalidInputError(f"expected {N} disturbances, got {w.size}")
    if kind == "linear":
        oc = _linear_oc(a, b, c_s, c_u, N, s_init, w, u_max)
    elif kind == "nonlinear":
        if np.any(w < 0) or float(np.asarray(s_init)) < 0:
            raise InvalidInputError("nonlinear kind needs non-negative disturbances and initial state")
        oc = _nonlinear_oc(a, b, c_s, c_u, N, s_init, w)
    else:
        raise InvalidInputError(f"unknown control kind {kind!r}")
    problem, part = control_problem(oc)
    return oc, problem, part


def control_problem(oc: OptimalControlSpec) -> tuple[ProblemSpec, PartitionSpec]:
    """Stacked maximisation form of a scalar control instance."""
    N, n, p = oc.N, oc.n, oc.p
    if n != 1 or p != 1:
        raise InvalidInputError("stacked form is built for scalar state and control")
    lo, hi, umax = _stage_bounds(oc)
    dim = 2 * N
    ys = np.arange(N)
    zs = N + np.arange(N)

    def con(x):
        y, z = x[:N], x[N:]
        out = np.zeros(dim)
        out[0] = -oc.s_init[0]
        if N > 1:
            S = -y[:-1, None]
            U = -z[:-1, None]
            out[1:N] = -np.asarray(oc.dynamics(S, U)).reshape(-1) - oc.w[:-1, 0]
        return out

    def con_grad(x):
        y, z = x[:N], x[N:]
        M = np.zeros((dim, dim))
        for i in range(N - 1):
            s, u = np.array([-y[i]]), np.array([-z[i]])
            M[ys[i], ys[i + 1]] = oc.grad_s(s, u)[0, 0]
            M[zs[i], ys[i + 1]] = oc.grad_u(s, u)[0, 0]
        return M

    def obj(x):
        S, U = -x[:N, None], -x[N:, None]
        return np.array([-np.sum(oc.stage_cost_batch(S, U))])

    def obj_grad(x):
        g = np.zeros((dim, 1))
        for i in range(N):
            s, u = np.array([-x[i]]), np.array([-x[N + i]])
            g[ys[i], 0] = oc.cost_grad_s(s, u)[0]
            g[zs[i], 0] = oc.cost_grad_u(s, u)[0]
        return g

    box = BoundingBox(np.concatenate([-hi, -umax]), np.concatenate([-lo, np.zeros(N)]))
    problem = ProblemSpec(
        n=dim, m=1, obj=obj, obj_grad=obj_grad, con=con, con_grad=con_grad, box=box,
        name=f"control-{oc.kind}", params=dict(oc.params, N=N),
    )
    return problem, PartitionSpec(ys, zs)


@dataclass
class Result1Report:
    passed: bool
    margin: float
    lhs: float
    rhs: float
    max_grad_s: float
    max_grad_u: float
    reason: str = ""
    pair_condition: Optional[str] = None


def result1_check(oc: OptimalControlSpec, n_sims: int = 64, seed: int = 0, inflate: float = 0.05) -> Result1Report:
    """Sampled test of the zero-control optimality criterion.

    Gradient extremes are taken over states visited by ``n_sims`` seeded
    random rollouts. The criterion is
    ``max|grad_u f| / (1 - max|grad_s f|) < min grad_u g / max grad_s g``;
    the verdict requires it with the left side inflated by ``inflate`` to
    cover extremes the rollouts missed, while ``margin`` reports the raw
    difference of the two sides. The pair ``(grad_s f, grad_s g)`` must also
    pass a qualifying condition at every visited point.
    """
    S, U = oc.random_rollouts(n_sims, seed)
    As = [np.atleast_2d(oc.grad_s(s, u)) for s, u in zip(S, U)]
    Bs = [np.atleast_2d(oc.grad_u(s, u)) for s, u in zip(S, U)]
    gs = np.array([oc.cost_grad_s(s, u) for s, u in zip(S, U)])
    gu = np.array([oc.cost_grad_u(s, u) for s, u in zip(S, U)])
    a_max = max(inf_norm(A) for A in As)
    b_max = max(inf_norm(B) for B in Bs)
    rhs = float(np.min(gu)) / float(np.max(gs))
    if a_max >= 1.0:
        return Result1Report(False, -math.inf, math.inf, rhs, a_max, b_max,
                             reason=f"max ||grad_s f||_inf = {a_max:.4g} >= 1: denominator not positive")
    lhs = b_max / (1.0 - a_max)
    margin = rhs - lhs

    pair_cond = None
    for cond in (Q1, QINF) + tuple(QK(k) for k in range(2, 9)):
        ok = True
        for A, g in zip(As, gs):
            G0 = np.asarray(g, dtype=float).reshape(-1, 1)
            sample = ConditionSample(np.zeros(0), G0, A, 1.0 if np.all(G0 > 0) else 0.0,
                                     float(G0.min()), float(G0.max()), inf_norm(A))
            if not all(c.ok for c in evaluate_point(sample, cond).values()):
                ok = False
                break
        if ok:
            pair_cond = str(cond)
            break

    passed = lhs * (1.0 + inflate) < rhs and pair_cond is not None
    if pair_cond is None:
        reason = "(grad_s f, grad_s g) fails every qualifying condition tried"
    elif not passed:
        reason = f"criterion violated: {lhs:.4g} (x{1 + inflate:g}) >= {rhs:.4g}"
    else:
        reason = ""
    return Result1Report(passed, margin, lhs, rhs, a_max, b_max, reason, pair_cond)


# ---------------------------------------------------------------------------
# Epigraph transform
# ---------------------------------------------------------------------------


def epigraph_transform(problem: ProblemSpec) -> tuple[ProblemSpec, PartitionSpec]:
    """``max t`` s.t. ``t <= f0(x)``, ``x <= f(x)`` over variables ``(t, x)``.

    The objective only sees ``t``; the returned partition marks ``t`` as the
    objective-active block and ``x`` as the absent block. The ``t`` range of
    the box is the objective range over box corners and a coarse lattice.
    """
    if problem.eq_set:
        raise InvalidInputError("epigraph transform supports inequality-only problems")
    if problem.obj is None:
        raise InvalidInputError("epigraph transform needs an objective evaluator")
    if problem.sense != "max":
        raise InvalidInputError("epigraph transform expects the canonical max form")
    n, m = problem.n, problem.m
    probe = [problem.box.corners()] if n <= 12 else []
    if n <= 6:
        axes = [np.linspace(lo, hi, 5) for lo, hi in zip(problem.box.lower, problem.box.upper)]
        probe.append(np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1))
    pts = np.vstack(probe) if probe else np.vstack([problem.box.lower, problem.box.upper])
    vals = np.array([problem.f0(x) for x in pts])
    t_lo, t_hi = vals.min(axis=0), vals.max(axis=0)

    def con(v):
        x = v[m:]
        return np.concatenate([problem.f0(x), problem.f(x)])

    def con_grad(v):
        x = v[m:]
        M = np.zeros((m + n, m + n))
        M[m:, :m] = problem.grad_f0(x)
        M[m:, m:] = problem.grad_f(x)
        return M

    G_obj = np.zeros((m + n, m))
    G_obj[:m, :m] = np.eye(m)
    spec = ProblemSpec(
        n=m + n,
        m=m,
        obj=lambda v: np.asarray(v[:m], dtype=float).copy(),
        obj_grad=lambda v: G_obj,
        con=con,
        con_grad=con_grad,
        box=BoundingBox(np.concatenate([t_lo, problem.box.lower]), np.concatenate([t_hi, problem.box.upper])),
        name=f"epigraph({problem.name})",
        params=dict(problem.params),
    )
    return spec, PartitionSpec(range(m), range(m, m + n))


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------


def from_name(name: str, **params):
    """Build a gallery problem by name: ``toy``, ``power``, ``control``.

    ``control`` returns the full ``(oc, problem, partition)`` triple; the
    others return a ``ProblemSpec``.
    """
    if name == "toy":
        return make_toy(params.get("a", -0.3), params.get("b", 0.3))
    if name == "power":
        G = params.get("G", [[0.0, 0.2], [0.2, 0.0]])
        eta = params.get("eta", [1.0] * len(G))
        return make_power_control(G, eta, params.get("p_max"))
    if name == "control":
        p = {"a": params.get("a", 0.5), "b": params.get("b", 0.3),
             "c_s": params.get("c_s", 3.0), "c_u": params.get("c_u", 2.0)}
        N = int(params.get("N", 20))
        w = params.get("w")
        if w is None and params.get("random_w", False):
            w = np.random.default_rng(params.get("seed", 0)).uniform(0, 1, N)
        return make_optimal_control(params.get("kind", "linear"), p, N, params.get("s_init", 1.0), w,
                                    params.get("u_max", 1.0))
    raise InvalidInputError(f"unknown gallery problem {name!r}; expected toy, power or control")
