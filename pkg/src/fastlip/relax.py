"""Checks for problems that are not quite in Fast-Lipschitz form.

Three relaxations are covered: an additional constraint set, variables with
constant constraints (fewer real constraints than variables), and variables
absent from the objective. All checks are sampled like those in ``qc``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    K_MAX,
    BoundingBox,
    ConditionSample,
    FastLipError,
    ProblemSpec,
    inf_norm,
)
from .qc import (
    QINFD,
    QK,
    Check,
    CertificateReport,
    Grid,
    _as_grid,
    _cont,
    _nonneg,
    _rows,
    _samples,
    build_report,
    check_condition,
    default_grid,
)


class PreconditionError(FastLipError, ValueError):
    """Input violates an operation's precondition."""


@dataclass(frozen=True)
class PartitionSpec:
    """Split of the variable indices into a ``y`` block and a ``z`` block.

    Block accessors follow the gradient orientation of the package: in
    ``grad_block(M, rows, cols)`` the rows select differentiation variables
    and the columns select constraint (or objective) components.
    """

    y_idx: tuple
    z_idx: tuple

    def __init__(self, y_idx: Sequence[int], z_idx: Sequence[int]):
        y = tuple(int(i) for i in y_idx)
        z = tuple(int(i) for i in z_idx)
        if set(y) & set(z):
            raise ValueError("partition blocks overlap")
        if len(set(y)) != len(y) or len(set(z)) != len(z):
            raise ValueError("duplicate indices in partition")
        object.__setattr__(self, "y_idx", y)
        object.__setattr__(self, "z_idx", z)

    @property
    def n(self) -> int:
        return len(self.y_idx) + len(self.z_idx)

    def validate(self, n: int):
        if set(self.y_idx) | set(self.z_idx) != set(range(n)):
            raise ValueError(f"partition must cover 0..{n - 1}")

    def _idx(self, block):
        return {"y": list(self.y_idx), "z": list(self.z_idx)}[block]

    def grad_block(self, M, wrt: str, of: str) -> np.ndarray:
        """Block of a constraint gradient: ``grad_<wrt> f_<of>``."""
        return np.asarray(M)[np.ix_(self._idx(wrt), self._idx(of))]

    def obj_block(self, G0, wrt: str) -> np.ndarray:
        return np.asarray(G0)[self._idx(wrt), :]

    def join(self, y, z) -> np.ndarray:
        x = np.empty(self.n)
        x[list(self.y_idx)] = y
        x[list(self.z_idx)] = z
        return x


# ---------------------------------------------------------------------------
# Additional constraint set
# ---------------------------------------------------------------------------


def check_extra_set(problem: ProblemSpec, xstar, feas_tol: float = 1e-6) -> bool:
    """Whether the additional set accepts the fixed point ``xstar``.

    A ``True`` result plus a passing qualifying-condition report means the
    problem with the extra set is Fast-Lipschitz with the same optimum.
    """
    xstar = np.asarray(xstar, dtype=float)
    res = float(np.max(np.abs(xstar - problem.f(xstar))))
    if res > feas_tol:
        raise PreconditionError(f"xstar is not a fixed point: residual {res:.3g} > {feas_tol:g}")
    if problem.extra_set is None:
        return True
    return bool(problem.extra_set(xstar))


# ---------------------------------------------------------------------------
# Fewer constraints than variables
# ---------------------------------------------------------------------------

ESCALATION = (QINFD,) + tuple(QK(k) for k in range(1, K_MAX + 1)) + (QK(math.inf),)


class _Subproblem:
    """``(f0|z, f_y|z)``: the problem in ``y`` alone for a frozen ``z``."""

    def __init__(self, problem: ProblemSpec, part: PartitionSpec, z):
        self.problem, self.part, self.z = problem, part, np.asarray(z, dtype=float)

    def spec(self) -> ProblemSpec:
        p, part = self.problem, self.part
        y_idx = list(part.y_idx)
        box = BoundingBox(p.box.lower[y_idx], p.box.upper[y_idx])

        def full(y):
            return part.join(y, self.z)

        return ProblemSpec(
            n=len(y_idx),
            m=p.m,
            obj_grad=lambda y: part.obj_block(p.grad_f0(full(y)), "y"),
            con=lambda y: p.f(full(y))[y_idx],
            con_grad=lambda y: part.grad_block(p.grad_f(full(y)), "y", "y"),
            box=box,
            name=f"{p.name}|z",
        )


def z_samples(box: BoundingBox, part: PartitionSpec, n_interior: int = 8, seed: int = 0, max_corners: int = 64) -> np.ndarray:
    """Corners of the z-box plus seeded interior points.

    With more than ``max_corners`` corners a seeded subset is used.
    """
    z_idx = list(part.z_idx)
    zbox = BoundingBox(box.lower[z_idx], box.upper[z_idx])
    rng = np.random.default_rng(seed)
    if 2 ** zbox.n <= max_corners:
        corners = zbox.corners()
    else:
        bits = rng.integers(0, 2, size=(max_corners, zbox.n))
        bits[0] = 0
        bits[1] = 1
        corners = np.where(bits == 1, zbox.upper, zbox.lower)
    interior = rng.uniform(zbox.lower, zbox.upper, size=(n_interior, zbox.n))
    return np.vstack([corners, interior])


@dataclass
class RelaxReport:
    """Result of a relaxation check; shares the qc JSON layout plus ``branch``."""

    report: CertificateReport
    branch: Optional[str]
    subproblem_condition: Optional[str] = None
    branch_reports: Optional[dict] = None

    @property
    def passed(self) -> bool:
        return self.report.passed

    @property
    def failures(self) -> list:
        return self.report.failures

    def to_dict(self) -> dict:
        d = self.report.to_dict()
        d["branch"] = self.branch
        if self.subproblem_condition is not None:
            d["subproblem_condition"] = self.subproblem_condition
        return d


def _b_checks(s: ConditionSample, part: PartitionSpec) -> dict:
    Gz0 = part.obj_block(s.G0, "z")
    Gy0 = part.obj_block(s.G0, "y")
    A21 = part.grad_block(s.Gf, "z", "y")
    A11 = part.grad_block(s.Gf, "y", "y")
    out = {
        "b.i.f0z_nonneg": _nonneg(Gz0),
        "b.i.Azy_nonneg": _nonneg(A21),
        "b.i.Azy_rows": _rows(A21),
        "b.ii.f0z_nonneg": _nonneg(Gz0),
        "b.ii.f0z_rows": _rows(Gz0),
        "b.ii.Azy_nonneg": _nonneg(A21),
    }
    a11 = inf_norm(A11)
    delta_z = float(np.min(Gz0))
    Delta_y = float(np.max(Gy0))
    bound = delta_z / Delta_y if Delta_y > 0 else -math.inf
    lhs = inf_norm(A21) / (1.0 - a11) if a11 < 1.0 else math.inf
    out["b.iii"] = Check(lhs, "<", bound)
    return out


_BRANCHES = {
    "b.i": ("b.i.f0z_nonneg", "b.i.Azy_nonneg", "b.i.Azy_rows"),
    "b.ii": ("b.ii.f0z_nonneg", "b.ii.f0z_rows", "b.ii.Azy_nonneg"),
    "b.iii": ("b.iii",),
}


def check_subproblem(problem: ProblemSpec, part: PartitionSpec, grid: Grid, zs: np.ndarray, candidates=ESCALATION):
    """First condition in ``candidates`` holding for every frozen ``z``.

    Returns ``(condition or None, reports)`` where ``reports`` maps each tried
    condition to the first failing report (or the last passing one).
    """
    y_pts = np.unique(grid.points[:, list(part.y_idx)], axis=0)
    tried = {}
    for cond in candidates:
        ok = True
        last = None
        for z in zs:
            sub = _Subproblem(problem, part, z).spec()
            rep = check_condition(sub, cond, Grid(y_pts, per_axis=grid.per_axis))
            last = rep
            if not rep.passed:
                ok = False
                break
        tried[str(cond)] = last
        if ok:
            return cond, tried
    return None, tried


def check_fewer_constraints(
    problem: ProblemSpec,
    partition: PartitionSpec,
    grid=None,
    subproblem_conditions=ESCALATION,
    z_seed: int = 0,
    const_tol: float = 1e-12,
) -> RelaxReport:
    """Sampled check of the constant-constraint relaxation.

    Part (a) asks the frozen-``z`` subproblem to pass one qualifying
    condition (tried cheapest first). Part (b) must then hold at every grid
    point through one of its three branches; the report names the branch
    that holds everywhere, or ``"mixed"`` when different points need
    different branches.
    """
    partition.validate(problem.n)
    grid = default_grid(problem.box) if grid is None else _as_grid(grid)
    z_idx = list(partition.z_idx)
    samples = _samples(problem, grid.points)
    for x, s in zip(grid.points, samples):
        if isinstance(s, Exception):
            continue
        if np.any(np.abs(s.Gf[:, z_idx]) > const_tol):
            raise PreconditionError("z-block constraints must be constant (zero gradient columns)")

    zs = z_samples(problem.box, partition, seed=z_seed)
    sub_cond, _ = check_subproblem(problem, partition, grid, zs, subproblem_conditions)

    per_point = []
    for x, s in zip(grid.points, samples):
        per_point.append((x, s if isinstance(s, Exception) else _b_checks(s, partition)))

    branch_reports = {}
    for br, names in _BRANCHES.items():
        branch_reports[br] = build_report(f"fewer-constraints/{br}", names, grid, per_point)

    branch = None
    for br, rep in branch_reports.items():
        if rep.passed:
            branch = br
            break
    failures = []
    if branch is None:
        for x, checks in per_point:
            if isinstance(checks, Exception):
                failures.append((x, "evaluation-failure"))
            elif not any(all(checks[n].ok for n in names) for names in _BRANCHES.values()):
                failures.append((x, "b"))
        if not failures:
            branch = "mixed"
    if sub_cond is None:
        failures.insert(0, (np.full(problem.n, math.nan), "a"))

    all_names = tuple(n for names in _BRANCHES.values() for n in names)
    combined = build_report("fewer-constraints", all_names, grid, per_point)
    combined.failures = failures
    combined.verdict = "pass" if not failures else "fail"
    combined.extras = {"branch": branch, "subproblem_condition": str(sub_cond) if sub_cond else None}
    return RelaxReport(combined, branch, str(sub_cond) if sub_cond else None, branch_reports)


def block_duals(problem: ProblemSpec, partition: PartitionSpec, x, mu) -> tuple[np.ndarray, np.ndarray]:
    """``(lambda_y, lambda_z)`` from the block form of ``(I - A)^-1 c``.

    ``lambda_y = (I - A_yy)^-1 c_y`` and ``lambda_z = A_zy lambda_y + c_z``,
    valid when the z-block constraints are constant.
    """
    s = ConditionSample.at(problem, x)
    c = s.G0 @ np.asarray(mu, dtype=float)
    y, z = list(partition.y_idx), list(partition.z_idx)
    A11 = partition.grad_block(s.Gf, "y", "y")
    A21 = partition.grad_block(s.Gf, "z", "y")
    lam_y = np.linalg.solve(np.eye(len(y)) - A11, c[y])
    lam_z = A21 @ lam_y + c[z]
    return lam_y, lam_z


# ---------------------------------------------------------------------------
# Variables missing from the objective
# ---------------------------------------------------------------------------


def _missing_checks(s: ConditionSample, part: PartitionSpec) -> dict:
    Gx0 = part.obj_block(s.G0, "y")
    Gz0 = part.obj_block(s.G0, "z")
    return {
        "a.f0x_nonneg": _nonneg(Gx0),
        "a.f0x_rows": _rows(Gx0),
        "a.f0z_nonneg": _nonneg(Gz0),
        "b": _nonneg(s.Gf),
        "c": _cont(s.Gf),
        "d": _rows(part.grad_block(s.Gf, "z", "y")),
    }


def check_missing_objective_vars(problem: ProblemSpec, partition: PartitionSpec, grid=None) -> RelaxReport:
    """Sampled check for variables that do not enter the objective.

    ``partition.y_idx`` is the objective-active block and ``partition.z_idx``
    the absent block. Condition (a) is evaluated as "non-negative with
    non-zero rows" on the active block, which is what makes every scalarised
    weight produce a positive dual there; for a scalar objective this is the
    same as strict positivity.
    """
    partition.validate(problem.n)
    grid = default_grid(problem.box) if grid is None else _as_grid(grid)
    samples = _samples(problem, grid.points)
    per_point = [
        (x, s if isinstance(s, Exception) else _missing_checks(s, partition))
        for x, s in zip(grid.points, samples)
    ]
    names = ("a.f0x_nonneg", "a.f0x_rows", "a.f0z_nonneg", "b", "c", "d")
    rep = build_report("missing-objective-vars", names, grid, per_point)
    rep.extras = {"branch": None}
    return RelaxReport(rep, None)
