"""Sampling-based verification of the qualifying conditions.

Every condition is a conjunction of pointwise sub-conditions. Each
sub-condition is evaluated as a ``(value, relation, bound)`` triple so the
report can carry the worst observed margin alongside the verdict. Verdicts
are sampled certificates: evidence over a finite grid, not a proof over the
whole box.
"""

from __future__ import annotations

import json
import math
import os
import re
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .core import (
    EPS_POS,
    EPS_SIGN,
    K_MAX,
    RHO_MARGIN,
    BoundingBox,
    ConditionSample,
    DivergentSeriesError,
    FastLipError,
    ProblemSpec,
    geometric_tail_norm,
    inf_norm,
    one_norm,
    spectral_radius,
)

SCHEMA_VERSION = 1
GRID_BUDGET = 10**6
DEFAULT_PER_AXIS = 33
DEFAULT_MC_POINTS = 10**5


class BudgetError(FastLipError, ValueError):
    """Requested lattice exceeds the evaluation budget."""


class BoxWarning(UserWarning):
    """The constraint map leaves the bounding box at a sampled point."""


# ---------------------------------------------------------------------------
# Condition identifiers
# ---------------------------------------------------------------------------

_TAGS = ("Q1", "Q2", "QINF", "Q2D", "QINFD", "QK", "OLD_I", "OLD_II", "OLD_III")


@dataclass(frozen=True)
class Condition:
    tag: str
    k: Optional[float] = None

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise ValueError(f"unknown condition tag {self.tag!r}")
        if self.tag == "QK":
            if self.k is None:
                raise ValueError("QK needs k")
            if self.k != math.inf and (int(self.k) != self.k or not 1 <= self.k <= K_MAX):
                raise ValueError(f"QK needs k in 1..{K_MAX} or inf, got {self.k}")
        elif self.k is not None:
            raise ValueError(f"{self.tag} takes no k")

    def __str__(self):
        if self.tag != "QK":
            return self.tag
        return "QK(inf)" if self.k == math.inf else f"QK({int(self.k)})"

    @classmethod
    def parse(cls, text: str) -> "Condition":
        """Parse ``q1``, ``qinfd``, ``old_ii``, ``qk(3)``, ``qk3``, ``qkinf``..."""
        t = text.strip().upper().replace("-", "_")
        m = re.fullmatch(r"QK\(?\s*(\d+|INF|∞)\s*\)?", t)
        if m:
            k = m.group(1)
            return cls("QK", math.inf if k in ("INF", "∞") else int(k))
        aliases = {"OLD1": "OLD_I", "OLD2": "OLD_II", "OLD3": "OLD_III", "Q∞": "QINF", "Q∞D": "QINFD"}
        return cls(aliases.get(t, t))


def QK(k) -> Condition:
    return Condition("QK", k)


Q1 = Condition("Q1")
Q2 = Condition("Q2")
QINF = Condition("QINF")
Q2D = Condition("Q2D")
QINFD = Condition("QINFD")
OLD_I = Condition("OLD_I")
OLD_II = Condition("OLD_II")
OLD_III = Condition("OLD_III")

ALL_SPECIAL = (Q1, Q2, QINF, Q2D, QINFD, OLD_I, OLD_II, OLD_III)

# Premise -> the condition it implies pointwise.
IMPLICATIONS = {
    Q1: QK(1),
    Q2: QK(2),
    QINF: QK(math.inf),
    Q2D: Q2,
    QINFD: QINF,
    OLD_I: Q1,
    OLD_II: Q2D,
    OLD_III: QINFD,
}

SUBCONDITIONS = {
    "Q1": ("f0.nonneg", "f0.rows", "cont", "pos"),
    "Q2": ("f0.pos", "pos", "inf"),
    "QINF": ("f0.pos", "inf"),
    "Q2D": ("f0.pos", "pos", "inf"),
    "QINFD": ("f0.pos", "inf"),
    "OLD_I": ("0", "i.a", "i.b"),
    "OLD_II": ("0", "ii.a", "ii.b", "ii.c"),
    "OLD_III": ("0", "iii.a", "iii.b"),
}


def subcondition_names(cond: Condition) -> tuple:
    if cond.tag != "QK":
        return SUBCONDITIONS[cond.tag]
    names = ["f0.nonneg", "f0.rows", "cont"]
    if cond.k != math.inf:
        names.append("pos")
    if cond.k > 1:
        names.append("inf")
    return tuple(names)


# ---------------------------------------------------------------------------
# Pointwise evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    """One pointwise sub-condition ``value <relation> bound``."""

    value: float
    relation: str
    bound: float
    note: str = ""

    @property
    def slack(self) -> float:
        if math.isnan(self.value) or math.isnan(self.bound):
            return -math.inf
        if self.relation in ("<", "<="):
            return self.bound - self.value
        return self.value - self.bound

    @property
    def ok(self) -> bool:
        if math.isnan(self.value) or math.isnan(self.bound):
            return False
        return {
            "<": self.value < self.bound,
            "<=": self.value <= self.bound,
            ">": self.value > self.bound,
            ">=": self.value >= self.bound,
        }[self.relation]


def _nonneg(M) -> Check:
    return Check(float(np.min(M)), ">=", -EPS_SIGN)


def _positive(M) -> Check:
    return Check(float(np.min(M)), ">", EPS_POS)


def _rows(M) -> Check:
    return Check(float(np.min(np.max(np.abs(M), axis=1))), ">", EPS_POS)


def norm_family(A) -> tuple[float, str]:
    """Smallest certifying value over {inf-norm, 1-norm, rho + margin}.

    The spectral estimate is only computed when both norms fail, and is
    reported with the safety margin already added.
    """
    a_inf, a_one = inf_norm(A), one_norm(A)
    best, name = (a_inf, "inf") if a_inf <= a_one else (a_one, "one")
    if best < 1.0:
        return best, name
    rho = spectral_radius(A) + RHO_MARGIN
    if rho < best:
        return rho, "rho"
    return best, name


def _cont(A) -> Check:
    value, name = norm_family(A)
    return Check(value, "<", 1.0, note=name)


def _q_bound(q, transform) -> float:
    return math.nan if math.isnan(q) else transform(q)


def evaluate_point(sample: ConditionSample, cond: Condition, context: Optional[dict] = None) -> dict:
    """All sub-conditions of ``cond`` at one sample, keyed by name.

    ``context`` carries box-global quantities; OLD_III reads ``delta_bar``
    and ``Delta_bar`` from it and falls back to the pointwise values.
    """
    G0, A = sample.G0, sample.Gf
    a_inf = sample.inf_norm_Gf
    tag = cond.tag
    out = {}
    if tag in ("Q1", "QK"):
        out["f0.nonneg"] = _nonneg(G0)
        out["f0.rows"] = _rows(G0)
        out["cont"] = _cont(A)
    if tag == "Q1":
        out["pos"] = _nonneg(A)
    elif tag == "QK":
        k = cond.k
        if k != math.inf:
            out["pos"] = _nonneg(np.linalg.matrix_power(A, int(k)))
        if k > 1:
            try:
                tail = geometric_tail_norm(A, k)
            except DivergentSeriesError:
                tail = math.inf
            out["inf"] = Check(tail, "<", sample.q)
    elif tag in ("Q2", "QINF", "Q2D", "QINFD"):
        out["f0.pos"] = _positive(G0)
        if tag in ("Q2", "Q2D"):
            out["pos"] = _nonneg(A @ A)
        if tag == "Q2":
            bound = sample.q
        elif tag == "QINF":
            bound = _q_bound(sample.q, lambda q: q / (1 + q))
        elif tag == "Q2D":
            bound = sample.delta / sample.Delta if sample.Delta > 0 else 0.0
        else:
            s = sample.delta + sample.Delta
            bound = sample.delta / s if s > 0 else 0.0
        out["inf"] = Check(a_inf, "<", bound)
    else:
        out["0"] = _positive(G0)
        if tag == "OLD_I":
            out["i.a"] = _nonneg(A)
            out["i.b"] = _cont(A)
        elif tag == "OLD_II":
            spread = sample.Delta - sample.delta
            out["ii.a"] = Check(spread, "<=", EPS_SIGN * max(1.0, abs(sample.Delta)), note="grad f0 = c*1")
            out["ii.b"] = _nonneg(A @ A)
            out["ii.c"] = Check(a_inf, "<", 1.0)
        else:
            out["iii.a"] = Check(float(G0.shape[1]), "<=", 1.0, note="scalar objective")
            ctx = context or {}
            db = ctx.get("delta_bar", sample.delta)
            Db = ctx.get("Delta_bar", sample.Delta)
            bound = db / (db + Db) if db + Db > 0 else 0.0
            out["iii.b"] = Check(a_inf, "<", bound)
    return out


def point_passes(sample: ConditionSample, cond: Condition, context: Optional[dict] = None) -> bool:
    return all(c.ok for c in evaluate_point(sample, cond, context).values())


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------


@dataclass
class Grid:
    """Sample points plus a descriptor recorded in reports."""

    points: np.ndarray
    per_axis: Optional[int] = None
    n_random: int = 0
    seed: Optional[int] = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))

    def __len__(self):
        return self.points.shape[0]

    def __iter__(self):
        return iter(self.points)

    def descriptor(self) -> dict:
        return {
            "per_axis": self.per_axis,
            "random_points": self.n_random,
            "seed": self.seed,
            "total_points": len(self),
        }


def sample_grid(box: BoundingBox, per_axis: int, n_random: int = 0, seed: int = 0) -> Grid:
    """Uniform lattice (corners included), optionally plus seeded random points."""
    n = box.n
    if per_axis < 2:
        raise ValueError("per_axis must be >= 2")
    if per_axis**n > GRID_BUDGET:
        raise BudgetError(
            f"{per_axis}^{n} = {per_axis**n:.3g} lattice points exceed the budget of {GRID_BUDGET:.0e}; "
            "use Monte Carlo mode (sample_random)"
        )
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(box.lower, box.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    if n_random:
        rng = np.random.default_rng(seed)
        pts = np.vstack([pts, rng.uniform(box.lower, box.upper, size=(n_random, n))])
    return Grid(pts, per_axis=per_axis, n_random=n_random, seed=seed if n_random else None)


def sample_random(box: BoundingBox, count: int, seed: int = 0, include_corners: bool = True) -> Grid:
    """Monte Carlo points from a seeded generator, plus box corners when affordable."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(box.lower, box.upper, size=(count, box.n))
    if include_corners and box.n <= 12:
        pts = np.vstack([box.corners(), pts])
    return Grid(pts, per_axis=None, n_random=count, seed=seed)


def default_grid(box: BoundingBox, seed: int = 0) -> Grid:
    if box.n <= 4:
        return sample_grid(box, DEFAULT_PER_AXIS)
    return sample_random(box, DEFAULT_MC_POINTS, seed=seed)


def _as_grid(grid) -> Grid:
    return grid if isinstance(grid, Grid) else Grid(np.asarray(grid, dtype=float))


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("FL_THREADS", "1")))
    except ValueError:
        return 1


def _samples(problem: ProblemSpec, points: np.ndarray) -> list:
    """ConditionSample per point, or the raised exception, in grid order."""

    def one(x):
        try:
            return ConditionSample.at(problem, x)
        except Exception as exc:  # reported per point, never fatal
            return exc

    workers = _workers()
    if workers == 1 or len(points) < 64:
        return [one(x) for x in points]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, points))


def global_context(samples: Iterable) -> dict:
    """Box-global extremes of the objective gradient over valid samples."""
    vals = [s for s in samples if isinstance(s, ConditionSample)]
    if not vals:
        return {}
    return {
        "delta_bar": min(s.delta for s in vals),
        "Delta_bar": max(s.Delta for s in vals),
    }


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _floats(x) -> list:
    return [float(v) for v in np.asarray(x, dtype=float).ravel()]


def _num(v):
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


@dataclass
class Margin:
    value: float
    bound: float
    relation: str
    x: np.ndarray
    note: str = ""

    def to_dict(self, name: str) -> dict:
        d = {"name": name, "value": _num(self.value), "relation": self.relation,
             "bound": _num(self.bound), "x": _floats(self.x)}
        if self.note:
            d["note"] = self.note
        return d


@dataclass
class CertificateReport:
    """Sampled verdict for one condition with worst-case margins."""

    condition: str
    grid: dict
    verdict: str
    worst_margins: dict
    failures: list
    label: str = "sampled certificate"
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "label": self.label,
            "condition": self.condition,
            "grid": self.grid,
            "verdict": self.verdict,
            "margins": [m.to_dict(name) for name, m in self.worst_margins.items()],
            "failures": [{"x": _floats(x), "subcondition": name} for x, name in self.failures],
        }
        d.update(self.extras)
        return d

    def to_json(self, **kw) -> str:
        kw.setdefault("indent", 2)
        kw.setdefault("sort_keys", True)
        return json.dumps(self.to_dict(), **kw)


def build_report(label: str, names: Iterable[str], grid: Grid, per_point: list) -> CertificateReport:
    """Ordered reduction of pointwise check dictionaries into a report.

    ``per_point`` holds ``(x, checks)`` pairs where ``checks`` is either a
    name->Check mapping or an exception raised while evaluating at ``x``.
    Ties in worst slack keep the earliest grid point, so results do not
    depend on evaluation order.
    """
    names = tuple(names)
    worst: dict = {}
    failures = []
    for x, checks in per_point:
        if isinstance(checks, Exception):
            failures.append((x, f"evaluation-failure: {type(checks).__name__}: {checks}"))
            continue
        for name in names:
            c = checks[name]
            if name not in worst or c.slack < worst[name][0]:
                worst[name] = (c.slack, Margin(c.value, c.bound, c.relation, np.array(x), c.note))
            if not c.ok:
                failures.append((x, name))
    margins = {}
    for name in names:
        if name in worst:
            margins[name] = worst[name][1]
        else:
            margins[name] = Margin(math.nan, math.nan, "?", np.full(grid.points.shape[1], math.nan), "not evaluated")
    return CertificateReport(
        condition=label,
        grid=grid.descriptor(),
        verdict="pass" if not failures else "fail",
        worst_margins=margins,
        failures=failures,
    )


def warn_if_leaves_box(problem: ProblemSpec, grid, tol: float = 1e-9) -> int:
    """Count grid points where ``f(x)`` leaves the box; warns when nonzero."""
    bad = 0
    for x in _as_grid(grid):
        try:
            if not problem.box.contains(problem.f(x), tol=tol):
                bad += 1
        except Exception:
            continue
    if bad:
        warnings.warn(f"{problem.name}: f maps {bad} sampled point(s) outside the box", BoxWarning, stacklevel=2)
    return bad


def check_condition(problem: ProblemSpec, cond, grid=None, samples=None) -> CertificateReport:
    """Evaluate ``cond`` at every grid point and aggregate a report.

    Args:
        problem: Problem in Fast-Lipschitz form.
        cond: ``Condition`` or a string accepted by ``Condition.parse``.
        grid: ``Grid`` or ``(k, n)`` array; defaults to ``default_grid``.
        samples: Precomputed ``ConditionSample`` list matching ``grid``.
    """
    if isinstance(cond, str):
        cond = Condition.parse(cond)
    grid = default_grid(problem.box) if grid is None else _as_grid(grid)
    if len(grid) == 0:
        raise ValueError("grid is empty")
    if not all(problem.box.contains(x, tol=1e-12) for x in grid):
        raise ValueError("grid points must lie in the bounding box")
    warn_if_leaves_box(problem, grid)
    if samples is None:
        samples = _samples(problem, grid.points)
    context = global_context(samples) if cond.tag == "OLD_III" else None
    per_point = []
    for x, s in zip(grid.points, samples):
        per_point.append((x, s if isinstance(s, Exception) else evaluate_point(s, cond, context)))
    return build_report(str(cond), subcondition_names(cond), grid, per_point)


@dataclass
class Violation:
    x: np.ndarray
    premise: str
    conclusion: str


def implication_audit(
    problem: ProblemSpec,
    grid=None,
    evaluate: Callable = point_passes,
    implications: Optional[dict] = None,
) -> list:
    """Counterexamples to ``premise passes => conclusion passes`` at grid points.

    ``evaluate(sample, cond, context)`` decides pointwise passes; it is a
    parameter so the audit itself can be tested against a broken checker.
    """
    grid = default_grid(problem.box) if grid is None else _as_grid(grid)
    implications = IMPLICATIONS if implications is None else implications
    samples = _samples(problem, grid.points)
    context = global_context(samples)
    out = []
    for x, s in zip(grid.points, samples):
        if isinstance(s, Exception):
            continue
        for premise, conclusion in implications.items():
            if evaluate(s, premise, context) and not evaluate(s, conclusion, context):
                out.append(Violation(np.array(x), str(premise), str(conclusion)))
    return out
