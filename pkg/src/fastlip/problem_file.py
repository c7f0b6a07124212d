"""JSON files describing affine problems ``f0(x) = C^T x``, ``f(x) = G x + eta``.

Example::

    {
      "n": 2, "m": 2,
      "objective": [[2, 1], [1, 2]],
      "G": [[0, 0.2], [0.2, 0]],
      "eta": [1, 1],
      "box": {"lower": [0, 0], "upper": [3, 3]},
      "eq_set": [],
      "sense": "max"
    }

``objective`` is the constant ``n x m`` objective gradient ``C``; ``G`` is in
the usual row-per-constraint layout, so the package-oriented constraint
gradient is ``G^T``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import BoundingBox, InvalidInputError, ProblemSpec

REQUIRED = ("n", "m", "objective", "G", "eta", "box")


class ProblemFileError(InvalidInputError):
    """Malformed problem file; the message names the offending field."""


def _matrix(doc, key, shape):
    try:
        A = np.asarray(doc[key], dtype=float)
    except (TypeError, ValueError):
        raise ProblemFileError(f"field '{key}': expected numbers") from None
    if A.shape != shape:
        raise ProblemFileError(f"field '{key}': expected shape {shape}, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ProblemFileError(f"field '{key}': entries must be finite")
    return A


def problem_from_dict(doc: dict, name: str = "file") -> ProblemSpec:
    if not isinstance(doc, dict):
        raise ProblemFileError("top level must be a JSON object")
    for key in REQUIRED:
        if key not in doc:
            raise ProblemFileError(f"missing field '{key}'")
    n, m = doc["n"], doc["m"]
    if not (isinstance(n, int) and isinstance(m, int) and n >= 1 and m >= 1):
        raise ProblemFileError("fields 'n' and 'm' must be positive integers")
    C = _matrix(doc, "objective", (n, m))
    G = _matrix(doc, "G", (n, n))
    eta = _matrix(doc, "eta", (n,))
    box = doc["box"]
    if not isinstance(box, dict) or "lower" not in box or "upper" not in box:
        raise ProblemFileError("field 'box': expected {'lower': [...], 'upper': [...]}")
    lo = _matrix(box, "lower", (n,))
    hi = _matrix(box, "upper", (n,))
    if np.any(lo > hi):
        raise ProblemFileError("field 'box': lower must not exceed upper")
    eq = doc.get("eq_set", [])
    if not isinstance(eq, list) or not all(isinstance(i, int) and 0 <= i < n for i in eq):
        raise ProblemFileError(f"field 'eq_set': expected indices in [0, {n})")
    sense = doc.get("sense", "max")
    if sense not in ("max", "min"):
        raise ProblemFileError("field 'sense': expected 'max' or 'min'")
    GT = G.T.copy()
    return ProblemSpec(
        n=n,
        m=m,
        obj=lambda x: C.T @ np.asarray(x, dtype=float),
        obj_grad=lambda x: C,
        con=lambda x: G @ np.asarray(x, dtype=float) + eta,
        con_grad=lambda x: GT,
        box=BoundingBox(lo, hi),
        eq_set=tuple(eq),
        sense=sense,
        name=str(doc.get("name", name)),
    )


def load_problem(path) -> ProblemSpec:
    """Read a problem file.

    Raises:
        FileNotFoundError: if ``path`` does not exist.
        ProblemFileError: on malformed JSON (with line number) or bad fields.
    """
    path = Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return problem_from_dict(doc, name=path.stem)
    except ProblemFileError as exc:
        raise ProblemFileError(f"{path}: {exc}") from None
