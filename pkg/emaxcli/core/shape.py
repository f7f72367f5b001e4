"""Sufficient statistics and the geometric shape of three sample means.

The estimator to use is decided entirely by the shape of the points
``(x_i, ybar_i)``:

* increasing concave  -> the closed-form MLE exists
* concave, not increasing (Case 1)  -> best fit is a step at ``a`` or a constant
* convex (Case 2)  -> best fit is the weighted regression line or a constant

Exact ties follow the non-strict side of each defining inequality and are
reported as ``boundary`` metadata on the returned :class:`ShapeClass`.
"""
from __future__ import annotations

import logging
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray

from ..errors import InputError, ShapeError
from ..models import (
    Constant, EmaxParams, Line, ShapeCase, ShapeClass, ShapeStats, StepAtA,
    SufficientStats,
)
from .model import eta

logger = logging.getLogger(__name__)

# integer codes used by the vectorised classifier, in ShapeCase declaration order
CASE_CODES: tuple[ShapeCase, ...] = tuple(ShapeCase)
CODE_OF: dict[ShapeCase, int] = {c: i for i, c in enumerate(CASE_CODES)}


# ---------------------------------------------------------------------------
# Reduction
# ---------------------------------------------------------------------------

def reduce(raw: Iterable[tuple[float, Sequence[float]]]) -> SufficientStats:
    """Collapse ``(dose, responses)`` groups into per-dose counts and means.

    Each dose must appear once; doses are returned in ascending order.
    """
    groups: dict[float, list[float]] = {}
    for dose, responses in raw:
        responses = list(responses)
        if not responses:
            raise InputError(f"dose {dose:g} has no responses")
        if float(dose) in groups:
            raise InputError(f"dose {dose:g} appears in more than one group")
        groups[float(dose)] = [float(r) for r in responses]

    if len(groups) != 3:
        raise InputError(f"expected exactly 3 distinct doses, found {len(groups)}")

    doses = sorted(groups)
    return SufficientStats(
        x=tuple(doses),
        n=tuple(len(groups[d]) for d in doses),
        ybar=tuple(float(np.mean(groups[d])) for d in doses),
    )


def reduce_frame(df: pd.DataFrame) -> SufficientStats:
    """:func:`reduce` for a frame with ``dose`` and ``response`` columns."""
    return reduce((d, g["response"].tolist()) for d, g in df.groupby("dose", sort=True))


# ---------------------------------------------------------------------------
# Vectorised statistics & classification
# ---------------------------------------------------------------------------

def _weighted_line(x: NDArray, n: NDArray, Y: NDArray) -> tuple[NDArray, NDArray]:
    """Weighted least-squares line through the rows of *Y* with weights *n*."""
    xbar = np.dot(n, x) / n.sum()
    dx = x - xbar
    m0 = (Y @ (n * dx)) / np.dot(n, dx * dx)
    q0 = (Y @ n) / n.sum() - m0 * xbar
    return m0, q0


def _stats_arrays(x: ArrayLike, n: ArrayLike, Y: ArrayLike) -> dict[str, NDArray]:
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    y1, y2, y3 = Y[:, 0], Y[:, 1], Y[:, 2]
    m0, q0 = _weighted_line(x, n, Y)
    return {
        "m1": (y2 - y1) / (x[1] - x[0]),
        "m2": (y3 - y1) / (x[2] - x[0]),
        "m0": m0,
        "q0": q0,
        "ybar23": (n[1] * y2 + n[2] * y3) / (n[1] + n[2]),
        "ybar": (Y @ n) / n.sum(),
    }


def classify_many(x: ArrayLike, n: ArrayLike, Y: ArrayLike) -> NDArray:
    """Case codes (indices into :data:`CASE_CODES`) for each row of means *Y*."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    st = _stats_arrays(x, n, Y)
    y1, y2, y3 = Y[:, 0], Y[:, 1], Y[:, 2]

    convex = st["m1"] <= st["m2"]
    increasing = (y1 < y2) & (y2 < y3)
    case1 = np.where(y1 < st["ybar23"], CODE_OF[ShapeCase.CASE1A], CODE_OF[ShapeCase.CASE1B])
    concave = np.where(increasing, CODE_OF[ShapeCase.INCREASING_CONCAVE], case1)
    case2 = np.where(st["m0"] > 0, CODE_OF[ShapeCase.CASE2A], CODE_OF[ShapeCase.CASE2B])
    return np.where(convex, case2, concave).astype(np.int8)


def inequality_matrices(x: ArrayLike, n: ArrayLike) -> dict[str, NDArray]:
    """Linear systems ``M @ ybar < 0`` describing each class.

    Keyed by case name; ``"case2"`` is a single row covering both convex
    subcases, the others have three rows.
    """
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    d21, d31 = x[1] - x[0], x[2] - x[0]
    w2, w3 = n[1] / (n[1] + n[2]), n[2] / (n[1] + n[2])

    concave = np.array([1 / d21 - 1 / d31, -1 / d21, 1 / d31])      # m2 - m1 < 0
    return {
        ShapeCase.INCREASING_CONCAVE.value: np.array([[1.0, -1.0, 0.0], [0.0, 1.0, -1.0], concave]),
        ShapeCase.CASE1A.value: np.array([concave, [0.0, -1.0, 1.0], [1.0, -w2, -w3]]),
        ShapeCase.CASE1B.value: np.array([concave, [0.0, -1.0, 1.0], [-1.0, w2, w3]]),
        "case2": -concave[None, :],
    }


# ---------------------------------------------------------------------------
# Scalar API
# ---------------------------------------------------------------------------

def shape_stats(s: SufficientStats) -> ShapeStats:
    st = _stats_arrays(s.x, s.n, s.ybar)
    return ShapeStats(**{k: float(v[0]) for k, v in st.items()})


def classify(s: SufficientStats) -> tuple[ShapeClass, ShapeStats]:
    st = shape_stats(s)
    y1, y2, y3 = s.ybar
    case = CASE_CODES[int(classify_many(s.x, s.n, s.ybar)[0])]

    ties: list[str] = []
    if st.m1 == st.m2:
        ties.append("m1=m2")
    if case.is_case2:
        if st.m0 == 0.0:
            ties.append("m0=0")
    else:
        if y1 == y2:
            ties.append("ybar1=ybar2")
        if y2 == y3:
            ties.append("ybar2=ybar3")
        if case.is_case1 and y1 == st.ybar23:
            ties.append("ybar1=ybar23")

    shape = ShapeClass(case=case, boundary=bool(ties), ties=tuple(ties))
    logger.debug("classified %s as %s", s, shape)
    return shape, st


def limiting_fit(s: SufficientStats, c: ShapeClass | None = None):
    """Best-fitting member of the closure of Emax curves when the MLE does not exist."""
    if c is None:
        c, st = classify(s)
    else:
        st = shape_stats(s)

    match c.case:
        case ShapeCase.INCREASING_CONCAVE:
            raise ShapeError("increasing concave data has an exact MLE, not a limiting fit")
        case ShapeCase.CASE1A:
            return StepAtA(at=s.x[0], low=s.ybar[0], high=st.ybar23)
        case ShapeCase.CASE2A:
            return Line(slope=st.m0, intercept=st.q0)
        case _:
            return Constant(level=st.ybar)


def weighted_sse(s: SufficientStats, curve) -> float:
    """``sum_i n_i (ybar_i - f(x_i))^2`` for Emax parameters or a limiting fit."""
    x, n, y = s.arrays()
    fitted = eta(x, curve) if isinstance(curve, EmaxParams) else curve.evaluate(x)
    return float(np.dot(n, (y - fitted) ** 2))
