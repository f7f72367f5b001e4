"""Closed-form maximum-likelihood estimation for increasing concave means.

With three support points the MLE curve interpolates the three sample means,
so the estimate is available in closed form and no iterative least squares is
needed. Two routes are provided: the shifted-frame solution mapped back with
:func:`~emaxcli.core.model.from_tilde`, and the explicit original-frame
formulas. They agree to rounding.
"""
from __future__ import annotations

import logging

import numpy as np
import pandas as pd

from ..errors import InputError, ShapeError
from ..models import EmaxParams, ExactMLE, Line, NoMLE, ShapeCase, SufficientStats, TildeParams
from .model import admissible, eta, from_tilde
from .shape import classify, limiting_fit

logger = logging.getLogger(__name__)

# relative width of m1 - m2 below which the curve is numerically a straight line
DEGENERACY_TOL = 1e-12


def _slopes(s: SufficientStats) -> tuple[float, float]:
    shape, st = classify(s)
    if shape.case is not ShapeCase.INCREASING_CONCAVE:
        raise ShapeError(f"the MLE does not exist for {shape} data")
    if st.m1 - st.m2 < DEGENERACY_TOL * abs(st.m1):
        raise ShapeError(
            f"m1={st.m1:.17g} and m2={st.m2:.17g} are numerically equal; "
            "the fit degenerates to a line (theta2 -> infinity)"
        )
    return st.m1, st.m2


def mle_tilde(s: SufficientStats) -> TildeParams:
    m1, m2 = _slopes(s)
    y1, y2, y3 = s.ybar
    return TildeParams(
        t0=y1,
        t1=m1 * m2 / (m1 - m2) * (s.x[2] - s.x[1]),
        t2=(y3 - y2) / (m1 - m2),
    )


def mle(s: SufficientStats) -> EmaxParams:
    return from_tilde(mle_tilde(s), s.x[0])


def mle_fit(s: SufficientStats) -> ExactMLE | NoMLE:
    """Exact MLE as a result value.

    Data that is not increasing concave gets its limiting fit. Increasing means
    that are numerically collinear get the weighted regression line, the limit
    of the Emax curve as theta2 grows without bound.
    """
    shape, st = classify(s)
    if shape.case is not ShapeCase.INCREASING_CONCAVE:
        return NoMLE(shape=shape, limit=limiting_fit(s, shape))
    try:
        tilde = mle_tilde(s)
    except ShapeError as e:
        logger.info("%s", e)
        shape = shape.model_copy(update={"boundary": True, "ties": (*shape.ties, "m1~m2")})
        return NoMLE(shape=shape, limit=Line(slope=st.m0, intercept=st.q0))
    params = from_tilde(tilde, s.x[0])
    return ExactMLE(params=params, tilde=tilde, admissible=admissible(params, s.domain))


def mle_direct(s: SufficientStats) -> EmaxParams:
    """Original-frame closed form, independent of the tilde map."""
    m1, m2 = _slopes(s)
    a, x2, b = s.x
    y1, y2, y3 = s.ybar
    k = m1 * m2 * (b - x2) / ((y3 - y2) - a * (m1 - m2))
    return EmaxParams(
        theta0=y1 - a * k,
        theta1=m1 * m2 / (m1 - m2) * (b - x2) + a * k,
        theta2=(y3 - y2) / (m1 - m2) - a,
    )


def interpolation_check(s: SufficientStats, p: EmaxParams) -> float:
    """Largest absolute gap between the sample means and the curve at the doses."""
    x, _, y = s.arrays()
    return float(np.max(np.abs(y - eta(x, p))))


# ---------------------------------------------------------------------------
# Noise level from replicates
# ---------------------------------------------------------------------------

def _within_ss(frame: pd.DataFrame) -> float:
    centred = frame["response"] - frame.groupby("dose")["response"].transform("mean")
    return float(np.dot(centred, centred))


def sigma2_mle(frame: pd.DataFrame) -> float:
    """ML estimate of the error variance: within-dose sum of squares over n."""
    return _within_ss(frame) / len(frame)


def pooled_sigma(frame: pd.DataFrame) -> float:
    """Pooled within-dose standard deviation (denominator n - 3)."""
    dof = len(frame) - frame["dose"].nunique()
    if dof <= 0:
        raise InputError("sigma cannot be estimated: no replicated doses")
    ss = _within_ss(frame)
    if ss <= 0.0:
        raise InputError("sigma cannot be estimated: replicates show no variation")
    sigma = float(np.sqrt(ss / dof))
    logger.info("pooled within-dose sigma = %.6g on %d degrees of freedom", sigma, dof)
    return sigma
