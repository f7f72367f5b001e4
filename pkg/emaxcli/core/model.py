"""Emax mean function, its derivatives, the shifted-dose reparametrization and
locally D-optimal three-point designs.

    eta(x, theta) = theta0 + theta1 * x / (x + theta2)

Every function accepts scalar or array doses. Doses on the vertical asymptote
``x = -theta2`` raise :class:`~emaxcli.errors.SingularityError` instead of
returning infinities.
"""
from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..errors import DomainError, SingularityError
from ..models import (
    DoseDomain, EmaxParams, NoiseModel, ThreePointDesign, TildeParams,
)

logger = logging.getLogger(__name__)


def _denominator(x: ArrayLike, theta2: float) -> NDArray:
    den = np.asarray(x, dtype=float) + theta2
    if np.any(den == 0.0):
        raise SingularityError(f"dose on the vertical asymptote x = -theta2 = {-theta2:g}")
    return den


def _scalar_or_array(v: NDArray, like: ArrayLike):
    return float(v) if np.ndim(like) == 0 else v


# ---------------------------------------------------------------------------
# Mean function
# ---------------------------------------------------------------------------

def eta(x: ArrayLike, p: EmaxParams):
    """Mean response at dose(s) *x*."""
    den = _denominator(x, p.theta2)
    v = p.theta0 + p.theta1 * np.asarray(x, dtype=float) / den
    return _scalar_or_array(v, x)


def eta_gradient(x: ArrayLike, p: EmaxParams) -> NDArray:
    """Gradient with respect to (theta0, theta1, theta2).

    Returns shape ``(3,)`` for a scalar dose and ``(len(x), 3)`` otherwise.
    """
    xa = np.asarray(x, dtype=float)
    den = _denominator(xa, p.theta2)
    g = np.stack(
        [np.ones_like(xa), xa / den, -p.theta1 * xa / den**2],
        axis=-1,
    )
    return g


def eta_derivatives(x: ArrayLike, p: EmaxParams) -> tuple:
    """First and second derivatives of eta in the dose."""
    den = _denominator(x, p.theta2)
    d1 = p.theta1 * p.theta2 / den**2
    d2 = -2.0 * p.theta1 * p.theta2 / den**3
    return _scalar_or_array(d1, x), _scalar_or_array(d2, x)


def admissible(
    p: EmaxParams,
    domain: DoseDomain,
    relaxed: bool = False,
    doses: Sequence[float] | None = None,
) -> bool:
    return p.is_admissible(domain, relaxed=relaxed, doses=doses)


# ---------------------------------------------------------------------------
# Shifted frame  x~ = x - a
# ---------------------------------------------------------------------------

def to_tilde(p: EmaxParams, a: float) -> TildeParams:
    t2 = p.theta2 + a
    if t2 == 0.0:
        raise SingularityError(f"theta2 + a = 0 (theta2={p.theta2:g}, a={a:g})")
    shift = a * p.theta1 / t2
    return TildeParams(t0=p.theta0 + shift, t1=p.theta1 - shift, t2=t2)


def from_tilde(t: TildeParams, a: float) -> EmaxParams:
    if t.t2 == 0.0:
        raise SingularityError("t2 = 0: the shifted curve has its pole at the lowest dose")
    theta2 = t.t2 - a
    if a == 0.0:
        return EmaxParams(theta0=t.t0, theta1=t.t1, theta2=t.t2)
    if theta2 == 0.0:
        raise SingularityError(f"t2 = a = {a:g}: theta1 is not recoverable at theta2 = 0")
    theta1 = t.t1 * t.t2 / theta2
    return EmaxParams(theta0=t.t0 - a * t.t1 / theta2, theta1=theta1, theta2=theta2)


# ---------------------------------------------------------------------------
# Locally D-optimal designs
# ---------------------------------------------------------------------------

def d_optimal_x2(domain: DoseDomain, theta2: float) -> float:
    """Central support point of the locally D-optimal design.

    The mean response there is the average of the responses at *a* and *b*.
    """
    a, b = domain.a, domain.b
    if not theta2 > -a:
        raise DomainError(f"theta2={theta2:g} must exceed -a={-a:g}")
    return (b * (a + theta2) + a * (b + theta2)) / ((a + theta2) + (b + theta2))


def theta2_for_dopt_x2(domain: DoseDomain, x2: float) -> float:
    """Inverse of :func:`d_optimal_x2`: the guessed theta2 a design was built for."""
    a, b = domain.a, domain.b
    if not a < x2 < 0.5 * (a + b):
        raise DomainError(f"x2={x2:g} is not a D-optimal central point on {domain}")
    return (2.0 * a * b - x2 * (a + b)) / (2.0 * x2 - a - b)


def d_optimal_design(domain: DoseDomain, theta2: float) -> ThreePointDesign:
    x2 = d_optimal_x2(domain, theta2)
    logger.debug("D-optimal design on %s at theta2=%g: x2=%.17g", domain, theta2, x2)
    return ThreePointDesign(domain=domain, x2=x2, weights=(1 / 3, 1 / 3, 1 / 3))


def fisher_information(
    design: ThreePointDesign,
    p: EmaxParams,
    noise: NoiseModel,
    n: float,
) -> NDArray:
    """Expected information ``(n / sigma^2) * sum_i w_i grad_i grad_i^T``.

    *n* is the total sample size; per-point sizes ``w_i * n`` need not be integer.
    """
    g = eta_gradient(np.asarray(design.doses), p)
    w = np.asarray(design.weights, dtype=float)
    info = (g * w[:, None]).T @ g
    info = 0.5 * (info + info.T)
    return (n / noise.sigma**2) * info
