"""Firth-modified score for the Emax model with Gaussian errors.

The modified score is ``U* = U + A`` where, for normal errors, the bias
correction reduces to ``A_t = 1/2 trace(I^-1 Q_t)``. Two independent routes to
``A`` are provided:

* :func:`firth_correction`: closed form in terms of the design moments
  ``M[l1][l2] = E[x^l1 / (theta2 + x)^l2]``
* :func:`firth_correction_trace`: the trace formula assembled from explicit
  ``I`` and ``Q_t`` matrices

:func:`firth_solve` looks for an admissible root of ``U* = 0`` with a damped
Newton iteration in ``(theta0, theta1, log(theta2 + a))`` and a sequence of
starting points. Failure is returned as a :class:`FirthFailure` value.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from statsmodels.tools.numdiff import approx_fprime

from ..errors import DegenerateDesignError, DomainError, SingularityError
from ..models import (
    DesignMoments, EmaxParams, FailureReason, FirthCorrection, FirthEstimate,
    FirthFailure, InfoMatrices, NoiseModel, SolverOpts, SufficientStats,
    ThreePointDesign,
)
from ..utils.numdiff import newton_step
from .model import eta_gradient

logger = logging.getLogger(__name__)

Support = Union[ThreePointDesign, SufficientStats, tuple]

# D below this fraction of V11 * V12 means the support cannot identify theta
DEGENERACY_TOL = 1e-12
# iterates with theta2 + a below this fraction of (b - a) approach the step-at-a limit
WALL_TOL = 1e-10
MAX_LOG_STEP = 5.0
MIN_DAMPING = 2.0 ** -30
# a start is abandoned when |U*|^2 has not halved over this many iterations
STALL_WINDOW = 20
STALL_RATIO = 0.5


def _support(src: Support) -> tuple[NDArray, NDArray]:
    """Doses and probability weights of a design, of the empirical design of
    sufficient statistics, or of a ``(doses, weights)`` pair."""
    if isinstance(src, ThreePointDesign):
        return np.asarray(src.doses, dtype=float), np.asarray(src.weights, dtype=float)
    if isinstance(src, SufficientStats):
        x, n, _ = src.arrays()
        return x, n / n.sum()
    x, w = (np.asarray(v, dtype=float) for v in src)
    return x, w / w.sum()


def _den(x: NDArray, theta2: float) -> NDArray:
    den = x + theta2
    if np.any(den == 0.0):
        raise SingularityError(f"dose on the vertical asymptote x = -theta2 = {-theta2:g}")
    return den


# ---------------------------------------------------------------------------
# Array kernels (shared by the public API and the solver)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Moments:
    M12: float
    M13: float
    M23: float
    M24: float
    M25: float
    v11: float
    v12: float
    cov12: float
    d: float


def _moments(x: NDArray, w: NDArray, theta2: float) -> _Moments:
    den = _den(x, theta2)
    g = x / den
    h = g / den
    gc = g - np.dot(w, g)
    hc = h - np.dot(w, h)
    # Lagrange identity keeps D >= 0 without cancellation
    cross = np.outer(gc, hc) - np.outer(hc, gc)
    d = 0.5 * float(w @ (cross**2) @ w)
    x2 = x * x
    return _Moments(
        M12=float(np.dot(w, h)),
        M13=float(np.dot(w, h / den)),
        M23=float(np.dot(w, x2 / den**3)),
        M24=float(np.dot(w, x2 / den**4)),
        M25=float(np.dot(w, x2 / den**5)),
        v11=float(np.dot(w, gc * gc)),
        v12=float(np.dot(w, hc * hc)),
        cov12=float(np.dot(w, gc * hc)),
        d=d,
    )


def _correction(x: NDArray, w: NDArray, theta1: float, theta2: float) -> NDArray:
    if theta1 == 0.0:
        raise DegenerateDesignError("theta1 = 0: the curve is flat and theta2 is not identified")
    m = _moments(x, w, theta2)
    if not m.d > DEGENERACY_TOL * m.v11 * m.v12:
        raise DegenerateDesignError(f"design moments are degenerate (D={m.d:.3g})")
    return np.array([
        (m.v11 * m.M13 - m.cov12 * m.M12) / (theta1 * m.d),
        (m.v11 * m.M24 - m.cov12 * m.M23) / (theta1 * m.d),
        -(m.v11 * m.M25 - m.cov12 * m.M24) / m.d,
    ])


def _score(x: NDArray, n: NDArray, y: NDArray, theta: NDArray, sigma2: float) -> NDArray:
    den = _den(x, theta[2])
    g = x / den
    resid = y - (theta[0] + theta[1] * g)
    grad = np.stack([np.ones_like(x), g, -theta[1] * g / den], axis=-1)
    return (n * resid) @ grad / sigma2


# ---------------------------------------------------------------------------
# Score and information
# ---------------------------------------------------------------------------

def score(data: SufficientStats | pd.DataFrame, p: EmaxParams, noise: NoiseModel) -> NDArray:
    """Score vector from sufficient statistics or a raw ``dose,response`` frame.

    Within a dose group the gradient is constant, so the group mean carries
    all the information.
    """
    if isinstance(data, pd.DataFrame):
        x = data["dose"].to_numpy(dtype=float)
        y = data["response"].to_numpy(dtype=float)
        n = np.ones_like(x)
    else:
        x, n, y = data.arrays()
    return _score(x, n, y, p.as_array(), noise.sigma**2)


def score_many(x: ArrayLike, n: ArrayLike, Y: ArrayLike, p: EmaxParams, noise: NoiseModel) -> NDArray:
    """Score for each row of sample means *Y*; shape ``(k, 3)``."""
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    G = eta_gradient(x, p)
    resid = Y - (p.theta0 + p.theta1 * x / _den(x, p.theta2))
    return (resid * n) @ G / noise.sigma**2


def observed_information(
    x: ArrayLike, n: ArrayLike, Y: ArrayLike, p: EmaxParams, noise: NoiseModel,
) -> NDArray:
    """Negative Hessian of the log-likelihood for each row of means; ``(k, 3, 3)``."""
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    den = _den(x, p.theta2)
    G = eta_gradient(x, p)
    base = (G * n[:, None]).T @ G
    resid = (Y - (p.theta0 + p.theta1 * x / den)) * n           # (k, 3)
    h12 = resid @ (x / den**2)                                   # -d2eta/dtheta1 dtheta2
    h22 = resid @ (2.0 * p.theta1 * x / den**3)                  #  d2eta/dtheta2^2

    O = np.broadcast_to(base, (Y.shape[0], 3, 3)).copy()
    O[:, 1, 2] += h12
    O[:, 2, 1] += h12
    O[:, 2, 2] -= h22
    return O / noise.sigma**2


def expected_information(src: Support, p: EmaxParams, noise: NoiseModel, n: float) -> NDArray:
    x, w = _support(src)
    G = eta_gradient(x, p)
    info = (G * w[:, None]).T @ G
    return (n / noise.sigma**2) * 0.5 * (info + info.T)


def q_matrices(
    src: Support, p: EmaxParams, noise: NoiseModel, n: float,
) -> tuple[NDArray, NDArray, NDArray]:
    """``Q_t = E(-O U_t)``; only the (2,3), (3,2) and (3,3) entries are non-zero."""
    x, w = _support(src)
    m = _moments(x, w, p.theta2)
    s = n / noise.sigma**2
    t1 = p.theta1
    entries = (
        (-s * m.M12, 2.0 * s * t1 * m.M13),
        (-s * m.M23, 2.0 * s * t1 * m.M24),
        (s * t1 * m.M24, -2.0 * s * t1 * t1 * m.M25),
    )
    out = []
    for off, diag in entries:
        Q = np.zeros((3, 3))
        Q[1, 2] = Q[2, 1] = off
        Q[2, 2] = diag
        out.append(Q)
    return tuple(out)


def info_matrices(s: SufficientStats, p: EmaxParams, noise: NoiseModel) -> InfoMatrices:
    x, n, y = s.arrays()
    O = observed_information(x, n, y, p, noise)[0]
    I = expected_information(s, p, noise, s.total_n)
    Q = q_matrices(s, p, noise, s.total_n)
    return InfoMatrices(
        observed=O.tolist(), expected=I.tolist(),
        q1=Q[0].tolist(), q2=Q[1].tolist(), q3=Q[2].tolist(),
    )


# ---------------------------------------------------------------------------
# Bias correction
# ---------------------------------------------------------------------------

def design_moments(src: Support, theta2: float) -> DesignMoments:
    x, w = _support(src)
    den = _den(x, theta2)
    m = _moments(x, w, theta2)
    return DesignMoments(
        first=tuple(float(np.dot(w, x / den**k)) for k in range(6)),
        second=tuple(float(np.dot(w, x * x / den**k)) for k in range(9)),
        v11=m.v11, v12=m.v12, cov12=m.cov12, d=m.d,
    )


def firth_correction(src: Support, p: EmaxParams) -> FirthCorrection:
    """Closed-form ``A``; free of sigma and of the total sample size."""
    x, w = _support(src)
    a1, a2, a3 = _correction(x, w, p.theta1, p.theta2)
    return FirthCorrection(a1=a1, a2=a2, a3=a3)


def firth_correction_trace(src: Support, p: EmaxParams) -> FirthCorrection:
    """``A_t = 1/2 trace(I^-1 Q_t)`` from explicit matrices (unit n and sigma)."""
    unit = NoiseModel(sigma=1.0)
    I = expected_information(src, p, unit, 1.0)
    scale = 1.0 / np.sqrt(np.diag(I))
    I_inv = scale[:, None] * np.linalg.inv(I * np.outer(scale, scale)) * scale[None, :]
    a = [0.5 * float(np.trace(I_inv @ Q)) for Q in q_matrices(src, p, unit, 1.0)]
    return FirthCorrection(a1=a[0], a2=a[1], a3=a[2])


def modified_score(s: SufficientStats, p: EmaxParams, noise: NoiseModel) -> NDArray:
    return score(s, p, noise) + firth_correction(s, p).as_array()


def modified_score_jacobian(s: SufficientStats, p: EmaxParams, noise: NoiseModel) -> NDArray:
    """Central-difference derivative of ``U*`` with respect to theta."""
    return approx_fprime(
        p.as_array(), lambda v: modified_score(s, EmaxParams.from_array(v), noise), centered=True
    )


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------

@dataclass
class _Attempt:
    start: str
    converged: bool
    theta: NDArray | None
    norm: float
    iterations: int
    reason: FailureReason | None
    detail: str = ""


class FirthSolver:
    """Damped Newton for ``U*(theta) = 0`` over a sequence of starting points.

    Iterates live in ``z = (theta0, theta1, log(theta2 + a))`` so every dose
    stays to the right of the asymptote.
    """

    def __init__(self, s: SufficientStats, noise: NoiseModel, opts: SolverOpts = SolverOpts()):
        self.stats = s
        self.opts = opts
        self.x, self.n, self.y = s.arrays()
        self.w = self.n / self.n.sum()
        self.a = s.x[0]
        self.width = s.x[2] - s.x[0]
        self.sigma2 = noise.sigma**2
        self.theta2_cap = opts.cap_for(s.domain)

    # -- parametrisation ----------------------------------------------------
    def theta(self, z: NDArray) -> NDArray:
        return np.array([z[0], z[1], np.exp(z[2]) - self.a])

    def z(self, theta: NDArray) -> NDArray:
        return np.array([theta[0], theta[1], np.log(theta[2] + self.a)])

    def residual(self, z: NDArray) -> NDArray:
        th = self.theta(z)
        return _score(self.x, self.n, self.y, th, self.sigma2) + _correction(self.x, self.w, th[1], th[2])

    def _safe_residual(self, z: NDArray) -> NDArray | None:
        try:
            with np.errstate(all="ignore"):
                f = self.residual(z)
        except (SingularityError, DegenerateDesignError):
            return None
        return f if np.all(np.isfinite(f)) else None

    # -- starting points ----------------------------------------------------
    def _ls_start(self, theta2: float) -> NDArray | None:
        """theta0, theta1 by weighted least squares for a fixed theta2."""
        g = self.x / (self.x + theta2)
        X = np.column_stack([np.ones_like(g), g])
        sw = np.sqrt(self.n)
        (t0, t1), *_ = np.linalg.lstsq(X * sw[:, None], self.y * sw, rcond=None)
        return None if t1 == 0.0 else np.array([t0, t1, theta2])

    def _interpolant(self) -> NDArray | None:
        """Hyperbola through the three means, admissible or not."""
        (x1, x2, x3), (y1, y2, y3) = self.x, self.y
        m1, m2 = (y2 - y1) / (x2 - x1), (y3 - y1) / (x3 - x1)
        if m1 == m2:
            return None
        t2 = (y3 - y2) / (m1 - m2)
        t1 = m1 * m2 / (m1 - m2) * (x3 - x2)
        if not (np.isfinite(t2) and t2 > 0.0 and t1 != 0.0) or t2 == self.a:
            return None
        theta2 = t2 - self.a
        return np.array([y1 - self.a * t1 / theta2, t1 * t2 / theta2, theta2])

    def starts(self, init: EmaxParams | None) -> list[tuple[str, NDArray]]:
        out: list[tuple[str, NDArray]] = []
        for kind in self.opts.starts:
            if kind == "user" and init is not None:
                if init.theta2 + self.a > 0.0 and init.theta1 != 0.0:
                    out.append(("user", init.as_array()))
                else:
                    logger.warning("ignoring user start %s: theta2 + a must be positive", init)
            elif kind == "interpolant":
                th = self._interpolant()
                if th is not None:
                    out.append(("interpolant", th))
            elif kind == "grid":
                for k in self.opts.grid_exponents:
                    th = self._ls_start(self.width * 2.0**k - self.a)
                    if th is not None:
                        out.append((f"grid(k={k})", th))
        return out

    # -- Newton ---------------------------------------------------------------
    def _admissible(self, theta: NDArray) -> FailureReason | None:
        if theta[2] + self.a < WALL_TOL * self.width or theta[2] > self.theta2_cap:
            return FailureReason.DIVERGENCE
        if not theta[1] > 0.0:
            return FailureReason.INADMISSIBLE_ROOT
        return None

    def newton(self, start: str, theta0: NDArray) -> _Attempt:
        z = self.z(theta0)
        f = self._safe_residual(z)
        if f is None:
            return _Attempt(start, False, None, np.inf, 0, FailureReason.DIVERGENCE, "start not evaluable")

        merits: list[float] = []
        for it in range(self.opts.max_iter + 1):
            norm = float(np.max(np.abs(f)))
            theta = self.theta(z)
            if norm < self.opts.tol:
                reason = self._admissible(theta)
                return _Attempt(start, reason is None, theta, norm, it, reason,
                                "" if reason is None else f"root at {EmaxParams.from_array(theta)}")
            if theta[2] > self.theta2_cap or theta[2] + self.a < WALL_TOL * self.width:
                return _Attempt(start, False, theta, norm, it, FailureReason.DIVERGENCE,
                                f"theta2 left [{-self.a + WALL_TOL * self.width:.3g}, {self.theta2_cap:.3g}]")
            merits.append(float(f @ f))
            if it >= STALL_WINDOW and merits[-1] > STALL_RATIO * merits[-1 - STALL_WINDOW]:
                return _Attempt(start, False, theta, norm, it, FailureReason.DIVERGENCE,
                                f"no progress in {STALL_WINDOW} iterations")
            if it == self.opts.max_iter:
                break

            with np.errstate(all="ignore"):
                J = approx_fprime(z, self._safe_or_nan, centered=True)
            if not np.all(np.isfinite(J)):
                return _Attempt(start, False, theta, norm, it, FailureReason.DIVERGENCE, "jacobian not finite")
            d = newton_step(J, f)
            if abs(d[2]) > MAX_LOG_STEP:
                d *= MAX_LOG_STEP / abs(d[2])

            merit, t = float(f @ f), 1.0
            while t >= MIN_DAMPING:
                f_new = self._safe_residual(z + t * d)
                if f_new is not None and float(f_new @ f_new) < (1.0 - 1e-4 * t) * merit:
                    break
                t *= 0.5
            else:
                return _Attempt(start, False, theta, norm, it, FailureReason.DIVERGENCE,
                                "line search stalled away from a root")
            z, f = z + t * d, f_new
            logger.debug("%s it=%d |U*|=%.3g step=%g", start, it + 1, float(np.max(np.abs(f))), t)

        return _Attempt(start, False, self.theta(z), float(np.max(np.abs(f))), self.opts.max_iter,
                        FailureReason.ITERATION_CAP, f"no convergence in {self.opts.max_iter} iterations")

    def _safe_or_nan(self, z: NDArray) -> NDArray:
        f = self._safe_residual(z)
        return np.full(3, np.nan) if f is None else f

    def solve(self, init: EmaxParams | None = None) -> FirthEstimate | FirthFailure:
        attempts: list[_Attempt] = []
        for label, th in self.starts(init):
            att = self.newton(label, th)
            attempts.append(att)
            if att.converged:
                logger.debug("Firth root from %s start after %d iterations", label, att.iterations)
                return FirthEstimate(
                    params=EmaxParams.from_array(att.theta),
                    score_norm=att.norm,
                    iterations=att.iterations,
                    start=label,
                )

        if not attempts:
            return FirthFailure(reason=FailureReason.DIVERGENCE, detail="no usable starting point")
        # an inadmissible root outranks an iteration cap, which outranks divergence
        reasons = [a.reason for a in attempts]
        reason = next(
            r for r in (FailureReason.INADMISSIBLE_ROOT, FailureReason.ITERATION_CAP, FailureReason.DIVERGENCE)
            if r in reasons
        )
        first = attempts[reasons.index(reason)]
        detail = f"{len(attempts)} starts failed; first {reason.value} from {first.start}: {first.detail}"
        logger.debug("Firth failure: %s", detail)
        return FirthFailure(reason=reason, detail=detail)


def firth_solve(
    s: SufficientStats,
    noise: NoiseModel,
    init: EmaxParams | None = None,
    opts: SolverOpts = SolverOpts(),
) -> FirthEstimate | FirthFailure:
    if init is not None and not np.all(np.isfinite(init.as_array())):
        raise DomainError(f"non-finite starting point {init}")
    return FirthSolver(s, noise, opts).solve(init)
