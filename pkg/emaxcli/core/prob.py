"""Probabilities of the shape classes under Gaussian sample means.

Every class region depends on the means only through the two contrasts
``D1 = ybar2 - ybar1`` and ``D2 = ybar3 - ybar1``. With ``r = (x3-x1)/(x2-x1)``
and ``k = n2/n3`` the regions are

    exists   D1 > 0,  D1 < D2 < r*D1
    case 2   D2 >= r*D1
    case 1a  D1 > 0,  -k*D1 < D2 < D1
    case 1b  D2 < min(-k*D1, r*D1)

``D2`` given ``D1 = t`` is normal, so each probability is a one-dimensional
integral of normal cdf differences (``method="quad"``). The Monte Carlo route
(``method="mc"``) draws mean triples and classifies them directly.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numpy.typing import NDArray
from scipy import integrate, optimize, special, stats

from ..errors import DomainError, NoBracketError
from ..models import (
    AlphaRow, DoseDomain, ProbMethod, Scenario, ShapeCase, ShapeProbabilities,
    SweepIn, SweepOut, SweepRow,
)
from ..utils.rng import PROB_STREAM, default_seed, stream
from .model import d_optimal_x2, eta
from .shape import CODE_OF, classify_many

logger = logging.getLogger(__name__)

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-10
QUAD_LIMIT = 200
TAIL_SD = 12.0
MC_CHUNK = 1 << 16
_SQRT_2PI = np.sqrt(2.0 * np.pi)


def bivariate_contrasts(sc: Scenario) -> tuple[NDArray, NDArray]:
    """Mean and covariance of ``(ybar2 - ybar1, ybar3 - ybar1)``."""
    mu = eta(np.asarray(sc.design.doses), sc.truth)
    s = sc.noise.sigma**2 / np.asarray(sc.n_per_point, dtype=float)
    mean = np.array([mu[1] - mu[0], mu[2] - mu[0]])
    cov = np.array([[s[0] + s[1], s[0]], [s[0], s[0] + s[2]]])
    return mean, cov


def log_dose_grid(domain: DoseDomain, points: int = 64) -> NDArray:
    """Log-spaced interior doses from ``a + 1e-4 (b-a)`` to ``a + 0.9999 (b-a)``."""
    return domain.a + np.geomspace(1e-4 * domain.width, 0.9999 * domain.width, points)


# ---------------------------------------------------------------------------
# Deterministic route
# ---------------------------------------------------------------------------

class _Conditional:
    """Outer density of D1 and conditional normal of D2 given D1."""

    def __init__(self, sc: Scenario):
        x1, x2, x3 = sc.design.doses
        n1, n2, n3 = sc.n_per_point
        self.r = (x3 - x1) / (x2 - x1)
        self.k = n2 / n3
        self.mean, self.cov = bivariate_contrasts(sc)
        self.sd1 = np.sqrt(self.cov[0, 0])
        self.beta = self.cov[0, 1] / self.cov[0, 0]
        self.sd2 = np.sqrt(self.cov[1, 1] - self.cov[0, 1] * self.beta)

    def density(self, t: float) -> float:
        z = (t - self.mean[0]) / self.sd1
        return np.exp(-0.5 * z * z) / (_SQRT_2PI * self.sd1)

    def cdf(self, bound: float, t: float) -> float:
        """P(D2 < bound | D1 = t)."""
        m = self.mean[1] + self.beta * (t - self.mean[0])
        return special.ndtr((bound - m) / self.sd2)

    def transitions(self) -> list[float]:
        """Values of t where a region boundary ``c*t`` crosses the conditional
        mean of D2; the integrand steps there when sigma is small."""
        icpt = self.mean[1] - self.beta * self.mean[0]
        out = [self.mean[0]]
        for c in (self.r, 1.0, -self.k):
            if c != self.beta:
                out.append(icpt / (c - self.beta))
        return sorted(out)

    def integrate(self, f, lo: float, hi: float) -> tuple[float, float]:
        lo = max(lo, self.mean[0] - TAIL_SD * self.sd1)
        hi = min(hi, self.mean[0] + TAIL_SD * self.sd1)
        if not lo < hi:
            return 0.0, 0.0
        kinks = [p for p in self.transitions() if lo < p < hi]
        val, err = integrate.quad(
            lambda t: self.density(t) * f(t), lo, hi,
            epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT, points=kinks or None,
        )
        return max(val, 0.0), err

    def case2(self) -> float:
        mz = self.mean[1] - self.r * self.mean[0]
        vz = self.cov[1, 1] - 2 * self.r * self.cov[0, 1] + self.r**2 * self.cov[0, 0]
        return float(stats.norm.sf(0.0, loc=mz, scale=np.sqrt(vz)))


def _quad_probabilities(sc: Scenario) -> ShapeProbabilities:
    c = _Conditional(sc)
    r, k = c.r, c.k
    p_exists, e_exists = c.integrate(lambda t: c.cdf(r * t, t) - c.cdf(t, t), 0.0, np.inf)
    p_1a, e_1a = c.integrate(lambda t: c.cdf(t, t) - c.cdf(-k * t, t), 0.0, np.inf)
    p_1b_pos, e_pos = c.integrate(lambda t: c.cdf(-k * t, t), 0.0, np.inf)
    p_1b_neg, e_neg = c.integrate(lambda t: c.cdf(r * t, t), -np.inf, 0.0)
    return ShapeProbabilities(
        p_exists=p_exists,
        p_case1a=p_1a,
        p_case1b=p_1b_pos + p_1b_neg,
        p_case2=c.case2(),
        se_exists=e_exists,
        se_case1a=e_1a,
        se_case1b=e_pos + e_neg,
        se_case2=0.0,
        method=ProbMethod.QUAD,
    )


# ---------------------------------------------------------------------------
# Monte Carlo route
# ---------------------------------------------------------------------------

def _mc_chunk(sc: Scenario, seed: int, chunk: int, size: int) -> NDArray:
    mu = eta(np.asarray(sc.design.doses), sc.truth)
    sd = sc.noise.sigma / np.sqrt(np.asarray(sc.n_per_point, dtype=float))
    Y = mu + sd * stream(seed, PROB_STREAM, chunk).standard_normal((size, 3))
    codes = classify_many(sc.design.doses, sc.n_per_point, Y)
    return np.bincount(codes, minlength=len(ShapeCase))


def _mc_probabilities(sc: Scenario, draws: int, seed: int, threads: int | None) -> ShapeProbabilities:
    sizes = [MC_CHUNK] * (draws // MC_CHUNK)
    if draws % MC_CHUNK:
        sizes.append(draws % MC_CHUNK)
    with ThreadPoolExecutor(max_workers=threads or os.cpu_count()) as pool:
        parts = list(pool.map(lambda ci: _mc_chunk(sc, seed, ci, sizes[ci]), range(len(sizes))))
    counts = np.sum(parts, axis=0)

    p = {
        "exists": counts[CODE_OF[ShapeCase.INCREASING_CONCAVE]] / draws,
        "case1a": counts[CODE_OF[ShapeCase.CASE1A]] / draws,
        "case1b": counts[CODE_OF[ShapeCase.CASE1B]] / draws,
        "case2": (counts[CODE_OF[ShapeCase.CASE2A]] + counts[CODE_OF[ShapeCase.CASE2B]]) / draws,
    }
    se = {k: float(np.sqrt(v * (1.0 - v) / draws)) for k, v in p.items()}
    return ShapeProbabilities(
        p_exists=p["exists"], p_case1a=p["case1a"], p_case1b=p["case1b"], p_case2=p["case2"],
        se_exists=se["exists"], se_case1a=se["case1a"], se_case1b=se["case1b"], se_case2=se["case2"],
        method=ProbMethod.MC, draws=draws,
    )


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def shape_probabilities(
    sc: Scenario,
    method: ProbMethod | str = ProbMethod.MC,
    draws: int = 1_000_000,
    seed: int | None = None,
    threads: int | None = None,
) -> ShapeProbabilities:
    method = ProbMethod(method)
    if method is ProbMethod.QUAD:
        probs = _quad_probabilities(sc)
    else:
        if draws < 1:
            raise DomainError(f"draws must be positive, got {draws}")
        probs = _mc_probabilities(sc, draws, default_seed() if seed is None else seed, threads)
    logger.debug(
        "P(exists)=%.6g P(1a)=%.6g P(1b)=%.6g P(2)=%.6g [%s] at theta2=%g x2=%g",
        probs.p_exists, probs.p_case1a, probs.p_case1b, probs.p_case2, method.value,
        sc.truth.theta2, sc.design.x2,
    )
    return probs


def power_function(theta2: float, x2: float, base: Scenario, **kwargs) -> float:
    """Probability of a Case 1 sample when the true theta2 is *theta2* and the
    central dose is *x2* (quadrature unless ``method`` says otherwise)."""
    a = base.design.domain.a
    if not theta2 > -a:
        raise DomainError(f"theta2={theta2:g} must exceed -a={-a:g}")
    kwargs.setdefault("method", ProbMethod.QUAD)
    return shape_probabilities(base.with_(theta2=theta2, x2=x2), **kwargs).p_case1


def x2_for_alpha(theta2_g: float, alpha: float, base: Scenario, grid_points: int = 64) -> float:
    """Central dose at which the power under *theta2_g* equals *alpha*.

    Scans a log grid for the first sign change, then bisects.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    domain = base.design.domain
    grid = log_dose_grid(domain, grid_points)
    gap = np.array([power_function(theta2_g, x, base) - alpha for x in grid])

    hits = np.flatnonzero(gap == 0.0)
    if hits.size:
        return float(grid[hits[0]])
    flips = np.flatnonzero(np.sign(gap[:-1]) != np.sign(gap[1:]))
    if not flips.size:
        raise NoBracketError(alpha, (float(np.min(gap + alpha)), float(np.max(gap + alpha))))

    i = flips[0]
    root = optimize.bisect(
        lambda x: power_function(theta2_g, x, base) - alpha,
        grid[i], grid[i + 1], xtol=1e-10 * domain.width, rtol=4 * np.finfo(float).eps,
    )
    logger.debug("x2(theta2_g=%g, alpha=%g) = %.10g", theta2_g, alpha, root)
    return float(root)


def augmentation_point(theta2_g: float, theta2_1: float, alpha: float, base: Scenario) -> float:
    """Extra dose ``x2(theta2_1, alpha)`` recommended after a Case 1 sample.

    It is expected to lie left of ``x2(theta2_g, alpha)``; a violation is logged.
    """
    if theta2_1 > theta2_g:
        raise DomainError(f"theta2_1={theta2_1:g} must not exceed theta2_g={theta2_g:g}")
    point = x2_for_alpha(theta2_1, alpha, base)
    if theta2_1 < theta2_g:
        reference = x2_for_alpha(theta2_g, alpha, base)
        if not point < reference:
            logger.warning(
                "augmentation point %.6g is not left of x2(theta2_g, alpha) = %.6g", point, reference
            )
    return point


def sweep(cfg: SweepIn, threads: int | None = None) -> SweepOut:
    """Class probabilities against the central dose for each true theta2, and
    the central dose against alpha for each guessed theta2."""
    base = cfg.scenario
    domain = base.design.domain
    grid = cfg.x2_grid if cfg.x2_grid is not None else log_dose_grid(domain, cfg.grid_points).tolist()

    rows: list[SweepRow] = []
    for theta2 in cfg.theta2_list:
        for x2 in grid:
            p = shape_probabilities(
                base.with_(theta2=theta2, x2=x2), method=cfg.method,
                draws=cfg.draws, seed=cfg.seed, threads=threads,
            )
            rows.append(SweepRow(
                x2=x2, theta2_true=theta2,
                p_exists=p.p_exists, p_case1a=p.p_case1a, p_case1b=p.p_case1b, p_case2=p.p_case2,
                se_exists=p.se_exists, se_case1a=p.se_case1a, se_case1b=p.se_case1b, se_case2=p.se_case2,
            ))
        logger.info("sweep: theta2=%g done (%d points)", theta2, len(grid))

    alpha_rows: list[AlphaRow] = []
    for theta2_g in cfg.theta2_list:
        for alpha in cfg.alpha_list:
            try:
                x2 = x2_for_alpha(theta2_g, alpha, base, cfg.grid_points)
            except NoBracketError as e:
                logger.warning("theta2_g=%g: %s", theta2_g, e)
                x2 = None
            alpha_rows.append(AlphaRow(
                theta2_g=theta2_g, alpha=alpha, x2=x2, dopt_x2=d_optimal_x2(domain, theta2_g),
            ))
    return SweepOut(rows=rows, alpha_rows=alpha_rows)
