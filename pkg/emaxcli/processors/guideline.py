from __future__ import annotations
import logging

import pandas as pd

from ..core.firth import firth_solve
from ..core.mle import mle_fit, pooled_sigma
from ..core.model import d_optimal_x2, theta2_for_dopt_x2
from ..core.prob import augmentation_point, x2_for_alpha
from ..core.shape import classify, reduce_frame
from ..errors import DomainError, InputError, NoBracketError
from ..models import (
    ExactMLE, GuidelineConfig, GuidelineIn, GuidelineReport, NoiseModel, Recommendation,
    Scenario, SufficientStats, ThreePointDesign,
)
from .abstract import AbstractProcessor

logger = logging.getLogger(__name__)


def _noise(cfg: GuidelineConfig, sigma_hat: float | None) -> NoiseModel:
    if cfg.noise is not None:
        return cfg.noise
    if sigma_hat is not None:
        return NoiseModel(sigma=sigma_hat)
    raise InputError("sigma is required: pass it explicitly or supply replicated responses")


def _guessed_theta2(stats: SufficientStats, cfg: GuidelineConfig) -> float:
    if cfg.theta2_g is not None:
        return cfg.theta2_g
    try:
        return theta2_for_dopt_x2(stats.domain, stats.x[1])
    except DomainError:
        raise InputError(
            f"x2={stats.x[1]:g} is not a D-optimal central point; pass theta2_g explicitly"
        ) from None


def recommend(stats: SufficientStats, cfg: GuidelineConfig, sigma_hat: float | None = None) -> Recommendation:
    """Where to add observations after a Case 1 sample.

    The default smaller guess halves ``theta2 + a``, so it stays above ``-a``.
    """
    domain = stats.domain
    theta2_g = _guessed_theta2(stats, cfg)
    theta2_1 = cfg.theta2_1 if cfg.theta2_1 is not None else 0.5 * (theta2_g + domain.a) - domain.a
    if not -domain.a < theta2_1 <= theta2_g:
        raise InputError(f"theta2_1={theta2_1:g} must lie in ({-domain.a:g}, theta2_g={theta2_g:g}]")

    rec = Recommendation(
        theta2_g=theta2_g,
        theta2_1=theta2_1,
        dopt_point=d_optimal_x2(domain, theta2_1),
        alpha=cfg.alpha,
    )
    rec = rec.model_copy(update={"contained": rec.dopt_point < stats.x[1]})
    if cfg.alpha is None:
        return rec
    if cfg.guess is None:
        return rec.model_copy(update={"note": "alpha point needs guessed theta0 and theta1 (guess)"})

    base = Scenario(
        truth=cfg.guess.model_copy(update={"theta2": theta2_g}),
        design=ThreePointDesign(domain=domain, x2=stats.x[1]),
        noise=_noise(cfg, sigma_hat),
        n_per_point=stats.n,
    )
    try:
        point = augmentation_point(theta2_g, theta2_1, cfg.alpha, base)
        reference = x2_for_alpha(theta2_g, cfg.alpha, base)
    except NoBracketError as e:
        logger.warning("no alpha-based augmentation point: %s", e)
        return rec.model_copy(update={"note": str(e)})
    return rec.model_copy(update={
        "alpha_point": point,
        "contained": rec.contained and point <= reference,
    })


# ──────────────────────────────────────────────────────────────────────────────
# Practical decision workflow: classify -> MLE | Firth | augmentation
# ──────────────────────────────────────────────────────────────────────────────
def guideline_run(
    stats: SufficientStats,
    cfg: GuidelineConfig = GuidelineConfig(),
    sigma_hat: float | None = None,
) -> GuidelineReport:
    shape, st = classify(stats)
    logger.info("data shape: %s", shape)
    mle_result = mle_fit(stats)
    if isinstance(mle_result, ExactMLE):
        return GuidelineReport(stats=stats, shape=shape, shape_stats=st, rationale="exact_mle", fit=mle_result)

    shape, limit = mle_result.shape, mle_result.limit
    # numerically collinear increasing means share the Case 2 line limit
    if not shape.case.is_case1:
        fit = firth_solve(stats, _noise(cfg, sigma_hat), init=cfg.guess, opts=cfg.solver)
        return GuidelineReport(
            stats=stats, shape=shape, shape_stats=st, rationale="firth_case2", fit=fit, limit=limit
        )

    return GuidelineReport(
        stats=stats,
        shape=shape,
        shape_stats=st,
        rationale="augment_case1",
        fit=mle_result,
        limit=limit,
        recommendation=recommend(stats, cfg, sigma_hat),
    )


def observed_sigma(observations: pd.DataFrame) -> float | None:
    """Pooled within-dose sigma, or None when the data cannot provide one."""
    try:
        return pooled_sigma(observations)
    except InputError as e:
        logger.info("%s", e)
        return None


class GuidelineProcessor(AbstractProcessor):
    input_model = GuidelineIn
    output_model = GuidelineReport

    def __init__(self, **config):
        self.config = GuidelineConfig(**config)

    def build_input(self, observations: pd.DataFrame | None = None) -> GuidelineIn:
        if observations is None or observations.empty:
            raise InputError("the guideline step needs observations from a parser")
        return GuidelineIn(stats=reduce_frame(observations), sigma_hat=observed_sigma(observations))

    def process(self, data: GuidelineIn) -> GuidelineReport:
        return guideline_run(data.stats, self.config, data.sigma_hat)
