from __future__ import annotations
import logging
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import pandas as pd

from ..core.firth import firth_solve
from ..core.mle import mle_fit
from ..core.model import d_optimal_x2
from ..core.prob import shape_probabilities
from ..models import (
    ExactMLE, FirthEstimate, Scenario, ShapeCase, SimConfig, SimRow, SufficientStats, Table1Out,
)
from ..parsers.scenario import sample_responses
from ..utils.rng import SIM_STREAM, stream
from .abstract import AbstractProcessor

logger = logging.getLogger(__name__)

# replicates handed to a worker at a time
BLOCK = 250
MLE_DEGENERATE = "mle_degenerate"


def _replicate(cfg: SimConfig, sc: Scenario, row: int, rep: int) -> tuple[str, str | None]:
    """(class, outcome) of one simulated data set.

    The outcome is None for an exact MLE, ``mle_degenerate`` when increasing
    means are numerically collinear, otherwise the Firth result.
    """
    groups = sample_responses(sc, stream(cfg.seed, SIM_STREAM, row, rep))
    stats = SufficientStats(
        x=sc.design.doses, n=sc.n_per_point, ybar=tuple(float(g.mean()) for g in groups)
    )
    fit = mle_fit(stats)
    if isinstance(fit, ExactMLE):
        return "exists", None
    if fit.shape.case is ShapeCase.INCREASING_CONCAVE:
        return "exists", MLE_DEGENERATE

    label = "case1" if fit.shape.case.is_case1 else "case2"
    firth = firth_solve(stats, sc.noise, opts=cfg.solver)
    return label, "success" if isinstance(firth, FirthEstimate) else firth.reason.value


def _replicate_block(cfg: SimConfig, sc: Scenario, row: int, reps: range) -> list[tuple[str, str | None]]:
    return [_replicate(cfg, sc, row, j) for j in reps]


def _pct(k: int, n: int) -> float | None:
    return None if n == 0 else 100.0 * k / n


# ──────────────────────────────────────────────────────────────────────────────
# Simulation study: class frequencies and Firth success per guessed theta2
# ──────────────────────────────────────────────────────────────────────────────
def run_table1(cfg: SimConfig, threads: int | None = None) -> Table1Out:
    """Replicates run in ``threads`` worker processes (inline for one).

    Every replicate draws from its own ``(seed, row, replicate)`` stream, so
    the rows do not depend on the worker count.
    """
    workers = threads or cfg.threads or os.cpu_count() or 1
    domain = cfg.scenario.design.domain
    blocks = [range(s, min(s + BLOCK, cfg.replicates)) for s in range(0, cfg.replicates, BLOCK)]
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    rows: list[SimRow] = []

    try:
        for i, theta2_g in enumerate(cfg.theta2_g_list):
            x2 = d_optimal_x2(domain, theta2_g)
            sc = cfg.scenario.with_(x2=x2)
            work = partial(_replicate_block, cfg, sc, i)
            parts = pool.map(work, blocks) if pool else map(work, blocks)
            outcomes = [o for part in parts for o in part]

            classes = Counter(c for c, _ in outcomes)
            firth = Counter((c, o) for c, o in outcomes if c != "exists")
            failures = Counter(o for c, o in outcomes if c != "exists" and o != "success")

            theory = shape_probabilities(
                sc, method=cfg.theoretical, seed=cfg.seed, threads=workers
            )
            n = cfg.replicates
            row = SimRow(
                theta2_g=theta2_g,
                x2=x2,
                replicates=n,
                n_exists=classes["exists"],
                n_case1=classes["case1"],
                n_case2=classes["case2"],
                n_firth_success_case1=firth[("case1", "success")],
                n_firth_success_case2=firth[("case2", "success")],
                failure_counts=dict(sorted(failures.items())),
                n_mle_degenerate=sum(o == MLE_DEGENERATE for _, o in outcomes),
                pct_mle_exists=100.0 * classes["exists"] / n,
                pct_case1=100.0 * classes["case1"] / n,
                pct_case2=100.0 * classes["case2"] / n,
                pct_firth_success_case1=_pct(firth[("case1", "success")], classes["case1"]),
                pct_firth_success_case2=_pct(firth[("case2", "success")], classes["case2"]),
                theory_exists=100.0 * theory.p_exists,
                theory_case1=100.0 * theory.p_case1,
                theory_case2=100.0 * theory.p_case2,
            )
            logger.info(
                "theta2_g=%g x2=%.6g: exists %.2f%% (%.2f) case1 %.2f%% (%.2f) case2 %.2f%% (%.2f)",
                theta2_g, x2, row.pct_mle_exists, row.theory_exists,
                row.pct_case1, row.theory_case1, row.pct_case2, row.theory_case2,
            )
            rows.append(row)
    finally:
        if pool:
            pool.shutdown()
    return Table1Out(config=cfg, rows=rows)


class Table1Processor(AbstractProcessor):
    input_model = SimConfig
    output_model = Table1Out

    def __init__(self, **config):
        self.config = SimConfig(**config)

    def build_input(self, observations: pd.DataFrame | None = None) -> SimConfig:
        return self.config

    def process(self, data: SimConfig) -> Table1Out:
        return run_table1(data)
