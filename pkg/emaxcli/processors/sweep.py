from __future__ import annotations
import logging

import pandas as pd

from ..core.prob import sweep
from ..models import SweepIn, SweepOut
from .abstract import AbstractProcessor

logger = logging.getLogger(__name__)


# ──────────────────────────────────────────────────────────────────────────────
# Probability curves against the central dose (and the inverse against alpha)
# ──────────────────────────────────────────────────────────────────────────────
class SweepProcessor(AbstractProcessor):
    input_model = SweepIn
    output_model = SweepOut

    def __init__(self, threads: int | None = None, **config):
        self.threads = threads
        self.config = SweepIn(**config)

    def build_input(self, observations: pd.DataFrame | None = None) -> SweepIn:
        return self.config

    def process(self, data: SweepIn) -> SweepOut:
        out = sweep(data, threads=self.threads)
        logger.info("sweep: %d probability rows, %d alpha rows", len(out.rows), len(out.alpha_rows))
        return out
