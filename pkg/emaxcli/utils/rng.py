"""Seeded counter-based random streams.

Each stream is keyed by the run seed plus a tuple of integer coordinates
(row, replicate, chunk, ...), so any piece of a run can be replayed alone and
results do not depend on how work is split across threads.
"""
from __future__ import annotations

import os

import numpy as np

from ..errors import InputError

DEFAULT_SEED = 20240101
SEED_ENV = "EMAXCLI_SEED"

# leading stream key, one per consumer
SIM_STREAM = 0
PROB_STREAM = 1
SAMPLER_STREAM = 2


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or not raw.strip():
        return DEFAULT_SEED
    try:
        seed = int(raw)
    except ValueError:
        raise InputError(f"{SEED_ENV}={raw!r} is not an integer") from None
    if seed < 0:
        raise InputError(f"{SEED_ENV} must be non-negative, got {seed}")
    return seed


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox generator for ``(seed, *key)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *key])))
