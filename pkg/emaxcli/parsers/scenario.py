from __future__ import annotations
import numpy as np
import pandas as pd

from .abstract import AbstractParser
from ..core.model import eta
from ..models import Scenario, ScenarioSamplerConfig
from ..utils.rng import SAMPLER_STREAM, stream


def sample_responses(sc: Scenario, rng: np.random.Generator) -> list[np.ndarray]:
    """Responses per design dose, drawn dose by dose in ascending order."""
    mu = eta(np.asarray(sc.design.doses), sc.truth)
    return [m + sc.noise.sigma * rng.standard_normal(n) for m, n in zip(mu, sc.n_per_point)]


class ScenarioSampler(AbstractParser):
    """
    Simulated observations from a known scenario:
      n_i responses at each design dose from Normal(eta(x_i, theta), sigma^2).
    The stream key makes every sample replayable on its own.
    """
    config_model = ScenarioSamplerConfig

    def __init__(self, config: ScenarioSamplerConfig):
        super().__init__(config)

    def load(self) -> pd.DataFrame:
        sc = self.config.scenario
        groups = sample_responses(sc, stream(self.config.seed, SAMPLER_STREAM, *self.config.stream))
        return pd.DataFrame({
            "dose": np.repeat(sc.design.doses, sc.n_per_point),
            "response": np.concatenate(groups),
        })
