from __future__ import annotations
from abc import ABC, abstractmethod
from typing import Type
from pydantic import BaseModel
import pandas as pd

from ..core.shape import reduce_frame
from ..models import SufficientStats

RESPONSE_COLUMNS = ["dose", "response"]


class AbstractParser(ABC):
    """A source of dose-response observations."""

    config_model: Type[BaseModel]

    def __init__(self, config: BaseModel):
        self.config = config

    @abstractmethod
    def load(self) -> pd.DataFrame:
        """Return one row per observation with float columns ``dose`` and ``response``."""

    def stats(self) -> SufficientStats:
        return reduce_frame(self.load())
