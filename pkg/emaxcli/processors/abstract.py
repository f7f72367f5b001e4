from __future__ import annotations
from abc import ABC, abstractmethod
import pandas as pd
from pydantic import BaseModel


class AbstractProcessor(ABC):
    """A pipeline step: validated input model in, result model out."""

    input_model: type[BaseModel]
    output_model: type[BaseModel]

    @abstractmethod
    def build_input(self, observations: pd.DataFrame | None = None) -> BaseModel:
        """Assemble ``input_model`` from the step's settings and any parsed observations."""

    @abstractmethod
    def process(self, data: BaseModel) -> BaseModel: ...
