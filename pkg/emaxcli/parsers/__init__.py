"""Public façade for emaxcli.parsers"""
from .abstract import AbstractParser
from .dose_response import DoseResponseCsvParser
from .scenario import ScenarioSampler, sample_responses

__all__ = ["AbstractParser", "DoseResponseCsvParser", "ScenarioSampler", "sample_responses"]
