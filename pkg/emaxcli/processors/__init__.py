"""Public for emaxcli.processors"""
from .abstract import AbstractProcessor
from .guideline import GuidelineProcessor, guideline_run
from .sweep import SweepProcessor
from .table1 import Table1Processor, run_table1

__all__ = [
    "AbstractProcessor",
    "GuidelineProcessor",
    "SweepProcessor",
    "Table1Processor",
    "guideline_run",
    "run_table1",
]
