"""Public façade for emaxcli.output"""
from .abstract import AbstractOutputPipe
from .csv_table import CsvTableOutput
from .html_report import HtmlReportOutput
from .json_output import JsonOutput

__all__ = ["AbstractOutputPipe", "CsvTableOutput", "HtmlReportOutput", "JsonOutput"]
