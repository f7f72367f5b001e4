from __future__ import annotations
from pathlib import Path
from jinja2 import Environment, PackageLoader, select_autoescape
from pydantic import BaseModel

from ..models import GuidelineReport, SweepOut, Table1Out
from .abstract import AbstractOutputPipe
from .csv_table import table1_text


def _num(v, digits: int = 4) -> str:
    if v is None:
        return "NA"
    return f"{v:.{digits}g}" if isinstance(v, float) else str(v)


class HtmlReportOutput(AbstractOutputPipe):
    """Simple, responsive HTML report (Bootstrap 5): Table 1 runs, guideline
    reports and sweeps, one card per result."""

    def __init__(self, out_file: str = "report.html"):
        self.out_file = Path(out_file).expanduser().resolve()
        self.env = Environment(
            # point at the 'emaxcli.output' package and its 'templates' folder
            loader=PackageLoader("emaxcli.output", "templates"),
            autoescape=select_autoescape()
        )
        self.env.filters["num"] = _num

    def render(self, *results: BaseModel) -> str:
        tpl = self.env.get_template("report.html")
        html = tpl.render(
            tables=[(r, table1_text(r)) for r in results if isinstance(r, Table1Out)],
            guidelines=[r for r in results if isinstance(r, GuidelineReport)],
            sweeps=[r for r in results if isinstance(r, SweepOut)],
        )
        return self._write(html, self.out_file)
