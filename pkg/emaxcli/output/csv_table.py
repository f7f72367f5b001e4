from __future__ import annotations
import logging
from pathlib import Path

import pandas as pd
from pydantic import BaseModel

from ..models import AlphaRow, FailureReason, SimRow, SweepOut, SweepRow, Table1Out
from .abstract import AbstractOutputPipe

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
NA = "NA"


def table1_frame(out: Table1Out) -> pd.DataFrame:
    records = []
    for row in out.rows:
        rec = row.model_dump(exclude={"failure_counts"})
        for reason in FailureReason:
            rec[f"firth_{reason.value}"] = row.failure_counts.get(reason.value, 0)
        records.append(rec)
    return pd.DataFrame.from_records(records, columns=_table1_columns())


def _table1_columns() -> list[str]:
    cols = [f for f in SimRow.model_fields if f != "failure_counts"]
    return cols + [f"firth_{r.value}" for r in FailureReason]


def _pct(v: float | None) -> str:
    return NA if v is None else f"{v:.2f}"


def table1_text(out: Table1Out) -> str:
    """Aligned text table: empirical percentages with theoretical values in brackets."""
    header = [
        "theta2_g", "MLE exists % (theory)", "Case 1 % (theory)",
        "Firth ok in Case 1 %", "Case 2 % (theory)", "Firth ok in Case 2 %",
    ]
    body = [
        [
            f"{r.theta2_g:g}",
            f"{r.pct_mle_exists:.2f} ({r.theory_exists:.2f})",
            f"{r.pct_case1:.2f} ({r.theory_case1:.2f})",
            _pct(r.pct_firth_success_case1),
            f"{r.pct_case2:.2f} ({r.theory_case2:.2f})",
            _pct(r.pct_firth_success_case2),
        ]
        for r in out.rows
    ]
    widths = [max(len(line[i]) for line in [header, *body]) for i in range(len(header))]
    fmt = lambda line: "  ".join(cell.rjust(w) for cell, w in zip(line, widths))
    rule = "-" * len(fmt(header))
    return "\n".join([fmt(header), rule, *map(fmt, body)]) + "\n"


def sweep_frames(out: SweepOut) -> tuple[pd.DataFrame, pd.DataFrame]:
    rows = pd.DataFrame([r.model_dump() for r in out.rows], columns=list(SweepRow.model_fields))
    alpha = pd.DataFrame([r.model_dump() for r in out.alpha_rows], columns=list(AlphaRow.model_fields))
    return rows, alpha


def to_csv(df: pd.DataFrame) -> str:
    return df.to_csv(index=False, float_format=FLOAT_FORMAT, na_rep=NA, lineterminator="\n")


class CsvTableOutput(AbstractOutputPipe):
    """
    Tabular deliverables:
      - Table1Out -> CSV (+ aligned text table next to it, `.txt`)
      - SweepOut  -> CSV of probability curves (+ `_alpha.csv` when alpha rows exist)
    Other results are ignored.
    """

    def __init__(self, out_file: str | None = "table1.csv", text: bool = True):
        self.out_file = Path(out_file).expanduser().resolve() if out_file else None
        self.text = text

    def render(self, *results: BaseModel) -> str:
        written = None
        for res in results:
            if isinstance(res, Table1Out):
                written = self._write(to_csv(table1_frame(res)), self.out_file)
                if self.text:
                    self._write(table1_text(res), self._sibling(".txt"))
            elif isinstance(res, SweepOut):
                rows, alpha = sweep_frames(res)
                written = self._write(to_csv(rows), self.out_file)
                if not alpha.empty:
                    self._write(to_csv(alpha), self._sibling("_alpha.csv", replace_suffix=True))
            else:
                logger.debug("CsvTableOutput skips %s", type(res).__name__)
        return written or ""

    def _sibling(self, suffix: str, replace_suffix: bool = False) -> Path | None:
        if self.out_file is None:
            return None
        if replace_suffix:
            return self.out_file.with_name(self.out_file.stem + suffix)
        return self.out_file.with_suffix(suffix)
